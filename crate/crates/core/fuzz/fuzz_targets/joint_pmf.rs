#![no_main]

use libfuzzer_sys::fuzz_target;
use rswc::source_model::{sample_pair, JointPmf};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(pmf) = JointPmf::from_json(s) {
        let h = pmf.entropies();
        assert!(h.h_xy + 1e-9 >= h.h_x && h.h_y_given_x >= -1e-12);
        let _ = sample_pair(&pmf, 8, 0);
    }
});
