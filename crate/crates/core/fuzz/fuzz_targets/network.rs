#![no_main]

use libfuzzer_sys::fuzz_target;
use rswc::nsn::{rate_region_check, MultiPmf, NsnTopology};

// Input: a topology and a pmf as JSON, separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let (t, p) = s.split_once('\0').unwrap_or((s, ""));
    let Ok(topo) = NsnTopology::from_json(t) else { return };
    let _ = topo.validate();
    if let Ok(pmf) = MultiPmf::from_json(p) {
        let _ = rate_region_check(&topo, &pmf);
    }
});
