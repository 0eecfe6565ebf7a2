#![no_main]

use libfuzzer_sys::fuzz_target;
use rswc::ip::{solve_count, IpInstance};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(ip) = IpInstance::from_json(s) else { return };
    if let Ok(r) = solve_count(&ip, 2, Some(20_000)) {
        for w in &r.witnesses {
            assert!(ip.is_feasible(w));
        }
    }
});
