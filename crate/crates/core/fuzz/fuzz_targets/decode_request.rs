#![no_main]

use libfuzzer_sys::fuzz_target;
use rswc::decoders::ExhaustiveLimits;
use rswc::harness::DecodeRequest;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(mut req) = DecodeRequest::from_json(s) else { return };
    // Keep each run short.
    match &mut req {
        DecodeRequest::OneSided { limits, node_budget, .. } => {
            *limits = ExhaustiveLimits::default();
            *node_budget = Some(node_budget.unwrap_or(u64::MAX).min(20_000));
        }
        DecodeRequest::Joint { limits, .. } => *limits = ExhaustiveLimits::default(),
        DecodeRequest::Ip { node_budget, stop_after, .. } => {
            *node_budget = Some(node_budget.unwrap_or(u64::MAX).min(20_000));
            *stop_after = (*stop_after).min(16);
        }
    }
    let _ = req.run();
});
