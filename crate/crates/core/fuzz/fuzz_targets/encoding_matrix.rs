#![no_main]

use libfuzzer_sys::fuzz_target;
use rswc::encoder::{encode_and_quantize, EncodingMatrix, Quantizer};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(d) = EncodingMatrix::from_json(s) else { return };
    if d.cols() < 2 || d.cols() > 4096 {
        return;
    }
    let q = Quantizer::new(d.cols(), 0.5).unwrap();
    let y = vec![1.0; d.cols()];
    let u = encode_and_quantize(&d, &y, &q).unwrap();
    assert!(u.iter().all(|&k| k < q.levels));
});
