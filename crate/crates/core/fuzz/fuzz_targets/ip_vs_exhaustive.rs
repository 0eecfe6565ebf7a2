#![no_main]

use libfuzzer_sys::fuzz_target;
use rswc::decoders::{typicality_decode, ExhaustiveLimits};
use rswc::encoder::{CoefficientDist, EncodingMatrix, Quantizer};
use rswc::ip::ip_decode;
use rswc::source_model::JointPmf;

// Bytes pick n, eps, the crossover, x, the matrix and the syndrome; the
// integer program must agree with exhaustive search.
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let n = 2 + usize::from(data[0] % 9);
    let eps = [0.3, 0.5, 1.0][usize::from(data[1] % 3)];
    let pmf = JointPmf::dsbs(0.05 + f64::from(data[2] % 40) / 100.0).unwrap();
    let mut rest = data[3..].iter().copied();
    let x: Vec<usize> = (0..n).map(|_| usize::from(rest.next().unwrap_or(0) & 1)).collect();
    let m = usize::from(rest.next().unwrap_or(0)) % (n + 1);
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| if rest.next().unwrap_or(0) & 1 == 0 { -1.0 } else { 1.0 }).collect())
        .collect();
    let d = EncodingMatrix::from_rows(rows, n, CoefficientDist::default()).unwrap();
    let q = Quantizer::new(n, eps).unwrap();
    let u: Vec<u64> = (0..m).map(|_| u64::from(rest.next().unwrap_or(0)) % q.levels).collect();
    let ip = ip_decode(&x, &u, &d, &pmf, eps, &q, None).unwrap();
    let ex = typicality_decode(&x, &u, &d, &pmf, eps, &q, &ExhaustiveLimits::default()).unwrap();
    assert_eq!(ip.outcome, ex.outcome);
});
