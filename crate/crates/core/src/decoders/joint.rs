use std::ops::ControlFlow;

use super::{check_len, check_space, DecodeResult, ExhaustiveLimits};
use crate::encoder::{matches_syndrome, EncodingMatrix, Quantizer};
use crate::enumerate::for_each_vector;
use crate::source_model::{is_typical_indices, JointPmf};
use crate::{Error, Result};

/// All vectors over `alphabet` of length `d.cols()` whose quantized encoding
/// equals `u_hat`, in lexicographic order. Also returns how many were tried.
pub(crate) fn syndrome_candidates(
    alphabet: &[f64],
    d: &EncodingMatrix,
    u_hat: &[u64],
    q: &Quantizer,
) -> (Vec<Vec<usize>>, u64) {
    let n = d.cols();
    let mut values = vec![0.0; n];
    let mut out = Vec::new();
    let mut tried = 0u64;
    for_each_vector::<()>(alphabet.len(), n, |v| {
        tried += 1;
        for (slot, &s) in values.iter_mut().zip(v) {
            *slot = alphabet[s];
        }
        if matches_syndrome(d, &values, u_hat, q) {
            out.push(v.to_vec());
        }
        ControlFlow::Continue(())
    });
    (out, tried)
}

/// Joint typicality decoder for two separately encoded sources.
///
/// Searches `X^n x Y^n` for pairs that reproduce both quantized syndromes
/// and are jointly strongly `eps`-typical. Pairs are visited in
/// lexicographic order of `(x, y)`; the search stops at the second hit.
#[allow(clippy::too_many_arguments)]
pub fn joint_decode(
    u1: &[u64],
    u2: &[u64],
    d1: &EncodingMatrix,
    d2: &EncodingMatrix,
    pmf: &JointPmf,
    eps: f64,
    q: &Quantizer,
    limits: &ExhaustiveLimits,
) -> Result<DecodeResult<(Vec<usize>, Vec<usize>)>> {
    let n = d1.cols();
    check_len("second matrix columns", n, d2.cols())?;
    check_len("first syndrome length", d1.rows(), u1.len())?;
    check_len("second syndrome length", d2.rows(), u2.len())?;
    check_len("quantizer block length", n, q.n)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    check_space("joint decoder (x)", pmf.x_card(), n, limits.joint_bits)?;
    check_space("joint decoder (y)", pmf.y_card(), n, limits.joint_bits)?;

    let (xs, tried_x) = syndrome_candidates(pmf.x_alphabet(), d1, u1, q);
    let (ys, tried_y) = syndrome_candidates(pmf.y_alphabet(), d2, u2, q);
    let mut examined = tried_x + tried_y;
    let mut found = Vec::with_capacity(2);
    'outer: for x in &xs {
        for y in &ys {
            examined += 1;
            if is_typical_indices(x, y, pmf, eps) {
                found.push((x.clone(), y.clone()));
                if found.len() == 2 {
                    break 'outer;
                }
            }
        }
    }
    Ok(DecodeResult::from_solutions(found, examined))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{typicality_decode, Outcome};
    use crate::encoder::{draw_matrix, encode_and_quantize, rows_for_rate, symbol_values, CoefficientDist};
    use crate::source_model::sample_pair;

    /// Brute force over every pair, no pre-filtering.
    fn brute_force(
        u1: &[u64],
        u2: &[u64],
        d1: &EncodingMatrix,
        d2: &EncodingMatrix,
        pmf: &JointPmf,
        eps: f64,
        q: &Quantizer,
    ) -> Vec<(Vec<usize>, Vec<usize>)> {
        let n = d1.cols();
        let mut out = Vec::new();
        for_each_vector::<()>(pmf.x_card(), n, |x| {
            for_each_vector::<()>(pmf.y_card(), n, |y| {
                let xv = symbol_values(x, pmf.x_alphabet());
                let yv = symbol_values(y, pmf.y_alphabet());
                if is_typical_indices(x, y, pmf, eps)
                    && matches_syndrome(d1, &xv, u1, q)
                    && matches_syndrome(d2, &yv, u2, q)
                {
                    out.push((x.to_vec(), y.to_vec()));
                }
                ControlFlow::Continue(())
            });
            ControlFlow::Continue(())
        });
        out
    }

    #[test]
    fn agrees_with_full_pair_enumeration() {
        let pmf = JointPmf::dsbs(0.11).unwrap();
        let (n, eps) = (8, 0.3);
        let q = Quantizer::new(n, eps).unwrap();
        let dist = CoefficientDist::default();
        let m1 = rows_for_rate(n, eps, 1.0).unwrap();
        let m2 = rows_for_rate(n, eps, 0.5).unwrap();
        let mut unique = 0;
        for seed in 0..20 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let d1 = draw_matrix(m1, n, &dist, seed + 1000).unwrap();
            let d2 = draw_matrix(m2, n, &dist, seed + 2000).unwrap();
            let u1 = encode_and_quantize(&d1, &symbol_values(pair.x(), pmf.x_alphabet()), &q).unwrap();
            let u2 = encode_and_quantize(&d2, &symbol_values(pair.y(), pmf.y_alphabet()), &q).unwrap();
            let oracle = brute_force(&u1, &u2, &d1, &d2, &pmf, eps, &q);
            let r = joint_decode(&u1, &u2, &d1, &d2, &pmf, eps, &q, &ExhaustiveLimits::default()).unwrap();
            match oracle.len() {
                0 => assert_eq!(r.outcome, Outcome::NoneFound),
                1 => {
                    assert_eq!(r.outcome, Outcome::Unique(oracle[0].clone()));
                    unique += 1;
                }
                _ => assert_eq!(r.outcome, Outcome::Multiple(oracle[0].clone(), oracle[1].clone())),
            }
        }
        assert!(unique > 0);
    }

    #[test]
    fn empty_codes_are_ambiguous() {
        let pmf = JointPmf::dsbs(0.11).unwrap();
        let dist = CoefficientDist::default();
        let d = EncodingMatrix::from_rows(vec![], 8, dist).unwrap();
        let q = Quantizer::new(8, 0.5).unwrap();
        let r = joint_decode(&[], &[], &d, &d, &pmf, 0.5, &q, &ExhaustiveLimits::default()).unwrap();
        assert!(matches!(r.outcome, Outcome::Multiple(..)));
    }

    #[test]
    fn deterministic_source_decodes_uniquely() {
        // Y = X: for each typical x there is exactly one jointly typical y.
        let pmf = JointPmf::dsbs(0.0).unwrap();
        let (n, eps) = (8, 0.5);
        let q = Quantizer::new(n, eps).unwrap();
        let dist = CoefficientDist::default();
        let m1 = rows_for_rate(n, eps, 1.0).unwrap();
        let m2 = rows_for_rate(n, eps, 0.05).unwrap();
        for seed in 0..30 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let d1 = draw_matrix(m1, n, &dist, seed * 2 + 1).unwrap();
            let d2 = draw_matrix(m2, n, &dist, seed * 2 + 2).unwrap();
            let u1 = encode_and_quantize(&d1, &symbol_values(pair.x(), pmf.x_alphabet()), &q).unwrap();
            let u2 = encode_and_quantize(&d2, &symbol_values(pair.y(), pmf.y_alphabet()), &q).unwrap();
            let oracle = brute_force(&u1, &u2, &d1, &d2, &pmf, eps, &q);
            let r = joint_decode(&u1, &u2, &d1, &d2, &pmf, eps, &q, &ExhaustiveLimits::default()).unwrap();
            if crate::source_model::is_typical_indices(pair.x(), pair.y(), &pmf, eps) {
                assert_eq!(oracle.len(), 1, "seed {seed}");
                assert_eq!(r.outcome, Outcome::Unique((pair.x().to_vec(), pair.y().to_vec())));
            }
        }
    }

    #[test]
    fn pinned_x_reduces_to_one_sided_decoder() {
        // An identity first encoder with step below 1 reveals x exactly.
        let pmf = JointPmf::dsbs(0.2).unwrap();
        let (n, eps) = (8, 0.5);
        let q = Quantizer::new(n, eps).unwrap();
        assert!(q.step < 1.0);
        let ones = CoefficientDist::with_override(vec![0.0, 1.0], vec![0.5, 0.5], true).unwrap();
        let eye: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let d1 = EncodingMatrix::from_rows(eye, n, ones).unwrap();
        let m2 = rows_for_rate(n, eps, pmf.entropies().h_y_given_x).unwrap();
        for seed in 0..40 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let d2 = draw_matrix(m2, n, &CoefficientDist::default(), seed + 77).unwrap();
            let u1 = encode_and_quantize(&d1, &symbol_values(pair.x(), pmf.x_alphabet()), &q).unwrap();
            let u2 = encode_and_quantize(&d2, &symbol_values(pair.y(), pmf.y_alphabet()), &q).unwrap();
            let joint = joint_decode(&u1, &u2, &d1, &d2, &pmf, eps, &q, &ExhaustiveLimits::default()).unwrap();
            let one = typicality_decode(pair.x(), &u2, &d2, &pmf, eps, &q, &ExhaustiveLimits::default()).unwrap();
            assert_eq!(joint.outcome.kind(), one.outcome.kind());
            assert_eq!(
                joint.outcome.map(|(_, y)| y),
                one.outcome,
            );
        }
    }
}
