use std::cmp::Ordering;

use num_bigint::BigUint;

use super::joint::syndrome_candidates;
use super::{check_len, check_space, DecodeResult, ExhaustiveLimits, Outcome};
use crate::encoder::{EncodingMatrix, Quantizer};
use crate::source_model::{check_alphabet, joint_type_of};
use crate::Result;

/// `sum c log2 c` over the cell counts of a joint type. The empirical entropy
/// is `log2 n - sum / n`, so a larger sum means a lower entropy.
pub(crate) fn type_entropy_sum(counts: &[usize]) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 1)
        .map(|&c| {
            let c = c as f64;
            c * c.log2()
        })
        .sum()
}

fn power_product(counts: &[usize]) -> BigUint {
    counts
        .iter()
        .filter(|&&c| c > 1)
        .fold(BigUint::from(1u32), |acc, &c| acc * BigUint::from(c).pow(c as u32))
}

/// Orders two joint types of the same length by empirical entropy
/// (`Less` means `a` has the lower entropy). Near-ties are settled exactly
/// by comparing `prod c^c`.
pub(crate) fn compare_type_entropy(a: &[usize], b: &[usize]) -> Ordering {
    let (sa, sb) = (type_entropy_sum(a), type_entropy_sum(b));
    let scale = sa.abs().max(sb.abs()).max(1.0);
    if (sa - sb).abs() > 1e-9 * scale {
        // Larger sum, lower entropy.
        return sb.partial_cmp(&sa).unwrap_or(Ordering::Equal);
    }
    power_product(b).cmp(&power_product(a))
}

/// Minimum empirical entropy decoder.
///
/// Among all pairs in `X^n x Y^n` that reproduce both quantized syndromes,
/// returns the one whose joint type has the smallest entropy. The source
/// distribution is not needed. A tie at the minimum is reported as
/// `Multiple` with the first two minimizers in lexicographic order.
#[allow(clippy::too_many_arguments)]
pub fn min_entropy_decode(
    u1: &[u64],
    u2: &[u64],
    d1: &EncodingMatrix,
    d2: &EncodingMatrix,
    q: &Quantizer,
    x_alphabet: &[f64],
    y_alphabet: &[f64],
    limits: &ExhaustiveLimits,
) -> Result<DecodeResult<(Vec<usize>, Vec<usize>)>> {
    let n = d1.cols();
    check_len("second matrix columns", n, d2.cols())?;
    check_len("first syndrome length", d1.rows(), u1.len())?;
    check_len("second syndrome length", d2.rows(), u2.len())?;
    check_len("quantizer block length", n, q.n)?;
    check_alphabet("x_alphabet", x_alphabet)?;
    check_alphabet("y_alphabet", y_alphabet)?;
    check_space("minimum entropy decoder (x)", x_alphabet.len(), n, limits.med_bits)?;
    check_space("minimum entropy decoder (y)", y_alphabet.len(), n, limits.med_bits)?;

    let (xs, tried_x) = syndrome_candidates(x_alphabet, d1, u1, q);
    let (ys, tried_y) = syndrome_candidates(y_alphabet, d2, u2, q);
    let examined = tried_x + tried_y + (xs.len() * ys.len()) as u64;

    let (nx, ny) = (x_alphabet.len(), y_alphabet.len());
    let mut best: Option<(Vec<usize>, (usize, usize))> = None;
    let mut runner_up: Option<(usize, usize)> = None;
    for (i, x) in xs.iter().enumerate() {
        for (j, y) in ys.iter().enumerate() {
            let counts: Vec<usize> = joint_type_of(x, y, nx, ny).counts.concat();
            match &best {
                None => best = Some((counts, (i, j))),
                Some((bc, _)) => match compare_type_entropy(&counts, bc) {
                    Ordering::Less => {
                        best = Some((counts, (i, j)));
                        runner_up = None;
                    }
                    Ordering::Equal if runner_up.is_none() => runner_up = Some((i, j)),
                    _ => {}
                },
            }
        }
    }

    let pair = |(i, j): (usize, usize)| (xs[i].clone(), ys[j].clone());
    let outcome = match (best, runner_up) {
        (None, _) => Outcome::NoneFound,
        (Some((_, b)), None) => Outcome::Unique(pair(b)),
        (Some((_, b)), Some(r)) => Outcome::Multiple(pair(b), pair(r)),
    };
    Ok(DecodeResult {
        outcome,
        candidates_examined: examined,
    })
}

#[cfg(test)]
mod tests {
    use std::ops::ControlFlow;

    use super::*;
    use crate::encoder::{draw_matrix, encode_and_quantize, matches_syndrome, rows_for_rate, symbol_values, CoefficientDist};
    use crate::enumerate::for_each_vector;
    use crate::source_model::{empirical_entropies, sample_pair, JointPmf, SequencePair};
    use proptest::prelude::*;

    fn empirical_h(x: &[usize], y: &[usize], nx: usize, ny: usize) -> f64 {
        empirical_entropies(&SequencePair::new(x.to_vec(), y.to_vec(), nx, ny).unwrap()).h_xy
    }

    #[test]
    fn exact_comparison_agrees_with_entropy() {
        // n = 6 split as 3+3 vs 4+1+1: H = 1 vs H ~ 1.2516.
        assert_eq!(compare_type_entropy(&[3, 3, 0, 0], &[4, 1, 1, 0]), Ordering::Less);
        assert_eq!(compare_type_entropy(&[3, 3, 0, 0], &[0, 3, 0, 3]), Ordering::Equal);
        assert_eq!(compare_type_entropy(&[6, 0, 0, 0], &[5, 1, 0, 0]), Ordering::Less);
    }

    proptest! {
        #[test]
        fn comparison_is_consistent_with_float_entropy(
            parts in prop::collection::vec(0usize..12, 4),
            perm in prop::collection::vec(0usize..12, 4),
        ) {
            let n: usize = parts.iter().sum();
            prop_assume!(n > 0);
            // Rescale `perm` to the same total so both are types of length n.
            let total: usize = perm.iter().sum();
            let mut other: Vec<usize> = if total == 0 {
                vec![n, 0, 0, 0]
            } else {
                perm.iter().map(|&p| p * n / total).collect()
            };
            let short = n - other.iter().sum::<usize>();
            other[0] += short;
            let h = |c: &[usize]| -> f64 {
                c.iter().filter(|&&v| v > 0).map(|&v| {
                    let p = v as f64 / n as f64;
                    -p * p.log2()
                }).sum()
            };
            let (ha, hb) = (h(&parts), h(&other));
            let ord = compare_type_entropy(&parts, &other);
            if (ha - hb).abs() > 1e-9 {
                prop_assert_eq!(ord, ha.partial_cmp(&hb).unwrap());
            }
            prop_assert_eq!(ord.reverse(), compare_type_entropy(&other, &parts));
            prop_assert_eq!(compare_type_entropy(&parts, &parts), Ordering::Equal);
        }
    }

    #[test]
    fn matches_brute_force_minimum() {
        let pmf = JointPmf::dsbs(0.1).unwrap();
        let (n, eps) = (8, 0.5);
        let q = Quantizer::new(n, eps).unwrap();
        let dist = CoefficientDist::default();
        let m1 = rows_for_rate(n, eps, 0.9).unwrap();
        let m2 = rows_for_rate(n, eps, 0.6).unwrap();
        let (xa, ya) = (pmf.x_alphabet(), pmf.y_alphabet());
        for seed in 0..15 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let d1 = draw_matrix(m1, n, &dist, seed + 500).unwrap();
            let d2 = draw_matrix(m2, n, &dist, seed + 900).unwrap();
            let u1 = encode_and_quantize(&d1, &symbol_values(pair.x(), xa), &q).unwrap();
            let u2 = encode_and_quantize(&d2, &symbol_values(pair.y(), ya), &q).unwrap();

            let mut feasible = Vec::new();
            for_each_vector::<()>(2, n, |x| {
                for_each_vector::<()>(2, n, |y| {
                    if matches_syndrome(&d1, &symbol_values(x, xa), &u1, &q)
                        && matches_syndrome(&d2, &symbol_values(y, ya), &u2, &q)
                    {
                        feasible.push((x.to_vec(), y.to_vec(), empirical_h(x, y, 2, 2)));
                    }
                    ControlFlow::Continue(())
                });
                ControlFlow::Continue(())
            });
            let hmin = feasible.iter().map(|f| f.2).fold(f64::INFINITY, f64::min);
            let minimizers: Vec<_> = feasible.iter().filter(|f| f.2 <= hmin + 1e-9).collect();

            let r = min_entropy_decode(&u1, &u2, &d1, &d2, &q, xa, ya, &ExhaustiveLimits::default()).unwrap();
            // The true pair is always feasible.
            assert!(!feasible.is_empty());
            match minimizers.len() {
                1 => assert_eq!(r.outcome, Outcome::Unique((minimizers[0].0.clone(), minimizers[0].1.clone()))),
                _ => assert_eq!(
                    r.outcome,
                    Outcome::Multiple(
                        (minimizers[0].0.clone(), minimizers[0].1.clone()),
                        (minimizers[1].0.clone(), minimizers[1].1.clone()),
                    )
                ),
            }
        }
    }

    #[test]
    fn empty_codes_tie_on_constant_sequences() {
        let dist = CoefficientDist::default();
        let d = EncodingMatrix::from_rows(vec![], 5, dist).unwrap();
        let q = Quantizer::new(5, 0.5).unwrap();
        let r = min_entropy_decode(&[], &[], &d, &d, &q, &[0.0, 1.0], &[0.0, 1.0], &ExhaustiveLimits::default()).unwrap();
        assert_eq!(
            r.outcome,
            Outcome::Multiple((vec![0; 5], vec![0; 5]), (vec![0; 5], vec![1; 5]))
        );
    }

    #[test]
    fn impossible_syndrome_gives_none() {
        // Row sums stay within [-2, 2], so the top cell [3, 4] is unreachable.
        let rows = vec![vec![1.0, -1.0, 1.0, -1.0], vec![-1.0, 1.0, 1.0, -1.0]];
        let d = EncodingMatrix::from_rows(rows, 4, CoefficientDist::default()).unwrap();
        let q = Quantizer::new(4, 0.5).unwrap();
        let top = q.levels - 1;
        let r = min_entropy_decode(&[top, top], &[0, 0], &d, &d, &q, &[0.0, 1.0], &[0.0, 1.0], &ExhaustiveLimits::default())
            .unwrap();
        assert_eq!(r.outcome, Outcome::NoneFound);
    }

    #[test]
    fn refuses_large_spaces() {
        let d = draw_matrix(1, 11, &CoefficientDist::default(), 9).unwrap();
        let q = Quantizer::new(11, 0.5).unwrap();
        assert!(min_entropy_decode(&[0], &[0], &d, &d, &q, &[0.0, 1.0], &[0.0, 1.0], &ExhaustiveLimits::default()).is_err());
    }
}
