use std::ops::ControlFlow;

use super::{check_len, check_space, check_symbols, DecodeResult, ExhaustiveLimits};
use crate::encoder::{matches_syndrome, EncodingMatrix, Quantizer};
use crate::enumerate::for_each_vector;
use crate::source_model::{is_typical_indices, JointPmf};
use crate::{Error, Result};

/// Exhaustive typicality decoder for the corner point where `x` is already
/// known at the decoder.
///
/// Enumerates `Y^n` in lexicographic order and keeps every `y` that is
/// strongly `eps`-typical with `x` and reproduces `u_hat`; stops once two are
/// found.
pub fn typicality_decode(
    x: &[usize],
    u_hat: &[u64],
    d: &EncodingMatrix,
    pmf: &JointPmf,
    eps: f64,
    q: &Quantizer,
    limits: &ExhaustiveLimits,
) -> Result<DecodeResult<Vec<usize>>> {
    let n = x.len();
    check_len("x length vs matrix columns", d.cols(), n)?;
    check_len("syndrome length vs matrix rows", d.rows(), u_hat.len())?;
    check_len("quantizer block length", n, q.n)?;
    check_symbols("x", x, pmf.x_card())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    check_space("typicality decoder", pmf.y_card(), n, limits.typicality_bits)?;

    let alphabet = pmf.y_alphabet();
    let mut values = vec![0.0; n];
    let mut found = Vec::with_capacity(2);
    let mut examined = 0u64;
    for_each_vector(pmf.y_card(), n, |y| {
        examined += 1;
        if !is_typical_indices(x, y, pmf, eps) {
            return ControlFlow::Continue(());
        }
        for (v, &s) in values.iter_mut().zip(y) {
            *v = alphabet[s];
        }
        if matches_syndrome(d, &values, u_hat, q) {
            found.push(y.to_vec());
            if found.len() == 2 {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    Ok(DecodeResult::from_solutions(found, examined))
}

/// Brute-force feasible set of the one-sided decoder (test oracle).
#[cfg(test)]
pub(crate) fn feasible_set(
    x: &[usize],
    u_hat: &[u64],
    d: &EncodingMatrix,
    pmf: &JointPmf,
    eps: f64,
    q: &Quantizer,
) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_vector::<()>(pmf.y_card(), x.len(), |y| {
        let vals = crate::encoder::symbol_values(y, pmf.y_alphabet());
        if is_typical_indices(x, y, pmf, eps) && matches_syndrome(d, &vals, u_hat, q) {
            out.push(y.to_vec());
        }
        ControlFlow::Continue(())
    });
    out
}
