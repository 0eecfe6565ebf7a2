//! Random real linear encoding followed by uniform quantization.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::source_model::check_probs;
use crate::{ceil_tol, Error, Result};

const MEAN_TOLERANCE: f64 = 1e-12;

/// Finite coefficient set with its sampling distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCoefficientDist")]
pub struct CoefficientDist {
    values: Vec<f64>,
    probs: Vec<f64>,
    /// Accept a non-zero mean. Experimental: the error analysis assumes a
    /// zero-mean distribution.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_nonzero_mean: bool,
}

#[derive(Deserialize)]
struct RawCoefficientDist {
    values: Vec<f64>,
    probs: Vec<f64>,
    #[serde(default)]
    allow_nonzero_mean: bool,
}

impl TryFrom<RawCoefficientDist> for CoefficientDist {
    type Error = Error;

    fn try_from(raw: RawCoefficientDist) -> Result<Self> {
        Self::with_override(raw.values, raw.probs, raw.allow_nonzero_mean)
    }
}

impl Default for CoefficientDist {
    /// `{-1, +1}` with equal probability.
    fn default() -> Self {
        Self {
            values: vec![-1.0, 1.0],
            probs: vec![0.5, 0.5],
            allow_nonzero_mean: false,
        }
    }
}

impl CoefficientDist {
    pub fn new(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Self::with_override(values, probs, false)
    }

    pub fn with_override(values: Vec<f64>, probs: Vec<f64>, allow_nonzero_mean: bool) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::InvalidDistribution(
                "coefficient values and probabilities differ in length".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite coefficient".into()));
        }
        for (i, a) in values.iter().enumerate() {
            if values[..i].contains(a) {
                return Err(Error::InvalidDistribution(format!(
                    "duplicate coefficient {a}"
                )));
            }
        }
        check_probs(&probs)?;
        if probs.iter().filter(|&&p| p > 0.0).count() < 2 {
            return Err(Error::InvalidDistribution(
                "at least two coefficients need non-zero probability".into(),
            ));
        }
        let dist = Self {
            values,
            probs,
            allow_nonzero_mean,
        };
        if !allow_nonzero_mean {
            if dist.mean().abs() > MEAN_TOLERANCE {
                return Err(Error::InvalidDistribution(format!(
                    "coefficient mean is {}, expected zero",
                    dist.mean()
                )));
            }
            // Zero mean with two supported values forces both signs.
            debug_assert!(dist.p_pm() > 0.0);
        }
        Ok(dist)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn allows_nonzero_mean(&self) -> bool {
        self.allow_nonzero_mean
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * (v - mu) * (v - mu))
            .sum()
    }

    /// `min(Pr{D > 0}, Pr{D < 0})`.
    pub fn p_pm(&self) -> f64 {
        let mass = |pred: fn(f64) -> bool| -> f64 {
            self.values
                .iter()
                .zip(&self.probs)
                .filter(|(v, _)| pred(**v))
                .map(|(_, p)| p)
                .sum()
        };
        mass(|v| v > 0.0).min(mass(|v| v < 0.0))
    }

    /// Largest coefficient magnitude.
    pub fn alpha(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest non-zero coefficient magnitude among supported values.
    pub fn min_nonzero_abs(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.probs)
            .filter(|(v, p)| **v != 0.0 && **p > 0.0)
            .map(|(v, _)| v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    fn is_integral(&self) -> bool {
        self.values.iter().all(|v| is_small_integer(*v))
    }
}

pub(crate) fn is_small_integer(v: f64) -> bool {
    v.fract() == 0.0 && v.abs() <= (1u64 << 31) as f64
}

/// `m x n` encoding matrix with entries drawn from a [`CoefficientDist`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEncodingMatrix", into = "RawEncodingMatrix")]
pub struct EncodingMatrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    entries: Vec<f64>,
    dist: CoefficientDist,
    seed: Option<u64>,
    int_entries: Option<Vec<i64>>,
}

/// Wire form: row-major nested array plus the coefficient distribution and
/// seed, so a matrix can be replayed bit-exactly.
#[derive(Serialize, Deserialize)]
struct RawEncodingMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<f64>>,
    dist: CoefficientDist,
    #[serde(default)]
    seed: Option<u64>,
}

impl TryFrom<RawEncodingMatrix> for EncodingMatrix {
    type Error = Error;

    fn try_from(raw: RawEncodingMatrix) -> Result<Self> {
        if raw.entries.len() != raw.rows {
            return Err(Error::DimensionMismatch {
                what: "matrix rows",
                expected: raw.rows,
                got: raw.entries.len(),
            });
        }
        let mut m = EncodingMatrix::from_rows(raw.entries, raw.cols, raw.dist)?;
        m.seed = raw.seed;
        Ok(m)
    }
}

impl From<EncodingMatrix> for RawEncodingMatrix {
    fn from(m: EncodingMatrix) -> Self {
        let entries = (0..m.rows).map(|i| m.row(i).to_vec()).collect();
        Self {
            rows: m.rows,
            cols: m.cols,
            entries,
            dist: m.dist,
            seed: m.seed,
        }
    }
}

impl EncodingMatrix {
    /// Builds a matrix from explicit rows; every entry must belong to the
    /// coefficient set of `dist`. Zero rows are allowed (an empty code).
    pub fn from_rows(rows: Vec<Vec<f64>>, cols: usize, dist: CoefficientDist) -> Result<Self> {
        if cols == 0 {
            return Err(Error::InvalidParameter("matrix needs at least one column".into()));
        }
        let m = rows.len();
        let mut entries = Vec::with_capacity(m * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    what: "matrix row length",
                    expected: cols,
                    got: row.len(),
                });
            }
            if let Some(bad) = row.iter().find(|v| !dist.values.contains(v)) {
                return Err(Error::InvalidParameter(format!(
                    "entry {bad} is not in the coefficient set"
                )));
            }
            entries.extend(row);
        }
        Ok(Self::assemble(m, cols, entries, dist, None))
    }

    fn assemble(rows: usize, cols: usize, entries: Vec<f64>, dist: CoefficientDist, seed: Option<u64>) -> Self {
        let int_entries = dist
            .is_integral()
            .then(|| entries.iter().map(|&v| v as i64).collect());
        Self {
            rows,
            cols,
            entries,
            dist,
            seed,
            int_entries,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn dist(&self) -> &CoefficientDist {
        &self.dist
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Integer view of the entries when every coefficient is a small integer.
    pub fn int_row(&self, i: usize) -> Option<&[i64]> {
        self.int_entries
            .as_deref()
            .map(|e| &e[i * self.cols..(i + 1) * self.cols])
    }

    pub fn is_integral(&self) -> bool {
        self.int_entries.is_some()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Draws an `m x n` matrix with i.i.d. entries from `dist`.
pub fn draw_matrix(m: usize, n: usize, dist: &CoefficientDist, seed: u64) -> Result<EncodingMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("matrix needs at least one column".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = WeightedIndex::new(&dist.probs).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let entries = (0..m * n).map(|_| dist.values[index.sample(&mut rng)]).collect();
    Ok(EncodingMatrix::assemble(m, n, entries, dist.clone(), Some(seed)))
}

/// Uniform quantizer on `(-n^(1/2+eps), n^(1/2+eps))` with step `2 n^-eps`.
///
/// Cell `k` is the half-open interval
/// `[-range_bound + k*step, -range_bound + (k+1)*step)`; values outside the
/// range clamp to the extreme cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantizer {
    pub n: usize,
    pub eps: f64,
    pub range_bound: f64,
    pub step: f64,
    pub levels: u64,
    pub bits_per_component: u32,
}

impl Quantizer {
    pub fn new(n: usize, eps: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("quantizer block length must be positive".into()));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        let nf = n as f64;
        let range_bound = nf.powf(0.5 + eps);
        let step = 2.0 * nf.powf(-eps);
        let levels = ceil_tol(nf.powf(0.5 + 2.0 * eps)).max(1.0);
        if levels > (1u64 << 52) as f64 {
            return Err(Error::InvalidParameter("quantizer has too many levels".into()));
        }
        let levels = levels as u64;
        let bits = ceil_tol((0.5 + 2.0 * eps) * nf.log2()).max(0.0) as u32;
        // ceil(a log n) bits always cover ceil(n^a) levels; the max only
        // absorbs rounding in the two floating evaluations.
        let needed = 64 - (levels - 1).leading_zeros();
        Ok(Self {
            n,
            eps,
            range_bound,
            step,
            levels,
            bits_per_component: bits.max(needed),
        })
    }

    #[inline]
    pub fn index(&self, u: f64) -> u64 {
        let k = ((u + self.range_bound) / self.step).floor();
        if k.is_nan() || k < 0.0 {
            0
        } else if k >= (self.levels - 1) as f64 {
            self.levels - 1
        } else {
            k as u64
        }
    }

    /// Nominal cell `[low, high)` of index `k` (before clamping).
    pub fn cell(&self, k: u64) -> (f64, f64) {
        let low = -self.range_bound + k as f64 * self.step;
        (low, low + self.step)
    }
}

/// Rate bookkeeping for one encoder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParams {
    pub n: usize,
    pub eps: f64,
    pub m: usize,
    pub bits_per_component: u32,
    pub total_bits: u64,
    pub rate_bits_per_symbol: f64,
    pub quantizer: Quantizer,
}

/// `m(R) = ceil(n (R + 3 eps) / (0.5 log2 n))`.
pub fn rows_for_rate(n: usize, eps: f64, rate: f64) -> Result<usize> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "block length {n} too small: the row count needs log2 n > 0"
        )));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("rate must be non-negative, got {rate}")));
    }
    let nf = n as f64;
    Ok(ceil_tol(nf * (rate + 3.0 * eps) / (0.5 * nf.log2())) as usize)
}

/// Code parameters for block length `n`, design parameter `eps` and target
/// conditional entropy `h_y_given_x` (bits).
pub fn code_params(n: usize, eps: f64, h_y_given_x: f64) -> Result<CodeParams> {
    let m = rows_for_rate(n, eps, h_y_given_x)?;
    code_params_with_rows(n, eps, m)
}

/// Code parameters with an explicit row count, for rate sweeps.
pub fn code_params_with_rows(n: usize, eps: f64, m: usize) -> Result<CodeParams> {
    let quantizer = Quantizer::new(n, eps)?;
    let total_bits = m as u64 * u64::from(quantizer.bits_per_component);
    Ok(CodeParams {
        n,
        eps,
        m,
        bits_per_component: quantizer.bits_per_component,
        total_bits,
        rate_bits_per_symbol: total_bits as f64 / n as f64,
        quantizer,
    })
}

fn check_encode_dims(d: &EncodingMatrix, len: usize) -> Result<()> {
    if d.cols != len {
        return Err(Error::DimensionMismatch {
            what: "source length vs matrix columns",
            expected: d.cols,
            got: len,
        });
    }
    Ok(())
}

/// `U = D y` over the reals. When the coefficients and `y` are all small
/// integers the products are accumulated in `i64` and converted once.
pub fn encode(d: &EncodingMatrix, y: &[f64]) -> Result<Vec<f64>> {
    check_encode_dims(d, y.len())?;
    if d.is_integral() && y.iter().all(|v| is_small_integer(*v)) {
        let yi: Vec<i64> = y.iter().map(|&v| v as i64).collect();
        return Ok(encode_exact(d, &yi)?.into_iter().map(|u| u as f64).collect());
    }
    Ok((0..d.rows)
        .map(|i| d.row(i).iter().zip(y).map(|(a, b)| a * b).sum())
        .collect())
}

/// Exact integer encoding; fails if the matrix is not integer-valued.
pub fn encode_exact(d: &EncodingMatrix, y: &[i64]) -> Result<Vec<i64>> {
    check_encode_dims(d, y.len())?;
    let rows = d.int_entries.as_ref().ok_or_else(|| {
        Error::InvalidParameter("matrix has non-integer coefficients".into())
    })?;
    Ok(rows
        .chunks(d.cols.max(1))
        .take(d.rows)
        .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
        .collect())
}

pub fn quantize(u: &[f64], q: &Quantizer) -> Vec<u64> {
    u.iter().map(|&v| q.index(v)).collect()
}

pub fn encode_and_quantize(d: &EncodingMatrix, y: &[f64], q: &Quantizer) -> Result<Vec<u64>> {
    Ok(quantize(&encode(d, y)?, q))
}

/// Maps symbol indices to their real values.
pub fn symbol_values(indices: &[usize], alphabet: &[f64]) -> Vec<f64> {
    indices.iter().map(|&i| alphabet[i]).collect()
}

/// Checks `quantize(D y) == u_hat` row by row, stopping at the first mismatch.
pub(crate) fn matches_syndrome(d: &EncodingMatrix, y: &[f64], u_hat: &[u64], q: &Quantizer) -> bool {
    (0..d.rows).all(|i| {
        let u: f64 = d.row(i).iter().zip(y).map(|(a, b)| a * b).sum();
        q.index(u) == u_hat[i]
    })
}
