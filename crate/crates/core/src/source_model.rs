//! Joint i.i.d. sources over ordered real alphabets.
//!
//! Sequences are stored as symbol indices into the alphabets of a
//! [`JointPmf`]; the real symbol values are only needed by the encoder.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Absolute tolerance on the total mass of a distribution.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Slack used when comparing rates against entropies.
pub const RATE_TOLERANCE: f64 = 1e-12;

/// Finite joint distribution `p(x, y)` over two ordered real alphabets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawJointPmf")]
pub struct JointPmf {
    x_alphabet: Vec<f64>,
    y_alphabet: Vec<f64>,
    /// `probs[a][b] = p(x_alphabet[a], y_alphabet[b])`.
    probs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawJointPmf {
    x_alphabet: Vec<f64>,
    y_alphabet: Vec<f64>,
    probs: Vec<Vec<f64>>,
}

impl TryFrom<RawJointPmf> for JointPmf {
    type Error = Error;

    fn try_from(raw: RawJointPmf) -> Result<Self> {
        JointPmf::new(raw.x_alphabet, raw.y_alphabet, raw.probs)
    }
}

pub(crate) fn check_alphabet(name: &str, alphabet: &[f64]) -> Result<()> {
    if alphabet.is_empty() {
        return Err(Error::InvalidDistribution(format!("{name} is empty")));
    }
    if alphabet.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "{name} has a non-finite value"
        )));
    }
    if alphabet.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidDistribution(format!(
            "{name} must be strictly increasing"
        )));
    }
    Ok(())
}

pub(crate) fn check_probs<'a>(probs: impl IntoIterator<Item = &'a f64>) -> Result<()> {
    let mut total = 0.0;
    for &p in probs {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "probability {p} is negative or not finite"
            )));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl JointPmf {
    pub fn new(x_alphabet: Vec<f64>, y_alphabet: Vec<f64>, probs: Vec<Vec<f64>>) -> Result<Self> {
        check_alphabet("x_alphabet", &x_alphabet)?;
        check_alphabet("y_alphabet", &y_alphabet)?;
        if probs.len() != x_alphabet.len() {
            return Err(Error::InvalidDistribution(format!(
                "probs has {} rows, x_alphabet has {} symbols",
                probs.len(),
                x_alphabet.len()
            )));
        }
        if let Some(row) = probs.iter().find(|r| r.len() != y_alphabet.len()) {
            return Err(Error::InvalidDistribution(format!(
                "probs row has {} entries, y_alphabet has {} symbols",
                row.len(),
                y_alphabet.len()
            )));
        }
        check_probs(probs.iter().flatten())?;
        Ok(Self {
            x_alphabet,
            y_alphabet,
            probs,
        })
    }

    /// Doubly symmetric binary source: `X` uniform on `{0,1}`, `Y = X` flipped
    /// with probability `crossover`.
    pub fn dsbs(crossover: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&crossover) {
            return Err(Error::InvalidParameter(format!(
                "crossover {crossover} outside [0, 1]"
            )));
        }
        let same = (1.0 - crossover) / 2.0;
        let diff = crossover / 2.0;
        Self::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            vec![vec![same, diff], vec![diff, same]],
        )
    }

    /// Uniform distribution over `{0..nx-1} x {0..ny-1}`.
    pub fn uniform(nx: usize, ny: usize) -> Result<Self> {
        let p = 1.0 / (nx * ny) as f64;
        Self::new(
            (0..nx).map(|v| v as f64).collect(),
            (0..ny).map(|v| v as f64).collect(),
            vec![vec![p; ny]; nx],
        )
    }

    /// Random pmf over integer alphabets `{0..nx-1} x {0..ny-1}`, cell masses
    /// drawn uniformly and normalised.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, nx: usize, ny: usize) -> Result<Self> {
        let mut probs: Vec<Vec<f64>> = (0..nx)
            .map(|_| (0..ny).map(|_| rng.random::<f64>() + 1e-3).collect())
            .collect();
        let total: f64 = probs.iter().flatten().sum();
        probs.iter_mut().flatten().for_each(|p| *p /= total);
        Self::new(
            (0..nx).map(|v| v as f64).collect(),
            (0..ny).map(|v| v as f64).collect(),
            probs,
        )
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn x_alphabet(&self) -> &[f64] {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &[f64] {
        &self.y_alphabet
    }

    pub fn x_card(&self) -> usize {
        self.x_alphabet.len()
    }

    pub fn y_card(&self) -> usize {
        self.y_alphabet.len()
    }

    pub fn prob(&self, a: usize, b: usize) -> f64 {
        self.probs[a][b]
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.probs.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.y_card())
            .map(|b| self.probs.iter().map(|row| row[b]).sum())
            .collect()
    }

    pub fn entropies(&self) -> Entropies {
        Entropies::from_table(&self.probs)
    }

    /// Strong-typicality threshold `eps / (|X||Y|)`.
    pub fn cell_threshold(&self, eps: f64) -> f64 {
        eps / (self.x_card() * self.y_card()) as f64
    }
}

/// Entropy in bits of a list of probabilities, with `0 log 0 = 0`.
pub fn entropy_bits<'a>(probs: impl IntoIterator<Item = &'a f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Entropies {
    pub h_x: f64,
    pub h_y: f64,
    pub h_xy: f64,
    pub h_x_given_y: f64,
    pub h_y_given_x: f64,
}

impl Entropies {
    fn from_table(table: &[Vec<f64>]) -> Self {
        let px: Vec<f64> = table.iter().map(|row| row.iter().sum()).collect();
        let ny = table.first().map_or(0, Vec::len);
        let py: Vec<f64> = (0..ny).map(|b| table.iter().map(|r| r[b]).sum()).collect();
        let h_x = entropy_bits(&px);
        let h_y = entropy_bits(&py);
        let h_xy = entropy_bits(table.iter().flatten());
        Self {
            h_x,
            h_y,
            h_xy,
            h_x_given_y: (h_xy - h_y).max(0.0),
            h_y_given_x: (h_xy - h_x).max(0.0),
        }
    }
}

/// A pair of equal-length symbol-index sequences.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequencePair {
    x: Vec<usize>,
    y: Vec<usize>,
    x_card: usize,
    y_card: usize,
}

impl SequencePair {
    pub fn new(x: Vec<usize>, y: Vec<usize>, x_card: usize, y_card: usize) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidSequence("block length must be at least 1".into()));
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "y length",
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.iter().any(|&a| a >= x_card) || y.iter().any(|&b| b >= y_card) {
            return Err(Error::InvalidSequence("symbol index outside alphabet".into()));
        }
        Ok(Self {
            x,
            y,
            x_card,
            y_card,
        })
    }

    /// Builds a pair over the alphabets of `pmf`.
    pub fn for_pmf(pmf: &JointPmf, x: Vec<usize>, y: Vec<usize>) -> Result<Self> {
        Self::new(x, y, pmf.x_card(), pmf.y_card())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[usize] {
        &self.x
    }

    pub fn y(&self) -> &[usize] {
        &self.y
    }

    pub fn x_card(&self) -> usize {
        self.x_card
    }

    pub fn y_card(&self) -> usize {
        self.y_card
    }
}

/// Joint type: `counts[a][b] = |{i : (x_i, y_i) = (a, b)}|`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointType {
    pub counts: Vec<Vec<usize>>,
    pub n: usize,
}

impl JointType {
    pub fn frequencies(&self) -> Vec<Vec<f64>> {
        let n = self.n as f64;
        self.counts
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / n).collect())
            .collect()
    }

    /// The type viewed as a pmf over the given alphabets.
    pub fn to_pmf(&self, x_alphabet: Vec<f64>, y_alphabet: Vec<f64>) -> Result<JointPmf> {
        JointPmf::new(x_alphabet, y_alphabet, self.frequencies())
    }
}

pub fn sample_pair(pmf: &JointPmf, n: usize, seed: u64) -> Result<SequencePair> {
    if n == 0 {
        return Err(Error::InvalidParameter("block length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pair_with(pmf, n, &mut rng)
}

pub fn sample_pair_with<R: Rng + ?Sized>(
    pmf: &JointPmf,
    n: usize,
    rng: &mut R,
) -> Result<SequencePair> {
    let ny = pmf.y_card();
    let cells = WeightedIndex::new(pmf.probs.iter().flatten())
        .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
    let (x, y) = (0..n)
        .map(|_| {
            let c = cells.sample(rng);
            (c / ny, c % ny)
        })
        .unzip();
    SequencePair::new(x, y, pmf.x_card(), ny)
}

pub fn joint_type(pair: &SequencePair) -> JointType {
    joint_type_of(&pair.x, &pair.y, pair.x_card, pair.y_card)
}

pub(crate) fn joint_type_of(x: &[usize], y: &[usize], x_card: usize, y_card: usize) -> JointType {
    let mut counts = vec![vec![0usize; y_card]; x_card];
    for (&a, &b) in x.iter().zip(y) {
        counts[a][b] += 1;
    }
    JointType { counts, n: x.len() }
}

/// One cell of the strong-typicality test: `|count/n - p| < threshold`.
///
/// Shared with the IP builder so both decide typicality with identical
/// floating-point expressions.
#[inline]
pub(crate) fn cell_is_typical(count: usize, n: usize, p: f64, threshold: f64) -> bool {
    (count as f64 / n as f64 - p).abs() < threshold
}

pub(crate) fn counts_are_typical(counts: &[Vec<usize>], n: usize, pmf: &JointPmf, eps: f64) -> bool {
    let thr = pmf.cell_threshold(eps);
    counts.iter().zip(&pmf.probs).all(|(crow, prow)| {
        crow.iter()
            .zip(prow)
            .all(|(&c, &p)| cell_is_typical(c, n, p, thr))
    })
}

/// Typicality of index sequences `x`, `y` without building a [`SequencePair`].
pub(crate) fn is_typical_indices(x: &[usize], y: &[usize], pmf: &JointPmf, eps: f64) -> bool {
    let t = joint_type_of(x, y, pmf.x_card(), pmf.y_card());
    counts_are_typical(&t.counts, t.n, pmf, eps)
}

fn check_pair_matches(pair: &SequencePair, pmf: &JointPmf) -> Result<()> {
    if pair.x_card != pmf.x_card() || pair.y_card != pmf.y_card() {
        return Err(Error::InvalidSequence(
            "pair alphabets do not match the pmf".into(),
        ));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(())
}

/// Strong joint typicality: every cell of the joint type lies strictly within
/// `eps / (|X||Y|)` of the pmf.
pub fn is_strongly_typical(pair: &SequencePair, pmf: &JointPmf, eps: f64) -> Result<bool> {
    check_pair_matches(pair, pmf)?;
    check_eps(eps)?;
    let t = joint_type(pair);
    Ok(counts_are_typical(&t.counts, t.n, pmf, eps))
}

/// Weak joint typicality: joint and both marginal log-probabilities lie
/// within `n * eps` of `-n H`. Zero-probability sequences are never typical.
pub fn is_weakly_typical(pair: &SequencePair, pmf: &JointPmf, eps: f64) -> Result<bool> {
    check_pair_matches(pair, pmf)?;
    check_eps(eps)?;
    let t = joint_type(pair);
    let px = pmf.marginal_x();
    let py = pmf.marginal_y();
    let h = pmf.entropies();
    let n = pair.n() as f64;

    let mut log_xy = 0.0;
    let mut cx = vec![0usize; pmf.x_card()];
    let mut cy = vec![0usize; pmf.y_card()];
    for (a, row) in t.counts.iter().enumerate() {
        for (b, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let p = pmf.probs[a][b];
            if p <= 0.0 {
                return Ok(false);
            }
            log_xy += c as f64 * p.log2();
            cx[a] += c;
            cy[b] += c;
        }
    }
    let log_marginal = |counts: &[usize], probs: &[f64]| -> f64 {
        counts
            .iter()
            .zip(probs)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &p)| c as f64 * p.log2())
            .sum()
    };
    let log_x = log_marginal(&cx, &px);
    let log_y = log_marginal(&cy, &py);

    Ok((log_xy + n * h.h_xy).abs() <= n * eps
        && (log_x + n * h.h_x).abs() <= n * eps
        && (log_y + n * h.h_y).abs() <= n * eps)
}

pub fn entropies(pmf: &JointPmf) -> Entropies {
    pmf.entropies()
}

/// Entropies of the joint type of `pair`.
pub fn empirical_entropies(pair: &SequencePair) -> Entropies {
    Entropies::from_table(&joint_type(pair).frequencies())
}

/// Slepian-Wolf region membership.
pub fn in_rate_region(r_x: f64, r_y: f64, pmf: &JointPmf) -> Result<bool> {
    if !(r_x >= 0.0 && r_y >= 0.0) {
        return Err(Error::InvalidParameter("rates must be non-negative".into()));
    }
    let h = pmf.entropies();
    Ok(r_x + RATE_TOLERANCE >= h.h_x_given_y
        && r_y + RATE_TOLERANCE >= h.h_y_given_x
        && r_x + r_y + RATE_TOLERANCE >= h.h_xy)
}
