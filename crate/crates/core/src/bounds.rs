//! Analytic error bounds and their Monte Carlo checks.
//!
//! Bound functions return `log2` of the bound so that tiny values do not
//! underflow; [`linear`] converts back. Constants the analysis leaves
//! unspecified (the collision constant `c`, `p_tilde`) are explicit fields
//! of [`BoundParams`].

use std::f64::consts::LOG2_E;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{rows_for_rate, CoefficientDist, Quantizer};
use crate::seeds::sub_seed;
use crate::source_model::{is_typical_indices, sample_pair_with, JointPmf};
use crate::stats::wilson99;
use crate::{Error, Result};

/// Margin added to `1 - p_pm` for the default `p_tilde`.
pub const DEFAULT_P_TILDE_MARGIN: f64 = 0.05;
pub const DEFAULT_C_COLL: f64 = 1.0;

/// `2^log2`, or 0 when that is below `1e-300`.
pub fn linear(log2: f64) -> f64 {
    let v = log2.exp2();
    if v < 1e-300 {
        0.0
    } else {
        v
    }
}

/// Constants feeding the bound functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub n: usize,
    pub eps: f64,
    pub x_card: usize,
    pub y_card: usize,
    /// Largest `|d|` over the coefficient set.
    pub alpha: f64,
    /// Variance of the coefficient distribution.
    pub sigma2: f64,
    /// Smallest gap between two `Y` symbols.
    pub b_y: f64,
    /// Smallest nonzero `|d|`.
    pub min_abs_d: f64,
    pub p_pm: f64,
    pub p_tilde: f64,
    pub c_coll: f64,
    pub delta: f64,
}

impl BoundParams {
    /// Parameters for a concrete setup, with default `p_tilde` and `c_coll`
    /// and `delta` at its cap `eps / (2 (H(Y|X) + 3 eps))`.
    pub fn for_setup(n: usize, eps: f64, pmf: &JointPmf, dist: &CoefficientDist) -> Result<Self> {
        if n < 2 || !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter("need n >= 2 and eps > 0".into()));
        }
        let ya = pmf.y_alphabet();
        let b_y = ya.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let p_pm = dist.p_pm();
        let params = Self {
            n,
            eps,
            x_card: pmf.x_card(),
            y_card: pmf.y_card(),
            alpha: dist.alpha(),
            sigma2: dist.variance(),
            b_y,
            min_abs_d: dist.min_nonzero_abs(),
            p_pm,
            p_tilde: (1.0 - p_pm + DEFAULT_P_TILDE_MARGIN).min(0.999),
            c_coll: DEFAULT_C_COLL,
            delta: delta_cap(pmf.entropies().h_y_given_x, eps),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_tilde > 1.0 - self.p_pm && self.p_tilde < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_tilde {} must lie in (1 - p_pm, 1) = ({}, 1)",
                self.p_tilde,
                1.0 - self.p_pm
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta {} outside (0, 1)", self.delta)));
        }
        if !(self.c_coll > 0.0) {
            return Err(Error::InvalidParameter("c_coll must be positive".into()));
        }
        Ok(())
    }

    /// Whether the quantizer step is below `b_y * min|d|`, where the
    /// collision bound `1 - p_pm` holds with no unknown constant.
    pub fn constant_free_regime(&self) -> bool {
        step(self.n, self.eps) < self.b_y * self.min_abs_d
    }
}

/// Largest admissible `delta` for `phi1`: `eps / (2 (h + 3 eps))`.
pub fn delta_cap(h: f64, eps: f64) -> f64 {
    eps / (2.0 * (h + 3.0 * eps))
}

fn step(n: usize, eps: f64) -> f64 {
    2.0 * (n as f64).powf(-eps)
}

/// `log2` of `2 (n+1)^|W| exp(-A^2 / (2 n a^2))`, the tail bound on
/// `|W_1 + ... + W_n| > A` for i.i.d. zero-mean `W_i` with `|W_i| <= a`.
pub fn lemma1_bound(n: usize, support_size: usize, a: f64, big_a: f64) -> f64 {
    let n_f = n as f64;
    1.0 + support_size as f64 * (n_f + 1.0).log2() - big_a * big_a / (2.0 * n_f * a * a) * LOG2_E
}

/// `log2` of the union bound on `Pr{|D_i y| > n^(1/2+eps)}` before the final
/// simplification: a sum over the nonzero symbols `y` present in the
/// sequence of `2 (|S_y|+1)^|D| exp(-n^(1+2eps) / (2 |S_y| alpha^2 |Y|^2 y^2))`.
pub fn lemma2_bound(y_values: &[f64], y_card: usize, eps: f64, dist: &CoefficientDist) -> f64 {
    let n = y_values.len() as f64;
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &v in y_values.iter().filter(|v| **v != 0.0) {
        match groups.iter_mut().find(|g| g.0 == v) {
            Some(g) => g.1 += 1,
            None => groups.push((v, 1)),
        }
    }
    let alpha = dist.alpha();
    let d = dist.values().len() as f64;
    let terms: Vec<f64> = groups
        .iter()
        .map(|&(v, s)| {
            let s = s as f64;
            let expo = n.powf(1.0 + 2.0 * eps) / (2.0 * s * alpha * alpha * (y_card * y_card) as f64 * v * v);
            1.0 + d * (s + 1.0).log2() - expo * LOG2_E
        })
        .collect();
    log2_sum(&terms)
}

/// `log2` of `(n+1)^(|X||Y|) exp(-n eps^2 / (2 |X|^2 |Y|^2))`.
pub fn p1_bound(n: usize, eps: f64, x_card: usize, y_card: usize) -> f64 {
    let k = (x_card * y_card) as f64;
    let n_f = n as f64;
    k * (n_f + 1.0).log2() - n_f * eps * eps / (2.0 * k * k) * LOG2_E
}

/// `min(p_tilde, c / sqrt(t))` (linear scale).
pub fn collision_cap(t: usize, p_tilde: f64, c_coll: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    Ok(p_tilde.min(c_coll / (t as f64).sqrt()))
}

/// `1 - p_pm`, valid whenever the quantizer step is below `b_y * min|d|`.
pub fn constant_free_collision_bound(p_pm: f64) -> f64 {
    1.0 - p_pm
}

/// `m(R) = ceil(n (R + 3 eps) / (0.5 log2 n))`.
pub fn m_of_rate(n: usize, eps: f64, rate: f64) -> Result<usize> {
    rows_for_rate(n, eps, rate)
}

/// `log2( n 2^(n (h + 2 eps)) (c / sqrt(n^(1-delta)))^m(R) )`.
pub fn phi1(h: f64, rate: f64, delta: f64, n: usize, eps: f64, c: f64) -> Result<f64> {
    let m = m_of_rate(n, eps, rate)? as f64;
    let n_f = n as f64;
    Ok(n_f.log2() + n_f * (h + 2.0 * eps) + m * (c.log2() - 0.5 * (1.0 - delta) * n_f.log2()))
}

/// `log2( n (L n)^(n^(1-delta)) p_tilde^m(R) )`.
pub fn phi2(l: f64, rate: f64, delta: f64, n: usize, eps: f64, p_tilde: f64) -> Result<f64> {
    let m = m_of_rate(n, eps, rate)? as f64;
    let n_f = n as f64;
    Ok(n_f.log2() + n_f.powf(1.0 - delta) * (l * n_f).log2() + m * p_tilde.log2())
}

/// Smallest `n` in `grid` from which `phi1(h, R, delta) <= -n ((R - h) + eps/4)`
/// holds at every later grid point, or `None` if it fails at the last one.
pub fn phi1_threshold(h: f64, rate: f64, delta: f64, eps: f64, c: f64, grid: &[usize]) -> Result<Option<usize>> {
    let mut threshold = None;
    for &n in grid {
        let target = -(n as f64) * ((rate - h) + eps / 4.0);
        if phi1(h, rate, delta, n, eps, c)? <= target {
            threshold.get_or_insert(n);
        } else {
            threshold = None;
        }
    }
    Ok(threshold)
}

/// `log2(sum 2^t)` computed stably.
fn log2_sum(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp2()).sum::<f64>().log2()
}

/// Count of events in a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub hits: u64,
    pub samples: u64,
}

impl Tally {
    pub fn freq(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.hits as f64 / self.samples as f64
        }
    }

    pub fn ucb99(&self) -> f64 {
        wilson99(self.hits, self.samples).upper
    }

    pub fn lcb99(&self) -> f64 {
        wilson99(self.hits, self.samples).lower
    }
}

const CHUNK: u64 = 4096;

/// Runs `samples` Bernoulli trials in fixed-size chunks, chunk `k` seeded by
/// `sub_seed(seed, label, k)`, so the tally is independent of thread count.
fn monte_carlo<F>(samples: u64, seed: u64, label: &str, trial: F) -> Tally
where
    F: Fn(&mut ChaCha8Rng) -> bool + Sync,
{
    let chunks = samples.div_ceil(CHUNK);
    let hits = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, label, k));
            let len = CHUNK.min(samples - k * CHUNK);
            (0..len).filter(|_| trial(&mut rng)).count() as u64
        })
        .sum();
    Tally { hits, samples }
}

/// Frequency of `(X, Y)` blocks that are not strongly `eps`-typical.
pub fn empirical_atypicality(pmf: &JointPmf, n: usize, eps: f64, samples: u64, seed: u64) -> Result<Tally> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    Ok(monte_carlo(samples, seed, "atypical", |rng| {
        let pair = sample_pair_with(pmf, n, rng).expect("valid pmf and n");
        !is_typical_indices(pair.x(), pair.y(), pmf, eps)
    }))
}

/// Frequency of `|W_1 + ... + W_n| > A` for i.i.d. uniform `W_i` in `{-1, +1}`.
pub fn empirical_pm1_tail(n: usize, big_a: f64, samples: u64, seed: u64) -> Tally {
    monte_carlo(samples, seed, "pm1-tail", |rng| {
        let mut s: i64 = 0;
        let mut left = n;
        while left > 0 {
            let take = left.min(64);
            let bits: u64 = rng.random();
            let ones = i64::from((bits & mask(take)).count_ones());
            s += 2 * ones - take as i64;
            left -= take;
        }
        (s as f64).abs() > big_a
    })
}

fn mask(k: usize) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

fn coefficient_sampler(dist: &CoefficientDist) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(dist.probs().iter().copied()).map_err(|e| Error::InvalidDistribution(e.to_string()))
}

/// Frequency of `|D_i (y - y')| < step` when `y - y'` equals `diff` on `t`
/// positions and zero elsewhere (only those `t` coefficients matter).
pub fn empirical_collision(
    t: usize,
    diff: f64,
    step: f64,
    dist: &CoefficientDist,
    samples: u64,
    seed: u64,
) -> Result<Tally> {
    let idx = coefficient_sampler(dist)?;
    let values = dist.values();
    Ok(monte_carlo(samples, seed, "collision", |rng| {
        let s: f64 = (0..t).map(|_| values[idx.sample(rng)] * diff).sum();
        s.abs() < step
    }))
}

/// Frequency of `|D_i y| > n^(1/2+eps)` for a fixed `y` over random rows.
pub fn empirical_lemma2_tail(y_values: &[f64], eps: f64, dist: &CoefficientDist, samples: u64, seed: u64) -> Result<Tally> {
    let idx = coefficient_sampler(dist)?;
    let values = dist.values();
    let range = Quantizer::new(y_values.len(), eps)?.range_bound;
    Ok(monte_carlo(samples, seed, "lemma2", |rng| {
        let s: f64 = y_values.iter().map(|&y| values[idx.sample(rng)] * y).sum();
        s.abs() > range
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVerdict {
    /// Empirical UCB at or below the bound.
    Holds,
    /// Empirical lower confidence bound above the bound.
    Violated,
    /// The confidence interval straddles the bound: too few samples to
    /// resolve a bound this small.
    Unresolved,
    /// The bound is at least 1, so nothing is asserted.
    Vacuous,
    /// Evaluated only, no simulation.
    NotSimulated,
}

/// One line of the bounds table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub name: String,
    pub n: usize,
    pub eps: f64,
    pub params: String,
    pub bound_log2: f64,
    pub empirical_freq: Option<f64>,
    pub ucb99: Option<f64>,
    pub verdict: BoundVerdict,
}

impl BoundRow {
    pub fn evaluated(name: &str, n: usize, eps: f64, params: String, bound_log2: f64) -> Self {
        Self {
            name: name.into(),
            n,
            eps,
            params,
            bound_log2,
            empirical_freq: None,
            ucb99: None,
            verdict: BoundVerdict::NotSimulated,
        }
    }

    /// Compares a tally against a bound through the 99% Wilson interval.
    pub fn checked(name: &str, n: usize, eps: f64, params: String, bound_log2: f64, tally: Tally) -> Self {
        let ucb = tally.ucb99();
        let bound = bound_log2.exp2();
        let verdict = if bound_log2 >= 0.0 {
            BoundVerdict::Vacuous
        } else if ucb <= bound {
            BoundVerdict::Holds
        } else if tally.lcb99() > bound {
            BoundVerdict::Violated
        } else {
            BoundVerdict::Unresolved
        };
        Self {
            name: name.into(),
            n,
            eps,
            params,
            bound_log2,
            empirical_freq: Some(tally.freq()),
            ucb99: Some(ucb),
            verdict,
        }
    }

    pub const CSV_HEADER: &'static str = "name,n,eps,params,bound_log2,empirical_freq,ucb99,verdict";

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_default();
        let verdict = serde_json::to_value(self.verdict)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        format!(
            "{},{},{},\"{}\",{:.6},{},{},{}",
            self.name,
            self.n,
            self.eps,
            self.params.replace('"', "'"),
            self.bound_log2,
            opt(self.empirical_freq),
            opt(self.ucb99),
            verdict
        )
    }
}

/// Settings for [`standard_table`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub samples: u64,
    pub seed: u64,
    pub crossover: f64,
    pub eps: f64,
    pub n_grid: Vec<usize>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            seed: 1,
            crossover: 0.11,
            eps: 0.5,
            n_grid: vec![64, 256, 1024],
        }
    }
}

/// The bounds table printed by the CLI: each analytic bound on a small grid,
/// with a Monte Carlo estimate wherever the bound has no unknown constant.
pub fn standard_table(cfg: &BoundsConfig) -> Result<Vec<BoundRow>> {
    if cfg.n_grid.iter().any(|&n| n < 2) || cfg.samples == 0 {
        return Err(Error::InvalidConfig("n_grid entries must be >= 2 and samples > 0".into()));
    }
    let pmf = JointPmf::dsbs(cfg.crossover)?;
    let dist = CoefficientDist::default();
    let h = pmf.entropies().h_y_given_x;
    let mut rows = Vec::new();
    for (k, &n) in cfg.n_grid.iter().enumerate() {
        let seed = sub_seed(cfg.seed, "bounds", k as u64);
        let bp = BoundParams::for_setup(n, cfg.eps, &pmf, &dist)?;

        let tally = empirical_atypicality(&pmf, n, cfg.eps, cfg.samples, seed)?;
        rows.push(BoundRow::checked(
            "p1",
            n,
            cfg.eps,
            format!("dsbs={}", cfg.crossover),
            p1_bound(n, cfg.eps, 2, 2),
            tally,
        ));

        let big_a = 3.0 * (n as f64).sqrt();
        let tally = empirical_pm1_tail(n, big_a, cfg.samples, seed ^ 1);
        rows.push(BoundRow::checked(
            "lemma1",
            n,
            cfg.eps,
            format!("A={big_a:.3} a=1 W=2"),
            lemma1_bound(n, 2, 1.0, big_a),
            tally,
        ));

        let y: Vec<f64> = (0..n).map(|j| (j % 2) as f64).collect();
        let tally = empirical_lemma2_tail(&y, cfg.eps, &dist, cfg.samples, seed ^ 2)?;
        rows.push(BoundRow::checked(
            "lemma2",
            n,
            cfg.eps,
            "y=alternating".into(),
            lemma2_bound(&y, 2, cfg.eps, &dist),
            tally,
        ));

        let st = step(n, cfg.eps);
        if bp.constant_free_regime() {
            let tally = empirical_collision(1, bp.b_y, st, &dist, cfg.samples, seed ^ 3)?;
            rows.push(BoundRow::checked(
                "collision_t1",
                n,
                cfg.eps,
                format!("step={st:.4}"),
                constant_free_collision_bound(bp.p_pm).log2(),
                tally,
            ));
        }
        rows.push(BoundRow::evaluated(
            "collision_cap_t1",
            n,
            cfg.eps,
            format!("p_tilde={} c={}", bp.p_tilde, bp.c_coll),
            collision_cap(1, bp.p_tilde, bp.c_coll)?.log2(),
        ));
        rows.push(BoundRow::evaluated(
            "phi1",
            n,
            cfg.eps,
            format!("h={h:.5} R={h:.5} delta={:.5} c={}", bp.delta, bp.c_coll),
            phi1(h, h, bp.delta, n, cfg.eps, bp.c_coll)?,
        ));
        rows.push(BoundRow::evaluated(
            "phi2",
            n,
            cfg.eps,
            format!("L=2 R={h:.5} delta={:.5} p_tilde={}", bp.delta, bp.p_tilde),
            phi2(2.0, h, bp.delta, n, cfg.eps, bp.p_tilde)?,
        ));
    }
    Ok(rows)
}
