//! Reproducible Monte Carlo campaigns.
//!
//! Every trial draws its randomness from `trial_seed(master_seed, label, n,
//! index)`, where `label` names the encoding scheme (`med` shares the `joint`
//! label so the two decoders can be compared on identical blocks). Inside a
//! trial the source block uses `sub_seed(seed, "source", 0)` and encoder `k`
//! uses `sub_seed(seed, "matrix", k)`. Seeds are fixed before trials are
//! dispatched to the thread pool and results are folded in index order, so
//! outputs do not depend on the thread count.
//!
//! A trial is `correct` only if the decoder returns the planted block. Other
//! trials are `atypical_source` when the planted block is not strongly
//! typical, and otherwise carry the decoder's failure kind. A unique but
//! wrong output counts as `multiple`: the planted block also matches every
//! syndrome, so at least two candidates were consistent.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{p1_bound, phi1, phi2, BoundParams};
use crate::decoders::{
    joint_decode, min_entropy_decode, multistage_decode, multistage_encode, plan_stages, typicality_decode,
    DecodeResult, ExhaustiveLimits, Outcome, OutcomeKind, StageDecoder, StageRecord,
};
use crate::encoder::{
    code_params_with_rows, draw_matrix, encode_and_quantize, rows_for_rate, symbol_values, CoefficientDist, EncodingMatrix,
    Quantizer,
};
use crate::ip::{ip_decode, solve_count, IpInstance};
use crate::nsn::{simulate_round, MultiPmf, NsnDecoder, NsnTopology, RoundOptions, RoundSeeds};
use crate::seeds::{sub_seed, trial_seed};
use crate::source_model::{is_strongly_typical, sample_pair, JointPmf};
use crate::stats::wilson99;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `Y` encoded alone, `X` known at the decoder.
    OneSided,
    /// Both sources encoded separately, decoded jointly.
    Joint,
    /// `Y` split into binary stages, `X` known at the decoder.
    Multistage,
    /// The joint scheme with the minimum-entropy decoder.
    Med,
    /// A normal source network without helpers.
    Nsn,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::OneSided => "one_sided",
            Scheme::Joint => "joint",
            Scheme::Multistage => "multistage",
            Scheme::Med => "med",
            Scheme::Nsn => "nsn",
        }
    }

    /// Label used in seed derivation.
    pub fn seed_label(self) -> &'static str {
        match self {
            Scheme::Med => "joint",
            s => s.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Typicality,
    Ip,
    Med,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Typicality => "typicality",
            DecoderKind::Ip => "ip",
            DecoderKind::Med => "med",
        }
    }
}

/// A pairwise source, either a full table or a doubly symmetric binary
/// source given by its crossover probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PmfSpec {
    Dsbs { dsbs: f64 },
    Table(JointPmf),
}

impl PmfSpec {
    pub fn resolve(&self) -> Result<JointPmf> {
        match self {
            PmfSpec::Dsbs { dsbs } => JointPmf::dsbs(*dsbs),
            PmfSpec::Table(p) => Ok(p.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub topology: NsnTopology,
    pub pmf: MultiPmf,
}

/// Bounds drawn next to the empirical error rate in plot files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overlay {
    /// Probability that the source pair is not strongly typical.
    P1,
    /// Competing typical candidates, `phi1(H(Y|X), R, delta)`.
    Phi1,
    /// Near collisions, `phi2(|Y|, R, delta)`.
    Phi2,
}

impl Overlay {
    pub fn name(self) -> &'static str {
        match self {
            Overlay::P1 => "p1",
            Overlay::Phi1 => "phi1",
            Overlay::Phi2 => "phi2",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    pub summary_csv: Option<PathBuf>,
    pub trials_jsonl: Option<PathBuf>,
    pub plot_tsv: Option<PathBuf>,
}

fn default_eps() -> f64 {
    0.5
}

fn default_trials() -> u64 {
    100
}

fn default_search_bits() -> u32 {
    24
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    /// Defaults to `med` for the `med` scheme and `typicality` otherwise.
    #[serde(default)]
    pub decoder: Option<DecoderKind>,
    #[serde(default)]
    pub pmf: Option<PmfSpec>,
    #[serde(default)]
    pub network: Option<NetworkSpec>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Rate of `Y` for `one_sided`; defaults to `H(Y|X)`.
    #[serde(default)]
    pub rate: Option<f64>,
    /// `[R_X, R_Y]` for `joint` and `med`; defaults to `[H(X), H(Y|X)]`.
    #[serde(default)]
    pub rates: Option<[f64; 2]>,
    /// Fixed row count for `one_sided`, overriding the rate.
    #[serde(default)]
    pub m_override: Option<usize>,
    #[serde(default)]
    pub dist: CoefficientDist,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    /// Worker threads; the rayon default when absent.
    #[serde(default)]
    pub threads: Option<usize>,
    /// Node budget per integer-program solve.
    #[serde(default)]
    pub node_budget: Option<u64>,
    #[serde(default)]
    pub limits: ExhaustiveLimits,
    /// Cap on each network decoder's search, in bits.
    #[serde(default = "default_search_bits")]
    pub nsn_search_bits: u32,
    #[serde(default)]
    pub overlays: Vec<Overlay>,
    /// Records per-trial wall time. Off by default because it breaks
    /// byte-identical reruns.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default)]
    pub outputs: OutputPaths,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| config_err(e.to_string()))
    }

    pub fn decoder(&self) -> DecoderKind {
        self.decoder.unwrap_or(match self.scheme {
            Scheme::Med => DecoderKind::Med,
            _ => DecoderKind::Typicality,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.n_grid.is_empty() {
            return Err(config_err("n_grid is empty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err("n_grid must be strictly ascending"));
        }
        if self.n_grid[0] < 2 {
            return Err(config_err("block lengths must be at least 2"));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(config_err(format!("eps must be positive, got {}", self.eps)));
        }
        if self.threads == Some(0) {
            return Err(config_err("threads must be at least 1"));
        }
        let dec = self.decoder();
        let allowed: &[DecoderKind] = match self.scheme {
            Scheme::OneSided | Scheme::Multistage => &[DecoderKind::Typicality, DecoderKind::Ip],
            Scheme::Joint | Scheme::Nsn => &[DecoderKind::Typicality, DecoderKind::Med],
            Scheme::Med => &[DecoderKind::Med],
        };
        if !allowed.contains(&dec) {
            return Err(config_err(format!(
                "decoder {} does not apply to scheme {}",
                dec.name(),
                self.scheme.name()
            )));
        }
        match self.scheme {
            Scheme::Nsn => {
                let net = self.network.as_ref().ok_or_else(|| config_err("scheme nsn needs a network"))?;
                if self.pmf.is_some() {
                    return Err(config_err("scheme nsn takes its pmf from the network"));
                }
                let v = net.topology.validate();
                if !v.is_empty() {
                    let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
                    return Err(config_err(format!("invalid topology: {}", msgs.join("; "))));
                }
                if net.pmf.k() != net.topology.sources.len() {
                    return Err(config_err("network pmf and topology disagree on the source count"));
                }
            }
            _ => {
                if self.network.is_some() {
                    return Err(config_err("network is only used by scheme nsn"));
                }
                let pmf = self
                    .pmf
                    .as_ref()
                    .ok_or_else(|| config_err("a pmf is required"))?
                    .resolve()
                    .map_err(|e| config_err(e.to_string()))?;
                if dec == DecoderKind::Ip && self.scheme == Scheme::OneSided && pmf.y_alphabet() != [0.0, 1.0] {
                    return Err(config_err("the ip decoder needs the y alphabet {0, 1}; use scheme multistage"));
                }
            }
        }
        let joint_like = matches!(self.scheme, Scheme::Joint | Scheme::Med);
        if self.rate.is_some() && self.scheme != Scheme::OneSided {
            return Err(config_err("rate applies to scheme one_sided only"));
        }
        if self.rates.is_some() && !joint_like {
            return Err(config_err("rates apply to schemes joint and med only"));
        }
        if self.m_override.is_some() && self.scheme != Scheme::OneSided {
            return Err(config_err("m_override applies to scheme one_sided only"));
        }
        let rates = self.rate.into_iter().chain(self.rates.into_iter().flatten());
        for r in rates {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(config_err(format!("rates must be non-negative, got {r}")));
            }
        }
        if !self.overlays.is_empty() && self.scheme != Scheme::OneSided {
            return Err(config_err("bound overlays apply to scheme one_sided only"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Correct,
    NoneFound,
    Multiple,
    Inconclusive,
    AtypicalSource,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::Correct,
        Verdict::NoneFound,
        Verdict::Multiple,
        Verdict::Inconclusive,
        Verdict::AtypicalSource,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Verdict::Correct => "correct",
            Verdict::NoneFound => "none_found",
            Verdict::Multiple => "multiple",
            Verdict::Inconclusive => "inconclusive",
            Verdict::AtypicalSource => "atypical_source",
        }
    }

    fn classify(correct: bool, typical: bool, kind: OutcomeKind) -> Self {
        if correct {
            return Verdict::Correct;
        }
        if !typical {
            return Verdict::AtypicalSource;
        }
        match kind {
            OutcomeKind::NoneFound => Verdict::NoneFound,
            OutcomeKind::Inconclusive => Verdict::Inconclusive,
            OutcomeKind::Multiple | OutcomeKind::Unique => Verdict::Multiple,
        }
    }
}

/// Per-network-decoder outcome inside an `nsn` trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkDecoderRecord {
    pub decoder: usize,
    pub outcome: OutcomeKind,
    pub correct: bool,
    pub candidates_examined: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum TrialPayload {
    OneSided {
        m: usize,
        /// Absent when the decoder was skipped for an atypical source.
        outcome: Option<OutcomeKind>,
        candidates_examined: u64,
    },
    Joint {
        m_x: usize,
        m_y: usize,
        outcome: Option<OutcomeKind>,
        candidates_examined: u64,
    },
    Multistage {
        payload_bits: u64,
        side_bits: u64,
        failed_stage: Option<usize>,
        stages: Vec<StageRecord>,
    },
    Nsn {
        decoders: Vec<NetworkDecoderRecord>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub trial: u64,
    pub seed: u64,
    pub verdict: Verdict,
    pub bits_sent: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
    pub payload: TrialPayload,
}

/// Configuration resolved once per campaign.
enum Setup {
    Pair(JointPmf),
    Network(NetworkSpec),
}

/// Runs one trial. Deterministic in `(config, n, seed)`.
pub fn run_trial(config: &ExperimentConfig, n: usize, trial: u64, seed: u64) -> Result<TrialRecord> {
    let setup = match &config.network {
        Some(net) => Setup::Network(net.clone()),
        None => Setup::Pair(
            config
                .pmf
                .as_ref()
                .ok_or_else(|| config_err("a pmf is required"))?
                .resolve()?,
        ),
    };
    trial_with(config, &setup, n, trial, seed)
}

fn trial_with(config: &ExperimentConfig, setup: &Setup, n: usize, trial: u64, seed: u64) -> Result<TrialRecord> {
    let start = Instant::now();
    let (verdict, bits_sent, payload) = match setup {
        Setup::Pair(pmf) => pair_trial(config, pmf, n, seed)?,
        Setup::Network(net) => network_trial(config, net, n, seed)?,
    };
    Ok(TrialRecord {
        n,
        trial,
        seed,
        verdict,
        bits_sent,
        wall_time_secs: config.record_wall_time.then(|| start.elapsed().as_secs_f64()),
        payload,
    })
}

fn pair_trial(config: &ExperimentConfig, pmf: &JointPmf, n: usize, seed: u64) -> Result<(Verdict, u64, TrialPayload)> {
    let eps = config.eps;
    let pair = sample_pair(pmf, n, sub_seed(seed, "source", 0))?;
    let typical = is_strongly_typical(&pair, pmf, eps)?;
    let (x, y) = (pair.x(), pair.y());
    let h = pmf.entropies();
    let dec = config.decoder();
    match config.scheme {
        Scheme::OneSided => {
            let m = match config.m_override {
                Some(m) => m,
                None => rows_for_rate(n, eps, config.rate.unwrap_or(h.h_y_given_x))?,
            };
            let params = code_params_with_rows(n, eps, m)?;
            let d = draw_matrix(m, n, &config.dist, sub_seed(seed, "matrix", 0))?;
            let u = encode_and_quantize(&d, &symbol_values(y, pmf.y_alphabet()), &params.quantizer)?;
            // A typicality decoder never returns an atypical block.
            let (outcome, examined) = if typical {
                let r = match dec {
                    DecoderKind::Ip => ip_decode(x, &u, &d, pmf, eps, &params.quantizer, config.node_budget)?,
                    _ => typicality_decode(x, &u, &d, pmf, eps, &params.quantizer, &config.limits)?,
                };
                (Some(r.outcome), r.candidates_examined)
            } else {
                (None, 0)
            };
            let verdict = match &outcome {
                Some(o) => Verdict::classify(o.unique() == Some(&y.to_vec()), typical, o.kind()),
                None => Verdict::AtypicalSource,
            };
            Ok((
                verdict,
                params.total_bits,
                TrialPayload::OneSided {
                    m,
                    outcome: outcome.map(|o| o.kind()),
                    candidates_examined: examined,
                },
            ))
        }
        Scheme::Joint | Scheme::Med => {
            let [rx, ry] = config.rates.unwrap_or([h.h_x, h.h_y_given_x]);
            let (m_x, m_y) = (rows_for_rate(n, eps, rx)?, rows_for_rate(n, eps, ry)?);
            let px = code_params_with_rows(n, eps, m_x)?;
            let q = px.quantizer;
            let d1 = draw_matrix(m_x, n, &config.dist, sub_seed(seed, "matrix", 0))?;
            let d2 = draw_matrix(m_y, n, &config.dist, sub_seed(seed, "matrix", 1))?;
            let u1 = encode_and_quantize(&d1, &symbol_values(x, pmf.x_alphabet()), &q)?;
            let u2 = encode_and_quantize(&d2, &symbol_values(y, pmf.y_alphabet()), &q)?;
            let bits = (m_x + m_y) as u64 * u64::from(q.bits_per_component);
            let result = match dec {
                DecoderKind::Med => Some(min_entropy_decode(
                    &u1,
                    &u2,
                    &d1,
                    &d2,
                    &q,
                    pmf.x_alphabet(),
                    pmf.y_alphabet(),
                    &config.limits,
                )?),
                _ if typical => Some(joint_decode(&u1, &u2, &d1, &d2, pmf, eps, &q, &config.limits)?),
                _ => None,
            };
            let truth = (x.to_vec(), y.to_vec());
            let verdict = match &result {
                Some(r) => Verdict::classify(r.outcome.unique() == Some(&truth), typical, r.outcome.kind()),
                None => Verdict::AtypicalSource,
            };
            Ok((
                verdict,
                bits,
                TrialPayload::Joint {
                    m_x,
                    m_y,
                    outcome: result.as_ref().map(|r| r.outcome.kind()),
                    candidates_examined: result.map_or(0, |r| r.candidates_examined),
                },
            ))
        }
        Scheme::Multistage => {
            let plan = plan_stages(pmf, eps, n)?;
            let msg = multistage_encode(y, &plan, &config.dist, sub_seed(seed, "matrix", 0))?;
            let stage_dec = match dec {
                DecoderKind::Ip => StageDecoder::Ip,
                _ => StageDecoder::Typicality,
            };
            let r = multistage_decode(x, &msg, &plan, &config.dist, stage_dec, &config.limits, config.node_budget)?;
            let correct = r.y.as_deref() == Some(y);
            let verdict = Verdict::classify(correct, typical, r.verdict);
            let side_bits: u64 = msg.stages.iter().map(|s| s.side_bits).sum();
            Ok((
                verdict,
                msg.total_bits(),
                TrialPayload::Multistage {
                    payload_bits: msg.total_bits() - side_bits,
                    side_bits,
                    failed_stage: r.failed_stage,
                    stages: r.stages,
                },
            ))
        }
        Scheme::Nsn => Err(config_err("scheme nsn needs a network")),
    }
}

fn network_trial(config: &ExperimentConfig, net: &NetworkSpec, n: usize, seed: u64) -> Result<(Verdict, u64, TrialPayload)> {
    let opts = RoundOptions {
        decoder: match config.decoder() {
            DecoderKind::Med => NsnDecoder::MinEntropy,
            _ => NsnDecoder::Typicality,
        },
        dist: config.dist.clone(),
        search_bits: config.nsn_search_bits,
    };
    let seeds = RoundSeeds {
        source: sub_seed(seed, "source", 0),
        encoders: sub_seed(seed, "matrix", 0),
    };
    let r = simulate_round(&net.topology, &net.pmf, n, config.eps, seeds, &opts)?;
    let all_correct = r.decoders.iter().all(|d| d.correct);
    let first_bad = r
        .decoders
        .iter()
        .find(|d| !d.correct)
        .map_or(OutcomeKind::Unique, |d| d.result.outcome.kind());
    let verdict = Verdict::classify(all_correct, r.typical, first_bad);
    let decoders = r
        .decoders
        .iter()
        .map(|d| NetworkDecoderRecord {
            decoder: d.decoder,
            outcome: d.result.outcome.kind(),
            correct: d.correct,
            candidates_examined: d.result.candidates_examined,
        })
        .collect();
    Ok((verdict, r.bits_sent, TrialPayload::Nsn { decoders }))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub correct: u64,
    pub none_found: u64,
    pub multiple: u64,
    pub inconclusive: u64,
    pub atypical_source: u64,
}

impl VerdictCounts {
    pub fn add(&mut self, v: Verdict) {
        *self.slot(v) += 1;
    }

    fn slot(&mut self, v: Verdict) -> &mut u64 {
        match v {
            Verdict::Correct => &mut self.correct,
            Verdict::NoneFound => &mut self.none_found,
            Verdict::Multiple => &mut self.multiple,
            Verdict::Inconclusive => &mut self.inconclusive,
            Verdict::AtypicalSource => &mut self.atypical_source,
        }
    }

    pub fn total(&self) -> u64 {
        self.correct + self.errors()
    }

    pub fn errors(&self) -> u64 {
        self.none_found + self.multiple + self.inconclusive + self.atypical_source
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundOverlay {
    pub name: String,
    pub bound_log2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSummary {
    pub n: usize,
    pub trials: u64,
    pub counts: VerdictCounts,
    pub error_rate: f64,
    pub wilson_ucb99: f64,
    pub mean_bits_per_symbol: f64,
    pub bounds: Vec<BoundOverlay>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub scheme: Scheme,
    pub decoder: DecoderKind,
    pub eps: f64,
    pub rows: Vec<NSummary>,
}

impl CampaignSummary {
    /// More than half of all trials ended `inconclusive`.
    pub fn inconclusive_dominated(&self) -> bool {
        let (inc, total) = self
            .rows
            .iter()
            .fold((0, 0), |(i, t), r| (i + r.counts.inconclusive, t + r.trials));
        total > 0 && 2 * inc > total
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub summary: CampaignSummary,
    pub records: Vec<TrialRecord>,
}

fn overlay_value(o: Overlay, config: &ExperimentConfig, pmf: &JointPmf, n: usize) -> Result<f64> {
    let eps = config.eps;
    let bp = BoundParams::for_setup(n, eps, pmf, &config.dist)?;
    let h = pmf.entropies().h_y_given_x;
    let rate = config.rate.unwrap_or(h);
    match o {
        Overlay::P1 => Ok(p1_bound(n, eps, pmf.x_card(), pmf.y_card())),
        Overlay::Phi1 => phi1(h, rate, bp.delta, n, eps, bp.c_coll),
        Overlay::Phi2 => phi2(pmf.y_card() as f64, rate, bp.delta, n, eps, bp.p_tilde),
    }
}

/// Runs `trials` trials at every block length of the grid.
pub fn run_campaign(config: &ExperimentConfig) -> Result<CampaignResult> {
    config.validate()?;
    let setup = match &config.network {
        Some(net) => Setup::Network(net.clone()),
        None => Setup::Pair(config.pmf.as_ref().expect("validated").resolve()?),
    };
    let label = config.scheme.seed_label();
    let run = || -> Result<Vec<TrialRecord>> {
        let mut all = Vec::new();
        for &n in &config.n_grid {
            let seeds: Vec<(u64, u64)> = (0..config.trials)
                .map(|i| (i, trial_seed(config.master_seed, label, n, i)))
                .collect();
            let recs: Vec<Result<TrialRecord>> = seeds
                .par_iter()
                .map(|&(i, s)| trial_with(config, &setup, n, i, s))
                .collect();
            for r in recs {
                all.push(r?);
            }
        }
        Ok(all)
    };
    let records = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| config_err(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let mut rows = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        let mut counts = VerdictCounts::default();
        let mut bits = 0u64;
        for r in records.iter().filter(|r| r.n == n) {
            counts.add(r.verdict);
            bits += r.bits_sent;
        }
        let trials = counts.total();
        let bounds = match &setup {
            Setup::Pair(pmf) => config
                .overlays
                .iter()
                .map(|&o| {
                    Ok(BoundOverlay {
                        name: o.name().into(),
                        bound_log2: overlay_value(o, config, pmf, n)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            Setup::Network(_) => Vec::new(),
        };
        rows.push(NSummary {
            n,
            trials,
            counts,
            error_rate: counts.errors() as f64 / trials as f64,
            wilson_ucb99: wilson99(counts.errors(), trials).upper,
            mean_bits_per_symbol: bits as f64 / (trials as f64 * n as f64),
            bounds,
        });
    }
    Ok(CampaignResult {
        summary: CampaignSummary {
            scheme: config.scheme,
            decoder: config.decoder(),
            eps: config.eps,
            rows,
        },
        records,
    })
}

pub const SUMMARY_HEADER: &str =
    "scheme,decoder,n,trials,correct,none_found,multiple,inconclusive,atypical_source,error_rate,wilson_ucb99,mean_bits_per_symbol";

/// One CSV line per block length.
pub fn summary_csv(summary: &CampaignSummary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in &summary.rows {
        let c = &r.counts;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            summary.scheme.name(),
            summary.decoder.name(),
            r.n,
            r.trials,
            c.correct,
            c.none_found,
            c.multiple,
            c.inconclusive,
            c.atypical_source,
            r.error_rate,
            r.wilson_ucb99,
            r.mean_bits_per_symbol
        );
    }
    out
}

/// One JSON object per trial, in `(n, trial)` order.
pub fn trials_jsonl(records: &[TrialRecord]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

pub const PLOT_HEADER: &str = "series\tn\terror_rate\tucb99\tbound_log2";

/// Tab-separated plot data: one series per bound overlay, each repeating the
/// empirical columns next to the bound. Without overlays a single
/// `empirical` series is written with an empty bound column.
pub fn emit_plot_data(summary: &CampaignSummary) -> String {
    let mut out = String::from(PLOT_HEADER);
    out.push('\n');
    let names: Vec<String> = match summary.rows.first() {
        None => return out,
        Some(r) if r.bounds.is_empty() => vec![],
        Some(r) => r.bounds.iter().map(|b| b.name.clone()).collect(),
    };
    if names.is_empty() {
        for r in &summary.rows {
            let _ = writeln!(out, "empirical\t{}\t{}\t{}\t", r.n, r.error_rate, r.wilson_ucb99);
        }
        return out;
    }
    for (k, name) in names.iter().enumerate() {
        for r in &summary.rows {
            let _ = writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{}",
                r.n, r.error_rate, r.wilson_ucb99, r.bounds[k].bound_log2
            );
        }
    }
    out
}

/// Tab-separated per-seed comparison of two campaigns run on the same seeds.
pub fn paired_verdicts(a: &[TrialRecord], b: &[TrialRecord]) -> Result<String> {
    if a.len() != b.len() {
        return Err(config_err("paired campaigns differ in trial count"));
    }
    let mut out = String::from("n\ttrial\tseed\tfirst\tsecond\n");
    for (ra, rb) in a.iter().zip(b) {
        if (ra.n, ra.trial, ra.seed) != (rb.n, rb.trial, rb.seed) {
            return Err(config_err(format!("trial {} at n={} was run on different seeds", ra.trial, ra.n)));
        }
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}", ra.n, ra.trial, ra.seed, ra.verdict.name(), rb.verdict.name());
    }
    Ok(out)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Writes every output file named in `paths`.
pub fn write_outputs(result: &CampaignResult, paths: &OutputPaths) -> Result<()> {
    if let Some(p) = &paths.summary_csv {
        write_file(p, &summary_csv(&result.summary))?;
    }
    if let Some(p) = &paths.trials_jsonl {
        write_file(p, &trials_jsonl(&result.records)?)?;
    }
    if let Some(p) = &paths.plot_tsv {
        write_file(p, &emit_plot_data(&result.summary))?;
    }
    Ok(())
}

fn default_stop_after() -> usize {
    2
}

/// A single decoding problem read from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecodeRequest {
    /// Recover `y` from `u_hat` with side information `x`.
    OneSided {
        pmf: PmfSpec,
        eps: f64,
        x: Vec<usize>,
        u_hat: Vec<u64>,
        matrix: EncodingMatrix,
        #[serde(default)]
        decoder: Option<DecoderKind>,
        #[serde(default)]
        node_budget: Option<u64>,
        #[serde(default)]
        limits: ExhaustiveLimits,
    },
    /// Recover `(x, y)` from both syndromes.
    Joint {
        pmf: PmfSpec,
        eps: f64,
        u1: Vec<u64>,
        u2: Vec<u64>,
        matrix_x: EncodingMatrix,
        matrix_y: EncodingMatrix,
        #[serde(default)]
        decoder: Option<DecoderKind>,
        #[serde(default)]
        limits: ExhaustiveLimits,
    },
    /// Count solutions of an integer program.
    Ip {
        instance: IpInstance,
        #[serde(default = "default_stop_after")]
        stop_after: usize,
        #[serde(default)]
        node_budget: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTranscript {
    pub verdict: OutcomeKind,
    /// The decoded block, or the first two candidates when ambiguous.
    pub solutions: Vec<serde_json::Value>,
    pub candidates_examined: u64,
}

impl DecodeRequest {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| config_err(e.to_string()))
    }

    pub fn run(&self) -> Result<DecodeTranscript> {
        fn transcript<T: Serialize>(r: DecodeResult<T>) -> Result<DecodeTranscript> {
            let verdict = r.outcome.kind();
            let solutions = match r.outcome {
                Outcome::Unique(a) => vec![serde_json::to_value(a)?],
                Outcome::Multiple(a, b) => vec![serde_json::to_value(a)?, serde_json::to_value(b)?],
                Outcome::NoneFound | Outcome::Inconclusive => vec![],
            };
            Ok(DecodeTranscript {
                verdict,
                solutions,
                candidates_examined: r.candidates_examined,
            })
        }
        match self {
            DecodeRequest::OneSided {
                pmf,
                eps,
                x,
                u_hat,
                matrix,
                decoder,
                node_budget,
                limits,
            } => {
                let pmf = pmf.resolve()?;
                let q = Quantizer::new(matrix.cols(), *eps)?;
                match decoder.unwrap_or(DecoderKind::Typicality) {
                    DecoderKind::Typicality => transcript(typicality_decode(x, u_hat, matrix, &pmf, *eps, &q, limits)?),
                    DecoderKind::Ip => transcript(ip_decode(x, u_hat, matrix, &pmf, *eps, &q, *node_budget)?),
                    DecoderKind::Med => Err(config_err("the med decoder needs a joint request")),
                }
            }
            DecodeRequest::Joint {
                pmf,
                eps,
                u1,
                u2,
                matrix_x,
                matrix_y,
                decoder,
                limits,
            } => {
                let pmf = pmf.resolve()?;
                let q = Quantizer::new(matrix_x.cols(), *eps)?;
                match decoder.unwrap_or(DecoderKind::Typicality) {
                    DecoderKind::Typicality => {
                        transcript(joint_decode(u1, u2, matrix_x, matrix_y, &pmf, *eps, &q, limits)?)
                    }
                    DecoderKind::Med => transcript(min_entropy_decode(
                        u1,
                        u2,
                        matrix_x,
                        matrix_y,
                        &q,
                        pmf.x_alphabet(),
                        pmf.y_alphabet(),
                        limits,
                    )?),
                    DecoderKind::Ip => Err(config_err("the ip decoder needs a one_sided request")),
                }
            }
            DecodeRequest::Ip {
                instance,
                stop_after,
                node_budget,
            } => {
                if *stop_after == 0 {
                    return Err(config_err("stop_after must be at least 1"));
                }
                let report = solve_count(instance, *stop_after, *node_budget)?;
                let verdict = report.outcome().kind();
                Ok(DecodeTranscript {
                    verdict,
                    solutions: report
                        .witnesses
                        .iter()
                        .map(serde_json::to_value)
                        .collect::<std::result::Result<_, _>>()?,
                    candidates_examined: report.nodes_explored,
                })
            }
        }
    }
}
