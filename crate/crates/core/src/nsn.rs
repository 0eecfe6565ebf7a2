//! Normal source networks without helpers.
//!
//! Each source has exactly one encoder. Decoder `c` hears a set of
//! encoders, which fixes the set `S_c` of sources it sees, and demands a set
//! `D_c`. With no helpers `S_c = D_c`, and each decoder runs an independent
//! joint search over the sources it hears.
//!
//! Strong typicality for a tuple of `k` sequences uses the cell threshold
//! `eps / prod |A_i|`, the direct extension of the pairwise definition.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decoders::joint::syndrome_candidates;
use crate::decoders::med::compare_type_entropy;
use crate::decoders::{DecodeResult, Outcome};
use crate::encoder::{draw_matrix, encode_and_quantize, rows_for_rate, symbol_values, CoefficientDist, EncodingMatrix, Quantizer};
use crate::source_model::{check_alphabet, check_probs, entropy_bits, RATE_TOLERANCE};
use crate::{Error, Result};

/// Largest `|S_c|` accepted by [`rate_region_check`].
pub const MAX_SUBSET_SOURCES: usize = 16;

/// Joint distribution of `k` sources. `probs` is the flattened table with
/// the last source varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMultiPmf")]
pub struct MultiPmf {
    alphabets: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMultiPmf {
    alphabets: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl TryFrom<RawMultiPmf> for MultiPmf {
    type Error = Error;

    fn try_from(raw: RawMultiPmf) -> Result<Self> {
        MultiPmf::new(raw.alphabets, raw.probs)
    }
}

const MAX_TABLE: usize = 1 << 22;

impl MultiPmf {
    pub fn new(alphabets: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if alphabets.is_empty() {
            return Err(Error::InvalidDistribution("need at least one source".into()));
        }
        let mut size: usize = 1;
        for (i, a) in alphabets.iter().enumerate() {
            check_alphabet(&format!("alphabet {i}"), a)?;
            size = size
                .checked_mul(a.len())
                .filter(|&s| s <= MAX_TABLE)
                .ok_or_else(|| Error::InvalidDistribution("probability table too large".into()))?;
        }
        if probs.len() != size {
            return Err(Error::DimensionMismatch {
                what: "probability table size",
                expected: size,
                got: probs.len(),
            });
        }
        check_probs(&probs)?;
        Ok(Self { alphabets, probs })
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Two sources from a pairwise pmf (`X` first).
    pub fn from_joint(pmf: &crate::source_model::JointPmf) -> Self {
        Self {
            alphabets: vec![pmf.x_alphabet().to_vec(), pmf.y_alphabet().to_vec()],
            probs: pmf.probs().iter().flatten().copied().collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.alphabets.len()
    }

    pub fn alphabets(&self) -> &[Vec<f64>] {
        &self.alphabets
    }

    pub fn cards(&self) -> Vec<usize> {
        self.alphabets.iter().map(Vec::len).collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Symbol tuple of flat cell `cell`.
    fn decode_cell(&self, mut cell: usize, out: &mut [usize]) {
        for (slot, a) in out.iter_mut().zip(&self.alphabets).rev() {
            *slot = cell % a.len();
            cell /= a.len();
        }
    }

    /// Marginal over the sources in `subset` (ascending), flattened the
    /// same way.
    pub fn marginal(&self, subset: &[usize]) -> Vec<f64> {
        let cards = self.cards();
        let size: usize = subset.iter().map(|&i| cards[i]).product();
        let mut out = vec![0.0; size];
        let mut tuple = vec![0; self.k()];
        for (cell, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.decode_cell(cell, &mut tuple);
            let idx = subset.iter().fold(0, |acc, &i| acc * cards[i] + tuple[i]);
            out[idx] += p;
        }
        out
    }

    /// `H(X_subset)` in bits; 0 for the empty set.
    pub fn entropy(&self, subset: &[usize]) -> f64 {
        if subset.is_empty() {
            return 0.0;
        }
        entropy_bits(&self.marginal(subset))
    }

    /// `H(X_l | X_given)`, with `l` and `given` disjoint.
    pub fn conditional_entropy(&self, l: &[usize], given: &[usize]) -> f64 {
        let union: Vec<usize> = l.iter().chain(given).copied().collect::<BTreeSet<_>>().into_iter().collect();
        (self.entropy(&union) - self.entropy(given)).max(0.0)
    }

    /// Draws `n` i.i.d. tuples; returns one index sequence per source.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
        if n == 0 {
            return Err(Error::InvalidParameter("block length must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cells = WeightedIndex::new(&self.probs).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        let mut out = vec![Vec::with_capacity(n); self.k()];
        let mut tuple = vec![0; self.k()];
        for _ in 0..n {
            self.decode_cell(cells.sample(&mut rng), &mut tuple);
            for (seq, &s) in out.iter_mut().zip(&tuple) {
                seq.push(s);
            }
        }
        Ok(out)
    }

    /// Strong typicality of the sequences of `subset` against their marginal.
    pub fn is_typical(&self, subset: &[usize], seqs: &[&[usize]], eps: f64) -> bool {
        let cards = self.cards();
        let marginal = self.marginal(subset);
        let n = seqs.first().map_or(0, |s| s.len());
        if n == 0 {
            return false;
        }
        let counts = tuple_counts(seqs, subset.iter().map(|&i| cards[i]), marginal.len());
        let thr = eps / marginal.len() as f64;
        counts
            .iter()
            .zip(&marginal)
            .all(|(&c, &p)| (c as f64 / n as f64 - p).abs() < thr)
    }
}

fn tuple_counts(seqs: &[&[usize]], cards: impl Iterator<Item = usize> + Clone, size: usize) -> Vec<usize> {
    let n = seqs.first().map_or(0, |s| s.len());
    let mut counts = vec![0usize; size];
    for j in 0..n {
        let idx = seqs.iter().zip(cards.clone()).fold(0, |acc, (s, c)| acc * c + s[j]);
        counts[idx] += 1;
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub source: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpec {
    /// Encoders this decoder hears from.
    pub encoders: Vec<usize>,
    /// Sources this decoder must reproduce.
    pub demands: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NsnTopology {
    pub sources: Vec<SourceSpec>,
    pub encoders: Vec<EncoderSpec>,
    pub decoders: Vec<DecoderSpec>,
    /// Source-to-decoder links that bypass the encoders, as `[source, decoder]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub direct_edges: Vec<[usize; 2]>,
}

/// A broken network condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "condition", rename_all = "snake_case")]
pub enum Violation {
    /// An index refers to a nonexistent source, encoder or decoder.
    BadIndex { what: String },
    /// Condition (i): a source feeds a decoder directly.
    DirectEdge { source: usize, decoder: usize },
    /// Condition (ii): sources and encoders are not in one-to-one correspondence.
    NotBijective { source: usize, encoders: usize },
    /// Condition (iii): two decoders hear the same source set.
    DuplicateSourceSet { first: usize, second: usize },
    /// Condition (iv): `S_small` is inside `S_large` but `D_small` is not inside `D_large`.
    DemandNotMonotone { small: usize, large: usize },
    /// A decoder demands a source it does not hear.
    UnheardDemand { decoder: usize, source: usize },
    /// A source heard but not demanded by a decoder.
    Helper { decoder: usize, source: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::BadIndex { what } => write!(f, "bad index: {what}"),
            Violation::DirectEdge { source, decoder } => {
                write!(f, "(i) source {source} is wired directly to decoder {decoder}")
            }
            Violation::NotBijective { source, encoders } => {
                write!(f, "(ii) source {source} has {encoders} encoders, expected exactly 1")
            }
            Violation::DuplicateSourceSet { first, second } => {
                write!(f, "(iii) decoders {first} and {second} hear the same sources")
            }
            Violation::DemandNotMonotone { small, large } => write!(
                f,
                "(iv) decoder {small} hears a subset of decoder {large} but demands more"
            ),
            Violation::UnheardDemand { decoder, source } => {
                write!(f, "decoder {decoder} demands source {source} it does not hear")
            }
            Violation::Helper { decoder, source } => {
                write!(f, "source {source} is a helper at decoder {decoder}")
            }
        }
    }
}

impl NsnTopology {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// `S_c` for every decoder, sorted, or `None` if an index is out of range.
    pub fn source_sets(&self) -> Option<Vec<Vec<usize>>> {
        self.decoders
            .iter()
            .map(|d| {
                d.encoders
                    .iter()
                    .map(|&b| self.encoders.get(b).map(|e| e.source))
                    .collect::<Option<BTreeSet<_>>>()
                    .map(|s| s.into_iter().collect())
            })
            .collect()
    }

    /// Encoder index of each source (the first, if several).
    pub fn encoder_of(&self, source: usize) -> Option<usize> {
        self.encoders.iter().position(|e| e.source == source)
    }

    /// All conditions violated by this topology; empty means a valid normal
    /// source network without helpers.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = BTreeSet::new();
        let ns = self.sources.len();
        for (b, e) in self.encoders.iter().enumerate() {
            if e.source >= ns {
                out.insert(Violation::BadIndex {
                    what: format!("encoder {b} source {}", e.source),
                });
            }
            if !(e.rate >= 0.0 && e.rate.is_finite()) {
                out.insert(Violation::BadIndex {
                    what: format!("encoder {b} rate {}", e.rate),
                });
            }
        }
        for (c, d) in self.decoders.iter().enumerate() {
            for &b in &d.encoders {
                if b >= self.encoders.len() {
                    out.insert(Violation::BadIndex {
                        what: format!("decoder {c} encoder {b}"),
                    });
                }
            }
            for &a in &d.demands {
                if a >= ns {
                    out.insert(Violation::BadIndex {
                        what: format!("decoder {c} demand {a}"),
                    });
                }
            }
        }
        for &[a, c] in &self.direct_edges {
            if a >= ns || c >= self.decoders.len() {
                out.insert(Violation::BadIndex {
                    what: format!("direct edge {a} -> {c}"),
                });
            } else {
                out.insert(Violation::DirectEdge { source: a, decoder: c });
            }
        }
        for a in 0..ns {
            let count = self.encoders.iter().filter(|e| e.source == a).count();
            if count != 1 {
                out.insert(Violation::NotBijective { source: a, encoders: count });
            }
        }
        if let Some(sets) = self.source_sets() {
            let demands: Vec<BTreeSet<usize>> =
                self.decoders.iter().map(|d| d.demands.iter().copied().collect()).collect();
            let heard: Vec<BTreeSet<usize>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
            for c in 0..heard.len() {
                for &a in heard[c].difference(&demands[c]) {
                    out.insert(Violation::Helper { decoder: c, source: a });
                }
                for &a in demands[c].difference(&heard[c]) {
                    if a < ns {
                        out.insert(Violation::UnheardDemand { decoder: c, source: a });
                    }
                }
                for c2 in 0..heard.len() {
                    if c2 == c {
                        continue;
                    }
                    if c < c2 && heard[c] == heard[c2] {
                        out.insert(Violation::DuplicateSourceSet { first: c, second: c2 });
                    }
                    if heard[c].is_subset(&heard[c2]) && !demands[c].is_subset(&demands[c2]) {
                        out.insert(Violation::DemandNotMonotone { small: c, large: c2 });
                    }
                }
            }
        }
        out.into_iter().collect()
    }

    /// Helper sources per decoder, as `(decoder, source)` pairs.
    pub fn helpers(&self) -> Vec<(usize, usize)> {
        self.validate()
            .into_iter()
            .filter_map(|v| match v {
                Violation::Helper { decoder, source } => Some((decoder, source)),
                _ => None,
            })
            .collect()
    }

    fn require_valid(&self) -> Result<Vec<Vec<usize>>> {
        let v = self.validate();
        if !v.is_empty() {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            return Err(Error::InvalidTopology(msgs.join("; ")));
        }
        Ok(self.source_sets().expect("validated"))
    }
}

/// One rate-region inequality `sum_{b in L} R_b >= H(X_L | X_{S_c \ L})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateInequality {
    pub decoder: usize,
    /// The sources in `L`.
    pub subset: Vec<usize>,
    pub rate_sum: f64,
    pub required: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCheck {
    pub achievable: bool,
    pub inequalities: Vec<RateInequality>,
}

impl RateCheck {
    pub fn violated(&self) -> impl Iterator<Item = &RateInequality> {
        self.inequalities.iter().filter(|i| !i.satisfied)
    }
}

/// Evaluates every rate-region inequality of a valid network: for each
/// decoder `c` and each nonempty `L` inside `S_c` (including `S_c` itself).
pub fn rate_region_check(topo: &NsnTopology, pmf: &MultiPmf) -> Result<RateCheck> {
    let sets = topo.require_valid()?;
    if pmf.k() != topo.sources.len() {
        return Err(Error::DimensionMismatch {
            what: "pmf source count",
            expected: topo.sources.len(),
            got: pmf.k(),
        });
    }
    let mut inequalities = Vec::new();
    for (c, s) in sets.iter().enumerate() {
        if s.len() > MAX_SUBSET_SOURCES {
            return Err(Error::InvalidTopology(format!(
                "decoder {c} hears {} sources; at most {MAX_SUBSET_SOURCES} are supported",
                s.len()
            )));
        }
        for mask in 1u32..(1u32 << s.len()) {
            let (l, rest): (Vec<usize>, Vec<usize>) = {
                let mut l = Vec::new();
                let mut rest = Vec::new();
                for (bit, &a) in s.iter().enumerate() {
                    if mask & (1 << bit) != 0 {
                        l.push(a);
                    } else {
                        rest.push(a);
                    }
                }
                (l, rest)
            };
            let rate_sum: f64 = l
                .iter()
                .map(|&a| topo.encoders[topo.encoder_of(a).expect("validated")].rate)
                .sum();
            let required = pmf.conditional_entropy(&l, &rest);
            inequalities.push(RateInequality {
                decoder: c,
                satisfied: rate_sum + RATE_TOLERANCE >= required,
                subset: l,
                rate_sum,
                required,
            });
        }
    }
    Ok(RateCheck {
        achievable: inequalities.iter().all(|i| i.satisfied),
        inequalities,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NsnDecoder {
    #[default]
    Typicality,
    MinEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSeeds {
    pub source: u64,
    /// Base seed; encoder `b` uses `sub_seed(encoders, "nsn-encoder", b)`.
    pub encoders: u64,
}

impl RoundSeeds {
    pub fn encoder_seed(&self, b: usize) -> u64 {
        crate::seeds::sub_seed(self.encoders, "nsn-encoder", b as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundOptions {
    pub decoder: NsnDecoder,
    pub dist: CoefficientDist,
    /// Cap on `sum_{a in S_c} n log2 |A_a|` per decoder.
    pub search_bits: u32,
}

impl Default for RoundOptions {
    fn default() -> Self {
        Self {
            decoder: NsnDecoder::Typicality,
            dist: CoefficientDist::default(),
            search_bits: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecoderReport {
    pub decoder: usize,
    /// `S_c`, the order of the sequences in the result.
    pub sources: Vec<usize>,
    pub result: DecodeResult<Vec<Vec<usize>>>,
    /// Whether the output equals the true source block.
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundResult {
    pub sources: Vec<Vec<usize>>,
    /// Whether the full source tuple is strongly typical.
    pub typical: bool,
    pub bits_sent: u64,
    pub decoders: Vec<DecoderReport>,
}

/// One block through the network: sample all sources, encode each with its
/// own matrix, and run every decoder on the syndromes it hears.
pub fn simulate_round(
    topo: &NsnTopology,
    pmf: &MultiPmf,
    n: usize,
    eps: f64,
    seeds: RoundSeeds,
    opts: &RoundOptions,
) -> Result<RoundResult> {
    let sets = topo.require_valid()?;
    if pmf.k() != topo.sources.len() {
        return Err(Error::DimensionMismatch {
            what: "pmf source count",
            expected: topo.sources.len(),
            got: pmf.k(),
        });
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let cards = pmf.cards();
    for s in &sets {
        let bits: f64 = s.iter().map(|&a| n as f64 * (cards[a] as f64).log2()).sum();
        if bits > f64::from(opts.search_bits) + 1e-9 {
            return Err(Error::SearchSpaceTooLarge {
                what: "network decoder",
                needed_bits: bits,
                limit_bits: opts.search_bits,
            });
        }
    }

    let q = Quantizer::new(n, eps)?;
    let sources = pmf.sample(n, seeds.source)?;
    let all: Vec<usize> = (0..pmf.k()).collect();
    let all_seqs: Vec<&[usize]> = sources.iter().map(Vec::as_slice).collect();
    let typical = pmf.is_typical(&all, &all_seqs, eps);

    let mut matrices: Vec<EncodingMatrix> = Vec::with_capacity(topo.encoders.len());
    let mut syndromes = Vec::with_capacity(topo.encoders.len());
    let mut bits_sent = 0;
    for (b, e) in topo.encoders.iter().enumerate() {
        let m = rows_for_rate(n, eps, e.rate)?;
        let d = draw_matrix(m, n, &opts.dist, seeds.encoder_seed(b))?;
        let vals = symbol_values(&sources[e.source], &pmf.alphabets[e.source]);
        syndromes.push(encode_and_quantize(&d, &vals, &q)?);
        bits_sent += m as u64 * u64::from(q.bits_per_component);
        matrices.push(d);
    }

    let mut decoders = Vec::with_capacity(sets.len());
    for (c, s) in sets.iter().enumerate() {
        let lists: Vec<Vec<Vec<usize>>> = s
            .iter()
            .map(|&a| {
                let b = topo.encoder_of(a).expect("validated");
                syndrome_candidates(&pmf.alphabets[a], &matrices[b], &syndromes[b], &q).0
            })
            .collect();
        let tried: u64 = s.iter().map(|&a| (cards[a] as u64).pow(n as u32)).sum();
        let result = match opts.decoder {
            NsnDecoder::Typicality => typical_search(pmf, s, &lists, eps, tried),
            NsnDecoder::MinEntropy => min_entropy_search(pmf, s, &lists, tried),
        };
        let truth: Vec<&Vec<usize>> = s.iter().map(|&a| &sources[a]).collect();
        let correct = matches!(&result.outcome, Outcome::Unique(v) if v.iter().zip(&truth).all(|(a, b)| a == *b));
        decoders.push(DecoderReport {
            decoder: c,
            sources: s.clone(),
            result,
            correct,
        });
    }
    Ok(RoundResult {
        sources,
        typical,
        bits_sent,
        decoders,
    })
}

/// Visits the cartesian product of `lists` in lexicographic order.
fn for_each_tuple(lists: &[Vec<Vec<usize>>], mut visit: impl FnMut(&[usize]) -> bool) {
    if lists.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; lists.len()];
    loop {
        if !visit(&idx) {
            return;
        }
        let mut i = lists.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < lists[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
}

fn pick(lists: &[Vec<Vec<usize>>], idx: &[usize]) -> Vec<Vec<usize>> {
    lists.iter().zip(idx).map(|(l, &i)| l[i].clone()).collect()
}

fn typical_search(pmf: &MultiPmf, s: &[usize], lists: &[Vec<Vec<usize>>], eps: f64, tried: u64) -> DecodeResult<Vec<Vec<usize>>> {
    let mut examined = tried;
    let mut found = Vec::new();
    for_each_tuple(lists, |idx| {
        examined += 1;
        let seqs: Vec<&[usize]> = lists.iter().zip(idx).map(|(l, &i)| l[i].as_slice()).collect();
        if pmf.is_typical(s, &seqs, eps) {
            found.push(pick(lists, idx));
        }
        found.len() < 2
    });
    DecodeResult::from_solutions(found, examined)
}

fn min_entropy_search(pmf: &MultiPmf, s: &[usize], lists: &[Vec<Vec<usize>>], tried: u64) -> DecodeResult<Vec<Vec<usize>>> {
    let cards = pmf.cards();
    let size: usize = s.iter().map(|&a| cards[a]).product();
    let mut examined = tried;
    let mut best: Option<(Vec<usize>, Vec<usize>)> = None;
    let mut runner_up: Option<Vec<usize>> = None;
    for_each_tuple(lists, |idx| {
        examined += 1;
        let seqs: Vec<&[usize]> = lists.iter().zip(idx).map(|(l, &i)| l[i].as_slice()).collect();
        let counts = tuple_counts(&seqs, s.iter().map(|&a| cards[a]), size);
        match &best {
            None => best = Some((counts, idx.to_vec())),
            Some((bc, _)) => match compare_type_entropy(&counts, bc) {
                Ordering::Less => {
                    best = Some((counts, idx.to_vec()));
                    runner_up = None;
                }
                Ordering::Equal if runner_up.is_none() => runner_up = Some(idx.to_vec()),
                _ => {}
            },
        }
        true
    });
    let outcome = match (best, runner_up) {
        (None, _) => Outcome::NoneFound,
        (Some((_, b)), None) => Outcome::Unique(pick(lists, &b)),
        (Some((_, b)), Some(r)) => Outcome::Multiple(pick(lists, &b), pick(lists, &r)),
    };
    DecodeResult {
        outcome,
        candidates_examined: examined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders::{joint_decode, min_entropy_decode, ExhaustiveLimits};
    use crate::source_model::{in_rate_region, sample_pair, JointPmf};
    use rand::{Rng, SeedableRng};

    fn one_decoder(k: usize, rates: &[f64]) -> NsnTopology {
        NsnTopology {
            sources: (0..k).map(|i| SourceSpec { name: format!("s{i}") }).collect(),
            encoders: rates.iter().enumerate().map(|(i, &r)| EncoderSpec { source: i, rate: r }).collect(),
            decoders: vec![DecoderSpec {
                encoders: (0..k).collect(),
                demands: (0..k).collect(),
            }],
            direct_edges: vec![],
        }
    }

    fn independent_uniform() -> MultiPmf {
        MultiPmf::new(vec![vec![0.0, 1.0], vec![0.0, 1.0]], vec![0.25; 4]).unwrap()
    }

    fn copies3() -> MultiPmf {
        let mut p = vec![0.0; 8];
        p[0] = 0.5;
        p[7] = 0.5;
        MultiPmf::new(vec![vec![0.0, 1.0]; 3], p).unwrap()
    }

    #[test]
    fn validation_examples() {
        assert!(one_decoder(1, &[1.0]).validate().is_empty());

        let mut t = one_decoder(2, &[1.0, 1.0]);
        t.decoders.push(t.decoders[0].clone());
        assert_eq!(t.validate(), vec![Violation::DuplicateSourceSet { first: 0, second: 1 }]);

        let mut t = one_decoder(2, &[1.0, 1.0]);
        t.decoders[0].demands = vec![0];
        assert_eq!(t.helpers(), vec![(0, 1)]);

        let mut t = one_decoder(2, &[1.0, 1.0]);
        t.direct_edges.push([1, 0]);
        assert!(t.validate().contains(&Violation::DirectEdge { source: 1, decoder: 0 }));

        let mut t = one_decoder(2, &[1.0, 1.0]);
        t.encoders[1].source = 0;
        let v = t.validate();
        assert!(v.contains(&Violation::NotBijective { source: 0, encoders: 2 }));
        assert!(v.contains(&Violation::NotBijective { source: 1, encoders: 0 }));

        // S_0 = {0} inside S_1 = {0, 1} but D_0 = {0} not inside D_1 = {1}.
        let t = NsnTopology {
            sources: vec![SourceSpec { name: "a".into() }, SourceSpec { name: "b".into() }],
            encoders: vec![EncoderSpec { source: 0, rate: 1.0 }, EncoderSpec { source: 1, rate: 1.0 }],
            decoders: vec![
                DecoderSpec { encoders: vec![0], demands: vec![0] },
                DecoderSpec { encoders: vec![0, 1], demands: vec![1] },
            ],
            direct_edges: vec![],
        };
        let v = t.validate();
        assert!(v.contains(&Violation::DemandNotMonotone { small: 0, large: 1 }));
        assert!(v.contains(&Violation::Helper { decoder: 1, source: 0 }));

        let mut t = one_decoder(1, &[1.0]);
        t.decoders[0].encoders.push(5);
        assert!(matches!(t.validate()[0], Violation::BadIndex { .. }));
    }

    #[test]
    fn validation_is_order_independent() {
        let t = NsnTopology {
            sources: (0..3).map(|i| SourceSpec { name: i.to_string() }).collect(),
            encoders: (0..3).map(|i| EncoderSpec { source: i, rate: 1.0 }).collect(),
            decoders: vec![
                DecoderSpec { encoders: vec![0], demands: vec![0, 2] },
                DecoderSpec { encoders: vec![0, 1], demands: vec![1] },
                DecoderSpec { encoders: vec![1, 0], demands: vec![0, 1] },
            ],
            direct_edges: vec![[2, 0]],
        };
        let base = t.validate();
        assert!(!base.is_empty());
        // Reverse the decoder list and relabel the violations back.
        let mut r = t.clone();
        r.decoders.reverse();
        r.direct_edges = vec![[2, 2]];
        let back = |c: usize| 2 - c;
        let mut mapped: Vec<Violation> = r
            .validate()
            .into_iter()
            .map(|v| match v {
                Violation::DirectEdge { source, decoder } => Violation::DirectEdge { source, decoder: back(decoder) },
                Violation::DuplicateSourceSet { first, second } => Violation::DuplicateSourceSet {
                    first: back(first).min(back(second)),
                    second: back(first).max(back(second)),
                },
                Violation::DemandNotMonotone { small, large } => {
                    Violation::DemandNotMonotone { small: back(small), large: back(large) }
                }
                Violation::UnheardDemand { decoder, source } => Violation::UnheardDemand { decoder: back(decoder), source },
                Violation::Helper { decoder, source } => Violation::Helper { decoder: back(decoder), source },
                other => other,
            })
            .collect();
        mapped.sort();
        assert_eq!(mapped, base);
    }

    #[test]
    fn rate_check_examples() {
        let pmf = independent_uniform();
        assert!(rate_region_check(&one_decoder(2, &[1.0, 1.0]), &pmf).unwrap().achievable);
        let r = rate_region_check(&one_decoder(2, &[0.4, 1.0]), &pmf).unwrap();
        assert!(!r.achievable);
        let bad: Vec<_> = r.violated().collect();
        assert_eq!(bad.len(), 2);
        assert_eq!(bad[0].subset, vec![0]);
        assert!((bad[0].required - 1.0).abs() < 1e-12);

        let pmf = copies3();
        let r = rate_region_check(&one_decoder(3, &[1.0, 0.05, 0.05]), &pmf).unwrap();
        assert!(r.achievable);
        assert_eq!(r.inequalities.len(), 7);
        for i in &r.inequalities {
            let want = if i.subset.len() == 3 { 1.0 } else { 0.0 };
            assert!((i.required - want).abs() < 1e-12, "{i:?}");
        }
    }

    #[test]
    fn rate_check_refuses_helpers_and_wide_decoders() {
        let mut t = one_decoder(2, &[1.0, 1.0]);
        t.decoders[0].demands = vec![0];
        assert!(rate_region_check(&t, &independent_uniform()).is_err());
        let k = 17;
        let pmf = MultiPmf::new(vec![vec![0.0]; k], vec![1.0]).unwrap();
        assert!(rate_region_check(&one_decoder(k, &vec![1.0; k]), &pmf).is_err());
    }

    #[test]
    fn two_source_check_matches_pairwise_region() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let nx = rng.random_range(1..=3);
            let ny = rng.random_range(1..=3);
            let pmf = JointPmf::random(&mut rng, nx, ny).unwrap();
            let (rx, ry) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            let r = rate_region_check(&one_decoder(2, &[rx, ry]), &MultiPmf::from_joint(&pmf)).unwrap();
            assert_eq!(r.achievable, in_rate_region(rx, ry, &pmf).unwrap());
        }
    }

    #[test]
    fn conditional_entropies() {
        let pmf = JointPmf::dsbs(0.11).unwrap();
        let m = MultiPmf::from_joint(&pmf);
        let h = pmf.entropies();
        assert!((m.conditional_entropy(&[1], &[0]) - h.h_y_given_x).abs() < 1e-12);
        assert!((m.entropy(&[0, 1]) - h.h_xy).abs() < 1e-12);
        assert_eq!(m.marginal(&[1]).len(), 2);
    }

    #[test]
    fn sampling_matches_pairwise_sampler() {
        let pmf = JointPmf::dsbs(0.2).unwrap();
        let m = MultiPmf::from_joint(&pmf);
        for seed in 0..5 {
            let s = m.sample(20, seed).unwrap();
            let p = sample_pair(&pmf, 20, seed).unwrap();
            assert_eq!((s[0].as_slice(), s[1].as_slice()), (p.x(), p.y()));
        }
    }

    #[test]
    fn deterministic_sources_decode_trivially() {
        let pmf = MultiPmf::new(vec![vec![0.0, 1.0]; 3], {
            let mut p = vec![0.0; 8];
            p[5] = 1.0;
            p
        })
        .unwrap();
        let t = one_decoder(3, &[0.0, 0.0, 0.0]);
        let r = simulate_round(&t, &pmf, 6, 0.5, RoundSeeds { source: 1, encoders: 2 }, &RoundOptions::default()).unwrap();
        assert!(r.typical);
        assert!(r.decoders[0].correct);
    }

    #[test]
    fn empty_codes_are_ambiguous() {
        // Every sequence matches an empty syndrome.
        let pmf = copies3();
        let all = |n| {
            let mut v = Vec::new();
            for i in 0..(1usize << n) {
                v.push((0..n).map(|j| (i >> (n - 1 - j)) & 1).collect::<Vec<_>>());
            }
            v
        };
        let lists = vec![all(4), all(4), all(4)];
        let r = typical_search(&pmf, &[0, 1, 2], &lists, 0.5, 0);
        assert_eq!(
            r.outcome,
            Outcome::Multiple(vec![vec![0, 0, 1, 1]; 3], vec![vec![0, 1, 0, 1]; 3])
        );
        let r = min_entropy_search(&pmf, &[0, 1, 2], &lists, 0);
        assert_eq!(
            r.outcome,
            Outcome::Multiple(vec![vec![0; 4]; 3], vec![vec![0, 0, 0, 0], vec![0, 0, 0, 0], vec![1, 1, 1, 1]])
        );
    }

    #[test]
    fn two_source_round_matches_joint_decoder() {
        let pmf = JointPmf::dsbs(0.11).unwrap();
        let m = MultiPmf::from_joint(&pmf);
        let (n, eps) = (8, 0.5);
        let t = one_decoder(2, &[1.0, 0.5]);
        let q = Quantizer::new(n, eps).unwrap();
        let dist = CoefficientDist::default();
        for seed in 0..30 {
            let seeds = RoundSeeds { source: seed, encoders: seed + 100 };
            for (dec, opts_dec) in [(0, NsnDecoder::Typicality), (1, NsnDecoder::MinEntropy)] {
                let opts = RoundOptions { decoder: opts_dec, ..Default::default() };
                let r = simulate_round(&t, &m, n, eps, seeds, &opts).unwrap();
                let pair = sample_pair(&pmf, n, seed).unwrap();
                let d1 = draw_matrix(rows_for_rate(n, eps, 1.0).unwrap(), n, &dist, seeds.encoder_seed(0)).unwrap();
                let d2 = draw_matrix(rows_for_rate(n, eps, 0.5).unwrap(), n, &dist, seeds.encoder_seed(1)).unwrap();
                let u1 = encode_and_quantize(&d1, &symbol_values(pair.x(), pmf.x_alphabet()), &q).unwrap();
                let u2 = encode_and_quantize(&d2, &symbol_values(pair.y(), pmf.y_alphabet()), &q).unwrap();
                let lim = ExhaustiveLimits::default();
                let want = if dec == 0 {
                    joint_decode(&u1, &u2, &d1, &d2, &pmf, eps, &q, &lim).unwrap().outcome
                } else {
                    min_entropy_decode(&u1, &u2, &d1, &d2, &q, pmf.x_alphabet(), pmf.y_alphabet(), &lim)
                        .unwrap()
                        .outcome
                };
                let got = r.decoders[0].result.outcome.clone().map(|v| (v[0].clone(), v[1].clone()));
                assert_eq!(got, want);
            }
        }
    }

    #[test]
    fn refuses_large_searches() {
        let t = one_decoder(2, &[1.0, 1.0]);
        let r = simulate_round(&t, &independent_uniform(), 13, 0.5, RoundSeeds { source: 0, encoders: 0 }, &RoundOptions::default());
        assert!(matches!(r, Err(Error::SearchSpaceTooLarge { .. })));
    }

    #[test]
    fn json_forms() {
        let t = NsnTopology::from_json(
            r#"{"sources":[{"name":"a"},{"name":"b"}],
                "encoders":[{"source":0,"rate":1.0},{"source":1,"rate":0.5}],
                "decoders":[{"encoders":[0,1],"demands":[0,1]}]}"#,
        )
        .unwrap();
        assert!(t.validate().is_empty());
        let p = MultiPmf::from_json(r#"{"alphabets":[[0,1],[0,1]],"probs":[0.5,0,0,0.5]}"#).unwrap();
        assert_eq!(p.k(), 2);
        assert!(MultiPmf::from_json(r#"{"alphabets":[[0,1]],"probs":[0.5]}"#).is_err());
        assert!(MultiPmf::from_json(r#"{"alphabets":[[1,0]],"probs":[0.5,0.5]}"#).is_err());
    }
}
