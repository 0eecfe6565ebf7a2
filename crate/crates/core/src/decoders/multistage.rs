//! Multistage scheme for non-binary `Y`: `|Y| - 1` binary stages, each
//! marking where `y` equals the next alphabet symbol among the positions not
//! yet resolved.

use serde::{Deserialize, Serialize};

use super::{check_len, check_symbols, typicality_decode, ExhaustiveLimits, OutcomeKind};
use crate::encoder::{code_params, draw_matrix, encode_and_quantize, CoefficientDist, Quantizer};
use crate::ip::ip_decode;
use crate::seeds::sub_seed;
use crate::source_model::JointPmf;
use crate::{Error, Result};

/// One binary stage of the plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub index: usize,
    /// Index into the `Y` alphabet of the symbol marked by this stage.
    pub symbol: usize,
    /// `Pr{Y not in earlier stage symbols}`.
    pub weight: f64,
    /// Induced pmf over `X x {0,1}`; `None` when the weight is zero.
    pub pmf: Option<JointPmf>,
    /// `H(F | X)` under the induced pmf (0 for a skipped stage).
    pub conditional_entropy: f64,
    /// Typical-case stage length `min(n, n (weight + eps))`.
    pub expected_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePlan {
    pub n: usize,
    pub eps: f64,
    pub y_card: usize,
    pub stages: Vec<StageSpec>,
    /// The symbol left over after the last stage.
    pub last_symbol: usize,
}

impl StagePlan {
    /// `sum_i w_i H(F_i | X)`, which equals `H(Y | X)`.
    pub fn grouping_sum(&self) -> f64 {
        self.stages.iter().map(|s| s.weight * s.conditional_entropy).sum()
    }

    /// Symbols in stage order.
    pub fn order(&self) -> Vec<usize> {
        let mut o: Vec<usize> = self.stages.iter().map(|s| s.symbol).collect();
        o.push(self.last_symbol);
        o
    }

    /// Bits used to send one stage length.
    pub fn side_bits(&self) -> u64 {
        u64::from(usize::BITS - self.n.leading_zeros())
    }
}

/// Splits `Y` into binary stages, visiting the alphabet in increasing order.
///
/// Stage `i` has `p^i(x, 1) = Pr{X=x, Y=y_i} / w_i` and
/// `p^i(x, 0) = Pr{X=x, Y not in {y_1..y_i}} / w_i` with
/// `w_i = Pr{Y not in {y_1..y_(i-1)}}`.
pub fn plan_stages(pmf: &JointPmf, eps: f64, n: usize) -> Result<StagePlan> {
    if pmf.y_card() < 2 {
        return Err(Error::InvalidParameter("multistage coding needs |Y| >= 2".into()));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    let mut order: Vec<usize> = (0..pmf.y_card()).collect();
    order.sort_by(|&a, &b| pmf.y_alphabet()[a].total_cmp(&pmf.y_alphabet()[b]));

    let nx = pmf.x_card();
    // tail[x] = Pr{X=x, Y not yet staged}
    let mut tail: Vec<f64> = (0..nx).map(|a| pmf.probs()[a].iter().sum()).collect();
    let mut stages = Vec::with_capacity(order.len() - 1);
    for (i, &sym) in order[..order.len() - 1].iter().enumerate() {
        let weight: f64 = tail.iter().sum::<f64>().clamp(0.0, 1.0);
        let hit: Vec<f64> = (0..nx).map(|a| pmf.prob(a, sym)).collect();
        let rest: Vec<f64> = tail.iter().zip(&hit).map(|(t, h)| (t - h).max(0.0)).collect();
        let (stage_pmf, h) = if weight > 0.0 {
            let total: f64 = hit.iter().chain(&rest).sum();
            let probs = (0..nx).map(|a| vec![rest[a] / total, hit[a] / total]).collect();
            let p = JointPmf::new(pmf.x_alphabet().to_vec(), vec![0.0, 1.0], probs)?;
            let h = p.entropies().h_y_given_x;
            (Some(p), h)
        } else {
            (None, 0.0)
        };
        let expected_len = ((n as f64) * (weight + eps)).ceil().min(n as f64) as usize;
        stages.push(StageSpec {
            index: i,
            symbol: sym,
            weight,
            pmf: stage_pmf,
            conditional_entropy: h,
            expected_len,
        });
        tail = rest;
    }
    Ok(StagePlan {
        n,
        eps,
        y_card: pmf.y_card(),
        stages,
        last_symbol: order[order.len() - 1],
    })
}

/// Positions still unresolved when stage `i` starts, in increasing order.
pub fn remaining_positions(y: &[usize], plan: &StagePlan, i: usize) -> Vec<usize> {
    let done: Vec<usize> = plan.stages[..i.min(plan.stages.len())].iter().map(|s| s.symbol).collect();
    (0..y.len()).filter(|&j| !done.contains(&y[j])).collect()
}

/// Binary vector of stage `i`: over the unresolved positions, 1 where `y`
/// equals the stage symbol.
pub fn extract_stage_vector(y: &[usize], plan: &StagePlan, i: usize) -> Vec<usize> {
    let sym = plan.stages[i].symbol;
    remaining_positions(y, plan, i)
        .into_iter()
        .map(|j| usize::from(y[j] == sym))
        .collect()
}

/// Inverse of [`extract_stage_vector`] over all stages.
pub fn reconstruct_from_stages(plan: &StagePlan, n: usize, vectors: &[Vec<usize>]) -> Result<Vec<usize>> {
    check_len("stage vector count", plan.stages.len(), vectors.len())?;
    let mut y = vec![plan.last_symbol; n];
    let mut remaining: Vec<usize> = (0..n).collect();
    for (stage, f) in plan.stages.iter().zip(vectors) {
        check_len("stage vector length", remaining.len(), f.len())?;
        check_symbols("stage vector", f, 2)?;
        let mut next = Vec::with_capacity(remaining.len());
        for (&pos, &bit) in remaining.iter().zip(f) {
            if bit == 1 {
                y[pos] = stage.symbol;
            } else {
                next.push(pos);
            }
        }
        remaining = next;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StagePayload {
    /// No unresolved positions remain.
    Empty,
    /// A single position, sent uncoded.
    Raw { bit: u8 },
    Coded { m: usize, matrix_seed: u64, u_hat: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMessage {
    /// Stage length `n(i)`, sent as side information.
    pub len: usize,
    pub payload: StagePayload,
    pub payload_bits: u64,
    pub side_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultistageMessage {
    pub stages: Vec<StageMessage>,
}

impl MultistageMessage {
    pub fn total_bits(&self) -> u64 {
        self.stages.iter().map(|s| s.payload_bits + s.side_bits).sum()
    }
}

/// Encodes `y` stage by stage. Stage `i` uses a fresh matrix seeded from
/// `sub_seed(seed, "stage", i)` with rows set by `code_params` at the actual
/// stage length and the stage's conditional entropy.
pub fn multistage_encode(
    y: &[usize],
    plan: &StagePlan,
    dist: &CoefficientDist,
    seed: u64,
) -> Result<MultistageMessage> {
    check_len("y length", plan.n, y.len())?;
    check_symbols("y", y, plan.y_card)?;
    let mut out = Vec::with_capacity(plan.stages.len());
    for (i, stage) in plan.stages.iter().enumerate() {
        let f = extract_stage_vector(y, plan, i);
        let (payload, payload_bits) = match f.len() {
            0 => (StagePayload::Empty, 0),
            1 => (StagePayload::Raw { bit: f[0] as u8 }, 1),
            len => {
                // A zero-weight stage cannot occur for typical y; code it at
                // rate 1 so the message stays well formed.
                let h = if stage.pmf.is_some() { stage.conditional_entropy } else { 1.0 };
                let params = code_params(len, plan.eps, h)?;
                let matrix_seed = sub_seed(seed, "stage", i as u64);
                let d = draw_matrix(params.m, len, dist, matrix_seed)?;
                let vals: Vec<f64> = f.iter().map(|&b| b as f64).collect();
                let u_hat = encode_and_quantize(&d, &vals, &params.quantizer)?;
                (
                    StagePayload::Coded {
                        m: params.m,
                        matrix_seed,
                        u_hat,
                    },
                    params.total_bits,
                )
            }
        };
        out.push(StageMessage {
            len: f.len(),
            payload,
            payload_bits,
            side_bits: plan.side_bits(),
        });
    }
    Ok(MultistageMessage { stages: out })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageDecoder {
    Typicality,
    Ip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub symbol: usize,
    pub len: usize,
    pub payload_bits: u64,
    pub verdict: OutcomeKind,
    pub candidates_examined: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultistageResult {
    /// `Unique` only if every stage decoded uniquely.
    pub verdict: OutcomeKind,
    pub y: Option<Vec<usize>>,
    pub failed_stage: Option<usize>,
    pub stages: Vec<StageRecord>,
}

/// Decodes a [`MultistageMessage`] given side information `x`. The first
/// stage that does not decode uniquely ends the run with that stage's
/// verdict. A stage whose announced length disagrees with the positions
/// left by earlier stages is reported as `NoneFound`.
#[allow(clippy::too_many_arguments)]
pub fn multistage_decode(
    x: &[usize],
    msg: &MultistageMessage,
    plan: &StagePlan,
    dist: &CoefficientDist,
    decoder: StageDecoder,
    limits: &ExhaustiveLimits,
    node_budget: Option<u64>,
) -> Result<MultistageResult> {
    check_len("x length", plan.n, x.len())?;
    check_len("stage message count", plan.stages.len(), msg.stages.len())?;
    let mut remaining: Vec<usize> = (0..plan.n).collect();
    let mut vectors = Vec::with_capacity(plan.stages.len());
    let mut records = Vec::with_capacity(plan.stages.len());
    for (i, (stage, sm)) in plan.stages.iter().zip(&msg.stages).enumerate() {
        let mut record = StageRecord {
            stage: i,
            symbol: stage.symbol,
            len: sm.len,
            payload_bits: sm.payload_bits,
            verdict: OutcomeKind::Unique,
            candidates_examined: 0,
        };
        let decoded: std::result::Result<Vec<usize>, OutcomeKind> = if sm.len != remaining.len() {
            Err(OutcomeKind::NoneFound)
        } else {
            match &sm.payload {
                StagePayload::Empty => Ok(Vec::new()),
                StagePayload::Raw { bit } if sm.len == 1 && *bit <= 1 => Ok(vec![usize::from(*bit)]),
                StagePayload::Raw { .. } => {
                    return Err(Error::InvalidParameter(format!("stage {i}: malformed raw payload")));
                }
                StagePayload::Coded { m, matrix_seed, u_hat } => match &stage.pmf {
                    None => Err(OutcomeKind::NoneFound),
                    Some(p) => {
                        let len = sm.len;
                        let d = draw_matrix(*m, len, dist, *matrix_seed)?;
                        let q = Quantizer::new(len, plan.eps)?;
                        let xs: Vec<usize> = remaining.iter().map(|&j| x[j]).collect();
                        let r = match decoder {
                            StageDecoder::Typicality => typicality_decode(&xs, u_hat, &d, p, plan.eps, &q, limits)?,
                            StageDecoder::Ip => ip_decode(&xs, u_hat, &d, p, plan.eps, &q, node_budget)?,
                        };
                        record.candidates_examined = r.candidates_examined;
                        match r.outcome {
                            super::Outcome::Unique(f) => Ok(f),
                            other => Err(other.kind()),
                        }
                    }
                },
            }
        };
        match decoded {
            Ok(f) => {
                remaining = remaining.iter().zip(&f).filter(|(_, &b)| b == 0).map(|(&p, _)| p).collect();
                vectors.push(f);
                records.push(record);
            }
            Err(kind) => {
                record.verdict = kind;
                records.push(record);
                return Ok(MultistageResult {
                    verdict: kind,
                    y: None,
                    failed_stage: Some(i),
                    stages: records,
                });
            }
        }
    }
    let y = reconstruct_from_stages(plan, plan.n, &vectors)?;
    Ok(MultistageResult {
        verdict: OutcomeKind::Unique,
        y: Some(y),
        failed_stage: None,
        stages: records,
    })
}

#[cfg(test)]
mod tests {
    use std::ops::ControlFlow;

    use super::*;
    use crate::decoders::Outcome;
    use crate::enumerate::for_each_vector;
    use crate::source_model::sample_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn abc_pmf() -> JointPmf {
        JointPmf::new(vec![0.0], vec![0.0, 1.0, 2.0], vec![vec![1.0 / 3.0; 3]]).unwrap()
    }

    #[test]
    fn uniform_ternary_stage_pmfs() {
        let plan = plan_stages(&abc_pmf(), 0.1, 9).unwrap();
        assert_eq!(plan.stages.len(), 2);
        let p1 = plan.stages[0].pmf.as_ref().unwrap();
        let p2 = plan.stages[1].pmf.as_ref().unwrap();
        assert!((p1.prob(0, 1) - 1.0 / 3.0).abs() < 1e-12);
        assert!((p2.prob(0, 1) - 0.5).abs() < 1e-12);
        assert!((plan.stages[1].weight - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(plan.order(), vec![0, 1, 2]);
    }

    #[test]
    fn binary_plan_is_a_relabeling() {
        let pmf = JointPmf::dsbs(0.2).unwrap();
        let plan = plan_stages(&pmf, 0.1, 10).unwrap();
        assert_eq!(plan.stages.len(), 1);
        let p = plan.stages[0].pmf.as_ref().unwrap();
        for a in 0..2 {
            assert!((p.prob(a, 1) - pmf.prob(a, 0)).abs() < 1e-15);
            assert!((p.prob(a, 0) - pmf.prob(a, 1)).abs() < 1e-15);
        }
        assert!((plan.grouping_sum() - pmf.entropies().h_y_given_x).abs() < 1e-12);
    }

    #[test]
    fn grouping_identity_on_random_pmfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 0..200 {
            let ny = 3 + k % 3;
            let nx = rng.random_range(1..=4);
            let pmf = JointPmf::random(&mut rng, nx, ny).unwrap();
            let plan = plan_stages(&pmf, 0.1, 10).unwrap();
            assert_eq!(plan.stages.len(), ny - 1);
            let h = pmf.entropies().h_y_given_x;
            assert!((plan.grouping_sum() - h).abs() < 1e-9, "{} vs {h}", plan.grouping_sum());
        }
    }

    #[test]
    fn stages_follow_alphabet_order() {
        let pmf = JointPmf::new(vec![0.0], vec![-1.0, 2.0, 3.0], vec![vec![0.2, 0.3, 0.5]]).unwrap();
        let plan = plan_stages(&pmf, 0.1, 4).unwrap();
        assert_eq!(plan.order(), vec![0, 1, 2]);
        assert!((plan.stages[1].weight - 0.8).abs() < 1e-12);
    }

    #[test]
    fn zero_mass_symbol_gives_skipped_stage() {
        let pmf = JointPmf::new(vec![0.0], vec![0.0, 1.0, 2.0], vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let plan = plan_stages(&pmf, 0.1, 4).unwrap();
        assert!(plan.stages[1].pmf.is_none());
        assert_eq!(plan.stages[1].weight, 0.0);
        let y = vec![0; 4];
        assert_eq!(extract_stage_vector(&y, &plan, 0), vec![1; 4]);
        assert!(extract_stage_vector(&y, &plan, 1).is_empty());
    }

    #[test]
    fn stage_vector_examples() {
        let plan = plan_stages(&abc_pmf(), 0.1, 4).unwrap();
        let y = [0, 1, 0, 2];
        assert_eq!(extract_stage_vector(&y, &plan, 0), vec![1, 0, 1, 0]);
        assert_eq!(remaining_positions(&y, &plan, 1), vec![1, 3]);
        assert_eq!(extract_stage_vector(&y, &plan, 1), vec![1, 0]);
    }

    #[test]
    fn reconstruction_inverts_extraction() {
        for ny in 2..=4 {
            let pmf = JointPmf::uniform(1, ny).unwrap();
            for n in 0..=8usize {
                if ny.pow(n as u32) > 70_000 {
                    continue;
                }
                let plan = plan_stages(&pmf, 0.1, n).unwrap();
                for_each_vector::<()>(ny, n, |y| {
                    let vs: Vec<Vec<usize>> = (0..plan.stages.len()).map(|i| extract_stage_vector(y, &plan, i)).collect();
                    assert_eq!(reconstruct_from_stages(&plan, n, &vs).unwrap(), y);
                    ControlFlow::Continue(())
                });
            }
        }
    }

    fn ternary_pmf() -> JointPmf {
        JointPmf::new(
            vec![0.0, 1.0],
            vec![0.0, 1.0, 2.0],
            vec![vec![0.4, 0.05, 0.05], vec![0.05, 0.05, 0.4]],
        )
        .unwrap()
    }

    #[test]
    fn end_to_end_ternary_recovers_y() {
        let pmf = ternary_pmf();
        let (n, eps) = (9, 0.9);
        let plan = plan_stages(&pmf, eps, n).unwrap();
        let dist = CoefficientDist::default();
        let mut ok = 0;
        for seed in 0..60 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let msg = multistage_encode(pair.y(), &plan, &dist, seed).unwrap();
            for decoder in [StageDecoder::Typicality, StageDecoder::Ip] {
                let r = multistage_decode(pair.x(), &msg, &plan, &dist, decoder, &ExhaustiveLimits::default(), None)
                    .unwrap();
                if r.verdict == OutcomeKind::Unique {
                    assert_eq!(r.y.as_deref(), Some(pair.y()));
                    ok += 1;
                }
            }
        }
        assert!(ok > 0);
    }

    #[test]
    fn ip_and_exhaustive_stages_agree() {
        let pmf = ternary_pmf();
        let (n, eps) = (10, 0.6);
        let plan = plan_stages(&pmf, eps, n).unwrap();
        let dist = CoefficientDist::default();
        for seed in 0..80 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let msg = multistage_encode(pair.y(), &plan, &dist, seed).unwrap();
            let a = multistage_decode(pair.x(), &msg, &plan, &dist, StageDecoder::Typicality, &ExhaustiveLimits::default(), None).unwrap();
            let b = multistage_decode(pair.x(), &msg, &plan, &dist, StageDecoder::Ip, &ExhaustiveLimits::default(), None).unwrap();
            assert_eq!((a.verdict, a.y, a.failed_stage), (b.verdict, b.y, b.failed_stage));
        }
    }

    #[test]
    fn binary_matches_direct_decoder_on_stage_vector() {
        let pmf = JointPmf::dsbs(0.15).unwrap();
        let (n, eps) = (10, 0.5);
        let plan = plan_stages(&pmf, eps, n).unwrap();
        let sp = plan.stages[0].pmf.as_ref().unwrap();
        let dist = CoefficientDist::default();
        for seed in 0..50 {
            let pair = sample_pair(&pmf, n, seed).unwrap();
            let msg = multistage_encode(pair.y(), &plan, &dist, seed).unwrap();
            let r = multistage_decode(pair.x(), &msg, &plan, &dist, StageDecoder::Typicality, &ExhaustiveLimits::default(), None)
                .unwrap();
            let StagePayload::Coded { m, matrix_seed, u_hat } = &msg.stages[0].payload else {
                panic!("binary stage of full length is coded")
            };
            let d = draw_matrix(*m, n, &dist, *matrix_seed).unwrap();
            let q = Quantizer::new(n, eps).unwrap();
            let direct = typicality_decode(pair.x(), u_hat, &d, sp, eps, &q, &ExhaustiveLimits::default()).unwrap();
            assert_eq!(r.verdict, direct.outcome.kind());
            if let Outcome::Unique(f) = direct.outcome {
                let y: Vec<usize> = f.iter().map(|&b| 1 - b).collect();
                assert_eq!(r.y, Some(y));
            }
        }
    }

    #[test]
    fn first_stage_ambiguity_is_reported() {
        let pmf = ternary_pmf();
        let plan = plan_stages(&pmf, 5.0, 6).unwrap();
        let dist = CoefficientDist::default();
        let pair = sample_pair(&pmf, 6, 1).unwrap();
        let mut msg = multistage_encode(pair.y(), &plan, &dist, 1).unwrap();
        // Strip all rows: the huge eps makes every stage vector typical.
        if let StagePayload::Coded { m, u_hat, .. } = &mut msg.stages[0].payload {
            *m = 0;
            u_hat.clear();
        }
        let r = multistage_decode(pair.x(), &msg, &plan, &dist, StageDecoder::Typicality, &ExhaustiveLimits::default(), None)
            .unwrap();
        assert_eq!((r.verdict, r.failed_stage), (OutcomeKind::Multiple, Some(0)));
    }

    #[test]
    fn length_mismatch_is_a_decoding_failure() {
        let pmf = ternary_pmf();
        let plan = plan_stages(&pmf, 0.5, 6).unwrap();
        let dist = CoefficientDist::default();
        let pair = sample_pair(&pmf, 6, 4).unwrap();
        let mut msg = multistage_encode(pair.y(), &plan, &dist, 4).unwrap();
        msg.stages[0].len += 1;
        let r = multistage_decode(pair.x(), &msg, &plan, &dist, StageDecoder::Typicality, &ExhaustiveLimits::default(), None)
            .unwrap();
        assert_eq!((r.verdict, r.failed_stage), (OutcomeKind::NoneFound, Some(0)));
    }

    #[test]
    fn bit_accounting() {
        let pmf = abc_pmf();
        let plan = plan_stages(&pmf, 0.5, 4).unwrap();
        assert_eq!(plan.side_bits(), 3);
        // y resolves in stage 1 except one position: stage 2 is raw.
        let msg = multistage_encode(&[0, 0, 0, 2], &plan, &CoefficientDist::default(), 0).unwrap();
        assert_eq!(msg.stages[1].payload, StagePayload::Raw { bit: 0 });
        assert_eq!(msg.total_bits(), msg.stages[0].payload_bits + 1 + 6);
        let msg = multistage_encode(&[0; 4], &plan, &CoefficientDist::default(), 0).unwrap();
        assert_eq!(msg.stages[1].payload, StagePayload::Empty);
    }
}
