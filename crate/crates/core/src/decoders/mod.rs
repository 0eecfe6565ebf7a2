//! Decoders for real Slepian-Wolf codes.
//!
//! Every decoder reports one of four outcomes. `NoneFound` and `Multiple`
//! are both decoding errors; `Inconclusive` only arises from budgeted
//! searches (the IP solver) and is never folded into either.

use serde::{Deserialize, Serialize};

use crate::enumerate::space_bits;
use crate::{Error, Result};

pub(crate) mod joint;
pub(crate) mod med;
mod multistage;
pub(crate) mod typicality;

pub use joint::joint_decode;
pub use med::min_entropy_decode;
pub use multistage::{
    extract_stage_vector, multistage_decode, multistage_encode, plan_stages, reconstruct_from_stages,
    remaining_positions, MultistageMessage, MultistageResult, StageDecoder, StageMessage,
    StagePayload, StagePlan, StageRecord, StageSpec,
};
pub use typicality::typicality_decode;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "solution", rename_all = "snake_case")]
pub enum Outcome<T> {
    Unique(T),
    NoneFound,
    /// The first two solutions met, in search order.
    Multiple(T, T),
    /// A node or time budget ran out before the verdict was settled.
    Inconclusive,
}

impl<T> Outcome<T> {
    pub fn is_unique(&self) -> bool {
        matches!(self, Outcome::Unique(_))
    }

    pub fn kind(&self) -> OutcomeKind {
        match self {
            Outcome::Unique(_) => OutcomeKind::Unique,
            Outcome::NoneFound => OutcomeKind::NoneFound,
            Outcome::Multiple(..) => OutcomeKind::Multiple,
            Outcome::Inconclusive => OutcomeKind::Inconclusive,
        }
    }

    pub fn unique(&self) -> Option<&T> {
        match self {
            Outcome::Unique(t) => Some(t),
            _ => None,
        }
    }

    pub fn map<U>(self, mut f: impl FnMut(T) -> U) -> Outcome<U> {
        match self {
            Outcome::Unique(t) => Outcome::Unique(f(t)),
            Outcome::NoneFound => Outcome::NoneFound,
            Outcome::Multiple(a, b) => Outcome::Multiple(f(a), f(b)),
            Outcome::Inconclusive => Outcome::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Unique,
    NoneFound,
    Multiple,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult<T> {
    pub outcome: Outcome<T>,
    pub candidates_examined: u64,
}

impl<T> DecodeResult<T> {
    pub(crate) fn from_solutions(mut found: Vec<T>, candidates_examined: u64) -> Self {
        let outcome = match found.len() {
            0 => Outcome::NoneFound,
            1 => Outcome::Unique(found.pop().expect("one solution")),
            _ => {
                let b = found.swap_remove(1);
                let a = found.swap_remove(0);
                Outcome::Multiple(a, b)
            }
        };
        Self {
            outcome,
            candidates_examined,
        }
    }
}

/// Caps on exhaustive searches, in bits of candidate space per source
/// (`n log2 |alphabet|`). Larger inputs are refused rather than run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhaustiveLimits {
    pub typicality_bits: u32,
    pub joint_bits: u32,
    pub med_bits: u32,
}

impl Default for ExhaustiveLimits {
    fn default() -> Self {
        Self {
            typicality_bits: 20,
            joint_bits: 10,
            med_bits: 10,
        }
    }
}

pub(crate) fn check_space(what: &'static str, card: usize, n: usize, limit_bits: u32) -> Result<()> {
    let needed_bits = space_bits(card, n);
    if needed_bits > f64::from(limit_bits) + 1e-9 {
        return Err(Error::SearchSpaceTooLarge {
            what,
            needed_bits,
            limit_bits,
        });
    }
    Ok(())
}

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}

pub(crate) fn check_symbols(what: &str, seq: &[usize], card: usize) -> Result<()> {
    if seq.iter().any(|&s| s >= card) {
        return Err(Error::InvalidSequence(format!("{what} has a symbol outside its alphabet")));
    }
    Ok(())
}
