//! Integer-program form of the one-sided typicality decoder for binary `Y`,
//! and an exact branch-and-bound feasibility solver.
//!
//! # JSON form
//!
//! ```json
//! {
//!   "n_vars": 3,
//!   "domains": [[0, 1], [0, 1], [0, 1]],
//!   "rows": [
//!     {"kind": "typicality", "coeffs": [1, 1, 0], "lower": 1, "upper": 1,
//!      "lower_strict": false, "upper_strict": false},
//!     {"kind": "syndrome", "coeffs": [1, -1, 1], "lower": -0.5, "upper": 0.5,
//!      "lower_strict": false, "upper_strict": true, "cell": 3}
//!   ]
//! }
//! ```
//!
//! `domains` may be omitted (every variable is then binary). A row is
//! satisfied when `lower (<|<=) coeffs . v (<|<=) upper`; a `null` bound is
//! absent. `cell` is informational.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::decoders::{check_len, check_symbols, DecodeResult, Outcome};
use crate::encoder::{EncodingMatrix, Quantizer};
use crate::source_model::{cell_is_typical, JointPmf};
use crate::{Error, Result};

const MAX_VARS: usize = 1 << 16;
const MAX_DOMAIN: usize = 64;
const MAX_ABS_VALUE: i64 = 1 << 20;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Typicality,
    Syndrome,
    NoGood,
    #[default]
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpRow {
    #[serde(default)]
    pub kind: RowKind,
    pub coeffs: Vec<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    #[serde(default)]
    pub lower_strict: bool,
    #[serde(default)]
    pub upper_strict: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<u64>,
}

impl IpRow {
    fn closed(kind: RowKind, coeffs: Vec<f64>, lower: Option<f64>, upper: Option<f64>) -> Self {
        Self {
            kind,
            coeffs,
            lower,
            upper,
            lower_strict: false,
            upper_strict: false,
            cell: None,
        }
    }

    /// Row that no assignment satisfies.
    fn infeasible(kind: RowKind, n_vars: usize) -> Self {
        Self::closed(kind, vec![0.0; n_vars], Some(1.0), Some(0.0))
    }

    pub fn satisfied_by(&self, value: f64) -> bool {
        let lo_ok = match self.lower {
            None => true,
            Some(l) if self.lower_strict => value > l,
            Some(l) => value >= l,
        };
        let hi_ok = match self.upper {
            None => true,
            Some(u) if self.upper_strict => value < u,
            Some(u) => value <= u,
        };
        lo_ok && hi_ok
    }

    /// Whether some value in `[lo, hi]` (widened by `slack`) could satisfy
    /// the bounds.
    fn reachable(&self, lo: f64, hi: f64, slack: f64) -> bool {
        let lower_ok = match self.lower {
            None => true,
            Some(l) if self.lower_strict => hi + slack > l,
            Some(l) => hi + slack >= l,
        };
        let upper_ok = match self.upper {
            None => true,
            Some(u) if self.upper_strict => lo - slack < u,
            Some(u) => lo - slack <= u,
        };
        lower_ok && upper_ok
    }

    /// `coeffs . v`, summed in index order.
    pub fn evaluate(&self, v: &[i64]) -> f64 {
        self.coeffs.iter().zip(v).map(|(c, &x)| c * x as f64).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIpInstance")]
pub struct IpInstance {
    pub n_vars: usize,
    /// Allowed values per variable, strictly increasing.
    pub domains: Vec<Vec<i64>>,
    pub rows: Vec<IpRow>,
}

#[derive(Deserialize)]
struct RawIpInstance {
    n_vars: usize,
    #[serde(default)]
    domains: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    rows: Vec<IpRow>,
}

impl TryFrom<RawIpInstance> for IpInstance {
    type Error = Error;

    fn try_from(raw: RawIpInstance) -> Result<Self> {
        let domains = raw.domains.unwrap_or_else(|| vec![vec![0, 1]; raw.n_vars]);
        IpInstance::new(raw.n_vars, domains, raw.rows)
    }
}

impl IpInstance {
    pub fn new(n_vars: usize, domains: Vec<Vec<i64>>, rows: Vec<IpRow>) -> Result<Self> {
        if n_vars > MAX_VARS {
            return Err(Error::InvalidParameter(format!("too many variables ({n_vars})")));
        }
        check_len("domain count", n_vars, domains.len())?;
        for (j, d) in domains.iter().enumerate() {
            if d.is_empty() || d.len() > MAX_DOMAIN {
                return Err(Error::InvalidParameter(format!(
                    "domain of variable {j} must have 1..={MAX_DOMAIN} values"
                )));
            }
            if d.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidParameter(format!(
                    "domain of variable {j} is not strictly increasing"
                )));
            }
            if d.iter().any(|v| v.abs() > MAX_ABS_VALUE) {
                return Err(Error::InvalidParameter(format!("domain of variable {j} has a huge value")));
            }
        }
        for (r, row) in rows.iter().enumerate() {
            check_len("row coefficient count", n_vars, row.coeffs.len())?;
            let finite = row.coeffs.iter().all(|c| c.is_finite())
                && row.lower.is_none_or(f64::is_finite)
                && row.upper.is_none_or(f64::is_finite);
            if !finite {
                return Err(Error::InvalidParameter(format!("row {r} has a non-finite entry")));
            }
        }
        Ok(Self {
            n_vars,
            domains,
            rows,
        })
    }

    pub fn binary(n_vars: usize, rows: Vec<IpRow>) -> Result<Self> {
        Self::new(n_vars, vec![vec![0, 1]; n_vars], rows)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn is_feasible(&self, v: &[i64]) -> bool {
        v.len() == self.n_vars
            && v.iter().zip(&self.domains).all(|(x, d)| d.binary_search(x).is_ok())
            && self.rows.iter().all(|r| r.satisfied_by(r.evaluate(v)))
    }

    /// Default branching order: decreasing total `|coef|`, ties by index.
    pub fn default_order(&self) -> Vec<usize> {
        let weight: Vec<f64> = (0..self.n_vars)
            .map(|j| self.rows.iter().map(|r| r.coeffs[j].abs()).sum())
            .collect();
        let mut order: Vec<usize> = (0..self.n_vars).collect();
        order.sort_by(|&a, &b| weight[b].total_cmp(&weight[a]).then(a.cmp(&b)));
        order
    }
}

/// Adds the no-good row that cuts off exactly the binary point `solution`.
pub fn exclude_binary_solution(ip: &mut IpInstance, solution: &[i64]) -> Result<()> {
    check_len("solution length", ip.n_vars, solution.len())?;
    if solution.iter().any(|&v| v != 0 && v != 1) {
        return Err(Error::InvalidParameter("no-good cuts need a 0/1 point".into()));
    }
    // sum_{s_j=0} v_j - sum_{s_j=1} v_j >= 1 - |{s_j=1}|
    let ones = solution.iter().filter(|&&v| v == 1).count();
    let coeffs = solution.iter().map(|&v| if v == 1 { -1.0 } else { 1.0 }).collect();
    ip.rows.push(IpRow::closed(RowKind::NoGood, coeffs, Some(1.0 - ones as f64), None));
    Ok(())
}

/// Integer preimage `{t : lo <= t <= hi, q.index(t) == k}` as a closed range.
fn integer_preimage(q: &Quantizer, k: u64, lo: i64, hi: i64) -> Option<(i64, i64)> {
    // q.index is non-decreasing, so both ends are found by bisection.
    let first_at_least = |target: u64| -> i64 {
        let (mut a, mut b) = (lo, hi + 1);
        while a < b {
            let mid = a + (b - a) / 2;
            if q.index(mid as f64) >= target {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        a
    };
    let start = first_at_least(k);
    let end = first_at_least(k + 1) - 1;
    (start <= end && start <= hi).then_some((start, end))
}

/// Builds the integer program whose 0/1 solutions are exactly the `y` that are
/// strongly `eps`-typical with `x` and reproduce `u_hat`.
///
/// `Y` must be the alphabet `{0, 1}`. Typicality becomes one row per
/// `a` in `X` on the number of ones in `S_a = {i : x_i = a}`; the admissible
/// counts are found by evaluating the typicality predicate on both cells
/// `(a, 0)` and `(a, 1)`. For an integer matrix each syndrome row is the
/// exact integer preimage of its cell; otherwise the half-open cell
/// `[low, low + step)`, open-ended at the two clamped extreme cells.
pub fn build_ip(
    x: &[usize],
    u_hat: &[u64],
    d: &EncodingMatrix,
    pmf: &JointPmf,
    eps: f64,
    q: &Quantizer,
) -> Result<IpInstance> {
    let n = x.len();
    if pmf.y_alphabet() != [0.0, 1.0] {
        return Err(Error::InvalidParameter(
            "integer program needs the binary alphabet {0, 1}; decompose into stages first".into(),
        ));
    }
    check_len("x length vs matrix columns", d.cols(), n)?;
    check_len("syndrome length vs matrix rows", d.rows(), u_hat.len())?;
    check_len("quantizer block length", n, q.n)?;
    check_symbols("x", x, pmf.x_card())?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }

    let thr = pmf.cell_threshold(eps);
    let mut rows = Vec::with_capacity(pmf.x_card() + d.rows());
    for a in 0..pmf.x_card() {
        let coeffs: Vec<f64> = x.iter().map(|&s| f64::from(u8::from(s == a))).collect();
        let size = x.iter().filter(|&&s| s == a).count();
        let ok: Vec<usize> = (0..=size)
            .filter(|&s| {
                cell_is_typical(s, n, pmf.prob(a, 1), thr) && cell_is_typical(size - s, n, pmf.prob(a, 0), thr)
            })
            .collect();
        rows.push(match (ok.first(), ok.last()) {
            (Some(&lo), Some(&hi)) => {
                debug_assert_eq!(hi - lo + 1, ok.len(), "typical counts form an interval");
                IpRow::closed(RowKind::Typicality, coeffs, Some(lo as f64), Some(hi as f64))
            }
            _ => IpRow::infeasible(RowKind::Typicality, n),
        });
    }

    for (i, &k) in u_hat.iter().enumerate() {
        let coeffs = d.row(i).to_vec();
        let mut row = if k >= q.levels {
            IpRow::infeasible(RowKind::Syndrome, n)
        } else if let Some(ints) = d.int_row(i) {
            let lo: i64 = ints.iter().filter(|&&c| c < 0).sum();
            let hi: i64 = ints.iter().filter(|&&c| c > 0).sum();
            match integer_preimage(q, k, lo, hi) {
                Some((a, b)) => IpRow::closed(RowKind::Syndrome, coeffs, Some(a as f64), Some(b as f64)),
                None => IpRow::infeasible(RowKind::Syndrome, n),
            }
        } else {
            let (low, high) = q.cell(k);
            IpRow {
                kind: RowKind::Syndrome,
                coeffs,
                lower: (k > 0).then_some(low),
                upper: (k + 1 < q.levels).then_some(high),
                lower_strict: false,
                upper_strict: true,
                cell: None,
            }
        };
        row.cell = Some(k);
        rows.push(row);
    }
    IpInstance::binary(n, rows)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Stop once this many solutions are found (1 or 2).
    pub stop_after: usize,
    /// Maximum number of search nodes, root included.
    pub node_budget: Option<u64>,
    /// Branching order override; must be a permutation of the variables.
    pub var_order: Option<Vec<usize>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            stop_after: 2,
            node_budget: Some(DEFAULT_NODE_BUDGET),
            var_order: None,
        }
    }
}

pub const DEFAULT_NODE_BUDGET: u64 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// The search finished or reached `stop_after`.
    Complete,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// 0, 1, or 2 (meaning "at least two" when `stop_after` is 2).
    pub solutions_found: usize,
    pub witnesses: Vec<Vec<i64>>,
    pub nodes_explored: u64,
    pub status: SolveStatus,
    pub wall_time_secs: f64,
}

impl SolveReport {
    /// Decoding verdict. An exhausted budget is `Inconclusive` unless two
    /// solutions were already found.
    pub fn outcome(&self) -> Outcome<Vec<i64>> {
        match (self.status, self.witnesses.len()) {
            (_, n) if n >= 2 => Outcome::Multiple(self.witnesses[0].clone(), self.witnesses[1].clone()),
            (SolveStatus::BudgetExhausted, _) => Outcome::Inconclusive,
            (SolveStatus::Complete, 1) => Outcome::Unique(self.witnesses[0].clone()),
            (SolveStatus::Complete, _) => Outcome::NoneFound,
        }
    }
}

pub fn solve_count(ip: &IpInstance, stop_after: usize, budget: Option<u64>) -> Result<SolveReport> {
    solve(
        ip,
        &SolveOptions {
            stop_after,
            node_budget: budget,
            var_order: None,
        },
    )
}

pub fn solve(ip: &IpInstance, opts: &SolveOptions) -> Result<SolveReport> {
    solve_observed(ip, opts, &mut |_| {})
}

/// As [`solve`], calling `on_prune` with the partial assignment (in variable
/// order, `None` for free variables) every time a subtree is cut.
pub fn solve_observed(
    ip: &IpInstance,
    opts: &SolveOptions,
    on_prune: &mut dyn FnMut(&[Option<i64>]),
) -> Result<SolveReport> {
    if opts.stop_after == 0 {
        return Err(Error::InvalidParameter("stop_after must be at least 1".into()));
    }
    let order = match &opts.var_order {
        Some(o) => {
            let mut seen = vec![false; ip.n_vars];
            if o.len() != ip.n_vars || o.iter().any(|&j| j >= ip.n_vars || std::mem::replace(&mut seen[j], true)) {
                return Err(Error::InvalidParameter("var_order is not a permutation".into()));
            }
            o.clone()
        }
        None => ip.default_order(),
    };
    let start = Instant::now();
    let mut search = Search::new(ip, order, opts, on_prune);
    search.run();
    let Search {
        witnesses,
        nodes,
        exhausted,
        ..
    } = search;
    for w in &witnesses {
        assert!(ip.is_feasible(w), "solver returned an infeasible witness");
    }
    Ok(SolveReport {
        solutions_found: witnesses.len(),
        witnesses,
        nodes_explored: nodes,
        status: if exhausted {
            SolveStatus::BudgetExhausted
        } else {
            SolveStatus::Complete
        },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

struct Search<'a> {
    ip: &'a IpInstance,
    order: Vec<usize>,
    /// Nonzero `(row, coef)` pairs per variable.
    column: Vec<Vec<(usize, f64)>>,
    fixed: Vec<f64>,
    rem_min: Vec<f64>,
    rem_max: Vec<f64>,
    slack: Vec<f64>,
    assignment: Vec<Option<i64>>,
    witnesses: Vec<Vec<i64>>,
    nodes: u64,
    stop_after: usize,
    budget: u64,
    exhausted: bool,
    on_prune: &'a mut dyn FnMut(&[Option<i64>]),
}

impl<'a> Search<'a> {
    fn new(
        ip: &'a IpInstance,
        order: Vec<usize>,
        opts: &SolveOptions,
        on_prune: &'a mut dyn FnMut(&[Option<i64>]),
    ) -> Self {
        let nr = ip.rows.len();
        let mut column = vec![Vec::new(); ip.n_vars];
        let mut rem_min = vec![0.0; nr];
        let mut rem_max = vec![0.0; nr];
        let mut slack = vec![0.0; nr];
        for (r, row) in ip.rows.iter().enumerate() {
            let mut scale = 1.0;
            for (j, &c) in row.coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                column[j].push((r, c));
                let (lo, hi) = contribution_range(c, &ip.domains[j]);
                rem_min[r] += lo;
                rem_max[r] += hi;
                scale += lo.abs().max(hi.abs());
            }
            // Partial sums are accumulated in a different order from the
            // leaf check, so pruning is only allowed beyond rounding noise.
            slack[r] = scale * 1e-12;
        }
        Self {
            ip,
            order,
            column,
            fixed: vec![0.0; nr],
            rem_min,
            rem_max,
            slack,
            assignment: vec![None; ip.n_vars],
            witnesses: Vec::new(),
            nodes: 0,
            stop_after: opts.stop_after,
            budget: opts.node_budget.unwrap_or(u64::MAX),
            exhausted: false,
            on_prune,
        }
    }

    fn consistent(&self) -> bool {
        self.ip.rows.iter().enumerate().all(|(r, row)| {
            row.reachable(
                self.fixed[r] + self.rem_min[r],
                self.fixed[r] + self.rem_max[r],
                self.slack[r],
            )
        })
    }

    fn done(&self) -> bool {
        self.exhausted || self.witnesses.len() >= self.stop_after
    }

    /// Counts a node; false once the budget is spent.
    fn enter(&mut self) -> bool {
        if self.nodes >= self.budget {
            self.exhausted = true;
            return false;
        }
        self.nodes += 1;
        true
    }

    fn run(&mut self) {
        if self.enter() {
            self.visit(0);
        }
    }

    fn visit(&mut self, depth: usize) {
        if !self.consistent() {
            (self.on_prune)(&self.assignment);
            return;
        }
        if depth == self.order.len() {
            let v: Vec<i64> = self.assignment.iter().map(|a| a.expect("all assigned")).collect();
            if self.ip.rows.iter().all(|r| r.satisfied_by(r.evaluate(&v))) {
                self.witnesses.push(v);
            } else {
                (self.on_prune)(&self.assignment);
            }
            return;
        }
        let j = self.order[depth];
        let ip = self.ip;
        for &value in &ip.domains[j] {
            if self.done() || !self.enter() {
                return;
            }
            self.assign(j, value);
            self.visit(depth + 1);
            self.unassign(j, value);
        }
    }

    fn assign(&mut self, j: usize, value: i64) {
        for &(r, c) in &self.column[j] {
            let (lo, hi) = contribution_range(c, &self.ip.domains[j]);
            self.rem_min[r] -= lo;
            self.rem_max[r] -= hi;
            self.fixed[r] += c * value as f64;
        }
        self.assignment[j] = Some(value);
    }

    fn unassign(&mut self, j: usize, value: i64) {
        for &(r, c) in &self.column[j] {
            let (lo, hi) = contribution_range(c, &self.ip.domains[j]);
            self.rem_min[r] += lo;
            self.rem_max[r] += hi;
            self.fixed[r] -= c * value as f64;
        }
        self.assignment[j] = None;
    }
}

fn contribution_range(c: f64, domain: &[i64]) -> (f64, f64) {
    let a = c * domain[0] as f64;
    let b = c * domain[domain.len() - 1] as f64;
    (a.min(b), a.max(b))
}

/// Typicality decoding through the integer program: [`build_ip`] followed by
/// a two-solution search. `candidates_examined` is the node count.
#[allow(clippy::too_many_arguments)]
pub fn ip_decode(
    x: &[usize],
    u_hat: &[u64],
    d: &EncodingMatrix,
    pmf: &JointPmf,
    eps: f64,
    q: &Quantizer,
    node_budget: Option<u64>,
) -> Result<DecodeResult<Vec<usize>>> {
    let ip = build_ip(x, u_hat, d, pmf, eps, q)?;
    let report = solve_count(&ip, 2, node_budget)?;
    Ok(DecodeResult {
        outcome: report
            .outcome()
            .map(|w| w.into_iter().map(|v| v as usize).collect()),
        candidates_examined: report.nodes_explored,
    })
}
