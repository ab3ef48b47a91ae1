//! Backend-neutral MILP solving: parameters, results, backend selection.

mod bnb;
#[cfg(feature = "highs")]
mod highs;
pub mod simplex;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{MilpBlock, VarId};

pub use bnb::MAX_BRANCHING_BINARIES;

/// Environment variable naming the backend (`highs` or `bnb`).
pub const BACKEND_ENV: &str = "MGDESIGN_SOLVER";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Highs,
    /// Dense simplex with depth-first branch-and-bound; tiny models only.
    Bnb,
}

impl Backend {
    /// `MGDESIGN_SOLVER` if set and valid, else HiGHS when compiled in.
    pub fn from_env() -> Self {
        std::env::var(BACKEND_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or_default()
    }
}

impl Default for Backend {
    fn default() -> Self {
        if cfg!(feature = "highs") {
            Backend::Highs
        } else {
            Backend::Bnb
        }
    }
}

impl FromStr for Backend {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "highs" => Ok(Backend::Highs),
            "bnb" | "fallback" => Ok(Backend::Bnb),
            other => Err(SolverError::Unavailable(format!("unknown solver backend '{other}'"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Highs => "highs",
            Backend::Bnb => "bnb",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveParams {
    pub backend: Backend,
    /// Relative MIP gap.
    pub mip_gap: f64,
    pub time_limit_s: f64,
    pub threads: usize,
    pub seed: u64,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            backend: Backend::from_env(),
            mip_gap: 0.005,
            time_limit_s: 3600.0,
            threads: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    FeasibleGap,
    Infeasible,
    Unbounded,
    TimeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// NaN without a solution.
    pub objective: f64,
    /// Empty without a solution.
    pub values: Vec<f64>,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub wall_time_s: f64,
}

impl SolveResult {
    pub fn has_solution(&self) -> bool {
        match self.status {
            SolveStatus::Optimal | SolveStatus::FeasibleGap => true,
            SolveStatus::TimeLimit => !self.values.is_empty(),
            SolveStatus::Infeasible | SolveStatus::Unbounded => false,
        }
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }

    pub fn relative_gap(&self) -> f64 {
        (self.objective - self.bound).abs() / self.objective.abs().max(1.0)
    }

    pub(crate) fn without_solution(status: SolveStatus, wall_time_s: f64) -> Self {
        Self {
            status,
            objective: f64::NAN,
            values: Vec::new(),
            bound: f64::NAN,
            wall_time_s,
        }
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver backend unavailable: {0}")]
    Unavailable(String),
    #[error("fallback solver handles at most {cap} free binaries, model has {count}")]
    TooManyBinaries { count: usize, cap: usize },
    #[error("numerical failure in {context}: {message}")]
    Numerical { context: String, message: String },
}

/// Solves `block` (minimization) with the backend named in `params`.
pub fn solve(block: &MilpBlock, params: &SolveParams) -> Result<SolveResult, SolverError> {
    match params.backend {
        Backend::Bnb => bnb::solve(block, params),
        #[cfg(feature = "highs")]
        Backend::Highs => highs::solve(block, params),
        #[cfg(not(feature = "highs"))]
        Backend::Highs => Err(SolverError::Unavailable("built without the 'highs' feature".into())),
    }
}

/// Short description of a block for error messages.
pub(crate) fn block_context(block: &MilpBlock) -> String {
    let tags: Vec<String> = block.tags().iter().take(6).map(|t| format!("{t:?}")).collect();
    format!(
        "block with {} vars, {} rows (tags {}{})",
        block.num_vars(),
        block.num_rows(),
        tags.join(","),
        if block.tags().len() > 6 { ",..." } else { "" }
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Tag;

    fn backends() -> Vec<Backend> {
        let mut b = vec![Backend::Bnb];
        if cfg!(feature = "highs") {
            b.push(Backend::Highs);
        }
        b
    }

    fn params(backend: Backend) -> SolveParams {
        SolveParams {
            backend,
            mip_gap: 1e-9,
            ..SolveParams::default()
        }
    }

    #[test]
    fn one_row_lp() {
        for be in backends() {
            let mut b = MilpBlock::new();
            let x = b.nonneg("x");
            b.le(vec![(x, 1.0)], 3.0, Tag::Fixing);
            b.set_cost(x, -1.0);
            let r = solve(&b, &params(be)).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal, "{be}");
            assert!((r.value(x) - 3.0).abs() < 1e-9);
            assert!((r.objective + 3.0).abs() < 1e-9);
        }
    }

    #[test]
    fn knapsack() {
        // Brute force over the 8 subsets gives 22 (items 2 and 3).
        let (val, wt) = ([6.0, 10.0, 12.0], [1.0, 2.0, 3.0]);
        let mut best = 0.0f64;
        for mask in 0..8u32 {
            let pick = |i: usize| ((mask >> i) & 1) as f64;
            let w: f64 = (0..3).map(|i| pick(i) * wt[i]).sum();
            if w <= 5.0 {
                best = best.max((0..3).map(|i| pick(i) * val[i]).sum());
            }
        }
        assert_eq!(best, 22.0);
        for be in backends() {
            let mut b = MilpBlock::new();
            let ys: Vec<_> = (0..3).map(|i| b.binary(format!("y{i}"))).collect();
            b.le(ys.iter().zip(wt).map(|(&y, w)| (y, w)).collect(), 5.0, Tag::Fixing);
            for (&y, v) in ys.iter().zip(val) {
                b.set_cost(y, -v);
            }
            let r = solve(&b, &params(be)).unwrap();
            assert_eq!(r.status, SolveStatus::Optimal);
            assert!((r.objective + best).abs() < 1e-6, "{be}: {}", r.objective);
        }
    }

    #[test]
    fn contradiction_is_infeasible() {
        for be in backends() {
            let mut b = MilpBlock::new();
            let x = b.free("x");
            b.ge(vec![(x, 1.0)], 1.0, Tag::Fixing);
            b.le(vec![(x, 1.0)], 0.0, Tag::Fixing);
            let r = solve(&b, &params(be)).unwrap();
            assert_eq!(r.status, SolveStatus::Infeasible, "{be}");
            assert!(!r.has_solution());
        }
    }

    #[test]
    fn unbounded_detected() {
        let mut b = MilpBlock::new();
        let x = b.nonneg("x");
        b.set_cost(x, -1.0);
        let r = solve(&b, &params(Backend::Bnb)).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }

    #[test]
    fn fallback_is_deterministic() {
        let mut b = MilpBlock::new();
        let ys: Vec<_> = (0..8).map(|i| b.binary(format!("y{i}"))).collect();
        let x = b.continuous("x", 0.0, 10.0);
        let mut row: Vec<_> = ys.iter().enumerate().map(|(i, &y)| (y, 1.0 + i as f64 * 0.37)).collect();
        row.push((x, 1.0));
        b.le(row, 9.3, Tag::Fixing);
        for (i, &y) in ys.iter().enumerate() {
            b.set_cost(y, -(2.0 + (i as f64 * 1.7) % 3.0));
        }
        b.set_cost(x, -0.5);
        let p = params(Backend::Bnb);
        let a = solve(&b, &p).unwrap();
        let c = solve(&b, &p).unwrap();
        assert_eq!(a.status, c.status);
        assert_eq!(a.values, c.values);
        assert!((a.objective - c.objective).abs() <= 1e-9 * a.objective.abs());
    }

    #[test]
    fn fallback_refuses_large_models() {
        let mut b = MilpBlock::new();
        for i in 0..MAX_BRANCHING_BINARIES + 1 {
            b.binary(format!("y{i}"));
        }
        assert!(matches!(
            solve(&b, &params(Backend::Bnb)),
            Err(SolverError::TooManyBinaries { .. })
        ));
    }

    #[test]
    fn infeasible_sub_block_makes_superset_infeasible() {
        for be in backends() {
            let mut sub = MilpBlock::new();
            let x = sub.continuous("x", 0.0, 1.0);
            sub.ge(vec![(x, 1.0)], 2.0, Tag::Fixing);
            let mut sup = MilpBlock::new();
            let y = sup.binary("y");
            sup.set_cost(y, 1.0);
            sup.append(&sub, &[]);
            assert_eq!(solve(&sub, &params(be)).unwrap().status, SolveStatus::Infeasible);
            assert_eq!(solve(&sup, &params(be)).unwrap().status, SolveStatus::Infeasible);
        }
    }

    #[test]
    fn backend_parsing() {
        assert_eq!("HiGHS".parse::<Backend>().unwrap(), Backend::Highs);
        assert_eq!("bnb".parse::<Backend>().unwrap(), Backend::Bnb);
        assert!("cplex".parse::<Backend>().is_err());
    }
}
