//! Depth-first branch-and-bound over the dense simplex.

use std::time::Instant;

use super::simplex::{solve_lp, LpOutcome};
use super::{SolveParams, SolveResult, SolveStatus, SolverError};
use crate::milp::{MilpBlock, VarKind};

/// Largest number of undecided binaries the fallback accepts.
pub const MAX_BRANCHING_BINARIES: usize = 25;

const INT_TOL: f64 = 1e-6;

pub(super) fn solve(block: &MilpBlock, params: &SolveParams) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let free = block.num_free_binaries();
    if free > MAX_BRANCHING_BINARIES {
        return Err(SolverError::TooManyBinaries {
            count: free,
            cap: MAX_BRANCHING_BINARIES,
        });
    }
    let binaries: Vec<usize> = block
        .vars()
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(j, _)| j)
        .collect();
    let lower: Vec<f64> = block.vars().iter().map(|v| v.lower).collect();
    let upper: Vec<f64> = block.vars().iter().map(|v| v.upper).collect();

    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    // Smallest LP bound among nodes discarded only because of the gap tolerance.
    let mut gap_pruned = f64::INFINITY;
    let mut stack = vec![(lower, upper)];
    let mut timed_out = false;
    let mut root = true;

    while let Some((lo, hi)) = stack.pop() {
        if start.elapsed().as_secs_f64() > params.time_limit_s {
            timed_out = true;
            break;
        }
        let (x, obj) = match solve_lp(block, &lo, &hi) {
            LpOutcome::Infeasible => {
                root = false;
                continue;
            }
            LpOutcome::Unbounded => {
                if root {
                    return Ok(SolveResult::without_solution(
                        SolveStatus::Unbounded,
                        start.elapsed().as_secs_f64(),
                    ));
                }
                continue;
            }
            LpOutcome::Optimal { x, objective } => (x, objective),
        };
        root = false;
        if let Some((best, _)) = &incumbent {
            let tol = params.mip_gap * best.abs().max(1.0);
            if obj >= *best - 1e-9 {
                continue;
            }
            if obj >= *best - tol {
                gap_pruned = gap_pruned.min(obj);
                continue;
            }
        }
        let branch = binaries
            .iter()
            .copied()
            .filter(|&j| (x[j] - x[j].round()).abs() > INT_TOL)
            .max_by(|&a, &b| {
                let fa = (x[a] - 0.5).abs();
                let fb = (x[b] - 0.5).abs();
                fb.partial_cmp(&fa).unwrap().then(b.cmp(&a))
            });
        match branch {
            None => {
                let mut x = x;
                for &j in &binaries {
                    x[j] = x[j].round();
                }
                let obj = block.objective(&x);
                if incumbent.as_ref().is_none_or(|(b, _)| obj < *b) {
                    incumbent = Some((obj, x));
                }
            }
            Some(j) => {
                let (mut lo0, mut hi0) = (lo.clone(), hi.clone());
                hi0[j] = 0.0;
                lo0[j] = 0.0;
                let (mut lo1, mut hi1) = (lo, hi);
                lo1[j] = 1.0;
                hi1[j] = 1.0;
                // Explore the side nearer the LP value first.
                if x[j] >= 0.5 {
                    stack.push((lo0, hi0));
                    stack.push((lo1, hi1));
                } else {
                    stack.push((lo1, hi1));
                    stack.push((lo0, hi0));
                }
            }
        }
    }

    let wall = start.elapsed().as_secs_f64();
    match incumbent {
        None if timed_out => Ok(SolveResult::without_solution(SolveStatus::TimeLimit, wall)),
        None => Ok(SolveResult::without_solution(SolveStatus::Infeasible, wall)),
        Some((objective, values)) => {
            let bound = if timed_out { f64::NEG_INFINITY } else { gap_pruned.min(objective) };
            Ok(SolveResult {
                status: if timed_out { SolveStatus::TimeLimit } else { SolveStatus::Optimal },
                objective,
                values,
                bound,
                wall_time_s: wall,
            })
        }
    }
}
