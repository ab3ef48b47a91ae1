//! HiGHS backend.

use std::time::Instant;

use highs::{HighsModelStatus, RowProblem, Sense as Objective};

use super::{block_context, SolveParams, SolveResult, SolveStatus, SolverError};
use crate::milp::{MilpBlock, Sense, VarKind};

pub(super) fn solve(block: &MilpBlock, params: &SolveParams) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let mut pb = RowProblem::default();
    let cols: Vec<_> = block
        .vars()
        .iter()
        .map(|v| pb.add_column_with_integrality(v.cost, v.lower..=v.upper, v.kind == VarKind::Binary))
        .collect();
    for r in block.rows() {
        let terms: Vec<_> = r.terms.iter().map(|(v, c)| (cols[v.0], *c)).collect();
        match r.sense {
            Sense::Le => pb.add_row(..=r.rhs, terms),
            Sense::Ge => pb.add_row(r.rhs.., terms),
            Sense::Eq => pb.add_row(r.rhs..=r.rhs, terms),
        }
    }
    let mut model = pb
        .try_optimise(Objective::Minimise)
        .map_err(|s| SolverError::Numerical {
            context: block_context(block),
            message: format!("HiGHS rejected the model: {s:?}"),
        })?;
    model.make_quiet();
    if std::env::var_os("MGDESIGN_SOLVER_LOG").is_some() {
        model.set_option("output_flag", true);
        model.set_option("log_to_console", true);
    }
    model.set_option("mip_rel_gap", params.mip_gap);
    model.set_option("time_limit", params.time_limit_s);
    model.set_option("random_seed", (params.seed % i32::MAX as u64) as i32);
    // Cheaper branching and a leaner cut pool pay off on the few-binary,
    // LP-heavy design models.
    model.set_option("mip_pscost_minreliable", 0);
    model.set_option("mip_pool_soft_limit", 200);
    model.set_option("simplex_scale_strategy", 4);
    if params.threads > 1 {
        model.set_option("threads", params.threads as i32);
    }
    if let Ok(extra) = std::env::var("MGDESIGN_HIGHS_OPTIONS") {
        apply_extra_options(&mut model, &extra);
    }
    let numerical = |message: String| SolverError::Numerical {
        context: block_context(block),
        message,
    };
    let solved = model
        .try_solve()
        .map_err(|s| numerical(format!("HiGHS returned {s:?}")))?;
    let wall = start.elapsed().as_secs_f64();
    let status = solved.status();
    let has_integers = block.num_binaries() > 0;
    let finish = |status: SolveStatus| {
        let values = solved.get_solution().columns().to_vec();
        let objective = block.objective(&values);
        let bound = if has_integers {
            solved
                .double_info_value(c"mip_dual_bound")
                .map(|b| b + block.offset())
                .unwrap_or(objective)
                .min(objective)
        } else {
            objective
        };
        SolveResult {
            status,
            objective,
            values,
            bound,
            wall_time_s: wall,
        }
    };
    match status {
        HighsModelStatus::Optimal => Ok(finish(SolveStatus::Optimal)),
        HighsModelStatus::ModelEmpty => Ok(SolveResult {
            status: SolveStatus::Optimal,
            objective: block.offset(),
            values: Vec::new(),
            bound: block.offset(),
            wall_time_s: wall,
        }),
        HighsModelStatus::Infeasible | HighsModelStatus::UnboundedOrInfeasible => {
            Ok(SolveResult::without_solution(SolveStatus::Infeasible, wall))
        }
        HighsModelStatus::Unbounded => Ok(SolveResult::without_solution(SolveStatus::Unbounded, wall)),
        HighsModelStatus::ReachedTimeLimit
        | HighsModelStatus::ReachedIterationLimit
        | HighsModelStatus::ReachedSolutionLimit
        | HighsModelStatus::ReachedInterrupt => {
            let has = solved.get_solution().columns().len() == block.num_vars()
                && solved
                    .int_info_value(c"primal_solution_status")
                    .map(|s| s == 2)
                    .unwrap_or(false);
            if has {
                Ok(finish(SolveStatus::TimeLimit))
            } else {
                Ok(SolveResult::without_solution(SolveStatus::TimeLimit, wall))
            }
        }
        other => Err(numerical(format!("HiGHS model status {other:?}"))),
    }
}

/// Applies `name=value` pairs separated by commas; values are read as bool,
/// integer, float or string, in that order.
fn apply_extra_options(model: &mut highs::Model, spec: &str) {
    for pair in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let Some((name, value)) = pair.split_once('=') else { continue };
        let (name, value) = (name.trim(), value.trim());
        if let Ok(b) = value.parse::<bool>() {
            model.set_option(name, b);
        } else if let Ok(i) = value.parse::<i32>() {
            model.set_option(name, i);
        } else if let Ok(f) = value.parse::<f64>() {
            model.set_option(name, f);
        } else {
            model.set_option(name, value);
        }
    }
}
