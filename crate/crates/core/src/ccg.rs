//! Column-and-constraint generation over islanding events.
//!
//! The master holds investment, grid-tied operation, reliability and a
//! growing subset of islanding events; every other event is represented by a
//! valid lower bound on its cost. Each iteration fixes the master design,
//! solves all event subproblems independently and either adds an infeasible
//! event or the costliest one until the bounds meet.

use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::{
    all_events, build_event_subproblem, build_fixed_grid, build_master_over, islanding_surcharge, EventId, Levels,
};
use crate::design::{extract_design, investment_cost, Design};
use crate::error::{Error, Result};
use crate::model::ScenarioConfig;
use crate::reliability_eval::{analytic_indices, ReliabilityReport};
use crate::solver::{solve, SolveParams, SolveResult, SolveStatus};

/// Expected net energy (demand minus available installed RG) over the
/// event's window, each hour weighted by the probability the event lasts to it.
pub fn event_net_energy(cfg: &ScenarioConfig, id: EventId) -> f64 {
    let day = &cfg.days[id.day];
    let hours = cfg.hours();
    (1..=cfg.islanding.effective_horizon())
        .map(|k| {
            let h = (id.hour + k - 1) % hours;
            let net: f64 = day.demand_kw[h].iter().sum::<f64>() - day.rg_avail_kw[h].iter().sum::<f64>();
            cfg.islanding.survival(k) * net
        })
        .sum()
}

/// Orders `(event, score)` pairs by descending score, then earlier start.
pub fn order_by_score(mut scored: Vec<(EventId, f64)>) -> Vec<EventId> {
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.hour.cmp(&b.0.hour))
            .then(a.0.day.cmp(&b.0.day))
    });
    scored.into_iter().map(|(e, _)| e).collect()
}

/// Events by descending expected net demand.
pub fn rank_events(cfg: &ScenarioConfig) -> Vec<EventId> {
    order_by_score(all_events(cfg).into_iter().map(|e| (e, event_net_energy(cfg, e))).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcgOptions {
    pub eps: f64,
    pub n0: usize,
    pub max_iterations: usize,
    /// Worker threads for subproblem solves.
    pub threads: usize,
    pub solve: SolveParams,
    /// Restricts the event set; all events when `None`.
    pub events: Option<Vec<EventId>>,
}

impl CcgOptions {
    pub fn from_cfg(cfg: &ScenarioConfig) -> Self {
        let p = &cfg.params;
        Self {
            eps: p.ccg_eps,
            n0: p.n0,
            max_iterations: p.max_iterations,
            threads: p.threads,
            solve: SolveParams {
                mip_gap: p.mip_gap,
                time_limit_s: p.time_limit_s,
                threads: p.threads,
                seed: p.seed,
                ..SolveParams::default()
            },
            events: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub lb: f64,
    pub ub: f64,
    /// Dual bound reported by this iteration's master solve.
    pub master_bound: f64,
    /// Event added to the master at the end of this iteration.
    pub added: Option<EventId>,
    pub infeasible_events: usize,
    /// Largest single event cost at this iteration's design.
    pub max_event_cost: f64,
    /// Installed DER power capacity of this iteration's master design, kVA.
    pub installed_kva: f64,
    pub master_s: f64,
    pub subproblems_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcgState {
    pub in_master: Vec<EventId>,
    pub lb: f64,
    pub ub: f64,
    pub iterations: usize,
    pub log: Vec<IterationLog>,
    /// Master solution at the incumbent design.
    #[serde(skip)]
    pub x_m: Vec<f64>,
    pub converged: bool,
}

impl CcgState {
    fn new(in_master: Vec<EventId>) -> Self {
        Self {
            in_master,
            lb: f64::NEG_INFINITY,
            ub: f64::INFINITY,
            iterations: 0,
            log: Vec::new(),
            x_m: Vec::new(),
            converged: false,
        }
    }

    pub fn relative_gap(&self) -> f64 {
        (self.ub - self.lb) / self.ub.abs().max(1.0)
    }

    /// Iteration log as CSV.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iteration,lb,ub,master_bound,added_event,infeasible_events,max_event_cost,installed_kva,master_s,subproblems_s\n");
        for r in &self.log {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{:.3},{:.3}\n",
                r.iteration,
                r.lb,
                r.ub,
                r.master_bound,
                r.added.map(|e| e.to_string()).unwrap_or_default(),
                r.infeasible_events,
                r.max_event_cost,
                r.installed_kva,
                r.master_s,
                r.subproblems_s
            ));
        }
        s
    }
}

/// Annual cost components, $/y.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Annualized investment including any islanding surcharge.
    pub investment: f64,
    pub islanding_surcharge: f64,
    /// Weighted grid-tied operation.
    pub operation: f64,
    /// Expected islanding cost (redispatch, recharge and ex-post interruption).
    pub resilience: f64,
    pub reliability: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.investment + self.operation + self.resilience + self.reliability
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOutcome {
    pub id: EventId,
    pub feasible: bool,
    /// Day-weighted expected cost, $/y.
    pub cost: f64,
    /// Expected energy not supplied if the design cannot island, kWh/y.
    pub eens_kwh: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcgOutcome {
    pub design: Design,
    pub state: CcgState,
    pub events: Vec<EventOutcome>,
}

fn solve_or_fail(block: &crate::milp::MilpBlock, params: &SolveParams) -> Result<SolveResult> {
    Ok(solve(block, params)?)
}

fn solve_events(
    cfg: &ScenarioConfig,
    design: &Design,
    events: &[EventId],
    params: &SolveParams,
    threads: usize,
) -> Result<Vec<Option<f64>>> {
    let sub_params = SolveParams {
        threads: 1,
        ..params.clone()
    };
    let work = |id: &EventId| -> Result<Option<f64>> {
        let m = build_event_subproblem(cfg, design, *id)?;
        let r = solve_or_fail(&m.block, &sub_params)?;
        match r.status {
            SolveStatus::Infeasible => Ok(None),
            _ if r.has_solution() => Ok(Some(r.objective)),
            s => Err(Error::Solver(crate::solver::SolverError::Numerical {
                context: format!("islanding subproblem {id}"),
                message: format!("status {s:?}"),
            })),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| events.par_iter().map(work).collect())
}

/// Runs the decomposition with islanding enabled (`levels.resilience` must be set).
pub fn run(cfg: &ScenarioConfig, levels: Levels, opts: &CcgOptions) -> Result<CcgOutcome> {
    if !levels.resilience {
        return Err(Error::InvalidArgument("CCG requires the resilience level".into()));
    }
    if !(opts.eps > 0.0) || opts.n0 < 1 {
        return Err(Error::InvalidArgument("CCG needs eps > 0 and n0 >= 1".into()));
    }
    let universe: Vec<EventId> = match &opts.events {
        Some(ev) => ev.clone(),
        None => all_events(cfg),
    };
    let ranked: Vec<EventId> = rank_events(cfg).into_iter().filter(|e| universe.contains(e)).collect();
    let mut state = CcgState::new(ranked.iter().take(opts.n0).copied().collect());
    let master_params = SolveParams {
        mip_gap: opts.solve.mip_gap.min(opts.eps / 5.0),
        ..opts.solve.clone()
    };
    let mut best: Option<(Design, Vec<f64>, Vec<EventOutcome>)> = None;

    loop {
        if state.iterations >= opts.max_iterations {
            return Err(Error::IterationCap(opts.max_iterations));
        }
        state.iterations += 1;
        let it = state.iterations;
        let t0 = Instant::now();
        let master = build_master_over(cfg, levels, &universe, &state.in_master)?;
        let res = solve_or_fail(&master.block, &master_params)?;
        let master_s = t0.elapsed().as_secs_f64();
        match res.status {
            SolveStatus::Infeasible => {
                let event = state.in_master.last().map(|e| e.to_string()).unwrap_or_default();
                return Err(Error::MasterInfeasible { event });
            }
            _ if !res.has_solution() => {
                return Err(Error::Solver(crate::solver::SolverError::Numerical {
                    context: "CCG master".into(),
                    message: format!("status {:?} without a solution", res.status),
                }))
            }
            _ => {}
        }
        state.lb = state.lb.max(res.bound);
        let design = extract_design(cfg, &master.catalog, &res.values)?;
        let eta = master.catalog.eta.map(|v| res.value(v)).unwrap_or(0.0);
        let c_m = res.objective - eta;

        let t1 = Instant::now();
        let outcomes = solve_events(cfg, &design, &universe, &opts.solve, opts.threads)?;
        let subproblems_s = t1.elapsed().as_secs_f64();
        let infeasible: Vec<EventId> = universe
            .iter()
            .zip(&outcomes)
            .filter(|(_, o)| o.is_none())
            .map(|(e, _)| *e)
            .collect();
        let max_event_cost = outcomes.iter().flatten().copied().fold(0.0, f64::max);

        let mut added = None;
        if !infeasible.is_empty() {
            added = ranked
                .iter()
                .find(|e| infeasible.contains(e) && !state.in_master.contains(e))
                .copied();
            if added.is_none() {
                return Err(Error::Solver(crate::solver::SolverError::Numerical {
                    context: "CCG subproblems".into(),
                    message: "an event already in the master is infeasible at the master design".into(),
                }));
            }
        } else {
            let total: f64 = outcomes.iter().flatten().sum();
            let ub = c_m + total;
            if ub < state.ub {
                state.ub = ub;
                let evs = universe
                    .iter()
                    .zip(&outcomes)
                    .map(|(id, o)| EventOutcome {
                        id: *id,
                        feasible: true,
                        cost: o.unwrap_or(0.0),
                        eens_kwh: 0.0,
                    })
                    .collect();
                best = Some((design.clone(), res.values.clone(), evs));
            }
            if state.relative_gap() > opts.eps {
                added = universe
                    .iter()
                    .zip(&outcomes)
                    .filter(|(e, _)| !state.in_master.contains(e))
                    .max_by(|a, b| {
                        let (ca, cb) = (a.1.unwrap_or(0.0), b.1.unwrap_or(0.0));
                        ca.partial_cmp(&cb).unwrap_or(std::cmp::Ordering::Equal)
                    })
                    .map(|(e, _)| *e);
            }
        }
        info!(
            "ccg iteration {it}: lb {:.4} ub {:.4} gap {:.3e} infeasible {}",
            state.lb,
            state.ub,
            state.relative_gap(),
            infeasible.len()
        );
        state.log.push(IterationLog {
            iteration: it,
            lb: state.lb,
            ub: state.ub,
            master_bound: res.bound,
            added,
            infeasible_events: infeasible.len(),
            max_event_cost,
            installed_kva: design.units.iter().filter(|u| u.installed).map(|u| u.s_max_kva).sum(),
            master_s,
            subproblems_s,
        });
        match added {
            Some(e) => {
                debug!("adding event {e}");
                state.in_master.push(e);
            }
            None => {
                state.converged = state.relative_gap() <= opts.eps;
                break;
            }
        }
    }
    let (design, x_m, events) = best.ok_or_else(|| Error::DesignInfeasible("no islanding-feasible design found".into()))?;
    state.x_m = x_m;
    Ok(CcgOutcome { design, state, events })
}

/// Costs and islanding outcomes of a fixed design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// The design with the storage trajectories it was evaluated with.
    pub design: Design,
    pub costs: CostBreakdown,
    pub events: Vec<EventOutcome>,
    /// Expected annual energy not supplied during islanding, kWh/y.
    pub islanding_eens_kwh: f64,
    /// Peak power drawn from or fed to the grid, kW.
    pub peak_pcc_kw: f64,
    pub reliability: ReliabilityReport,
}

impl Evaluation {
    pub fn infeasible_events(&self) -> Vec<EventId> {
        self.events.iter().filter(|e| !e.feasible).map(|e| e.id).collect()
    }

    pub fn islandable(&self) -> bool {
        self.events.iter().all(|e| e.feasible)
    }
}

/// Ex-post interruption of one event with nothing supplied: weighted
/// expected energy per demand bus, kWh/y.
pub fn event_interruption_kwh(cfg: &ScenarioConfig, id: EventId) -> Vec<f64> {
    let day = &cfg.days[id.day];
    let w = day.weight * cfg.islanding.occurrence_probability;
    let mut per_bus = vec![0.0; cfg.network.buses.len()];
    for k in 1..=cfg.islanding.effective_horizon() {
        let h = (id.hour + k - 1) % cfg.hours();
        let s = cfg.islanding.survival(k);
        for (b, &p) in day.demand_kw[h].iter().enumerate() {
            per_bus[b] += w * s * p;
        }
    }
    per_bus
}

/// Solves grid-tied operation at the design (keeping its storage profile if
/// present), then every islanding subproblem; events the design cannot
/// island are charged their full interruption cost ex post.
pub fn evaluate_fixed_design(cfg: &ScenarioConfig, design: &Design, levels: Levels, params: &SolveParams, threads: usize) -> Result<Evaluation> {
    design.check(cfg)?;
    let grid = build_fixed_grid(cfg, Levels { reliability: false, ..levels }, design)?;
    let res = solve_or_fail(&grid.block, params)?;
    if !res.has_solution() {
        return Err(Error::DesignInfeasible(format!("grid-tied operation status {:?}", res.status)));
    }
    let operated = extract_design(cfg, &grid.catalog, &res.values)?;
    let operation: f64 = grid
        .catalog
        .grid
        .iter()
        .map(|ops| ops.c_op.iter().map(|&v| cfg.days[ops.day].weight * res.value(v)).sum::<f64>())
        .sum();
    let peak_pcc_kw = grid
        .catalog
        .grid
        .iter()
        .flat_map(|ops| ops.pcc_p.iter().map(|&v| res.value(v).abs()))
        .fold(0.0, f64::max);

    let events = all_events(cfg);
    let outcomes = solve_events(cfg, &operated, &events, params, threads)?;
    let mut evs = Vec::new();
    let mut islanding_eens = 0.0;
    for (id, o) in events.iter().zip(outcomes) {
        match o {
            Some(cost) => evs.push(EventOutcome {
                id: *id,
                feasible: true,
                cost,
                eens_kwh: 0.0,
            }),
            None => {
                let e = event_interruption_kwh(cfg, *id);
                let cost: f64 = e.iter().zip(&cfg.reliability.cost_not_supplied).map(|(e, c)| e * c).sum();
                let kwh: f64 = e.iter().sum();
                islanding_eens += kwh;
                evs.push(EventOutcome {
                    id: *id,
                    feasible: false,
                    cost,
                    eens_kwh: kwh,
                });
            }
        }
    }
    let infeasible: Vec<EventId> = evs.iter().filter(|e| !e.feasible).map(|e| e.id).collect();
    let report = analytic_indices(cfg, &operated, &infeasible)?;
    let surcharge = islanding_surcharge(cfg, levels);
    let costs = CostBreakdown {
        investment: investment_cost(cfg, design)? + surcharge,
        islanding_surcharge: surcharge,
        operation,
        resilience: evs.iter().map(|e| e.cost).sum(),
        reliability: report.c_rel,
    };
    Ok(Evaluation {
        design: operated,
        costs,
        events: evs,
        islanding_eens_kwh: islanding_eens,
        peak_pcc_kw,
        reliability: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::toy_feeder;

    #[test]
    fn higher_demand_ranks_first() {
        let a = EventId { day: 0, hour: 3 };
        let b = EventId { day: 0, hour: 1 };
        assert_eq!(order_by_score(vec![(b, 80.0), (a, 100.0)]), vec![a, b]);
    }

    #[test]
    fn renewable_supply_lowers_rank() {
        let a = EventId { day: 0, hour: 7 };
        let b = EventId { day: 0, hour: 2 };
        // Equal demand of 100 kWh; `a` has no RG, `b` has 30 kWh.
        assert_eq!(order_by_score(vec![(b, 100.0 - 30.0), (a, 100.0)]), vec![a, b]);
    }

    #[test]
    fn ties_go_to_the_earlier_start() {
        let a = EventId { day: 0, hour: 2 };
        let b = EventId { day: 0, hour: 9 };
        assert_eq!(order_by_score(vec![(b, 5.0), (a, 5.0)]), vec![a, b]);
    }

    #[test]
    fn toy_ranking_matches_window_sums() {
        let cfg = toy_feeder();
        let day = &cfg.days[0];
        let pmf = &cfg.islanding.duration_pmf;
        let mut oracle: Vec<(usize, f64)> = (0..24)
            .map(|start| {
                let mut total = 0.0;
                for (j, p) in pmf.iter().enumerate() {
                    let end = j + 1;
                    let mut window = 0.0;
                    for t in 0..end {
                        let h = (start + t) % 24;
                        for b in 0..cfg.network.buses.len() {
                            window += day.demand_kw[h][b] - day.rg_avail_kw[h][b];
                        }
                    }
                    total += p * window;
                }
                (start, total)
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let ranked: Vec<usize> = rank_events(&cfg).iter().map(|e| e.hour).collect();
        let want: Vec<usize> = oracle.iter().map(|o| o.0).collect();
        assert_eq!(ranked, want);
    }

    #[test]
    fn interruption_energy_of_a_flat_load() {
        let cfg = crate::synthetic::three_bus_chain();
        let e = event_interruption_kwh(&cfg, EventId { day: 0, hour: 0 });
        let expected = 365.0 * cfg.islanding.occurrence_probability * cfg.islanding.expected_duration() * 50.0;
        assert!((e[2] - expected).abs() < 1e-9 * expected);
    }
}
