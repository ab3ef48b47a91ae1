//! Translation of a scenario into MILP blocks: investment, grid-tied
//! operation, islanding events and reliability, plus their assemblies.

pub mod investment;
pub mod islanding;
pub mod operations;
pub mod reliability;

use serde::{Deserialize, Serialize};

pub use investment::{build_investment, InvestmentOptions, InvestmentVars, UnitVars};
pub use islanding::{all_events, build_islanding_block, event_cost_floor, EventId, EventVars, MAX_EVENT_HOURS};
pub use operations::{build_operations, GenOp, OpContext, OpVars, StorageOp};
pub use reliability::{build_reliability_block, reachable_from_pcc, ReliabilityVars};

use crate::design::Design;
use crate::error::{Error, Result};
use crate::milp::{MilpBlock, Tag, VarId};
use crate::model::ScenarioConfig;

/// Optional model levels on top of investment and grid-tied operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Levels {
    pub resilience: bool,
    pub reliability: bool,
}

impl Levels {
    pub const BASE: Levels = Levels {
        resilience: false,
        reliability: false,
    };
    pub const FULL: Levels = Levels {
        resilience: true,
        reliability: true,
    };
}

/// Handles of every variable family in an assembled block.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    pub inv: InvestmentVars,
    /// One entry per representative day.
    pub grid: Vec<OpVars>,
    pub reliability: Option<ReliabilityVars>,
    pub events: Vec<EventVars>,
    /// Aggregate islanding term of a master problem.
    pub eta: Option<VarId>,
}

impl Catalog {
    /// `[storage unit][0..=hours]` energy handles of a day.
    pub fn grid_energy(&self, day: usize) -> Vec<Vec<VarId>> {
        self.grid[day].storage.iter().map(|s| s.e.clone()).collect()
    }

    pub fn event(&self, id: EventId) -> Option<&EventVars> {
        self.events.iter().find(|e| e.id == id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub block: MilpBlock,
    pub catalog: Catalog,
}

/// Annual islanding-capability adder charged to designs that must island, $/y.
pub fn islanding_surcharge(cfg: &ScenarioConfig, levels: Levels) -> f64 {
    if levels.resilience {
        cfg.params.islanding_surcharge_per_mwh * cfg.annual_demand_kwh() / 1000.0
    } else {
        0.0
    }
}

fn build_core(cfg: &ScenarioConfig, levels: Levels) -> Result<(MilpBlock, InvestmentVars, Vec<OpVars>, Option<ReliabilityVars>)> {
    let mut block = MilpBlock::new();
    let inv = build_investment(
        &mut block,
        cfg,
        InvestmentOptions {
            with_cost: true,
            surcharge: islanding_surcharge(cfg, levels),
        },
    )?;
    let grid = (0..cfg.days.len())
        .map(|day| build_operations(&mut block, cfg, &inv, OpContext::GridTied { day }))
        .collect::<Result<Vec<_>>>()?;
    let rel = if levels.reliability {
        Some(build_reliability_block(&mut block, cfg, &inv, &grid)?)
    } else {
        None
    };
    Ok((block, inv, grid, rel))
}

/// Master problem: investment, grid-tied operation, reliability and the
/// islanding events in `events`. Events outside the set contribute a valid
/// lower bound on their cost, so the objective never exceeds the full model's.
pub fn build_master(cfg: &ScenarioConfig, levels: Levels, events: &[EventId]) -> Result<Model> {
    build_master_over(cfg, levels, &all_events(cfg), events)
}

/// Master over a restricted event universe; events outside `universe` are ignored.
pub fn build_master_over(cfg: &ScenarioConfig, levels: Levels, universe: &[EventId], events: &[EventId]) -> Result<Model> {
    if !levels.resilience && !events.is_empty() {
        return Err(Error::InvalidArgument("islanding events require the resilience level".into()));
    }
    let (mut block, inv, grid, rel) = build_core(cfg, levels)?;
    let mut evs = Vec::new();
    let mut eta = None;
    if levels.resilience {
        let v = block.free("eta");
        let mut row = vec![(v, 1.0)];
        for &id in events {
            let energy: Vec<Vec<VarId>> = grid[id.day].storage.iter().map(|s| s.e.clone()).collect();
            let ev = build_islanding_block(&mut block, cfg, &inv, &energy, id, 0.0)?;
            row.push((ev.c_res, -cfg.days[id.day].weight));
            evs.push(ev);
        }
        for &id in universe {
            if !events.contains(&id) {
                row.extend(event_cost_floor(cfg, &inv, id).into_iter().map(|(v, c)| (v, -c)));
            }
        }
        block.equal(row, 0.0, Tag::ResilienceBound);
        block.set_cost(v, 1.0);
        eta = Some(v);
    }
    Ok(Model {
        block,
        catalog: Catalog {
            inv,
            grid,
            reliability: rel,
            events: evs,
            eta,
        },
    })
}

/// Every level and every event in one block, refused above the configured size.
pub fn assemble_extensive(cfg: &ScenarioConfig, levels: Levels) -> Result<Model> {
    let events = if levels.resilience { all_events(cfg) } else { Vec::new() };
    let per_event = estimate_event_vars(cfg);
    let estimate = per_event * events.len();
    let cap = cfg.params.max_extensive_vars;
    if estimate > cap {
        return Err(Error::ModelTooLarge(format!(
            "extensive form needs about {estimate} islanding variables, above the cap of {cap}"
        )));
    }
    let model = build_master(cfg, levels, &events)?;
    if model.block.num_vars() > cap {
        return Err(Error::ModelTooLarge(format!(
            "extensive form has {} variables, above the cap of {cap}",
            model.block.num_vars()
        )));
    }
    Ok(model)
}

fn estimate_event_vars(cfg: &ScenarioConfig) -> usize {
    let units = cfg.der_units().len() + cfg.network.buses.iter().filter(|b| b.pv_kw > 0.0).count();
    let per_hour = 6 * units + 4 * cfg.network.lines.len() + cfg.network.buses.len() + 6;
    per_hour * cfg.islanding.effective_horizon()
}

/// Pins every investment column of `inv` to the design's values.
pub fn fix_design(block: &mut MilpBlock, cfg: &ScenarioConfig, inv: &InvestmentVars, design: &Design) -> Result<()> {
    design.check(cfg)?;
    for (entry, uv) in design.units.iter().zip(&inv.units) {
        block.fix(uv.y, if entry.installed { 1.0 } else { 0.0 });
        let s_cap = block.var(uv.s_max).upper;
        if let Some(e) = uv.e_max {
            let f_c = cfg.der[uv.unit.spec].storage().map(|s| s.power_ratio).unwrap_or(1.0);
            let e_val = if entry.installed {
                entry.e_max_kwh.unwrap_or(0.0).clamp(0.0, block.var(e).upper)
            } else {
                0.0
            };
            block.fix(e, e_val);
            block.fix(uv.s_max, f_c * e_val);
        } else {
            let s = if entry.installed { entry.s_max_kva.clamp(0.0, s_cap) } else { 0.0 };
            block.fix(uv.s_max, s);
        }
    }
    for (installed, &y) in design.line_status(cfg).iter().zip(&inv.lines) {
        block.fix(y, if *installed { 1.0 } else { 0.0 });
    }
    Ok(())
}

/// Clamps a stored trajectory into the energy window of a unit of capacity `e_max`.
fn clamp_energy(cfg: &ScenarioConfig, uv: &UnitVars, e_max: f64, e: f64) -> f64 {
    let dod = cfg.der[uv.unit.spec].storage().map(|s| s.dod_max).unwrap_or(1.0);
    e.clamp((1.0 - dod) * e_max, e_max)
}

fn installed_energy(design: &Design, uv_index: usize) -> f64 {
    let u = &design.units[uv_index];
    if u.installed {
        u.e_max_kwh.unwrap_or(0.0).max(0.0)
    } else {
        0.0
    }
}

/// Grid-tied operation (and reliability, if requested) at a fixed design.
/// A stored profile in the design also pins the storage trajectories.
pub fn build_fixed_grid(cfg: &ScenarioConfig, levels: Levels, design: &Design) -> Result<Model> {
    let mut model = build_master(
        cfg,
        Levels {
            resilience: false,
            ..levels
        },
        &[],
    )?;
    let Model { block, catalog } = &mut model;
    fix_design(block, cfg, &catalog.inv, design)?;
    if !design.storage_energy.is_empty() {
        for (d, ops) in catalog.grid.iter().enumerate() {
            for (s, so) in ops.storage.iter().enumerate() {
                let uv = &catalog.inv.units[so.unit];
                let e_max = installed_energy(design, so.unit);
                for (k, &v) in so.e.iter().enumerate() {
                    block.fix(v, clamp_energy(cfg, uv, e_max, design.storage_energy[d][s][k]));
                }
            }
        }
    }
    Ok(model)
}

/// Islanding subproblem of one event at a fixed design and storage profile;
/// its objective is the day-weighted event cost.
pub fn build_event_subproblem(cfg: &ScenarioConfig, design: &Design, event: EventId) -> Result<Model> {
    let mut block = MilpBlock::new();
    let inv = build_investment(&mut block, cfg, InvestmentOptions::default())?;
    fix_design(&mut block, cfg, &inv, design)?;
    let n_str = inv.storage_count();
    if n_str > 0 && design.storage_energy.is_empty() {
        return Err(Error::MissingHandle("design carries no storage profile for islanding subproblems".into()));
    }
    let mut energy = Vec::new();
    for (s, (i, uv)) in inv.storage_units().enumerate() {
        let e_max = installed_energy(design, i);
        let traj = &design.storage_energy[event.day][s];
        let vars = traj
            .iter()
            .enumerate()
            .map(|(k, &e)| {
                let v = block.continuous(format!("Egrid_{s}_{k}"), 0.0, 0.0);
                block.fix(v, clamp_energy(cfg, uv, e_max, e));
                v
            })
            .collect::<Vec<_>>();
        energy.push(vars);
    }
    let ev = build_islanding_block(&mut block, cfg, &inv, &energy, event, cfg.days[event.day].weight)?;
    Ok(Model {
        block,
        catalog: Catalog {
            inv,
            grid: Vec::new(),
            reliability: None,
            events: vec![ev],
            eta: None,
        },
    })
}
