//! A fixed microgrid design and the typed quantities read back from a solved model.

use serde::{Deserialize, Serialize};

use crate::builder::{Catalog, EventVars, OpVars};
use crate::error::{Error, Result};
use crate::model::{DerKind, ScenarioConfig};
use crate::solver::SolveResult;

/// Threshold for reading a binary column as "installed".
pub const BINARY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerInstallation {
    pub der: String,
    pub kind: DerKind,
    pub bus: String,
    pub installed: bool,
    /// kVA.
    pub s_max_kva: f64,
    /// kWh, storage only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max_kwh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineInstallation {
    pub id: String,
    pub installed: bool,
}

/// Investment decisions plus, optionally, the grid-tied storage trajectories
/// they were optimized with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    /// One entry per candidate (technology, bus) pair, in catalog order.
    pub units: Vec<DerInstallation>,
    /// Candidate lines only.
    pub lines: Vec<LineInstallation>,
    /// `[day][storage unit][0..=24]`, kWh.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub storage_energy: Vec<Vec<Vec<f64>>>,
}

impl Design {
    /// The passive feeder: nothing installed.
    pub fn empty(cfg: &ScenarioConfig) -> Self {
        let units = cfg
            .der_units()
            .into_iter()
            .map(|u| {
                let spec = &cfg.der[u.spec];
                DerInstallation {
                    der: spec.name.clone(),
                    kind: spec.kind(),
                    bus: cfg.network.buses[u.bus].id.clone(),
                    installed: false,
                    s_max_kva: 0.0,
                    e_max_kwh: spec.storage().map(|_| 0.0),
                }
            })
            .collect();
        let lines = cfg
            .network
            .candidate_lines()
            .map(|(_, l)| LineInstallation {
                id: l.id.clone(),
                installed: false,
            })
            .collect();
        Design {
            units,
            lines,
            storage_energy: Vec::new(),
        }
    }

    /// Confirms the design refers to exactly this scenario's candidates.
    pub fn check(&self, cfg: &ScenarioConfig) -> Result<()> {
        let reference = Design::empty(cfg);
        if self.units.len() != reference.units.len() {
            return Err(Error::DesignMismatch(format!(
                "design lists {} DER candidates, scenario has {}",
                self.units.len(),
                reference.units.len()
            )));
        }
        for (a, b) in self.units.iter().zip(&reference.units) {
            if a.der != b.der || a.bus != b.bus || a.kind != b.kind {
                return Err(Error::DesignMismatch(format!(
                    "DER entry {}@{} does not match scenario candidate {}@{}",
                    a.der, a.bus, b.der, b.bus
                )));
            }
            let finite = a.s_max_kva.is_finite() && a.s_max_kva >= 0.0 && a.e_max_kwh.map_or(true, |e| e.is_finite() && e >= 0.0);
            if !finite || a.e_max_kwh.is_some() != b.e_max_kwh.is_some() {
                return Err(Error::DesignMismatch(format!("invalid capacity for {}@{}", a.der, a.bus)));
            }
        }
        let ids: Vec<&str> = self.lines.iter().map(|l| l.id.as_str()).collect();
        let want: Vec<&str> = reference.lines.iter().map(|l| l.id.as_str()).collect();
        if ids != want {
            return Err(Error::DesignMismatch(format!("candidate lines {ids:?} do not match {want:?}")));
        }
        if !self.storage_energy.is_empty() {
            let n_str = self.units.iter().filter(|u| u.kind == DerKind::Storage).count();
            let ok = self.storage_energy.len() == cfg.days.len()
                && self
                    .storage_energy
                    .iter()
                    .all(|d| d.len() == n_str && d.iter().all(|e| e.len() == cfg.hours() + 1));
            if !ok {
                return Err(Error::DesignMismatch("storage profile has the wrong shape".into()));
            }
        }
        Ok(())
    }

    /// Installation status of every network line; existing lines are `true`.
    pub fn line_status(&self, cfg: &ScenarioConfig) -> Vec<bool> {
        cfg.network
            .lines
            .iter()
            .map(|l| !l.is_candidate() || self.lines.iter().any(|c| c.id == l.id && c.installed))
            .collect()
    }

    pub fn installed_lines(&self) -> Vec<String> {
        self.lines.iter().filter(|l| l.installed).map(|l| l.id.clone()).collect()
    }

    /// Total installed power capacity of one technology, kVA.
    pub fn capacity(&self, kind: DerKind) -> f64 {
        self.units
            .iter()
            .filter(|u| u.kind == kind && u.installed)
            .map(|u| u.s_max_kva)
            .sum::<f64>()
            + 0.0
    }

    /// Total installed storage energy, kWh.
    pub fn storage_energy_capacity(&self) -> f64 {
        self.units
            .iter()
            .filter(|u| u.installed)
            .filter_map(|u| u.e_max_kwh)
            .sum::<f64>()
            + 0.0
    }

    pub fn without_profile(&self) -> Self {
        Design {
            storage_energy: Vec::new(),
            ..self.clone()
        }
    }
}

fn value(values: &[f64], v: crate::milp::VarId) -> Result<f64> {
    values
        .get(v.0)
        .copied()
        .ok_or_else(|| Error::MissingHandle(format!("column {} absent from solution", v.0)))
}

/// Reads investment decisions and grid-tied storage trajectories.
pub fn extract_design(cfg: &ScenarioConfig, cat: &Catalog, values: &[f64]) -> Result<Design> {
    let mut design = Design::empty(cfg);
    for (entry, uv) in design.units.iter_mut().zip(&cat.inv.units) {
        let installed = value(values, uv.y)? > BINARY_THRESHOLD;
        entry.installed = installed;
        if installed {
            entry.s_max_kva = value(values, uv.s_max)?.max(0.0);
            if let Some(e) = uv.e_max {
                entry.e_max_kwh = Some(value(values, e)?.max(0.0));
            }
        }
    }
    let cand: Vec<usize> = cfg.network.candidate_lines().map(|(i, _)| i).collect();
    for (entry, &li) in design.lines.iter_mut().zip(&cand) {
        entry.installed = value(values, cat.inv.lines[li])? > BINARY_THRESHOLD;
    }
    design.storage_energy = cat
        .grid
        .iter()
        .map(|ops| {
            ops.storage
                .iter()
                .map(|so| so.e.iter().map(|&v| value(values, v)).collect::<Result<Vec<f64>>>())
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(design)
}

/// Hourly dispatch of one operating block, all powers in kW/kvar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchTable {
    pub clock: Vec<usize>,
    pub pcc_p: Vec<f64>,
    pub distfl_q: Vec<f64>,
    /// `[unit][step]`, labelled by "name@bus".
    pub generators: Vec<(String, Vec<f64>)>,
    pub storage_charge: Vec<(String, Vec<f64>)>,
    pub storage_discharge: Vec<(String, Vec<f64>)>,
    pub storage_energy: Vec<(String, Vec<f64>)>,
    pub der_cost: Vec<f64>,
}

pub fn extract_dispatch(cfg: &ScenarioConfig, cat: &Catalog, ops: &OpVars, values: &[f64]) -> Result<DispatchTable> {
    let get = |vs: &[crate::milp::VarId]| vs.iter().map(|&v| value(values, v)).collect::<Result<Vec<f64>>>();
    let label = |unit: Option<usize>, bus: usize| match unit {
        Some(i) => format!("{}@{}", cfg.der[cat.inv.units[i].unit.spec].name, cfg.network.buses[bus].id),
        None => format!("pv@{}", cfg.network.buses[bus].id),
    };
    let mut t = DispatchTable {
        clock: ops.clock.clone(),
        pcc_p: get(&ops.pcc_p)?,
        distfl_q: get(&ops.distfl_q)?,
        generators: Vec::new(),
        storage_charge: Vec::new(),
        storage_discharge: Vec::new(),
        storage_energy: Vec::new(),
        der_cost: get(&ops.c_der)?,
    };
    for g in &ops.gens {
        t.generators.push((label(g.unit, g.bus), get(&g.p)?));
    }
    for s in &ops.storage {
        let l = label(Some(s.unit), s.bus);
        t.storage_charge.push((l.clone(), get(&s.ch)?));
        t.storage_discharge.push((l.clone(), get(&s.d)?));
        t.storage_energy.push((l, get(&s.e)?));
    }
    Ok(t)
}

/// Islanded dispatch of one event from a solved block containing it.
pub fn extract_event_dispatch(cfg: &ScenarioConfig, cat: &Catalog, ev: &EventVars, result: &SolveResult) -> Result<DispatchTable> {
    if !result.has_solution() {
        return Err(Error::MissingHandle(format!("no solution values for event {}", ev.id)));
    }
    extract_dispatch(cfg, cat, &ev.ops, &result.values)
}

/// Annualized investment cost of a design, $/y, without any surcharge.
pub fn investment_cost(cfg: &ScenarioConfig, design: &Design) -> Result<f64> {
    design.check(cfg)?;
    let mut total = 0.0;
    for (entry, unit) in design.units.iter().zip(cfg.der_units()) {
        if !entry.installed {
            continue;
        }
        let spec = &cfg.der[unit.spec];
        let cap = if spec.storage().is_some() {
            entry.e_max_kwh.unwrap_or(0.0)
        } else {
            entry.s_max_kva
        };
        total += (spec.variable_cost * cap + spec.fixed_cost) / cfg.annuity(spec.lifetime_years)?;
    }
    for (line, installed) in cfg.network.lines.iter().zip(design.line_status(cfg)) {
        if line.is_candidate() && installed {
            total += line.invest_cost / cfg.annuity(line.lifetime_years)?;
        }
    }
    Ok(total)
}
