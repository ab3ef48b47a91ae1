use crate::error::Result;
use crate::milp::{MilpBlock, Tag, VarId};
use crate::model::{DerKind, DerUnit, ScenarioConfig};

/// Capacity handles of one installable DER.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVars {
    pub unit: DerUnit,
    pub kind: DerKind,
    /// Power capacity, kVA.
    pub s_max: VarId,
    /// Energy capacity, kWh (storage only).
    pub e_max: Option<VarId>,
    pub y: VarId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvestmentVars {
    pub units: Vec<UnitVars>,
    /// Installation status per line; existing lines are continuous columns fixed at one.
    pub lines: Vec<VarId>,
    pub c_inv: Option<VarId>,
}

impl InvestmentVars {
    pub fn storage_units(&self) -> impl Iterator<Item = (usize, &UnitVars)> {
        self.units.iter().enumerate().filter(|(_, u)| u.kind == DerKind::Storage)
    }

    pub fn generator_units(&self) -> impl Iterator<Item = (usize, &UnitVars)> {
        self.units.iter().enumerate().filter(|(_, u)| u.kind != DerKind::Storage)
    }

    pub fn storage_count(&self) -> usize {
        self.storage_units().count()
    }

    /// Every decision column of the investment level.
    pub fn columns(&self) -> Vec<VarId> {
        let mut v: Vec<VarId> = self
            .units
            .iter()
            .flat_map(|u| [Some(u.s_max), u.e_max, Some(u.y)])
            .flatten()
            .collect();
        v.extend(&self.lines);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvestmentOptions {
    /// Emit the annualized cost row and charge it in the objective.
    pub with_cost: bool,
    /// Annual islanding-capability adder, $/y.
    pub surcharge: f64,
}

/// Capacity, activation and annualized-cost rows for all candidate DER and lines.
pub fn build_investment(block: &mut MilpBlock, cfg: &ScenarioConfig, opts: InvestmentOptions) -> Result<InvestmentVars> {
    let big_m = cfg.big_m();
    let mut units = Vec::new();
    let mut cost_terms: Vec<(VarId, f64)> = Vec::new();
    for unit in cfg.der_units() {
        let spec = &cfg.der[unit.spec];
        let bus = &cfg.network.buses[unit.bus].id;
        let tag = format!("{}@{}", spec.name, bus);
        let y = block.binary(format!("y_{tag}"));
        block.tag_var(y, Tag::InvestmentBinary);
        let s_max = block.continuous(format!("S_{tag}"), 0.0, big_m);
        let annuity = cfg.annuity(spec.lifetime_years)?;
        let e_max = if let Some(st) = spec.storage() {
            let e_cap = big_m / st.power_ratio;
            let e = block.continuous(format!("E_{tag}"), 0.0, e_cap);
            block.equal(vec![(s_max, 1.0), (e, -st.power_ratio)], 0.0, Tag::StorageRating);
            block.le(vec![(e, 1.0), (y, -e_cap)], 0.0, Tag::CapacityActivation);
            cost_terms.push((e, spec.variable_cost / annuity));
            Some(e)
        } else {
            block.le(vec![(s_max, 1.0), (y, -big_m)], 0.0, Tag::CapacityActivation);
            cost_terms.push((s_max, spec.variable_cost / annuity));
            None
        };
        cost_terms.push((y, spec.fixed_cost / annuity));
        units.push(UnitVars {
            unit,
            kind: spec.kind(),
            s_max,
            e_max,
            y,
        });
    }
    let mut lines = Vec::new();
    for line in &cfg.network.lines {
        if line.is_candidate() {
            let y = block.binary(format!("y_line_{}", line.id));
            block.tag_var(y, Tag::InvestmentBinary);
            cost_terms.push((y, line.invest_cost / cfg.annuity(line.lifetime_years)?));
            lines.push(y);
        } else {
            lines.push(block.continuous(format!("y_line_{}", line.id), 1.0, 1.0));
        }
    }
    let c_inv = if opts.with_cost {
        let c = block.free("C_inv");
        let mut terms = vec![(c, 1.0)];
        terms.extend(cost_terms.iter().map(|&(v, k)| (v, -k)));
        block.equal(terms, opts.surcharge, Tag::InvestmentCost);
        block.set_cost(c, 1.0);
        Some(c)
    } else {
        None
    };
    Ok(InvestmentVars { units, lines, c_inv })
}
