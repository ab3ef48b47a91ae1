use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::milp::{MilpBlock, Tag, VarId};
use crate::model::ScenarioConfig;

use super::investment::InvestmentVars;
use super::operations::{build_operations, OpContext, OpVars};

/// Longest event a block may span; longer horizons would wrap a day more than once.
pub const MAX_EVENT_HOURS: usize = 48;

/// An islanding event starting at `hour` of representative day `day`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventId {
    pub day: usize,
    pub hour: usize,
}

impl std::fmt::Display for EventId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "d{}h{:02}", self.day, self.hour)
    }
}

/// Every event of the scenario, day-major.
pub fn all_events(cfg: &ScenarioConfig) -> Vec<EventId> {
    (0..cfg.days.len())
        .flat_map(|day| (0..cfg.hours()).map(move |hour| EventId { day, hour }))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventVars {
    pub id: EventId,
    pub ops: OpVars,
    /// Recharge cost if the event ends after step `k` (index `k − 1`).
    pub recharge: Vec<VarId>,
    /// Expected event cost per occurrence opportunity, before the day weight.
    pub c_res: VarId,
}

/// Islanded redispatch for one event plus its recharge and resilience-cost rows.
///
/// `grid_energy[s]` holds the grid-tied energy trajectory (hours + 1 entries)
/// of the `s`-th storage unit on the event's day. The event cost enters the
/// objective with coefficient `weight`.
pub fn build_islanding_block(
    block: &mut MilpBlock,
    cfg: &ScenarioConfig,
    inv: &InvestmentVars,
    grid_energy: &[Vec<VarId>],
    event: EventId,
    weight: f64,
) -> Result<EventVars> {
    let hours = cfg.hours();
    let steps = cfg.islanding.effective_horizon();
    if steps > MAX_EVENT_HOURS {
        return Err(Error::InvalidArgument(format!(
            "islanding horizon of {steps} h exceeds the {MAX_EVENT_HOURS} h wrap limit"
        )));
    }
    if event.hour >= hours || event.day >= cfg.days.len() {
        return Err(Error::InvalidArgument(format!("event {event} outside the representative days")));
    }
    let initial: Vec<VarId> = grid_energy.iter().map(|e| e[event.hour]).collect();
    let ops = build_operations(
        block,
        cfg,
        inv,
        OpContext::Islanded {
            day: event.day,
            start: event.hour,
            steps,
            initial: &initial,
        },
    )?;

    let p_i = cfg.islanding.occurrence_probability;
    let pmf = &cfg.islanding.duration_pmf;
    let mut recharge = Vec::new();
    let c_res = block.free(format!("Cres_{event}"));
    let mut row = vec![(c_res, 1.0)];
    for k in 1..=steps {
        let end = ops.clock[k - 1] + 1;
        let price = cfg.tariff.import(end % hours);
        if !grid_energy.is_empty() {
            let r = block.free(format!("Crech_{event}_{k}"));
            let mut terms = vec![(r, 1.0)];
            for (s, so) in ops.storage.iter().enumerate() {
                terms.push((grid_energy[s][end], -price));
                terms.push((so.e[k], price));
            }
            block.equal(terms, 0.0, Tag::IslandRecharge);
            row.push((r, -p_i * pmf[k - 1]));
            recharge.push(r);
        }
        let surv = cfg.islanding.survival(k);
        row.push((ops.c_der[k - 1], -p_i * surv));
        row.push((ops.c_curt[k - 1], -p_i * surv));
    }
    block.equal(row, 0.0, Tag::ResilienceCost);
    block.set_cost(c_res, weight);
    Ok(EventVars {
        id: event,
        ops,
        recharge,
        c_res,
    })
}

/// Coefficients `L_s` such that every event cost (day weight included) is at
/// least `Σ_s L_s · E_max,s`: recharge can at most credit the usable energy.
pub fn event_cost_floor(cfg: &ScenarioConfig, inv: &InvestmentVars, event: EventId) -> Vec<(VarId, f64)> {
    let hours = cfg.hours();
    let steps = cfg.islanding.effective_horizon();
    let p_i = cfg.islanding.occurrence_probability;
    let w = cfg.days[event.day].weight;
    let credit: f64 = (1..=steps)
        .map(|k| {
            let end = (event.hour + k) % hours;
            cfg.islanding.duration_pmf[k - 1] * cfg.tariff.import(end)
        })
        .sum();
    inv.storage_units()
        .map(|(_, u)| {
            let dod = cfg.der[u.unit.spec].storage().map(|s| s.dod_max).unwrap_or(1.0);
            (u.e_max.expect("storage energy"), -w * p_i * credit * dod)
        })
        .collect()
}
