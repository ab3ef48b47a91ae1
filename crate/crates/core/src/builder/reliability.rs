use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::linearize::bilinear_binary;
use crate::milp::{MilpBlock, Tag, VarId};
use crate::model::{DerKind, NetworkModel, ScenarioConfig};

use super::investment::InvestmentVars;
use super::operations::OpVars;

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityVars {
    pub demand_buses: Vec<usize>,
    /// `[demand][line]` forward and backward path indicators.
    pub paths: Vec<Vec<(VarId, VarId)>>,
    /// Expected annual outage duration, h/y.
    pub u: Vec<VarId>,
    /// `[demand][day][hour]`, kW.
    pub p_net: Vec<Vec<Vec<VarId>>>,
    /// Year-average net demand, kW.
    pub pbar: Vec<VarId>,
    /// kWh/y.
    pub eens: Vec<VarId>,
    pub c_rel: VarId,
}

/// Buses reachable from the PCC over every line, candidates included.
pub fn reachable_from_pcc(net: &NetworkModel) -> Vec<bool> {
    let mut seen = vec![false; net.buses.len()];
    let edges = net.edges();
    let pcc = net.pcc_index();
    seen[pcc] = true;
    let mut queue = VecDeque::from([pcc]);
    while let Some(b) = queue.pop_front() {
        for e in &edges {
            let other = if e.from == b {
                e.to
            } else if e.to == b {
                e.from
            } else {
                continue;
            };
            if !seen[other] {
                seen[other] = true;
                queue.push_back(other);
            }
        }
    }
    seen
}

/// Path selection, outage duration, self-supply floors and EENS cost.
pub fn build_reliability_block(
    block: &mut MilpBlock,
    cfg: &ScenarioConfig,
    inv: &InvestmentVars,
    grid: &[OpVars],
) -> Result<ReliabilityVars> {
    let net = &cfg.network;
    let rel = &cfg.reliability;
    let reach = reachable_from_pcc(net);
    let demand = net.demand_buses();
    if let Some(&b) = demand.iter().find(|&&b| !reach[b]) {
        return Err(Error::validation(format!(
            "demand bus '{}' cannot be reached from the PCC even with every candidate line",
            net.buses[b].id
        )));
    }
    let edges = net.edges();
    let pcc = net.pcc_index();
    let hours = cfg.hours();
    let year_hours = cfg.year_hours();

    let mut out = ReliabilityVars {
        demand_buses: demand.clone(),
        paths: Vec::new(),
        u: Vec::new(),
        p_net: Vec::new(),
        pbar: Vec::new(),
        eens: Vec::new(),
        c_rel: block.nonneg("C_rel"),
    };
    let mut cost_row = vec![(out.c_rel, 1.0)];
    for &dm in &demand {
        let dname = &net.buses[dm].id;
        let pairs: Vec<(VarId, VarId)> = edges
            .iter()
            .map(|e| {
                let lid = &net.lines[e.line].id;
                let f = block.binary(format!("yf_{dname}_{lid}"));
                let b = block.binary(format!("yb_{dname}_{lid}"));
                block.tag_var(f, Tag::PathBinary);
                block.tag_var(b, Tag::PathBinary);
                block.le(vec![(f, 1.0), (b, 1.0), (inv.lines[e.line], -1.0)], 0.0, Tag::PathGate);
                (f, b)
            })
            .collect();
        for bus in 0..net.buses.len() {
            let mut terms = Vec::new();
            for (j, e) in edges.iter().enumerate() {
                let (f, b) = pairs[j];
                if e.from == bus {
                    terms.push((f, 1.0));
                    terms.push((b, -1.0));
                } else if e.to == bus {
                    terms.push((f, -1.0));
                    terms.push((b, 1.0));
                }
            }
            let rhs = f64::from(u8::from(bus == pcc)) - f64::from(u8::from(bus == dm));
            if terms.is_empty() {
                continue;
            }
            block.equal(terms, rhs, Tag::PathFlow);
        }
        let base = rel.bus_rate[dm] * rel.bus_repair[dm];
        let u = block.nonneg(format!("U_{dname}"));
        let mut row = vec![(u, 1.0)];
        for (j, e) in edges.iter().enumerate() {
            let lt = rel.line_rate[e.line] * rel.line_repair[e.line];
            row.push((pairs[j].0, -lt));
            row.push((pairs[j].1, -lt));
        }
        block.equal(row, base, Tag::OutageDuration);

        // Local resources at this bus.
        let local: Vec<usize> = inv.units.iter().enumerate().filter(|(_, u)| u.unit.bus == dm).map(|(i, _)| i).collect();
        let pv = net.buses[dm].pv_kw;
        let mut p_net_days = Vec::new();
        let mut peak: f64 = 0.0;
        let mut pbar_row = Vec::new();
        for (d, day) in cfg.days.iter().enumerate() {
            let mut row_h = Vec::new();
            for h in 0..hours {
                let dmd = day.demand_kw[h][dm];
                peak = peak.max(dmd);
                let pn = block.continuous(format!("Pnet_{dname}_{d}_{h}"), 0.0, dmd.max(0.0));
                block.tag_var(pn, Tag::NetDemandFloor);
                let pf = day.power_factor[h][dm];
                let mut apparent = vec![(pn, 1.0)];
                let mut energy = vec![(pn, 1.0)];
                let mut power = vec![(pn, 1.0)];
                for &i in &local {
                    let uv = &inv.units[i];
                    apparent.push((uv.s_max, pf));
                    match uv.kind {
                        DerKind::Dg => {
                            let f = cfg.der[uv.unit.spec].generator().map(|g| g.f_p_max).unwrap_or(1.0);
                            energy.push((uv.s_max, f));
                            power.push((uv.s_max, f));
                        }
                        DerKind::Rg => {
                            let pu = day.rg_pu[h][dm];
                            energy.push((uv.s_max, pu));
                            power.push((uv.s_max, pu));
                        }
                        DerKind::Storage => {
                            let st = cfg.der[uv.unit.spec].storage().expect("storage");
                            let so = grid[d]
                                .storage
                                .iter()
                                .find(|s| s.unit == i)
                                .expect("grid-tied storage handles");
                            energy.push((so.e[h], st.eta_d / st.drain_divisor(rel.tau_max)));
                            power.push((uv.s_max, 1.0));
                        }
                    }
                }
                let avail = day.rg_avail_kw[h][dm];
                block.ge(apparent, pf * (day.apparent_kva[h][dm] - pv), Tag::NetDemandApparent);
                block.ge(energy, dmd - avail, Tag::NetDemandEnergy);
                block.ge(power, dmd - avail, Tag::NetDemandPower);
                pbar_row.push((pn, -day.weight / year_hours));
                row_h.push(pn);
            }
            p_net_days.push(row_h);
        }
        let pbar = block.continuous(format!("Pbar_{dname}"), 0.0, peak);
        pbar_row.push((pbar, 1.0));
        block.equal(pbar_row, 0.0, Tag::NetDemandFloor);

        let eens = block.nonneg(format!("EENS_{dname}"));
        let mut row = vec![(eens, 1.0), (pbar, -base)];
        for (j, e) in edges.iter().enumerate() {
            let lt = rel.line_rate[e.line] * rel.line_repair[e.line];
            if lt == 0.0 {
                continue;
            }
            let zf = bilinear_binary(block, pairs[j].0, pbar, peak, Tag::Bilinear)?;
            let zb = bilinear_binary(block, pairs[j].1, pbar, peak, Tag::Bilinear)?;
            row.push((zf, -lt));
            row.push((zb, -lt));
        }
        block.equal(row, 0.0, Tag::Eens);
        cost_row.push((eens, -rel.cost_not_supplied[dm]));

        out.paths.push(pairs);
        out.u.push(u);
        out.p_net.push(p_net_days);
        out.pbar.push(pbar);
        out.eens.push(eens);
    }
    block.equal(cost_row, 0.0, Tag::ReliabilityCost);
    block.set_cost(out.c_rel, 1.0);
    Ok(out)
}
