use crate::error::{Error, Result};
use crate::linearize::{abs_value, polygon_soc, pwl_square_scaled, Radius};
use crate::milp::{MilpBlock, Tag, VarId};
use crate::model::{DerKind, GeneratorParams, ScenarioConfig};

use super::investment::InvestmentVars;

/// Which operating regime a block of hours represents.
#[derive(Debug, Clone, Copy)]
pub enum OpContext<'a> {
    /// All hours of one representative day, with the grid connected.
    GridTied { day: usize },
    /// `steps` islanded hours starting at clock hour `start`; `initial[s]` is
    /// the grid-tied energy of the `s`-th storage unit when the event begins.
    Islanded {
        day: usize,
        start: usize,
        steps: usize,
        initial: &'a [VarId],
    },
}

impl OpContext<'_> {
    pub fn day(&self) -> usize {
        match *self {
            OpContext::GridTied { day } | OpContext::Islanded { day, .. } => day,
        }
    }

    pub fn is_islanded(&self) -> bool {
        matches!(self, OpContext::Islanded { .. })
    }
}

/// Per-step handles of one generator (DG, candidate RG or installed PV).
#[derive(Debug, Clone, PartialEq)]
pub struct GenOp {
    /// Index into [`InvestmentVars::units`]; `None` for pre-installed PV.
    pub unit: Option<usize>,
    pub bus: usize,
    pub kind: DerKind,
    pub p: Vec<VarId>,
    pub q: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StorageOp {
    pub unit: usize,
    pub bus: usize,
    pub ch: Vec<VarId>,
    pub d: Vec<VarId>,
    /// Net output `d − ch`.
    pub p: Vec<VarId>,
    pub q: Vec<VarId>,
    /// Energy at the start of each step plus one final entry.
    pub e: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpVars {
    pub day: usize,
    pub islanded: bool,
    /// Clock hour of each step.
    pub clock: Vec<usize>,
    pub gens: Vec<GenOp>,
    pub storage: Vec<StorageOp>,
    /// `[step][line]`, kW and kvar, positive from `from` to `to`.
    pub line_p: Vec<Vec<VarId>>,
    pub line_q: Vec<Vec<VarId>>,
    /// Squared voltage magnitude `[step][bus]`, pu².
    pub v: Vec<Vec<VarId>>,
    /// Power drawn from the upstream grid including losses.
    pub pcc_p: Vec<VarId>,
    pub distfl_p: Vec<VarId>,
    pub distfl_q: Vec<VarId>,
    pub c_der: Vec<VarId>,
    pub c_curt: Vec<VarId>,
    /// Grid-tied only.
    pub c_pcc: Vec<VarId>,
    pub c_op: Vec<VarId>,
    /// Row indices of the nodal balances `[step][bus]`.
    pub active_rows: Vec<Vec<usize>>,
    pub reactive_rows: Vec<Vec<usize>>,
}

impl OpVars {
    pub fn steps(&self) -> usize {
        self.clock.len()
    }
}

struct GenSetup {
    unit: Option<usize>,
    bus: usize,
    kind: DerKind,
    params: GeneratorParams,
    active_cost: f64,
    reactive_cost: f64,
    /// Capacity column, or the fixed rating of installed PV.
    cap: Result<VarId, f64>,
}

/// Operational rows for one context: DER limits, storage, DistFlow and hourly costs.
pub fn build_operations(block: &mut MilpBlock, cfg: &ScenarioConfig, inv: &InvestmentVars, ctx: OpContext<'_>) -> Result<OpVars> {
    let net = &cfg.network;
    let day_idx = ctx.day();
    let day = cfg
        .days
        .get(day_idx)
        .ok_or_else(|| Error::InvalidArgument(format!("representative day {day_idx} does not exist")))?;
    let hours = cfg.hours();
    let (clock, pfx): (Vec<usize>, String) = match ctx {
        OpContext::GridTied { day } => ((0..hours).collect(), format!("d{day}")),
        OpContext::Islanded { day, start, steps, initial } => {
            if initial.len() != inv.storage_count() {
                return Err(Error::InvalidArgument(format!(
                    "islanded block needs {} initial storage energies, got {}",
                    inv.storage_count(),
                    initial.len()
                )));
            }
            ((0..steps).map(|k| (start + k) % hours).collect(), format!("i{day}_{start}"))
        }
    };
    let steps = clock.len();
    let n_p = cfg.params.polygon_sides;
    let seg = cfg.params.pwl_segments;
    let s_b = net.base_kva;
    let pcc = net.pcc_index();
    let tiebreak = cfg.params.storage_tiebreak;
    let curt_fee = cfg.tariff.curtailment_fee;

    let mut setups = Vec::new();
    for (i, u) in inv.generator_units() {
        let spec = &cfg.der[u.unit.spec];
        setups.push(GenSetup {
            unit: Some(i),
            bus: u.unit.bus,
            kind: u.kind,
            params: spec.generator().cloned().unwrap_or_default(),
            active_cost: spec.active_cost,
            reactive_cost: spec.reactive_cost,
            cap: Ok(u.s_max),
        });
    }
    let (pv_params, pv_cp, pv_cq) = cfg.rg_params();
    for (b, bus) in net.buses.iter().enumerate() {
        if bus.pv_kw > 0.0 {
            setups.push(GenSetup {
                unit: None,
                bus: b,
                kind: DerKind::Rg,
                params: pv_params.clone(),
                active_cost: pv_cp,
                reactive_cost: pv_cq,
                cap: Err(bus.pv_kw),
            });
        }
    }

    let mut ov = OpVars {
        day: day_idx,
        islanded: ctx.is_islanded(),
        clock: clock.clone(),
        gens: Vec::new(),
        storage: Vec::new(),
        line_p: Vec::new(),
        line_q: Vec::new(),
        v: Vec::new(),
        pcc_p: Vec::new(),
        distfl_p: Vec::new(),
        distfl_q: Vec::new(),
        c_der: Vec::new(),
        c_curt: Vec::new(),
        c_pcc: Vec::new(),
        c_op: Vec::new(),
        active_rows: Vec::new(),
        reactive_rows: Vec::new(),
    };

    // Injections per step and bus, accumulated as row terms.
    let mut inj_p: Vec<Vec<Vec<(VarId, f64)>>> = vec![vec![Vec::new(); net.buses.len()]; steps];
    let mut inj_q = inj_p.clone();
    // Cost terms per step.
    let mut der_cost: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); steps];
    let mut curt_cost: Vec<(Vec<(VarId, f64)>, f64)> = vec![(Vec::new(), 0.0); steps];

    for g in &setups {
        let bus_id = &net.buses[g.bus].id;
        let label = match g.unit {
            Some(i) => format!("{}@{}", cfg.der[inv.units[i].unit.spec].name, bus_id),
            None => format!("pv@{bus_id}"),
        };
        let cap_max = match g.cap {
            Ok(_) => cfg.big_m(),
            Err(c) => c,
        };
        let ratio = g.params.reactive_ratio();
        let mut gop = GenOp {
            unit: g.unit,
            bus: g.bus,
            kind: g.kind,
            p: Vec::new(),
            q: Vec::new(),
        };
        for (k, &h) in clock.iter().enumerate() {
            let p = block.continuous(format!("P_{label}_{pfx}_{k}"), 0.0, cap_max);
            let q = block.continuous(format!("Q_{label}_{pfx}_{k}"), -cap_max, cap_max);
            let radius = match g.cap {
                Ok(s) => Radius::Var(s, 1.0),
                Err(c) => Radius::Const(c),
            };
            polygon_soc(block, p, q, radius, n_p, Tag::GeneratorApparent)?;
            match g.cap {
                Ok(s) => {
                    block.le(vec![(p, 1.0), (s, -g.params.f_p_max)], 0.0, Tag::GeneratorActive);
                    block.le(vec![(q, 1.0), (s, -g.params.f_q_max)], 0.0, Tag::GeneratorReactive);
                    block.ge(vec![(q, 1.0), (s, g.params.f_q_max)], 0.0, Tag::GeneratorReactive);
                }
                Err(c) => {
                    block.le(vec![(p, 1.0)], g.params.f_p_max * c, Tag::GeneratorActive);
                    block.le(vec![(q, 1.0)], g.params.f_q_max * c, Tag::GeneratorReactive);
                    block.ge(vec![(q, 1.0)], -g.params.f_q_max * c, Tag::GeneratorReactive);
                }
            }
            let qa = abs_value(block, q, Tag::AbsValue);
            if let Some(r) = ratio {
                block.le(vec![(qa, 1.0), (p, -r)], 0.0, Tag::GeneratorPowerFactor);
            }
            if g.kind == DerKind::Rg {
                match g.cap {
                    Ok(s) => {
                        let pu = day.rg_pu[h][g.bus];
                        block.le(vec![(p, 1.0), (s, -pu)], 0.0, Tag::RenewableAvailability);
                        curt_cost[k].0.push((s, curt_fee * pu));
                    }
                    Err(_) => {
                        let avail = day.rg_avail_kw[h][g.bus];
                        block.le(vec![(p, 1.0)], avail, Tag::RenewableAvailability);
                        curt_cost[k].1 += curt_fee * avail;
                    }
                }
                curt_cost[k].0.push((p, -curt_fee));
            }
            der_cost[k].push((p, g.active_cost));
            der_cost[k].push((qa, g.reactive_cost));
            inj_p[k][g.bus].push((p, 1.0));
            inj_q[k][g.bus].push((q, 1.0));
            gop.p.push(p);
            gop.q.push(q);
        }
        ov.gens.push(gop);
    }

    for (s_idx, (i, u)) in inv.storage_units().enumerate() {
        let spec = &cfg.der[u.unit.spec];
        let st = spec.storage().expect("storage unit");
        let e_max = u.e_max.expect("storage energy capacity");
        let label = format!("{}@{}", spec.name, net.buses[u.unit.bus].id);
        let cap = cfg.big_m();
        let e_cap = cap / st.power_ratio;
        let mut so = StorageOp {
            unit: i,
            bus: u.unit.bus,
            ch: Vec::new(),
            d: Vec::new(),
            p: Vec::new(),
            q: Vec::new(),
            e: Vec::new(),
        };
        for k in 0..=steps {
            let e = block.continuous(format!("E_{label}_{pfx}_{k}"), 0.0, e_cap);
            block.tag_var(e, Tag::StorageEnergyBounds);
            if k >= 1 {
                block.le(vec![(e, 1.0), (e_max, -1.0)], 0.0, Tag::StorageEnergyBounds);
                block.ge(vec![(e, 1.0), (e_max, -(1.0 - st.dod_max))], 0.0, Tag::StorageEnergyBounds);
            }
            so.e.push(e);
        }
        for k in 0..steps {
            let ch = block.continuous(format!("Pch_{label}_{pfx}_{k}"), 0.0, cap);
            let d = block.continuous(format!("Pd_{label}_{pfx}_{k}"), 0.0, cap);
            block.tag_var(ch, Tag::StorageDirection);
            block.tag_var(d, Tag::StorageDirection);
            let p = block.continuous(format!("Pstr_{label}_{pfx}_{k}"), -cap, cap);
            let q = block.continuous(format!("Qstr_{label}_{pfx}_{k}"), -cap, cap);
            block.equal(vec![(p, 1.0), (d, -1.0), (ch, 1.0)], 0.0, Tag::StorageNetPower);
            polygon_soc(block, p, q, Radius::Var(u.s_max, 1.0), n_p, Tag::StorageApparent)?;
            block.le(vec![(d, 1.0), (u.s_max, -1.0)], 0.0, Tag::StorageLimits);
            block.le(vec![(ch, 1.0), (u.s_max, -1.0)], 0.0, Tag::StorageLimits);
            block.equal(
                vec![
                    (so.e[k + 1], 1.0),
                    (so.e[k], -st.eta_self),
                    (ch, -st.eta_ch),
                    (d, 1.0 / st.eta_d),
                ],
                0.0,
                Tag::StorageBalance,
            );
            let qa = abs_value(block, q, Tag::AbsValue);
            der_cost[k].push((d, spec.active_cost + tiebreak));
            der_cost[k].push((ch, tiebreak));
            der_cost[k].push((qa, spec.reactive_cost));
            inj_p[k][u.unit.bus].push((p, 1.0));
            inj_q[k][u.unit.bus].push((q, 1.0));
            so.ch.push(ch);
            so.d.push(d);
            so.p.push(p);
            so.q.push(q);
        }
        match ctx {
            OpContext::GridTied { .. } => {
                block.equal(vec![(so.e[0], 1.0), (so.e[steps], -1.0)], 0.0, Tag::StorageCyclic);
                let mut terms: Vec<(VarId, f64)> = so.ch.iter().chain(&so.d).map(|&v| (v, 1.0)).collect();
                terms.push((e_max, -2.0 * st.max_cycles_per_day));
                block.le(terms, 0.0, Tag::StorageCycles);
            }
            OpContext::Islanded { initial, .. } => {
                block.equal(vec![(so.e[0], 1.0), (initial[s_idx], -1.0)], 0.0, Tag::IslandStorageInit);
            }
        }
        ov.storage.push(so);
    }

    let edges = net.edges();
    let v_span = net.buses.iter().map(|b| b.v_max).fold(0.0, f64::max)
        - net.buses.iter().map(|b| b.v_min).fold(f64::INFINITY, f64::min);
    let v_slack2 = cfg.params.v_slack * cfg.params.v_slack;
    for (k, &h) in clock.iter().enumerate() {
        let v: Vec<VarId> = net
            .buses
            .iter()
            .map(|b| {
                let id = block.continuous(format!("V_{}_{pfx}_{k}", b.id), b.v_min, b.v_max);
                block.tag_var(id, Tag::VoltageBounds);
                id
            })
            .collect();
        if !ctx.is_islanded() {
            block.fix(v[pcc], v_slack2);
        }
        let mut lp = Vec::new();
        let mut lq = Vec::new();
        let mut loss_terms = Vec::new();
        for e in &edges {
            let line = &net.lines[e.line];
            let smax = line.s_max_kva;
            let p = block.continuous(format!("Pl_{}_{pfx}_{k}", line.id), -smax, smax);
            let q = block.continuous(format!("Ql_{}_{pfx}_{k}", line.id), -smax, smax);
            polygon_soc(block, p, q, Radius::Var(inv.lines[e.line], smax), n_p, Tag::LineRating)?;
            let (r, x) = (line.r_pu, line.reactance());
            let drop = vec![(v[e.to], 1.0), (v[e.from], -1.0), (p, 2.0 * r / s_b), (q, 2.0 * x / s_b)];
            if line.is_candidate() {
                let y = inv.lines[e.line];
                let mut up = drop.clone();
                up.push((y, v_span));
                block.le(up, v_span, Tag::VoltageDrop);
                let mut lo = drop;
                lo.push((y, -v_span));
                block.ge(lo, -v_span, Tag::VoltageDrop);
            } else {
                block.equal(drop, 0.0, Tag::VoltageDrop);
            }
            let top = smax / s_b;
            let yp = pwl_square_scaled(block, p, 1.0 / s_b, -top, top, seg, Tag::PwlTangent)?;
            let yq = pwl_square_scaled(block, q, 1.0 / s_b, -top, top, seg, Tag::PwlTangent)?;
            loss_terms.push((yp, -r * s_b));
            loss_terms.push((yq, -r * s_b));
            lp.push(p);
            lq.push(q);
        }
        let pcc_p = block.free(format!("Ppcc_{pfx}_{k}"));
        let dp = block.free(format!("PdistP_{pfx}_{k}"));
        let dq = block.free(format!("PdistQ_{pfx}_{k}"));
        let mut loss_row = vec![(pcc_p, 1.0), (dp, -1.0)];
        loss_row.extend(loss_terms);
        block.equal(loss_row, 0.0, Tag::PccLosses);
        inj_p[k][pcc].push((dp, 1.0));
        inj_q[k][pcc].push((dq, 1.0));

        let mut arows = Vec::new();
        let mut rrows = Vec::new();
        for b in 0..net.buses.len() {
            let mut tp: Vec<(VarId, f64)> = inj_p[k][b].iter().map(|&(v, c)| (v, c)).collect();
            let mut tq: Vec<(VarId, f64)> = inj_q[k][b].iter().map(|&(v, c)| (v, c)).collect();
            for (j, e) in edges.iter().enumerate() {
                if e.from == b {
                    tp.push((lp[j], -1.0));
                    tq.push((lq[j], -1.0));
                } else if e.to == b {
                    tp.push((lp[j], 1.0));
                    tq.push((lq[j], 1.0));
                }
            }
            arows.push(block.equal(tp, day.demand_kw[h][b], Tag::ActiveBalance));
            rrows.push(block.equal(tq, day.reactive_kvar[h][b], Tag::ReactiveBalance));
        }
        ov.active_rows.push(arows);
        ov.reactive_rows.push(rrows);

        let c_der = block.nonneg(format!("Cder_{pfx}_{k}"));
        let mut row = vec![(c_der, 1.0)];
        row.extend(der_cost[k].iter().map(|&(v, c)| (v, -c)));
        block.equal(row, 0.0, Tag::DerOperatingCost);
        let c_curt = block.free(format!("Ccurt_{pfx}_{k}"));
        let mut row = vec![(c_curt, 1.0)];
        row.extend(curt_cost[k].0.iter().map(|&(v, c)| (v, -c)));
        block.equal(row, curt_cost[k].1, Tag::CurtailmentCost);

        if ctx.is_islanded() {
            block.equal(vec![(pcc_p, 1.0)], 0.0, Tag::IslandPcc);
            block.equal(vec![(dq, 1.0)], 0.0, Tag::IslandPcc);
        } else {
            let (c_im, c_ex) = (cfg.tariff.import(h), cfg.tariff.export(h));
            let pa = abs_value(block, pcc_p, Tag::AbsValue);
            let qa = abs_value(block, dq, Tag::AbsValue);
            let c_pcc = block.free(format!("Cpcc_{pfx}_{k}"));
            let half = (c_im - c_ex) / 2.0;
            block.equal(
                vec![(c_pcc, 1.0), (pcc_p, -(c_ex + half)), (pa, -half), (qa, -cfg.tariff.reactive_price)],
                0.0,
                Tag::PccCost,
            );
            let c_op = block.free(format!("Cop_{pfx}_{k}"));
            block.equal(
                vec![(c_op, 1.0), (c_pcc, -1.0), (c_der, -1.0), (c_curt, -1.0)],
                0.0,
                Tag::OperatingCost,
            );
            block.set_cost(c_op, day.weight);
            ov.c_pcc.push(c_pcc);
            ov.c_op.push(c_op);
        }
        ov.v.push(v);
        ov.line_p.push(lp);
        ov.line_q.push(lq);
        ov.pcc_p.push(pcc_p);
        ov.distfl_p.push(dp);
        ov.distfl_q.push(dq);
        ov.c_der.push(c_der);
        ov.c_curt.push(c_curt);
    }
    Ok(ov)
}
