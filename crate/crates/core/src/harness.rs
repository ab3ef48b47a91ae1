//! Experiment protocol: design cases, sensitivity sweeps, multi-microgrid
//! partitions and Monte-Carlo validation, each producing serializable reports.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::{build_master, EventId, Levels};
use crate::ccg::{self, evaluate_fixed_design, CcgOptions, CcgState, Evaluation};
use crate::design::{extract_design, Design};
use crate::error::{Error, Result};
use crate::model::{validate_scenario, DerKind, ScenarioConfig};
use crate::reliability_eval::{analytic_indices, monte_carlo_oracle, ReliabilityReport};
use crate::solver::{solve, SolveParams, SolveStatus, SolverError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseId {
    Base,
    Reliability,
    Resilience,
    Full,
}

impl CaseId {
    pub const ALL: [CaseId; 4] = [CaseId::Base, CaseId::Reliability, CaseId::Resilience, CaseId::Full];

    pub fn levels(self) -> Levels {
        match self {
            CaseId::Base => Levels::BASE,
            CaseId::Reliability => Levels {
                resilience: false,
                reliability: true,
            },
            CaseId::Resilience => Levels {
                resilience: true,
                reliability: false,
            },
            CaseId::Full => Levels::FULL,
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CaseId::Base => "base",
            CaseId::Reliability => "reliability",
            CaseId::Resilience => "resilience",
            CaseId::Full => "full",
        })
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(CaseId::Base),
            "reliability" => Ok(CaseId::Reliability),
            "resilience" => Ok(CaseId::Resilience),
            "full" => Ok(CaseId::Full),
            other => Err(Error::InvalidArgument(format!(
                "unknown case '{other}' (expected base, reliability, resilience or full)"
            ))),
        }
    }
}

/// A case and the model levels it switches on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSpec {
    pub id: CaseId,
    pub levels: Levels,
}

impl From<CaseId> for CaseSpec {
    fn from(id: CaseId) -> Self {
        CaseSpec { id, levels: id.levels() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub eps: f64,
    pub n0: usize,
    pub max_iterations: usize,
    pub threads: usize,
    pub solve: SolveParams,
}

impl RunOptions {
    pub fn from_cfg(cfg: &ScenarioConfig) -> Self {
        let c = CcgOptions::from_cfg(cfg);
        RunOptions {
            eps: c.eps,
            n0: c.n0,
            max_iterations: c.max_iterations,
            threads: c.threads,
            solve: c.solve,
        }
    }

    pub fn ccg(&self) -> CcgOptions {
        CcgOptions {
            eps: self.eps,
            n0: self.n0,
            max_iterations: self.max_iterations,
            threads: self.threads,
            solve: self.solve.clone(),
            events: None,
        }
    }
}

/// Annual cost components, $/y, or the same normalized to ¢/kWh of load.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostStack {
    /// Annualized investment, surcharge included.
    pub investment: f64,
    pub islanding_surcharge: f64,
    pub operation: f64,
    pub resilience: f64,
    pub reliability: f64,
    pub total: f64,
}

impl CostStack {
    fn from_eval(e: &Evaluation) -> Self {
        let c = &e.costs;
        CostStack {
            investment: c.investment,
            islanding_surcharge: c.islanding_surcharge,
            operation: c.operation,
            resilience: c.resilience,
            reliability: c.reliability,
            total: c.total(),
        }
    }

    fn scaled(&self, f: f64) -> Self {
        CostStack {
            investment: self.investment * f,
            islanding_surcharge: self.islanding_surcharge * f,
            operation: self.operation * f,
            resilience: self.resilience * f,
            reliability: self.reliability * f,
            total: self.total * f,
        }
    }

    /// Investment plus grid-tied operation.
    pub fn investment_and_operation(&self) -> f64 {
        self.investment + self.operation
    }

    pub fn component_sum(&self) -> f64 {
        self.investment + self.operation + self.resilience + self.reliability
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstalledDer {
    pub der: String,
    pub kind: DerKind,
    pub bus: String,
    pub s_max_kva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max_kwh: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub iteration: usize,
    pub lb: f64,
    /// `None` until a design islands every event.
    pub ub: Option<f64>,
    pub added: Option<EventId>,
    pub infeasible_events: usize,
    pub installed_kva: f64,
}

/// Bounds and event history of a decomposition run; timings live in the CSV log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcgSummary {
    pub iterations: usize,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub converged: bool,
    pub events_in_master: Vec<EventId>,
    pub log: Vec<IterationSummary>,
}

impl From<&CcgState> for CcgSummary {
    fn from(s: &CcgState) -> Self {
        CcgSummary {
            iterations: s.iterations,
            lb: s.lb,
            ub: s.ub,
            gap: s.relative_gap(),
            converged: s.converged,
            events_in_master: s.in_master.clone(),
            log: s
                .log
                .iter()
                .map(|r| IterationSummary {
                    iteration: r.iteration,
                    lb: r.lb,
                    ub: r.ub.is_finite().then_some(r.ub),
                    added: r.added,
                    infeasible_events: r.infeasible_events,
                    installed_kva: r.installed_kva,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub schema_version: u32,
    pub scenario: String,
    pub fingerprint: String,
    pub case: CaseId,
    pub installed_der: Vec<InstalledDer>,
    pub installed_lines: Vec<String>,
    pub costs: CostStack,
    pub costs_cents_per_kwh: CostStack,
    pub annual_demand_kwh: f64,
    pub peak_pcc_kw: f64,
    /// Objective value of the case's own optimization, $/y.
    pub objective: f64,
    pub reliability: ReliabilityReport,
    /// Events the design cannot island; charged ex post.
    pub infeasible_events: Vec<EventId>,
    pub islanding_eens_kwh: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ccg: Option<CcgSummary>,
    pub design: Design,
}

impl DesignReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let report: DesignReport = crate::model::network::parse_json(text, source)?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::DesignMismatch(format!(
                "report schema version {} is not supported (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn is_islandable(&self) -> bool {
        self.infeasible_events.is_empty()
    }

    pub fn capacity(&self, kind: DerKind) -> f64 {
        self.design.capacity(kind)
    }
}

/// Report plus the full decomposition state, whose log carries timings.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseRun {
    pub report: DesignReport,
    pub ccg: Option<CcgState>,
}

fn build_report(cfg: &ScenarioConfig, case: CaseId, eval: &Evaluation, objective: f64, ccg: Option<&CcgState>) -> DesignReport {
    let costs = CostStack::from_eval(eval);
    let demand = cfg.annual_demand_kwh();
    let cents = if demand > 0.0 { 100.0 / demand } else { 0.0 };
    let installed_der = eval
        .design
        .units
        .iter()
        .filter(|u| u.installed)
        .map(|u| InstalledDer {
            der: u.der.clone(),
            kind: u.kind,
            bus: u.bus.clone(),
            s_max_kva: u.s_max_kva,
            e_max_kwh: u.e_max_kwh,
        })
        .collect();
    DesignReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenario: cfg.name.clone(),
        fingerprint: cfg.fingerprint(),
        case,
        installed_der,
        installed_lines: eval.design.installed_lines(),
        costs,
        costs_cents_per_kwh: costs.scaled(cents),
        annual_demand_kwh: demand,
        peak_pcc_kw: eval.peak_pcc_kw,
        objective,
        reliability: eval.reliability.clone(),
        infeasible_events: eval.infeasible_events(),
        islanding_eens_kwh: eval.islanding_eens_kwh,
        ccg: ccg.map(CcgSummary::from),
        design: eval.design.clone(),
    }
}

/// Solves one case and evaluates its design ex post.
pub fn run_case(cfg: &ScenarioConfig, case: CaseId, opts: &RunOptions) -> Result<CaseRun> {
    let levels = case.levels();
    if levels.resilience {
        let out = ccg::run(cfg, levels, &opts.ccg())?;
        let eval = evaluate_fixed_design(cfg, &out.design, levels, &opts.solve, opts.threads)?;
        let report = build_report(cfg, case, &eval, out.state.ub, Some(&out.state));
        Ok(CaseRun {
            report,
            ccg: Some(out.state),
        })
    } else {
        let model = build_master(cfg, levels, &[])?;
        let res = solve(&model.block, &opts.solve)?;
        match res.status {
            SolveStatus::Infeasible => return Err(Error::DesignInfeasible(format!("case {case} has no feasible design"))),
            _ if !res.has_solution() => {
                return Err(Error::Solver(SolverError::Numerical {
                    context: format!("case {case}"),
                    message: format!("status {:?} without a solution", res.status),
                }))
            }
            _ => {}
        }
        let design = extract_design(cfg, &model.catalog, &res.values)?;
        let eval = evaluate_fixed_design(cfg, &design, levels, &opts.solve, opts.threads)?;
        Ok(CaseRun {
            report: build_report(cfg, case, &eval, res.objective, None),
            ccg: None,
        })
    }
}

/// Evaluates any design under the full objective, surcharge included.
pub fn evaluate_under_full(cfg: &ScenarioConfig, design: &Design, opts: &RunOptions) -> Result<CostStack> {
    let eval = evaluate_fixed_design(cfg, design, Levels::FULL, &opts.solve, opts.threads)?;
    Ok(CostStack::from_eval(&eval))
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxes {
    /// Fixed islanding durations in hours; `None` keeps the scenario's distribution.
    pub durations_h: Vec<Option<usize>>,
    /// Multipliers on installed PV.
    pub rg_scales: Vec<f64>,
    /// Multipliers on storage investment costs.
    pub storage_cost_scales: Vec<f64>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        SweepAxes {
            durations_h: vec![None],
            rg_scales: vec![1.0],
            storage_cost_scales: vec![1.0],
        }
    }
}

impl SweepAxes {
    /// Parses `duration=6,12;rg=0.5,1,2;storage=1,0.6`. Omitted axes stay at nominal;
    /// `nominal` in the duration list keeps the scenario distribution.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut axes = SweepAxes::default();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, values) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("axis '{part}' needs the form name=v1,v2")))?;
            let items: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
            if items.is_empty() {
                return Err(Error::InvalidArgument(format!("axis '{name}' has no values")));
            }
            let floats = || -> Result<Vec<f64>> {
                items
                    .iter()
                    .map(|v| {
                        v.parse::<f64>()
                            .ok()
                            .filter(|x| x.is_finite() && *x >= 0.0)
                            .ok_or_else(|| Error::InvalidArgument(format!("'{v}' is not a non-negative number")))
                    })
                    .collect()
            };
            match name.trim() {
                "duration" => {
                    axes.durations_h = items
                        .iter()
                        .map(|v| {
                            if *v == "nominal" {
                                Ok(None)
                            } else {
                                v.parse::<usize>()
                                    .ok()
                                    .filter(|&h| h >= 1)
                                    .map(Some)
                                    .ok_or_else(|| Error::InvalidArgument(format!("'{v}' is not a duration in hours")))
                            }
                        })
                        .collect::<Result<_>>()?
                }
                "rg" => axes.rg_scales = floats()?,
                "storage" => axes.storage_cost_scales = floats()?,
                other => return Err(Error::InvalidArgument(format!("unknown sweep axis '{other}'"))),
            }
        }
        Ok(axes)
    }

    pub fn points(&self) -> Vec<SweepPoint> {
        let mut out = Vec::new();
        for &d in &self.durations_h {
            for &r in &self.rg_scales {
                for &s in &self.storage_cost_scales {
                    out.push(SweepPoint {
                        duration_h: d,
                        rg_scale: r,
                        storage_cost_scale: s,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub duration_h: Option<usize>,
    pub rg_scale: f64,
    pub storage_cost_scale: f64,
}

/// The scenario at one sweep point.
pub fn apply_point(cfg: &ScenarioConfig, p: &SweepPoint) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    for b in &mut c.network.buses {
        b.pv_kw *= p.rg_scale;
    }
    for d in &mut c.der {
        if d.storage().is_some() {
            d.fixed_cost *= p.storage_cost_scale;
            d.variable_cost *= p.storage_cost_scale;
        }
    }
    let mut c = validate_scenario(c)?;
    if let Some(h) = p.duration_h {
        let mut spec = c.islanding_spec.clone();
        spec.point_mass_hour = Some(h);
        spec.horizon_hours = spec.horizon_hours.max(h);
        c = c.with_islanding(spec)?;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: SweepPoint,
    pub dg_kva: f64,
    pub storage_kva: f64,
    pub storage_kwh: f64,
    pub total_cost: f64,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Direction of a capacity as one axis increases from its first to its last value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisTrend {
    pub axis: String,
    pub dg_sign: i8,
    pub storage_sign: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub case: CaseId,
    pub rows: Vec<SweepRow>,
    pub trends: Vec<AxisTrend>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("duration_h,rg_scale,storage_cost_scale,dg_kva,storage_kva,storage_kwh,total_cost,objective,error\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.point.duration_h.map(|d| d.to_string()).unwrap_or_else(|| "nominal".into()),
                r.point.rg_scale,
                r.point.storage_cost_scale,
                r.dg_kva,
                r.storage_kva,
                r.storage_kwh,
                r.total_cost,
                r.objective,
                r.error.as_deref().unwrap_or("").replace(',', ";")
            ));
        }
        s
    }
}

fn sign(delta: f64, scale: f64, tol: f64) -> i8 {
    if delta > tol * scale.max(1.0) {
        1
    } else if delta < -tol * scale.max(1.0) {
        -1
    } else {
        0
    }
}

/// Points of a series that do not exceed their predecessor by more than
/// `rel_tol`; the first point always counts.
pub fn count_non_increasing(values: &[f64], rel_tol: f64) -> usize {
    if values.is_empty() {
        return 0;
    }
    1 + values
        .windows(2)
        .filter(|w| w[1] <= w[0] + rel_tol * w[0].abs().max(1.0))
        .count()
}

/// One case run per grid point; failures are recorded in their row.
pub fn sweep(cfg: &ScenarioConfig, axes: &SweepAxes, case: CaseId, opts: &RunOptions) -> Result<SweepTable> {
    let points = axes.points();
    if points.is_empty() {
        return Err(Error::InvalidArgument("sweep grid is empty".into()));
    }
    let inner = RunOptions {
        threads: 1,
        ..opts.clone()
    };
    let job = |p: &SweepPoint| -> SweepRow {
        let run = apply_point(cfg, p).and_then(|c| run_case(&c, case, &inner));
        match run {
            Ok(r) => {
                let d = &r.report.design;
                SweepRow {
                    point: *p,
                    dg_kva: d.capacity(DerKind::Dg),
                    storage_kva: d.capacity(DerKind::Storage),
                    storage_kwh: d.storage_energy_capacity(),
                    total_cost: r.report.costs.total,
                    objective: r.report.objective,
                    error: None,
                }
            }
            Err(e) => SweepRow {
                point: *p,
                dg_kva: f64::NAN,
                storage_kva: f64::NAN,
                storage_kwh: f64::NAN,
                total_cost: f64::NAN,
                objective: f64::NAN,
                error: Some(e.to_string()),
            },
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| points.par_iter().map(job).collect());

    let tol = opts.solve.mip_gap.max(opts.eps);
    let mut trends = Vec::new();
    let first = points[0];
    let mut along = |axis: &str, pick: &dyn Fn(&SweepPoint) -> bool| {
        let series: Vec<&SweepRow> = rows.iter().filter(|r| pick(&r.point) && r.error.is_none()).collect();
        if series.len() >= 2 {
            let (a, b) = (series[0], series[series.len() - 1]);
            trends.push(AxisTrend {
                axis: axis.into(),
                dg_sign: sign(b.dg_kva - a.dg_kva, a.dg_kva, tol),
                storage_sign: sign(b.storage_kwh - a.storage_kwh, a.storage_kwh, tol),
            });
        }
    };
    if axes.durations_h.len() > 1 {
        along("duration", &|p| p.rg_scale == first.rg_scale && p.storage_cost_scale == first.storage_cost_scale);
    }
    if axes.rg_scales.len() > 1 {
        along("rg", &|p| p.duration_h == first.duration_h && p.storage_cost_scale == first.storage_cost_scale);
    }
    if axes.storage_cost_scales.len() > 1 {
        along("storage", &|p| p.duration_h == first.duration_h && p.rg_scale == first.rg_scale);
    }
    Ok(SweepTable { case, rows, trends })
}

// ---------------------------------------------------------------------------
// Partitions

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionDef {
    pub name: String,
    pub buses: Vec<String>,
    /// Boundary bus that connects this microgrid to the upstream feeder.
    pub pcc: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    /// Scenario file, relative to the spec file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    pub partitions: Vec<PartitionDef>,
}

/// The identity partition: the whole feeder as one microgrid.
pub fn identity_partition(cfg: &ScenarioConfig) -> Vec<PartitionDef> {
    vec![PartitionDef {
        name: "all".into(),
        buses: cfg.network.buses.iter().map(|b| b.id.clone()).collect(),
        pcc: cfg.network.pcc.clone(),
    }]
}

/// Checks that partitions are disjoint, cover every bus and own their PCC.
pub fn check_partitions(cfg: &ScenarioConfig, defs: &[PartitionDef]) -> Result<()> {
    let mut v = Vec::new();
    let mut owner: Vec<Option<&str>> = vec![None; cfg.network.buses.len()];
    if defs.is_empty() {
        v.push("at least one partition is required".to_string());
    }
    for d in defs {
        if !d.buses.contains(&d.pcc) {
            v.push(format!("partition '{}' does not contain its PCC '{}'", d.name, d.pcc));
        }
        for b in &d.buses {
            match cfg.network.bus_index(b) {
                None => v.push(format!("partition '{}' names unknown bus '{b}'", d.name)),
                Some(i) => match owner[i] {
                    Some(o) => v.push(format!("bus '{b}' is in both '{o}' and '{}'", d.name)),
                    None => owner[i] = Some(&d.name),
                },
            }
        }
    }
    for (i, o) in owner.iter().enumerate() {
        if o.is_none() {
            v.push(format!("bus '{}' is in no partition", cfg.network.buses[i].id));
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(v))
    }
}

/// The sub-scenario of one partition: its buses, internal lines and DER
/// candidates, with its boundary bus as PCC under the upstream tariff.
pub fn restrict_scenario(cfg: &ScenarioConfig, def: &PartitionDef) -> Result<ScenarioConfig> {
    let keep: Vec<usize> = cfg
        .network
        .buses
        .iter()
        .enumerate()
        .filter(|(_, b)| def.buses.contains(&b.id))
        .map(|(i, _)| i)
        .collect();
    let mut c = cfg.clone();
    c.name = format!("{}/{}", cfg.name, def.name);
    c.network.buses = keep.iter().map(|&i| cfg.network.buses[i].clone()).collect();
    for b in &mut c.network.buses {
        b.pcc = b.id == def.pcc;
    }
    c.network.pcc = def.pcc.clone();
    c.network.lines.retain(|l| def.buses.contains(&l.from) && def.buses.contains(&l.to));
    let cols = |m: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { m.iter().map(|row| keep.iter().map(|&i| row[i]).collect()).collect() };
    for d in &mut c.days {
        d.demand_kw = cols(&d.demand_kw);
        d.power_factor = cols(&d.power_factor);
        d.rg_pu = cols(&d.rg_pu);
    }
    for d in &mut c.der {
        d.candidate_buses.retain(|b| def.buses.contains(b));
    }
    c.der.retain(|d| !d.candidate_buses.is_empty());
    validate_scenario(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub costs: CostStack,
    pub annual_demand_kwh: f64,
    pub dg_kva: f64,
    pub storage_kwh: f64,
    pub eens_kwh: f64,
    /// Demand-bus weighted averages.
    pub saifi: f64,
    pub saidi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub schema_version: u32,
    pub case: CaseId,
    pub partitions: Vec<DesignReport>,
    pub aggregate: AggregateReport,
}

pub fn aggregate(reports: &[DesignReport]) -> AggregateReport {
    let mut a = AggregateReport {
        costs: CostStack::default(),
        annual_demand_kwh: 0.0,
        dg_kva: 0.0,
        storage_kwh: 0.0,
        eens_kwh: 0.0,
        saifi: 0.0,
        saidi: 0.0,
    };
    let mut n = 0usize;
    for r in reports {
        let c = &r.costs;
        a.costs.investment += c.investment;
        a.costs.islanding_surcharge += c.islanding_surcharge;
        a.costs.operation += c.operation;
        a.costs.resilience += c.resilience;
        a.costs.reliability += c.reliability;
        a.costs.total += c.total;
        a.annual_demand_kwh += r.annual_demand_kwh;
        a.dg_kva += r.design.capacity(DerKind::Dg);
        a.storage_kwh += r.design.storage_energy_capacity();
        a.eens_kwh += r.reliability.eens_kwh;
        let k = r.reliability.buses.len();
        a.saifi += r.reliability.saifi * k as f64;
        a.saidi += r.reliability.saidi * k as f64;
        n += k;
    }
    if n > 0 {
        a.saifi /= n as f64;
        a.saidi /= n as f64;
    }
    a
}

/// Designs every partition independently and stacks the results.
pub fn partition(cfg: &ScenarioConfig, defs: &[PartitionDef], case: CaseId, opts: &RunOptions) -> Result<PartitionReport> {
    check_partitions(cfg, defs)?;
    let mut reports = Vec::new();
    for d in defs {
        let sub = restrict_scenario(cfg, d)?;
        reports.push(run_case(&sub, case, opts)?.report);
    }
    Ok(PartitionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        case,
        aggregate: aggregate(&reports),
        partitions: reports,
    })
}

// ---------------------------------------------------------------------------
// Monte-Carlo validation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McRow {
    pub index: String,
    pub analytic: f64,
    pub simulated: f64,
    /// Three standard errors.
    pub half_width: f64,
    /// Accepted distance: the half-width, or a relative floor where one applies.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McComparison {
    pub years: u64,
    pub seed: u64,
    pub rows: Vec<McRow>,
    pub pass: bool,
}

impl McComparison {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("index,analytic,simulated,half_width_3sigma,tolerance,pass\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.index,
                r.analytic,
                r.simulated,
                r.half_width,
                r.tolerance,
                if r.pass { "PASS" } else { "FAIL" }
            ));
        }
        s
    }
}

fn mc_row(index: String, analytic: f64, est: crate::reliability_eval::Estimate, rel_floor: f64) -> McRow {
    let half_width = 3.0 * est.std_error;
    let tolerance = half_width.max(rel_floor * analytic.abs());
    McRow {
        pass: (est.mean - analytic).abs() <= tolerance + 1e-12,
        index,
        analytic,
        simulated: est.mean,
        half_width,
        tolerance,
    }
}

/// Compares the analytic indices of a reported design with a simulation.
/// Islanding feasibility is re-established by evaluating the design.
pub fn mc_validate(cfg: &ScenarioConfig, report: &DesignReport, years: u64, seed: u64, opts: &RunOptions) -> Result<McComparison> {
    if report.fingerprint != cfg.fingerprint() {
        return Err(Error::DesignMismatch(format!(
            "report was produced for scenario '{}' with a different fingerprint",
            report.scenario
        )));
    }
    report.design.check(cfg)?;
    let eval = evaluate_fixed_design(cfg, &report.design, report.case.levels(), &opts.solve, opts.threads)?;
    let infeasible = eval.infeasible_events();
    let analytic = analytic_indices(cfg, &eval.design, &infeasible)?;
    let mc = monte_carlo_oracle(cfg, &eval.design, &infeasible, years, seed)?;
    let mut rows = Vec::new();
    for (b, est) in analytic.buses.iter().zip(&mc.u_fault) {
        rows.push(mc_row(format!("u_rel[{}]", b.bus), b.u_fault, *est, 0.0));
    }
    rows.push(mc_row("saifi".into(), analytic.saifi, mc.saifi, 0.0));
    rows.push(mc_row("saidi".into(), analytic.saidi, mc.saidi, 0.0));
    rows.push(mc_row("eens_kwh".into(), analytic.eens_kwh, mc.eens_kwh, 0.02));
    Ok(McComparison {
        years,
        seed,
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::toy_feeder;

    #[test]
    fn case_ids_round_trip() {
        for c in CaseId::ALL {
            assert_eq!(c.to_string().parse::<CaseId>().unwrap(), c);
        }
        assert!("everything".parse::<CaseId>().is_err());
        assert_eq!(CaseId::Full.levels(), Levels::FULL);
        assert_eq!(CaseSpec::from(CaseId::Reliability).levels, Levels { resilience: false, reliability: true });
    }

    #[test]
    fn sweep_axes_parse() {
        let a = SweepAxes::parse("duration=nominal,6;rg=0.5,1;storage=0.6").unwrap();
        assert_eq!(a.durations_h, vec![None, Some(6)]);
        assert_eq!(a.rg_scales, vec![0.5, 1.0]);
        assert_eq!(a.points().len(), 4);
        assert!(SweepAxes::parse("wind=2").is_err());
        assert!(SweepAxes::parse("rg=-1").is_err());
        assert!(SweepAxes::parse("duration=0").is_err());
    }

    #[test]
    fn non_increasing_count() {
        assert_eq!(count_non_increasing(&[5.0, 4.0, 4.0, 6.0, 3.0], 0.0), 4);
        assert_eq!(count_non_increasing(&[1.0, 1.001], 0.005), 2);
    }

    #[test]
    fn sweep_point_scales_inputs() {
        let cfg = toy_feeder();
        let c = apply_point(
            &cfg,
            &SweepPoint {
                duration_h: Some(6),
                rg_scale: 2.0,
                storage_cost_scale: 0.6,
            },
        )
        .unwrap();
        assert_eq!(c.network.buses[1].pv_kw, 2.0 * cfg.network.buses[1].pv_kw);
        let st = c.der.iter().find(|d| d.storage().is_some()).unwrap();
        assert!((st.variable_cost - 0.6 * 670.0).abs() < 1e-9);
        assert!((c.islanding.duration_pmf[5] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partitions_must_cover_and_be_disjoint() {
        let cfg = toy_feeder();
        assert!(check_partitions(&cfg, &identity_partition(&cfg)).is_ok());
        let overlap = vec![
            PartitionDef {
                name: "a".into(),
                buses: vec!["pcc".into(), "b1".into(), "b2".into()],
                pcc: "pcc".into(),
            },
            PartitionDef {
                name: "b".into(),
                buses: vec!["b2".into(), "b3".into(), "b4".into()],
                pcc: "b3".into(),
            },
        ];
        assert!(matches!(check_partitions(&cfg, &overlap), Err(Error::Validation(_))));
        let missing = vec![PartitionDef {
            name: "a".into(),
            buses: vec!["pcc".into(), "b1".into()],
            pcc: "pcc".into(),
        }];
        assert!(check_partitions(&cfg, &missing).is_err());
    }

    #[test]
    fn restricted_scenario_keeps_internal_elements() {
        let cfg = toy_feeder();
        let def = PartitionDef {
            name: "east".into(),
            buses: vec!["b3".into(), "b4".into()],
            pcc: "b3".into(),
        };
        let sub = restrict_scenario(&cfg, &def).unwrap();
        assert_eq!(sub.network.buses.len(), 2);
        assert_eq!(sub.network.lines.len(), 1);
        assert_eq!(sub.network.pcc, "b3");
        assert_eq!(sub.der_units().len(), 2);
        let total: f64 = sub.days[0].demand_kw.iter().flatten().sum();
        let want: f64 = cfg.days[0].demand_kw.iter().map(|r| r[3] + r[4]).sum();
        assert!((total - want).abs() < 1e-9);
    }

    #[test]
    fn normalization_divides_by_annual_demand() {
        let s = CostStack {
            investment: 10.0,
            total: 20.0,
            ..CostStack::default()
        };
        let n = s.scaled(100.0 / 1000.0);
        assert!((n.total - 2.0).abs() < 1e-12);
    }
}
