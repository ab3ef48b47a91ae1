//! Scenario document (JSON) and the validated, immutable [`ScenarioConfig`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::cluster::cluster_representative_days;
use crate::model::finance::annuity_factor;
use crate::model::islanding::{build_islanding_distribution, Gev, IslandingModel};
use crate::model::network::{load_network, parse_json, CustomerClass, NetworkModel};
use crate::model::series::{read_series_csv, to_representative, RepresentativeDay, DAYS_PER_YEAR, HOURS_PER_DAY};

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    #[serde(default = "one")]
    pub f_p_max: f64,
    #[serde(default = "one")]
    pub f_q_max: f64,
    #[serde(default)]
    pub pf_min: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            f_p_max: 1.0,
            f_q_max: 1.0,
            pf_min: 0.0,
        }
    }
}

impl GeneratorParams {
    /// Largest |Q|/P ratio allowed by the minimum power factor; `None` when unconstrained.
    pub fn reactive_ratio(&self) -> Option<f64> {
        if self.pf_min <= 0.0 {
            None
        } else {
            Some(self.pf_min.acos().tan())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageParams {
    pub dod_max: f64,
    pub eta_self: f64,
    pub eta_ch: f64,
    pub eta_d: f64,
    /// Power-to-energy ratio, 1/h.
    pub power_ratio: f64,
    pub max_cycles_per_day: f64,
}

impl StorageParams {
    /// Divisor turning stored energy into the constant power sustainable over
    /// `tau_max` hours of self-discharging storage.
    pub fn drain_divisor(&self, tau_max: f64) -> f64 {
        let steps = tau_max.ceil().max(1.0) as i32;
        (1..=steps).map(|k| self.eta_self.powi(1 - k)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Technology {
    Dg(GeneratorParams),
    Rg(GeneratorParams),
    Storage(StorageParams),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerKind {
    Dg,
    Rg,
    Storage,
}

/// A DER technology with its costs and the buses where it may be installed.
///
/// Capacity is kVA for generators and kWh for storage; `variable_cost` is per
/// unit of that capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerSpec {
    pub name: String,
    #[serde(flatten)]
    pub technology: Technology,
    #[serde(default)]
    pub fixed_cost: f64,
    #[serde(default)]
    pub variable_cost: f64,
    pub lifetime_years: f64,
    /// $/kWh of active power.
    #[serde(default)]
    pub active_cost: f64,
    /// $/kvarh of reactive power magnitude.
    #[serde(default)]
    pub reactive_cost: f64,
    #[serde(default)]
    pub candidate_buses: Vec<String>,
}

impl DerSpec {
    pub fn kind(&self) -> DerKind {
        match self.technology {
            Technology::Dg(_) => DerKind::Dg,
            Technology::Rg(_) => DerKind::Rg,
            Technology::Storage(_) => DerKind::Storage,
        }
    }

    pub fn generator(&self) -> Option<&GeneratorParams> {
        match &self.technology {
            Technology::Dg(g) | Technology::Rg(g) => Some(g),
            Technology::Storage(_) => None,
        }
    }

    pub fn storage(&self) -> Option<&StorageParams> {
        match &self.technology {
            Technology::Storage(s) => Some(s),
            _ => None,
        }
    }

    fn violations(&self, net: &NetworkModel) -> Vec<String> {
        let mut out = Vec::new();
        let n = &self.name;
        for (what, v) in [
            ("fixed cost", self.fixed_cost),
            ("variable cost", self.variable_cost),
            ("active cost", self.active_cost),
            ("reactive cost", self.reactive_cost),
        ] {
            if v < 0.0 || !v.is_finite() {
                out.push(format!("DER '{n}': {what} must be non-negative"));
            }
        }
        if !self.candidate_buses.is_empty() && !(self.lifetime_years > 0.0) {
            out.push(format!("DER '{n}': missing or non-positive lifetime"));
        }
        for b in &self.candidate_buses {
            if net.bus_index(b).is_none() {
                out.push(format!("DER '{n}': candidate bus '{b}' does not exist"));
            }
        }
        match &self.technology {
            Technology::Dg(g) | Technology::Rg(g) => {
                for (what, v) in [("f_p_max", g.f_p_max), ("f_q_max", g.f_q_max), ("pf_min", g.pf_min)] {
                    if !(0.0..=1.0).contains(&v) {
                        out.push(format!("DER '{n}': {what} must lie in [0, 1]"));
                    }
                }
            }
            Technology::Storage(s) => {
                for (what, v) in [
                    ("dod_max", s.dod_max),
                    ("eta_self", s.eta_self),
                    ("eta_ch", s.eta_ch),
                    ("eta_d", s.eta_d),
                ] {
                    if !(v > 0.0 && v <= 1.0) {
                        out.push(format!("DER '{n}': {what} must lie in (0, 1]"));
                    }
                }
                if !(s.power_ratio > 0.0) {
                    out.push(format!("DER '{n}': power_ratio must be positive"));
                }
                if !(s.max_cycles_per_day > 0.0) {
                    out.push(format!("DER '{n}': max_cycles_per_day must be positive"));
                }
            }
        }
        out
    }
}

/// An installable DER: one catalog entry at one candidate bus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerUnit {
    pub spec: usize,
    pub bus: usize,
}

fn default_interest() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TariffSchedule {
    /// $/kWh per hour of day; a single value applies to all hours.
    pub import_price: Vec<f64>,
    pub export_price: Vec<f64>,
    /// $/kvarh.
    #[serde(default)]
    pub reactive_price: f64,
    #[serde(default)]
    pub curtailment_fee: f64,
    #[serde(default = "default_interest")]
    pub interest_rate: f64,
}

impl TariffSchedule {
    fn at(v: &[f64], hour: usize) -> f64 {
        if v.len() == 1 {
            v[0]
        } else {
            v[hour % v.len()]
        }
    }

    pub fn import(&self, hour: usize) -> f64 {
        Self::at(&self.import_price, hour)
    }

    pub fn export(&self, hour: usize) -> f64 {
        Self::at(&self.export_price, hour)
    }

    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, v) in [("import_price", &self.import_price), ("export_price", &self.export_price)] {
            if v.len() != 1 && v.len() != HOURS_PER_DAY {
                out.push(format!("{name} must have 1 or {HOURS_PER_DAY} entries"));
            }
            if v.iter().any(|p| *p < 0.0 || !p.is_finite()) {
                out.push(format!("{name} must be non-negative"));
            }
        }
        if out.is_empty() {
            for h in 0..HOURS_PER_DAY {
                if self.export(h) > self.import(h) {
                    out.push(format!(
                        "export price exceeds import price at hour {h}; the PCC cost split requires import >= export"
                    ));
                }
            }
        }
        if self.reactive_price < 0.0 || self.curtailment_fee < 0.0 {
            out.push("reactive price and curtailment fee must be non-negative".into());
        }
        if !(self.interest_rate > 0.0) {
            out.push("interest rate must be positive".into());
        }
        out
    }
}

fn default_cable_rate() -> f64 {
    0.1
}
fn default_repair() -> f64 {
    4.0
}
fn default_splice_rate() -> f64 {
    0.03
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostNotSupplied {
    pub commercial: f64,
    pub residential: f64,
}

impl Default for CostNotSupplied {
    fn default() -> Self {
        Self {
            commercial: 370.0,
            residential: 3.3,
        }
    }
}

/// Reliability inputs as written in the scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilitySpec {
    /// Failures per year per mile of cable.
    #[serde(default = "default_cable_rate")]
    pub cable_rate_per_mile: f64,
    #[serde(default = "default_repair")]
    pub cable_repair_hours: f64,
    /// Failures per year of the equipment at each demand bus.
    #[serde(default = "default_splice_rate")]
    pub bus_equipment_rate: f64,
    #[serde(default = "default_repair")]
    pub bus_equipment_repair_hours: f64,
    #[serde(default)]
    pub cost_not_supplied: CostNotSupplied,
}

impl Default for ReliabilitySpec {
    fn default() -> Self {
        Self {
            cable_rate_per_mile: default_cable_rate(),
            cable_repair_hours: default_repair(),
            bus_equipment_rate: default_splice_rate(),
            bus_equipment_repair_hours: default_repair(),
            cost_not_supplied: CostNotSupplied::default(),
        }
    }
}

/// Per-element reliability data resolved against the network.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityData {
    /// Failures per year, per line.
    pub line_rate: Vec<f64>,
    pub line_repair: Vec<f64>,
    /// Per bus; zero on non-demand buses.
    pub bus_rate: Vec<f64>,
    pub bus_repair: Vec<f64>,
    pub tau_max: f64,
    /// $/kWh, per bus.
    pub cost_not_supplied: Vec<f64>,
}

impl ReliabilityData {
    pub fn resolve(spec: &ReliabilitySpec, net: &NetworkModel) -> Self {
        let line_rate: Vec<f64> = net
            .lines
            .iter()
            .map(|l| spec.cable_rate_per_mile * l.length_miles)
            .collect();
        let line_repair = vec![spec.cable_repair_hours; net.lines.len()];
        let bus_rate = net
            .buses
            .iter()
            .map(|b| if b.demand { spec.bus_equipment_rate } else { 0.0 })
            .collect();
        let bus_repair = net
            .buses
            .iter()
            .map(|b| if b.demand { spec.bus_equipment_repair_hours } else { 0.0 })
            .collect();
        let cost_not_supplied = net
            .buses
            .iter()
            .map(|b| match b.customer {
                CustomerClass::Commercial => spec.cost_not_supplied.commercial,
                CustomerClass::Residential => spec.cost_not_supplied.residential,
            })
            .collect();
        let tau_max = line_repair.iter().copied().fold(0.0, f64::max);
        Self {
            line_rate,
            line_repair,
            bus_rate,
            bus_repair,
            tau_max,
            cost_not_supplied,
        }
    }

    fn violations(spec: &ReliabilitySpec) -> Vec<String> {
        let mut out = Vec::new();
        for (what, v) in [
            ("cable_rate_per_mile", spec.cable_rate_per_mile),
            ("cable_repair_hours", spec.cable_repair_hours),
            ("bus_equipment_rate", spec.bus_equipment_rate),
            ("bus_equipment_repair_hours", spec.bus_equipment_repair_hours),
            ("cost_not_supplied.commercial", spec.cost_not_supplied.commercial),
            ("cost_not_supplied.residential", spec.cost_not_supplied.residential),
        ] {
            if v < 0.0 || !v.is_finite() {
                out.push(format!("reliability: {what} must be non-negative"));
            }
        }
        out
    }
}

fn default_probability() -> f64 {
    2.283e-4
}
fn default_horizon() -> usize {
    24
}
fn default_gev() -> Gev {
    Gev {
        location: 6.0,
        scale: 5.0,
        shape: 0.1,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandingSpec {
    #[serde(default = "default_probability")]
    pub occurrence_probability: f64,
    #[serde(default = "default_gev")]
    pub gev: Gev,
    #[serde(default = "default_horizon")]
    pub horizon_hours: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_mass_hour: Option<usize>,
}

impl Default for IslandingSpec {
    fn default() -> Self {
        Self {
            occurrence_probability: default_probability(),
            gev: default_gev(),
            horizon_hours: default_horizon(),
            point_mass_hour: None,
        }
    }
}

impl IslandingSpec {
    pub fn build(&self) -> Result<IslandingModel> {
        build_islanding_distribution(self.gev, self.horizon_hours, self.occurrence_probability, self.point_mass_hour)
    }
}

/// Numerical and algorithmic knobs; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgorithmParams {
    pub polygon_sides: usize,
    pub pwl_segments: usize,
    /// Big-M for capacity activation as a multiple of the feeder peak apparent demand.
    pub big_m_factor: f64,
    pub ccg_eps: f64,
    pub n0: usize,
    pub mip_gap: f64,
    pub time_limit_s: f64,
    pub seed: u64,
    pub threads: usize,
    pub max_iterations: usize,
    /// Refuse extensive forms with more variables than this.
    pub max_extensive_vars: usize,
    /// Per-kWh cost on storage throughput that breaks charge/discharge ties.
    pub storage_tiebreak: f64,
    /// Islanding-capability adder for resilient designs, $/MWh of annual demand.
    pub islanding_surcharge_per_mwh: f64,
    /// Squared voltage at the PCC while grid-tied.
    pub v_slack: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            polygon_sides: 12,
            pwl_segments: 10,
            big_m_factor: 3.0,
            ccg_eps: 0.005,
            n0: 24,
            mip_gap: 0.005,
            time_limit_s: 3600.0,
            seed: 0,
            threads: 1,
            max_iterations: 500,
            max_extensive_vars: 2_000_000,
            storage_tiebreak: 1e-4,
            islanding_surcharge_per_mwh: 2.0,
            v_slack: 1.0,
        }
    }
}

impl AlgorithmParams {
    fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.polygon_sides < 4 || self.polygon_sides % 2 != 0 {
            out.push("polygon_sides must be an even number >= 4".into());
        }
        if self.pwl_segments < 1 {
            out.push("pwl_segments must be >= 1".into());
        }
        if !(self.big_m_factor > 0.0) {
            out.push("big_m_factor must be positive".into());
        }
        if !(self.ccg_eps > 0.0) {
            out.push("ccg_eps must be positive".into());
        }
        if self.n0 < 1 {
            out.push("n0 must be >= 1".into());
        }
        if !(self.mip_gap >= 0.0) {
            out.push("mip_gap must be non-negative".into());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeriesSource {
    /// Already-weighted representative days.
    Days { days: Vec<RepresentativeDay> },
    /// CSV file; 365 days are clustered into `clusters` medoids, a file with
    /// a `weight` column is taken as representative days directly.
    Csv {
        file: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        clusters: Option<usize>,
        #[serde(default)]
        cluster_seed: u64,
    },
}

fn default_pf() -> f64 {
    0.95
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDocument {
    #[serde(default)]
    pub name: String,
    pub network: Source<NetworkModel>,
    pub series: SeriesSource,
    #[serde(default)]
    pub der: Vec<DerSpec>,
    pub tariff: TariffSchedule,
    #[serde(default)]
    pub islanding: IslandingSpec,
    #[serde(default)]
    pub reliability: ReliabilitySpec,
    #[serde(default)]
    pub algorithm: AlgorithmParams,
    #[serde(default = "default_pf")]
    pub demand_power_factor: f64,
}

/// A validated scenario. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub network: NetworkModel,
    pub der: Vec<DerSpec>,
    pub days: Vec<RepresentativeDay>,
    pub tariff: TariffSchedule,
    pub islanding_spec: IslandingSpec,
    pub islanding: IslandingModel,
    pub reliability_spec: ReliabilitySpec,
    pub reliability: ReliabilityData,
    pub params: AlgorithmParams,
    pub demand_power_factor: f64,
}

impl ScenarioConfig {
    /// Resolves file references relative to `base_dir` and validates.
    pub fn from_document(doc: ScenarioDocument, base_dir: &Path) -> Result<Self> {
        let network = match doc.network {
            Source::Inline(n) => n,
            Source::Path(p) => load_network(base_dir.join(p))?,
        };
        network.validate()?;
        let days = match doc.series {
            SeriesSource::Days { days } => days,
            SeriesSource::Csv {
                file,
                clusters,
                cluster_seed,
            } => {
                let ys = read_series_csv(base_dir.join(&file), &network)?;
                if ys.days.iter().all(|d| d.weight.is_some()) {
                    ys.days
                        .iter()
                        .map(|d| to_representative(d, d.weight.unwrap(), &network, doc.demand_power_factor))
                        .collect()
                } else if ys.days.len() == DAYS_PER_YEAR {
                    let k = clusters.unwrap_or(8);
                    cluster_representative_days(&ys, k, cluster_seed, &network, doc.demand_power_factor)?
                } else {
                    return Err(Error::validation(format!(
                        "series file {} has {} days without weights; expected {DAYS_PER_YEAR}",
                        file.display(),
                        ys.days.len()
                    )));
                }
            }
        };
        let islanding = doc.islanding.build()?;
        let reliability = ReliabilityData::resolve(&doc.reliability, &network);
        let cfg = ScenarioConfig {
            name: doc.name,
            network,
            der: doc.der,
            days,
            tariff: doc.tariff,
            islanding_spec: doc.islanding,
            islanding,
            reliability_spec: doc.reliability,
            reliability,
            params: doc.algorithm,
            demand_power_factor: doc.demand_power_factor,
        };
        validate_scenario(cfg)
    }

    /// Self-contained document with all data inlined.
    pub fn to_document(&self) -> ScenarioDocument {
        ScenarioDocument {
            name: self.name.clone(),
            network: Source::Inline(self.network.clone()),
            series: SeriesSource::Days {
                days: self.days.clone(),
            },
            der: self.der.clone(),
            tariff: self.tariff.clone(),
            islanding: self.islanding_spec.clone(),
            reliability: self.reliability_spec.clone(),
            algorithm: self.params.clone(),
            demand_power_factor: self.demand_power_factor,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("scenario serializes")
    }

    /// SHA-256 of the canonical inline document; ties reports to scenarios.
    pub fn fingerprint(&self) -> String {
        let text = serde_json::to_string(&self.to_document()).expect("scenario serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn hours(&self) -> usize {
        HOURS_PER_DAY
    }

    pub fn total_weight(&self) -> f64 {
        self.days.iter().map(|d| d.weight).sum()
    }

    /// Total hours of the year represented, Σ w_d · 24.
    pub fn year_hours(&self) -> f64 {
        self.total_weight() * self.hours() as f64
    }

    pub fn der_units(&self) -> Vec<DerUnit> {
        let mut units = Vec::new();
        for (s, spec) in self.der.iter().enumerate() {
            for b in &spec.candidate_buses {
                units.push(DerUnit {
                    spec: s,
                    bus: self.network.bus_index(b).expect("validated DER bus"),
                });
            }
        }
        units
    }

    /// Operating parameters applied to installed PV: the first RG entry, else defaults.
    pub fn rg_params(&self) -> (GeneratorParams, f64, f64) {
        self.der
            .iter()
            .find_map(|d| match &d.technology {
                Technology::Rg(g) => Some((g.clone(), d.active_cost, d.reactive_cost)),
                _ => None,
            })
            .unwrap_or((
                GeneratorParams {
                    pf_min: 0.9,
                    ..GeneratorParams::default()
                },
                0.0,
                0.0,
            ))
    }

    pub fn annuity(&self, lifetime_years: f64) -> Result<f64> {
        annuity_factor(self.tariff.interest_rate, lifetime_years)
    }

    /// Feeder peak apparent demand over all representative hours, kVA.
    pub fn peak_apparent_demand(&self) -> f64 {
        self.days
            .iter()
            .flat_map(|d| d.apparent_kva.iter().map(|row| row.iter().sum::<f64>()))
            .fold(0.0, f64::max)
    }

    /// Upper bound on any DER capacity in kVA.
    pub fn big_m(&self) -> f64 {
        (self.params.big_m_factor * self.peak_apparent_demand()).max(1.0)
    }

    /// Annual demand energy, kWh.
    pub fn annual_demand_kwh(&self) -> f64 {
        self.days
            .iter()
            .map(|d| d.weight * d.demand_kw.iter().flatten().sum::<f64>())
            .sum()
    }

    pub fn with_islanding(&self, spec: IslandingSpec) -> Result<Self> {
        let mut c = self.clone();
        c.islanding = spec.build()?;
        c.islanding_spec = spec;
        Ok(c)
    }
}

/// Checks every cross-reference and bound, caching derived quantities.
pub fn validate_scenario(mut cfg: ScenarioConfig) -> Result<ScenarioConfig> {
    let mut v = cfg.network.violations();
    let n_bus = cfg.network.buses.len();
    if !(cfg.demand_power_factor > 0.0 && cfg.demand_power_factor <= 1.0) {
        v.push("demand power factor must lie in (0, 1]".into());
    }
    v.extend(cfg.tariff.violations());
    v.extend(cfg.params.violations());
    v.extend(ReliabilityData::violations(&cfg.reliability_spec));
    for d in &cfg.der {
        v.extend(d.violations(&cfg.network));
    }
    let mut names: Vec<&str> = cfg.der.iter().map(|d| d.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        v.push("DER names must be unique".into());
    }
    if cfg.days.is_empty() {
        v.push("at least one representative day is required".into());
    }
    for (i, d) in cfg.days.iter().enumerate() {
        v.extend(d.violations(i, n_bus));
    }
    let total = cfg.days.iter().map(|d| d.weight).sum::<f64>();
    if !cfg.days.is_empty() && (total - DAYS_PER_YEAR as f64).abs() > 1e-6 {
        v.push(format!("representative-day weights sum to {total}, expected {DAYS_PER_YEAR}"));
    }
    if v.is_empty() {
        for (b, bus) in cfg.network.buses.iter().enumerate() {
            let has_demand = cfg.days.iter().any(|d| d.demand_kw.iter().any(|row| row[b] > 0.0));
            if has_demand && !bus.demand {
                v.push(format!("bus '{}' has demand in the series but is not a demand bus", bus.id));
            }
        }
    }
    if !v.is_empty() {
        return Err(Error::Validation(v));
    }
    let net = cfg.network.clone();
    for d in &mut cfg.days {
        d.derive(&net);
    }
    cfg.reliability = ReliabilityData::resolve(&cfg.reliability_spec, &cfg.network);
    Ok(cfg)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let doc: ScenarioDocument = parse_json(&text, &path.display().to_string())?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    ScenarioConfig::from_document(doc, base)
}

pub fn scenario_from_json(text: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let doc: ScenarioDocument = parse_json(text, "inline scenario")?;
    ScenarioConfig::from_document(doc, base_dir)
}
