//! Programmatic scenarios: the toy feeder, the three-bus reliability chain and
//! seeded random variants of the toy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{
    AlgorithmParams, Bus, CustomerClass, DerSpec, GeneratorParams, IslandingSpec, Line, LineStatus, NetworkModel,
    RepresentativeDay, ReliabilitySpec, ScenarioConfig, ScenarioDocument, StorageParams, TariffSchedule, Technology,
    DAYS_PER_YEAR, HOURS_PER_DAY,
};
use crate::model::scenario::{SeriesSource, Source};

/// Battery storage with the reference cost and performance data.
pub fn reference_storage(name: &str, buses: &[&str]) -> DerSpec {
    DerSpec {
        name: name.into(),
        technology: Technology::Storage(StorageParams {
            dod_max: 0.85,
            eta_self: 0.99,
            eta_ch: 0.98,
            eta_d: 0.98,
            power_ratio: 1.0 / 3.0,
            max_cycles_per_day: 1.0,
        }),
        fixed_cost: 87_360.0,
        variable_cost: 670.0,
        lifetime_years: 15.0,
        active_cost: 0.0,
        reactive_cost: 0.0004,
        candidate_buses: buses.iter().map(|b| b.to_string()).collect(),
    }
}

/// Diesel generator with the reference cost data.
pub fn reference_dg(name: &str, buses: &[&str]) -> DerSpec {
    DerSpec {
        name: name.into(),
        technology: Technology::Dg(GeneratorParams {
            f_p_max: 1.0,
            f_q_max: 1.0,
            pf_min: 0.0,
        }),
        fixed_cost: 70_250.0,
        variable_cost: 2_430.0,
        lifetime_years: 13.3,
        active_cost: 0.122,
        reactive_cost: 0.0004,
        candidate_buses: buses.iter().map(|b| b.to_string()).collect(),
    }
}

pub fn reference_tariff() -> TariffSchedule {
    TariffSchedule {
        import_price: vec![0.15],
        export_price: vec![0.07],
        reactive_price: 0.0006,
        curtailment_fee: 0.0,
        interest_rate: 0.05,
    }
}

fn bus(id: &str, demand: bool, customer: CustomerClass, pv_kw: f64) -> Bus {
    Bus {
        id: id.into(),
        demand,
        pcc: false,
        pv_kw,
        v_min: 0.95 * 0.95,
        v_max: 1.05 * 1.05,
        customer,
        power_factor: None,
    }
}

fn line(id: &str, from: &str, to: &str, miles: f64, s_max: f64, status: LineStatus) -> Line {
    Line {
        id: id.into(),
        from: from.into(),
        to: to.into(),
        r_pu: 0.004 * miles / 0.2,
        x_pu: Some(0.003 * miles / 0.2),
        s_max_kva: s_max,
        length_miles: miles,
        status,
        invest_cost: if status == LineStatus::Candidate { 150_000.0 * miles } else { 0.0 },
        lifetime_years: 40.0,
    }
}

/// Unit PV shape: a half sine between 06:00 and 18:00.
pub fn pv_shape(hour: usize) -> f64 {
    let h = hour as f64 + 0.5;
    if (6.0..18.0).contains(&h) {
        (std::f64::consts::PI * (h - 6.0) / 12.0).sin()
    } else {
        0.0
    }
}

/// Commercial load shape in [0.45, 1]: flat night, daytime plateau.
pub fn commercial_shape(hour: usize) -> f64 {
    match hour {
        0..=6 => 0.45,
        7 => 0.65,
        8..=17 => 0.9 + 0.1 * (std::f64::consts::PI * (hour as f64 - 8.0) / 9.0).sin(),
        18 => 0.75,
        19..=21 => 0.6,
        _ => 0.5,
    }
}

/// Residential load shape in [0.35, 1]: evening peak.
pub fn residential_shape(hour: usize) -> f64 {
    match hour {
        0..=5 => 0.35,
        6..=8 => 0.6,
        9..=16 => 0.5,
        17..=21 => 0.85 + 0.15 * (std::f64::consts::PI * (hour as f64 - 17.0) / 4.0).sin(),
        _ => 0.5,
    }
}

fn day_from(net: &NetworkModel, weight: f64, demand: impl Fn(usize, usize) -> f64, rg: impl Fn(usize, usize) -> f64, pf: f64) -> RepresentativeDay {
    let n = net.buses.len();
    RepresentativeDay {
        weight,
        demand_kw: (0..HOURS_PER_DAY).map(|h| (0..n).map(|b| demand(h, b)).collect()).collect(),
        power_factor: vec![vec![pf; n]; HOURS_PER_DAY],
        rg_pu: (0..HOURS_PER_DAY).map(|h| (0..n).map(|b| rg(h, b)).collect()).collect(),
        apparent_kva: Vec::new(),
        reactive_kvar: Vec::new(),
        rg_avail_kw: Vec::new(),
    }
}

/// Parameters of the toy feeder that the random variants perturb.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyParams {
    /// Peak demand per non-PCC bus, kW.
    pub peaks: [f64; 4],
    /// Installed PV per non-PCC bus, kW.
    pub pv: [f64; 4],
    pub import_price: f64,
    pub export_price: f64,
    pub gev: crate::model::Gev,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            peaks: [120.0, 50.0, 100.0, 40.0],
            pv: [60.0, 15.0, 40.0, 10.0],
            import_price: 0.15,
            export_price: 0.07,
            gev: crate::model::Gev {
                location: 6.0,
                scale: 5.0,
                shape: 0.1,
            },
        }
    }
}

/// Five-bus radial feeder with one representative day, installed PV, DG and
/// storage candidates, and a candidate tie line. Events last at most 12 hours.
pub fn toy_feeder() -> ScenarioConfig {
    toy_with(&ToyParams::default()).expect("toy feeder is valid")
}

pub fn toy_with(p: &ToyParams) -> Result<ScenarioConfig> {
    use CustomerClass::{Commercial, Residential};
    let classes = [Commercial, Residential, Commercial, Residential];
    let mut buses = vec![Bus {
        pcc: true,
        ..bus("pcc", false, Residential, 0.0)
    }];
    for i in 0..4 {
        buses.push(bus(&format!("b{}", i + 1), true, classes[i], p.pv[i]));
    }
    let lines = vec![
        line("l1", "pcc", "b1", 0.2, 600.0, LineStatus::Existing),
        line("l2", "b1", "b2", 0.15, 300.0, LineStatus::Existing),
        line("l3", "b1", "b3", 0.25, 300.0, LineStatus::Existing),
        line("l4", "b3", "b4", 0.2, 200.0, LineStatus::Existing),
        line("l5", "pcc", "b4", 0.3, 200.0, LineStatus::Candidate),
    ];
    let net = NetworkModel {
        base_kva: 1000.0,
        buses,
        lines,
        pcc: "pcc".into(),
    };
    let peaks = p.peaks;
    let day = day_from(
        &net,
        DAYS_PER_YEAR as f64,
        |h, b| {
            if b == 0 {
                return 0.0;
            }
            let shape = match classes[b - 1] {
                Commercial => commercial_shape(h),
                Residential => residential_shape(h),
            };
            peaks[b - 1] * shape
        },
        |h, b| if b == 0 { 0.0 } else { pv_shape(h) },
        0.95,
    );
    let doc = ScenarioDocument {
        name: "toy".into(),
        network: Source::Inline(net),
        series: SeriesSource::Days { days: vec![day] },
        der: vec![reference_dg("dg", &["b1", "b3"]), reference_storage("battery", &["b1", "b3"])],
        tariff: TariffSchedule {
            import_price: vec![p.import_price],
            export_price: vec![p.export_price],
            ..reference_tariff()
        },
        islanding: IslandingSpec {
            gev: p.gev,
            horizon_hours: 12,
            ..IslandingSpec::default()
        },
        reliability: ReliabilitySpec::default(),
        algorithm: AlgorithmParams {
            polygon_sides: 8,
            pwl_segments: 6,
            ..AlgorithmParams::default()
        },
        demand_power_factor: 0.95,
    };
    ScenarioConfig::from_document(doc, std::path::Path::new("."))
}

/// A random perturbation of the toy feeder: demands, PV, prices and the
/// duration distribution vary with `seed`.
pub fn random_toy(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = ToyParams::default();
    let mut p = base.clone();
    for i in 0..4 {
        p.peaks[i] = base.peaks[i] * rng.gen_range(0.6..1.4);
        p.pv[i] = base.pv[i] * rng.gen_range(0.0..2.0);
    }
    p.import_price = rng.gen_range(0.12..0.2);
    p.export_price = p.import_price * rng.gen_range(0.3..0.7);
    p.gev.location = rng.gen_range(3.0..8.0);
    p.gev.scale = rng.gen_range(2.0..6.0);
    toy_with(&p).expect("random toy is valid")
}

/// Three buses in a chain of two one-mile cables with a constant 50 kW load
/// at the far end; no DER candidates.
pub fn three_bus_chain() -> ScenarioConfig {
    let net = NetworkModel {
        base_kva: 1000.0,
        buses: vec![
            Bus {
                pcc: true,
                ..bus("pcc", false, CustomerClass::Residential, 0.0)
            },
            bus("mid", false, CustomerClass::Residential, 0.0),
            bus("load", true, CustomerClass::Residential, 0.0),
        ],
        lines: vec![
            line("c1", "pcc", "mid", 1.0, 500.0, LineStatus::Existing),
            line("c2", "mid", "load", 1.0, 500.0, LineStatus::Existing),
        ],
        pcc: "pcc".into(),
    };
    let day = day_from(&net, DAYS_PER_YEAR as f64, |_, b| if b == 2 { 50.0 } else { 0.0 }, |_, _| 0.0, 0.95);
    let doc = ScenarioDocument {
        name: "three-bus-chain".into(),
        network: Source::Inline(net),
        series: SeriesSource::Days { days: vec![day] },
        der: Vec::new(),
        tariff: reference_tariff(),
        islanding: IslandingSpec::default(),
        reliability: ReliabilitySpec::default(),
        algorithm: AlgorithmParams::default(),
        demand_power_factor: 0.95,
    };
    ScenarioConfig::from_document(doc, std::path::Path::new(".")).expect("chain is valid")
}

/// The toy with twice the storage candidates and cheaper batteries.
pub fn storage_heavy() -> ScenarioConfig {
    let mut cfg = toy_feeder();
    cfg.name = "storage-heavy".into();
    let mut st = reference_storage("battery", &["b1", "b2", "b3", "b4"]);
    st.variable_cost *= 0.5;
    st.fixed_cost *= 0.5;
    cfg.der = vec![reference_dg("dg", &["b1"]), st];
    crate::model::validate_scenario(cfg).expect("storage-heavy scenario is valid")
}
