//! Reliability indices of a fixed design: closed-form expectations and a
//! sequential Monte-Carlo estimate of the same quantities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, WeightedIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::EventId;
use crate::design::Design;
use crate::error::{Error, Result};
use crate::model::{DerKind, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusIndices {
    pub bus: String,
    /// Interruptions per year.
    pub saifi: f64,
    /// Interruption hours per year.
    pub saidi: f64,
    /// Outage duration from faults alone, h/y.
    pub u_fault: f64,
    /// Year-average demand not covered by local resources, kW.
    pub p_net_avg: f64,
    pub eens_fault_kwh: f64,
    pub eens_islanding_kwh: f64,
    /// Lines on the supply path, PCC first.
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub buses: Vec<BusIndices>,
    /// Averages over demand buses.
    pub saifi: f64,
    pub saidi: f64,
    /// Sums over demand buses, kWh/y.
    pub eens_kwh: f64,
    pub eens_fault_kwh: f64,
    pub eens_islanding_kwh: f64,
    /// Fault-interruption cost, $/y.
    pub c_rel: f64,
}

impl ReliabilityReport {
    /// Per-bus table with the fault and islanding split of every index.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bus,saifi,saidi,u_fault,p_net_avg_kw,eens_fault_kwh,eens_islanding_kwh,eens_kwh\n");
        for b in &self.buses {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                b.bus,
                b.saifi,
                b.saidi,
                b.u_fault,
                b.p_net_avg,
                b.eens_fault_kwh,
                b.eens_islanding_kwh,
                b.eens_fault_kwh + b.eens_islanding_kwh
            ));
        }
        s
    }
}

/// Per demand bus: the chosen supply path (line indices) and its rate sums.
struct Supply {
    bus: usize,
    path: Vec<usize>,
    lambda: f64,
    u: f64,
}

fn supply_paths(cfg: &ScenarioConfig, design: &Design) -> Result<Vec<Supply>> {
    let net = &cfg.network;
    let rel = &cfg.reliability;
    let status = design.line_status(cfg);
    let edges = net.edges();
    let n = net.buses.len();
    // Bellman-Ford on outage duration; the graphs are small.
    let mut dist = vec![f64::INFINITY; n];
    let mut prev: Vec<Option<usize>> = vec![None; n];
    dist[net.pcc_index()] = 0.0;
    for _ in 0..n {
        let mut changed = false;
        for e in edges.iter().filter(|e| status[e.line]) {
            let w = rel.line_rate[e.line] * rel.line_repair[e.line];
            for (a, b) in [(e.from, e.to), (e.to, e.from)] {
                if dist[a] + w < dist[b] - 1e-15 {
                    dist[b] = dist[a] + w;
                    prev[b] = Some(e.line);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    net.demand_buses()
        .into_iter()
        .map(|b| {
            if !dist[b].is_finite() {
                return Err(Error::DesignInfeasible(format!(
                    "demand bus '{}' is not connected to the PCC",
                    net.buses[b].id
                )));
            }
            let mut path = Vec::new();
            let mut at = b;
            while let Some(l) = prev[at] {
                path.push(l);
                let e = &edges[l];
                at = if e.to == at { e.from } else { e.to };
            }
            path.reverse();
            let lambda = rel.bus_rate[b] + path.iter().map(|&l| rel.line_rate[l]).sum::<f64>();
            let u = rel.bus_rate[b] * rel.bus_repair[b] + path.iter().map(|&l| rel.line_rate[l] * rel.line_repair[l]).sum::<f64>();
            Ok(Supply { bus: b, path, lambda, u })
        })
        .collect()
}

/// Hourly demand a bus cannot cover from its own DER during a fault,
/// `[day][hour]`, kW.
pub fn net_demand_profile(cfg: &ScenarioConfig, design: &Design, bus: usize) -> Vec<Vec<f64>> {
    let units = cfg.der_units();
    let tau = cfg.reliability.tau_max;
    let mut storage_index = 0usize;
    let mut local = Vec::new();
    for (i, (u, entry)) in units.iter().zip(&design.units).enumerate() {
        let is_storage = entry.kind == DerKind::Storage;
        if u.bus == bus && entry.installed {
            local.push((i, if is_storage { Some(storage_index) } else { None }));
        }
        if is_storage {
            storage_index += 1;
        }
    }
    let pv = cfg.network.buses[bus].pv_kw;
    cfg.days
        .iter()
        .enumerate()
        .map(|(d, day)| {
            (0..cfg.hours())
                .map(|h| {
                    let dmd = day.demand_kw[h][bus];
                    let pf = day.power_factor[h][bus];
                    let avail = day.rg_avail_kw[h][bus];
                    let mut s_local = 0.0;
                    let mut energy = 0.0;
                    let mut power = 0.0;
                    for &(i, s) in &local {
                        let entry = &design.units[i];
                        let spec = &cfg.der[units[i].spec];
                        s_local += entry.s_max_kva;
                        match entry.kind {
                            DerKind::Dg => {
                                let f = spec.generator().map(|g| g.f_p_max).unwrap_or(1.0);
                                energy += f * entry.s_max_kva;
                                power += f * entry.s_max_kva;
                            }
                            DerKind::Rg => {
                                energy += day.rg_pu[h][bus] * entry.s_max_kva;
                                power += day.rg_pu[h][bus] * entry.s_max_kva;
                            }
                            DerKind::Storage => {
                                let st = spec.storage().expect("storage parameters");
                                let e_max = entry.e_max_kwh.unwrap_or(0.0);
                                let e = match (s, design.storage_energy.get(d)) {
                                    (Some(s), Some(day_e)) => day_e[s][h],
                                    _ => (1.0 - st.dod_max) * e_max,
                                };
                                energy += e * st.eta_d / st.drain_divisor(tau);
                                power += entry.s_max_kva;
                            }
                        }
                    }
                    let apparent = pf * (day.apparent_kva[h][bus] - pv) - pf * s_local;
                    let floor = apparent.max(dmd - avail - energy).max(dmd - avail - power).max(0.0);
                    floor.min(dmd.max(0.0))
                })
                .collect()
        })
        .collect()
}

fn year_average(cfg: &ScenarioConfig, profile: &[Vec<f64>]) -> f64 {
    cfg.days
        .iter()
        .zip(profile)
        .map(|(day, p)| day.weight * p.iter().sum::<f64>())
        .sum::<f64>()
        / cfg.year_hours()
}

/// Closed-form indices. `infeasible` lists the islanding events the design
/// cannot ride through; each interrupts every demand bus for its duration.
pub fn analytic_indices(cfg: &ScenarioConfig, design: &Design, infeasible: &[EventId]) -> Result<ReliabilityReport> {
    design.check(cfg)?;
    let supplies = supply_paths(cfg, design)?;
    let isl = &cfg.islanding;
    let p_i = isl.occurrence_probability;
    let mut buses = Vec::new();
    for s in &supplies {
        let pbar = year_average(cfg, &net_demand_profile(cfg, design, s.bus));
        let mut saifi = s.lambda;
        let mut saidi = s.u;
        let mut eens_isl = 0.0;
        for id in infeasible {
            let rate = cfg.days[id.day].weight * p_i;
            saifi += rate;
            saidi += rate * isl.expected_duration();
            for k in 1..=isl.effective_horizon() {
                let h = (id.hour + k - 1) % cfg.hours();
                eens_isl += rate * isl.survival(k) * cfg.days[id.day].demand_kw[h][s.bus];
            }
        }
        buses.push(BusIndices {
            bus: cfg.network.buses[s.bus].id.clone(),
            saifi,
            saidi,
            u_fault: s.u,
            p_net_avg: pbar,
            eens_fault_kwh: s.u * pbar,
            eens_islanding_kwh: eens_isl,
            path: s.path.iter().map(|&l| cfg.network.lines[l].id.clone()).collect(),
        });
    }
    let n = buses.len().max(1) as f64;
    let eens_fault: f64 = buses.iter().map(|b| b.eens_fault_kwh).sum();
    let eens_isl: f64 = buses.iter().map(|b| b.eens_islanding_kwh).sum();
    let c_rel = supplies
        .iter()
        .zip(&buses)
        .map(|(s, b)| cfg.reliability.cost_not_supplied[s.bus] * b.eens_fault_kwh)
        .sum();
    Ok(ReliabilityReport {
        saifi: buses.iter().map(|b| b.saifi).sum::<f64>() / n,
        saidi: buses.iter().map(|b| b.saidi).sum::<f64>() / n,
        eens_kwh: eens_fault + eens_isl,
        eens_fault_kwh: eens_fault,
        eens_islanding_kwh: eens_isl,
        c_rel,
        buses,
    })
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors, or within `rel`
    /// relative distance, of the mean.
    pub fn agrees(&self, value: f64, k: f64, rel: f64) -> bool {
        let d = (self.mean - value).abs();
        d <= k * self.std_error + 1e-12 || d <= rel * value.abs()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub years: u64,
    pub seed: u64,
    pub saifi: Estimate,
    pub saidi: Estimate,
    pub eens_kwh: Estimate,
    /// Fault outage hours per demand bus.
    pub u_fault: Vec<Estimate>,
}

#[derive(Default, Clone)]
struct Moments {
    n: f64,
    sum: Vec<f64>,
    sq: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Moments {
            n: 0.0,
            sum: vec![0.0; k],
            sq: vec![0.0; k],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for (i, v) in x.iter().enumerate() {
            self.sum[i] += v;
            self.sq[i] += v * v;
        }
    }

    fn merge(mut self, o: Moments) -> Moments {
        self.n += o.n;
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sq[i] += o.sq[i];
        }
        self
    }

    fn estimate(&self, i: usize) -> Estimate {
        let mean = self.sum[i] / self.n;
        let var = ((self.sq[i] / self.n - mean * mean) * self.n / (self.n - 1.0).max(1.0)).max(0.0);
        Estimate {
            mean,
            std_error: (var / self.n).sqrt(),
        }
    }
}

const BATCH_YEARS: u64 = 2_000;

/// Energy drawn by `profile` over `[start, start + dur)` hours, wrapping within the day.
fn cyclic_energy(profile: &[f64], start: f64, dur: f64) -> f64 {
    let n = profile.len() as f64;
    let mut t = start;
    let end = start + dur;
    let mut e = 0.0;
    while t < end - 1e-12 {
        let hour = t.floor();
        let step = (hour + 1.0).min(end) - t;
        e += profile[(hour.rem_euclid(n)) as usize] * step;
        t += step;
    }
    e
}

struct Component {
    rate: f64,
    repair: f64,
    /// Demand-bus positions interrupted by a failure.
    affects: Vec<usize>,
}

/// Simulates `years` independent years of faults and islanding events.
/// Batches of years draw from separate streams of one seeded generator, so
/// results do not depend on the thread count.
pub fn monte_carlo_oracle(cfg: &ScenarioConfig, design: &Design, infeasible: &[EventId], years: u64, seed: u64) -> Result<MonteCarloReport> {
    design.check(cfg)?;
    if years < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least two years".into()));
    }
    let supplies = supply_paths(cfg, design)?;
    let nd = supplies.len();
    let profiles: Vec<Vec<Vec<f64>>> = supplies.iter().map(|s| net_demand_profile(cfg, design, s.bus)).collect();
    let rel = &cfg.reliability;
    let mut comps = Vec::new();
    for (j, s) in supplies.iter().enumerate() {
        comps.push(Component {
            rate: rel.bus_rate[s.bus],
            repair: rel.bus_repair[s.bus],
            affects: vec![j],
        });
    }
    for l in 0..cfg.network.lines.len() {
        let affects: Vec<usize> = (0..nd).filter(|&j| supplies[j].path.contains(&l)).collect();
        if !affects.is_empty() {
            comps.push(Component {
                rate: rel.line_rate[l],
                repair: rel.line_repair[l],
                affects,
            });
        }
    }
    let weights: Vec<f64> = cfg.days.iter().map(|d| d.weight).collect();
    let day_pick = WeightedIndex::new(&weights).map_err(|e| Error::InvalidArgument(format!("day weights: {e}")))?;
    let isl = &cfg.islanding;
    let dur_pick = WeightedIndex::new(&isl.duration_pmf).map_err(|e| Error::InvalidArgument(format!("duration pmf: {e}")))?;
    let hours = cfg.hours();

    // Layout of one sample: saifi, saidi, eens, u per bus.
    let width = 3 + nd;
    let batches = years.div_ceil(BATCH_YEARS);
    let moments = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let n_years = BATCH_YEARS.min(years - b * BATCH_YEARS);
            let mut m = Moments::new(width);
            let mut sample = vec![0.0; width];
            for _ in 0..n_years {
                sample.iter_mut().for_each(|x| *x = 0.0);
                let mut count = vec![0.0; nd];
                let mut hrs = vec![0.0; nd];
                let mut eens = 0.0;
                for c in &comps {
                    let k = poisson(&mut rng, c.rate);
                    for _ in 0..k {
                        let r = if c.repair > 0.0 {
                            Exp::new(1.0 / c.repair).expect("positive rate").sample(&mut rng)
                        } else {
                            0.0
                        };
                        let d = day_pick.sample(&mut rng);
                        let start = rng.gen::<f64>() * hours as f64;
                        for &j in &c.affects {
                            count[j] += 1.0;
                            hrs[j] += r;
                            sample[3 + j] += r;
                            eens += cyclic_energy(&profiles[j][d], start, r);
                        }
                    }
                }
                for id in infeasible {
                    let k = poisson(&mut rng, cfg.days[id.day].weight * isl.occurrence_probability);
                    for _ in 0..k {
                        let dur = dur_pick.sample(&mut rng) + 1;
                        for (j, s) in supplies.iter().enumerate() {
                            count[j] += 1.0;
                            hrs[j] += dur as f64;
                            eens += (0..dur)
                                .map(|t| cfg.days[id.day].demand_kw[(id.hour + t) % hours][s.bus])
                                .sum::<f64>();
                        }
                    }
                }
                let n = nd.max(1) as f64;
                sample[0] = count.iter().sum::<f64>() / n;
                sample[1] = hrs.iter().sum::<f64>() / n;
                sample[2] = eens;
                m.push(&sample);
            }
            m
        })
        .reduce(|| Moments::new(width), Moments::merge);
    Ok(MonteCarloReport {
        years,
        seed,
        saifi: moments.estimate(0),
        saidi: moments.estimate(1),
        eens_kwh: moments.estimate(2),
        u_fault: (0..nd).map(|j| moments.estimate(3 + j)).collect(),
    })
}

fn poisson(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("positive rate").sample(rng) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::all_events;
    use crate::synthetic::{three_bus_chain, toy_feeder};

    fn zero_rates(mut cfg: ScenarioConfig) -> ScenarioConfig {
        cfg.reliability_spec.cable_rate_per_mile = 0.0;
        cfg.reliability_spec.bus_equipment_rate = 0.0;
        crate::model::validate_scenario(cfg).unwrap()
    }

    #[test]
    fn chain_outage_duration_and_frequency() {
        let cfg = three_bus_chain();
        let r = analytic_indices(&cfg, &Design::empty(&cfg), &[]).unwrap();
        assert!((r.buses[0].u_fault - 0.92).abs() < 1e-9);
        assert!((r.saifi - 0.23).abs() < 1e-9);
        assert!((r.eens_kwh - 46.0).abs() < 1e-9);
        assert_eq!(r.buses[0].path, vec!["c1".to_string(), "c2".to_string()]);
    }

    #[test]
    fn unislandable_design_adds_two_interruptions() {
        let cfg = toy_feeder();
        let d = Design::empty(&cfg);
        let a = analytic_indices(&cfg, &d, &[]).unwrap();
        let b = analytic_indices(&cfg, &d, &all_events(&cfg)).unwrap();
        assert!((b.saifi - a.saifi - 2.0).abs() < 1e-3, "{} vs {}", b.saifi, a.saifi);
    }

    #[test]
    fn zero_rates_give_zero_indices() {
        let cfg = zero_rates(three_bus_chain());
        let d = Design::empty(&cfg);
        let r = analytic_indices(&cfg, &d, &[]).unwrap();
        assert_eq!((r.saifi, r.saidi, r.eens_kwh, r.c_rel), (0.0, 0.0, 0.0, 0.0));
        let mc = monte_carlo_oracle(&cfg, &d, &[], 1_000, 3).unwrap();
        assert_eq!((mc.saifi.mean, mc.saidi.mean, mc.eens_kwh.mean), (0.0, 0.0, 0.0));
    }

    #[test]
    fn monte_carlo_matches_chain_duration() {
        let cfg = three_bus_chain();
        let mc = monte_carlo_oracle(&cfg, &Design::empty(&cfg), &[], 40_000, 11).unwrap();
        assert!((mc.u_fault[0].mean - 0.92).abs() < 0.02 * 0.92, "{:?}", mc.u_fault[0]);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let cfg = three_bus_chain();
        let d = Design::empty(&cfg);
        let a = monte_carlo_oracle(&cfg, &d, &[], 5_000, 4).unwrap();
        let b = monte_carlo_oracle(&cfg, &d, &[], 5_000, 4).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cyclic_energy_wraps() {
        let p: Vec<f64> = (0..24).map(|h| h as f64).collect();
        assert!((cyclic_energy(&p, 23.5, 1.0) - (0.5 * 23.0 + 0.5 * 0.0)).abs() < 1e-12);
        assert!((cyclic_energy(&p, 2.0, 2.5) - (2.0 + 3.0 + 0.5 * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn local_generation_lowers_net_demand() {
        let cfg = toy_feeder();
        let empty = Design::empty(&cfg);
        let mut dg = empty.clone();
        dg.units[0].installed = true;
        dg.units[0].s_max_kva = 80.0;
        let bus = cfg.network.bus_index("b1").unwrap();
        let a = year_average(&cfg, &net_demand_profile(&cfg, &empty, bus));
        let b = year_average(&cfg, &net_demand_profile(&cfg, &dg, bus));
        assert!(b < a);
    }
}
