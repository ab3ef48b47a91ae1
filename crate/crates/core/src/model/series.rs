//! Hourly demand / renewable availability series and representative days.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::network::NetworkModel;

pub const HOURS_PER_DAY: usize = 24;
pub const DAYS_PER_YEAR: usize = 365;

/// One observed day as read from the series file.
#[derive(Debug, Clone, PartialEq)]
pub struct DayProfile {
    pub day: usize,
    /// Days represented, present only in pre-clustered files.
    pub weight: Option<f64>,
    /// `[hour][bus]`, kW.
    pub demand_kw: Vec<Vec<f64>>,
    /// `[hour][bus]`, available renewable power per unit of installed capacity.
    pub rg_pu: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct YearSeries {
    pub bus_ids: Vec<String>,
    pub days: Vec<DayProfile>,
}

/// A weighted typical day. Vectors are indexed `[hour][bus]` in network bus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeDay {
    pub weight: f64,
    pub demand_kw: Vec<Vec<f64>>,
    pub power_factor: Vec<Vec<f64>>,
    pub rg_pu: Vec<Vec<f64>>,
    #[serde(skip)]
    pub apparent_kva: Vec<Vec<f64>>,
    #[serde(skip)]
    pub reactive_kvar: Vec<Vec<f64>>,
    /// Available power of the installed PV, kW.
    #[serde(skip)]
    pub rg_avail_kw: Vec<Vec<f64>>,
}

impl RepresentativeDay {
    pub fn hours(&self) -> usize {
        self.demand_kw.len()
    }

    /// Fills the cached reactive/apparent demand and installed-PV availability.
    pub fn derive(&mut self, net: &NetworkModel) {
        self.reactive_kvar = self
            .demand_kw
            .iter()
            .zip(&self.power_factor)
            .map(|(p, pf)| {
                p.iter()
                    .zip(pf)
                    .map(|(&p, &pf)| p * pf.acos().tan())
                    .collect()
            })
            .collect();
        self.apparent_kva = self
            .demand_kw
            .iter()
            .zip(&self.reactive_kvar)
            .map(|(p, q)| p.iter().zip(q).map(|(p, q)| p.hypot(*q)).collect())
            .collect();
        self.rg_avail_kw = self
            .rg_pu
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&net.buses)
                    .map(|(pu, b)| pu * b.pv_kw)
                    .collect()
            })
            .collect();
    }

    pub fn violations(&self, index: usize, n_buses: usize) -> Vec<String> {
        let mut out = Vec::new();
        let hours_ok = self.demand_kw.len() == HOURS_PER_DAY
            && self.power_factor.len() == HOURS_PER_DAY
            && self.rg_pu.len() == HOURS_PER_DAY;
        if !hours_ok {
            out.push(format!("representative day {index}: expected {HOURS_PER_DAY} hours"));
            return out;
        }
        for h in 0..HOURS_PER_DAY {
            if self.demand_kw[h].len() != n_buses
                || self.power_factor[h].len() != n_buses
                || self.rg_pu[h].len() != n_buses
            {
                out.push(format!("representative day {index}: hour {h} does not cover every bus"));
                return out;
            }
            if self.demand_kw[h].iter().any(|&p| p < 0.0 || !p.is_finite()) {
                out.push(format!("representative day {index}: negative demand at hour {h}"));
            }
            if self.rg_pu[h].iter().any(|&p| p < 0.0 || !p.is_finite()) {
                out.push(format!("representative day {index}: negative RG availability at hour {h}"));
            }
            if self.power_factor[h].iter().any(|&pf| !(pf > 0.0 && pf <= 1.0)) {
                out.push(format!("representative day {index}: power factor outside (0, 1] at hour {h}"));
            }
        }
        if !(self.weight > 0.0) {
            out.push(format!("representative day {index}: weight must be positive"));
        }
        out
    }
}

/// Reads a series CSV with columns `day,hour[,weight],demand_<bus>...,rg_<bus>...`.
///
/// Hours run 0..=23. Buses missing from the header get zero demand / availability.
pub fn read_series_csv(path: impl AsRef<Path>, net: &NetworkModel) -> Result<YearSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_series(file, net, &path.display().to_string())
}

pub fn read_series<R: std::io::Read>(reader: R, net: &NetworkModel, origin: &str) -> Result<YearSeries> {
    let parse_err = |message: String| Error::Parse {
        origin: origin.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();

    let col = |name: &str| headers.iter().position(|h| h == name);
    let day_col = col("day").ok_or_else(|| parse_err("missing 'day' column".into()))?;
    let hour_col = col("hour").ok_or_else(|| parse_err("missing 'hour' column".into()))?;
    let weight_col = col("weight");

    let n = net.buses.len();
    let mut demand_cols = Vec::new();
    let mut rg_cols = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        let (bus, target) = if let Some(bus) = h.strip_prefix("demand_") {
            (bus, &mut demand_cols)
        } else if let Some(bus) = h.strip_prefix("rg_") {
            (bus, &mut rg_cols)
        } else {
            continue;
        };
        let b = net
            .bus_index(bus)
            .ok_or_else(|| parse_err(format!("column '{h}' references unknown bus '{bus}'")))?;
        target.push((c, b));
    }

    let mut by_day: BTreeMap<usize, (Option<f64>, BTreeMap<usize, (Vec<f64>, Vec<f64>)>)> = BTreeMap::new();
    for (row_no, rec) in rdr.records().enumerate() {
        let line = row_no + 2;
        let rec = rec.map_err(|e| parse_err(format!("line {line}: {e}")))?;
        let num = |c: usize, what: &str| -> Result<f64> {
            rec.get(c)
                .ok_or_else(|| parse_err(format!("line {line}: missing field '{what}'")))?
                .parse::<f64>()
                .map_err(|e| parse_err(format!("line {line}: field '{what}': {e}")))
        };
        let day = num(day_col, "day")? as usize;
        let hour = num(hour_col, "hour")? as usize;
        if hour >= HOURS_PER_DAY {
            return Err(parse_err(format!("line {line}: hour {hour} outside 0..=23")));
        }
        let weight = weight_col.map(|c| num(c, "weight")).transpose()?;
        let mut demand = vec![0.0; n];
        for &(c, b) in &demand_cols {
            demand[b] = num(c, &headers[c])?;
        }
        let mut rg = vec![0.0; n];
        for &(c, b) in &rg_cols {
            rg[b] = num(c, &headers[c])?;
        }
        let entry = by_day.entry(day).or_insert((weight, BTreeMap::new()));
        if entry.1.insert(hour, (demand, rg)).is_some() {
            return Err(parse_err(format!("line {line}: duplicate hour {hour} for day {day}")));
        }
    }

    let mut days = Vec::with_capacity(by_day.len());
    for (day, (weight, hours)) in by_day {
        if hours.len() != HOURS_PER_DAY {
            return Err(Error::Validation(vec![format!(
                "day {day} has {} of {HOURS_PER_DAY} hours (missing hours)",
                hours.len()
            )]));
        }
        let (demand_kw, rg_pu) = hours.into_values().unzip();
        days.push(DayProfile {
            day,
            weight,
            demand_kw,
            rg_pu,
        });
    }
    Ok(YearSeries {
        bus_ids: net.buses.iter().map(|b| b.id.clone()).collect(),
        days,
    })
}

/// Expands a day profile into a representative day with per-bus power factors.
pub fn to_representative(day: &DayProfile, weight: f64, net: &NetworkModel, default_pf: f64) -> RepresentativeDay {
    let pf_row: Vec<f64> = net
        .buses
        .iter()
        .map(|b| b.power_factor.unwrap_or(default_pf))
        .collect();
    let mut rep = RepresentativeDay {
        weight,
        demand_kw: day.demand_kw.clone(),
        power_factor: vec![pf_row; day.demand_kw.len()],
        rg_pu: day.rg_pu.clone(),
        apparent_kva: Vec::new(),
        reactive_kvar: Vec::new(),
        rg_avail_kw: Vec::new(),
    };
    rep.derive(net);
    rep
}
