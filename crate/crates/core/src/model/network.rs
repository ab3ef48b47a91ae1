//! Feeder topology: buses, existing and candidate lines, and the PCC.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_v_min() -> f64 {
    0.95 * 0.95
}

fn default_v_max() -> f64 {
    1.05 * 1.05
}

fn default_base_kva() -> f64 {
    1000.0
}

fn default_line_lifetime() -> f64 {
    40.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CustomerClass {
    #[default]
    Residential,
    Commercial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default)]
    pub demand: bool,
    #[serde(default)]
    pub pcc: bool,
    /// Installed (customer-owned) PV capacity.
    #[serde(default)]
    pub pv_kw: f64,
    /// Squared voltage magnitude bounds, per-unit².
    #[serde(default = "default_v_min")]
    pub v_min: f64,
    #[serde(default = "default_v_max")]
    pub v_max: f64,
    #[serde(default)]
    pub customer: CustomerClass,
    /// Overrides the scenario-wide demand power factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineStatus {
    #[default]
    Existing,
    Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Resistance, per-unit on the network base.
    pub r_pu: f64,
    /// Reactance, per-unit. Defaults to the resistance when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_pu: Option<f64>,
    pub s_max_kva: f64,
    pub length_miles: f64,
    #[serde(default)]
    pub status: LineStatus,
    /// One-off investment cost, $ (candidate lines only).
    #[serde(default)]
    pub invest_cost: f64,
    #[serde(default = "default_line_lifetime")]
    pub lifetime_years: f64,
}

impl Line {
    pub fn reactance(&self) -> f64 {
        self.x_pu.unwrap_or(self.r_pu)
    }

    pub fn is_candidate(&self) -> bool {
        self.status == LineStatus::Candidate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(default = "default_base_kva")]
    pub base_kva: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub pcc: String,
}

/// A line resolved to bus indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub line: usize,
    pub from: usize,
    pub to: usize,
}

impl NetworkModel {
    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    pub fn line_index(&self, id: &str) -> Option<usize> {
        self.lines.iter().position(|l| l.id == id)
    }

    pub fn pcc_index(&self) -> usize {
        self.bus_index(&self.pcc)
            .expect("validated network has a PCC bus")
    }

    pub fn existing_lines(&self) -> impl Iterator<Item = (usize, &Line)> {
        self.lines.iter().enumerate().filter(|(_, l)| !l.is_candidate())
    }

    pub fn candidate_lines(&self) -> impl Iterator<Item = (usize, &Line)> {
        self.lines.iter().enumerate().filter(|(_, l)| l.is_candidate())
    }

    pub fn demand_buses(&self) -> Vec<usize> {
        (0..self.buses.len()).filter(|&b| self.buses[b].demand).collect()
    }

    /// Lines with endpoints resolved; panics on unvalidated input.
    pub fn edges(&self) -> Vec<Edge> {
        self.lines
            .iter()
            .enumerate()
            .map(|(i, l)| Edge {
                line: i,
                from: self.bus_index(&l.from).expect("validated line endpoint"),
                to: self.bus_index(&l.to).expect("validated line endpoint"),
            })
            .collect()
    }

    /// Checks every structural invariant and returns all violations.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashMap::new();
        for (i, b) in self.buses.iter().enumerate() {
            if seen.insert(b.id.as_str(), i).is_some() {
                out.push(format!("duplicate bus id '{}'", b.id));
            }
            if !(b.v_min < b.v_max) {
                out.push(format!("bus '{}': v_min must be below v_max", b.id));
            }
            if b.v_min <= 0.0 {
                out.push(format!("bus '{}': v_min must be positive", b.id));
            }
            if b.pv_kw < 0.0 {
                out.push(format!("bus '{}': pv_kw must be non-negative", b.id));
            }
            if let Some(pf) = b.power_factor {
                if !(pf > 0.0 && pf <= 1.0) {
                    out.push(format!("bus '{}': power factor must lie in (0, 1]", b.id));
                }
            }
        }
        let flagged: Vec<&str> = self
            .buses
            .iter()
            .filter(|b| b.pcc)
            .map(|b| b.id.as_str())
            .collect();
        match self.bus_index(&self.pcc) {
            None => out.push(format!("PCC bus '{}' does not exist", self.pcc)),
            Some(_) => {
                if flagged.iter().any(|id| *id != self.pcc) || flagged.len() > 1 {
                    out.push("exactly one PCC bus is allowed".to_string());
                }
            }
        }
        if !(self.base_kva > 0.0) {
            out.push("base_kva must be positive".into());
        }

        let mut line_ids = HashMap::new();
        let mut endpoints_ok = true;
        for l in &self.lines {
            if line_ids.insert(l.id.as_str(), ()).is_some() {
                out.push(format!("duplicate line id '{}'", l.id));
            }
            for end in [&l.from, &l.to] {
                if self.bus_index(end).is_none() {
                    out.push(format!("line '{}' references unknown bus '{}'", l.id, end));
                    endpoints_ok = false;
                }
            }
            if l.from == l.to {
                out.push(format!("line '{}' is a self-loop", l.id));
                endpoints_ok = false;
            }
            if !(l.r_pu > 0.0) {
                out.push(format!("line '{}': resistance must be positive", l.id));
            }
            if l.reactance() < 0.0 {
                out.push(format!("line '{}': reactance must be non-negative", l.id));
            }
            if !(l.s_max_kva > 0.0) {
                out.push(format!("line '{}': rating must be positive", l.id));
            }
            if !(l.length_miles > 0.0) {
                out.push(format!("line '{}': length must be positive", l.id));
            }
            if l.invest_cost < 0.0 {
                out.push(format!("line '{}': investment cost must be non-negative", l.id));
            }
            if l.is_candidate() && !(l.lifetime_years > 0.0) {
                out.push(format!("line '{}': lifetime must be positive", l.id));
            }
        }
        if endpoints_ok && self.bus_index(&self.pcc).is_some() {
            out.extend(self.radial_violation());
        }
        out
    }

    fn radial_violation(&self) -> Option<String> {
        let n = self.buses.len();
        let mut dsu = DisjointSet::new(n);
        for (_, l) in self.existing_lines() {
            let a = self.bus_index(&l.from).unwrap();
            let b = self.bus_index(&l.to).unwrap();
            if !dsu.union(a, b) {
                return Some("existing subgraph not radial".into());
            }
        }
        let root = dsu.find(self.pcc_index());
        if (0..n).any(|b| dsu.find(b) != root) {
            return Some("existing subgraph not connected".into());
        }
        None
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }
}

pub(crate) struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when both already share a root.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        origin: origin.to_string(),
        message: format!("line {} column {}: {}", e.line(), e.column(), e),
    })
}

/// Reads and validates a network JSON file.
pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let net: NetworkModel = parse_json(&text, &path.display().to_string())?;
    net.validate()?;
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain_json(extra_line: &str) -> String {
        format!(
            r#"{{
              "pcc": "pcc",
              "buses": [
                {{"id": "pcc", "pcc": true}},
                {{"id": "b1"}},
                {{"id": "b2", "demand": true}}
              ],
              "lines": [
                {{"id": "l1", "from": "pcc", "to": "b1", "r_pu": 0.01, "s_max_kva": 500, "length_miles": 1}},
                {{"id": "l2", "from": "b1", "to": "b2", "r_pu": 0.01, "s_max_kva": 500, "length_miles": 1}}
                {extra_line}
              ]
            }}"#
        )
    }

    #[test]
    fn three_bus_chain_is_radial() {
        let net: NetworkModel = parse_json(&chain_json(""), "inline").unwrap();
        net.validate().unwrap();
        assert_eq!(net.existing_lines().count(), 2);
        assert_eq!(net.demand_buses(), vec![2]);
    }

    #[test]
    fn cycle_in_existing_lines_is_rejected() {
        let extra = r#", {"id": "l3", "from": "b2", "to": "pcc", "r_pu": 0.01, "s_max_kva": 500, "length_miles": 1}"#;
        let net: NetworkModel = parse_json(&chain_json(extra), "inline").unwrap();
        let err = net.validate().unwrap_err().to_string();
        assert!(err.contains("existing subgraph not radial"), "{err}");
    }

    #[test]
    fn candidate_cycle_is_allowed() {
        let extra = r#", {"id": "l3", "from": "b2", "to": "pcc", "r_pu": 0.01, "s_max_kva": 500, "length_miles": 1, "status": "candidate", "invest_cost": 1000}"#;
        let net: NetworkModel = parse_json(&chain_json(extra), "inline").unwrap();
        net.validate().unwrap();
        assert_eq!(net.candidate_lines().count(), 1);
    }

    #[test]
    fn disconnected_bus_is_rejected() {
        let text = r#"{"pcc": "a", "buses": [{"id": "a"}, {"id": "b"}], "lines": []}"#;
        let net: NetworkModel = parse_json(text, "inline").unwrap();
        assert!(net.validate().unwrap_err().to_string().contains("not connected"));
    }

    #[test]
    fn parse_error_reports_position() {
        let err = parse_json::<NetworkModel>("{\n \"pcc\": 3 }", "net.json").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("net.json") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn nonpositive_values_are_rejected() {
        let text = r#"{"pcc": "a", "buses": [{"id": "a"}, {"id": "b", "v_min": 1.2, "v_max": 1.1}],
            "lines": [{"id": "l", "from": "a", "to": "b", "r_pu": 0.0, "s_max_kva": -1, "length_miles": 0}]}"#;
        let net: NetworkModel = parse_json(text, "inline").unwrap();
        let v = net.violations();
        assert_eq!(v.len(), 4, "{v:?}");
    }
}
