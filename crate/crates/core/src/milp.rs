//! Solver-agnostic mixed-integer linear program container.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Sums repeated variables, keeping first-occurrence order, and drops exact zeros.
fn merge_terms(terms: Vec<(VarId, f64)>) -> Vec<(VarId, f64)> {
    let mut seen: std::collections::HashMap<VarId, usize> = std::collections::HashMap::with_capacity(terms.len());
    let mut out: Vec<(VarId, f64)> = Vec::with_capacity(terms.len());
    for (v, c) in terms {
        match seen.get(&v) {
            Some(&i) => out[i].1 += c,
            None => {
                seen.insert(v, out.len());
                out.push((v, c));
            }
        }
    }
    out.retain(|(_, c)| *c != 0.0);
    out
}

/// Constraint family a row or variable belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    InvestmentCost,
    CapacityActivation,
    InvestmentBinary,
    GeneratorApparent,
    GeneratorActive,
    GeneratorReactive,
    GeneratorPowerFactor,
    RenewableAvailability,
    StorageApparent,
    StorageRating,
    StorageEnergyBounds,
    StorageBalance,
    StorageNetPower,
    StorageDirection,
    StorageCyclic,
    StorageCycles,
    ActiveBalance,
    ReactiveBalance,
    VoltageBounds,
    LineRating,
    PccLosses,
    OperatingCost,
    DerOperatingCost,
    CurtailmentCost,
    PccCost,
    IslandPcc,
    IslandStorageInit,
    IslandRecharge,
    ResilienceCost,
    PathFlow,
    PathBinary,
    OutageDuration,
    NetDemandApparent,
    NetDemandEnergy,
    NetDemandPower,
    NetDemandFloor,
    Eens,
    ReliabilityCost,
    // Supporting rows that do not map to a single model family.
    VoltageDrop,
    AbsValue,
    PwlTangent,
    Bilinear,
    PathGate,
    StorageLimits,
    ResilienceBound,
    Fixing,
}

impl Tag {
    /// Families of the design model proper; each must appear in a full assembly.
    pub const MODEL: [Tag; 38] = [
        Tag::InvestmentCost,
        Tag::CapacityActivation,
        Tag::InvestmentBinary,
        Tag::GeneratorApparent,
        Tag::GeneratorActive,
        Tag::GeneratorReactive,
        Tag::GeneratorPowerFactor,
        Tag::RenewableAvailability,
        Tag::StorageApparent,
        Tag::StorageRating,
        Tag::StorageEnergyBounds,
        Tag::StorageBalance,
        Tag::StorageNetPower,
        Tag::StorageDirection,
        Tag::StorageCyclic,
        Tag::StorageCycles,
        Tag::ActiveBalance,
        Tag::ReactiveBalance,
        Tag::VoltageBounds,
        Tag::LineRating,
        Tag::PccLosses,
        Tag::OperatingCost,
        Tag::DerOperatingCost,
        Tag::CurtailmentCost,
        Tag::PccCost,
        Tag::IslandPcc,
        Tag::IslandStorageInit,
        Tag::IslandRecharge,
        Tag::ResilienceCost,
        Tag::PathFlow,
        Tag::PathBinary,
        Tag::OutageDuration,
        Tag::NetDemandApparent,
        Tag::NetDemandEnergy,
        Tag::NetDemandPower,
        Tag::NetDemandFloor,
        Tag::Eens,
        Tag::ReliabilityCost,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    pub cost: f64,
    pub tag: Option<Tag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: Tag,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, c)| c * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row; zero when satisfied.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.sense {
            Sense::Le => (a - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - a).max(0.0),
            Sense::Eq => (a - self.rhs).abs(),
        }
    }
}

/// Variables, rows and a linear objective `Σ cost·x + offset` (minimized).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpBlock {
    vars: Vec<Variable>,
    rows: Vec<Row>,
    offset: f64,
}

impl MilpBlock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, kind: VarKind) -> VarId {
        let (lower, upper) = match kind {
            VarKind::Binary => (lower.max(0.0), upper.min(1.0)),
            VarKind::Continuous => (lower, upper),
        };
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            kind,
            cost: 0.0,
            tag: None,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, VarKind::Continuous)
    }

    /// Continuous variable in `[0, +∞)`.
    pub fn nonneg(&mut self, name: impl Into<String>) -> VarId {
        self.continuous(name, 0.0, f64::INFINITY)
    }

    pub fn free(&mut self, name: impl Into<String>) -> VarId {
        self.continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn binary(&mut self, name: impl Into<String>) -> VarId {
        self.add_var(name, 0.0, 1.0, VarKind::Binary)
    }

    pub fn tag_var(&mut self, v: VarId, tag: Tag) {
        self.vars[v.0].tag = Some(tag);
    }

    pub fn add_row(&mut self, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64, tag: Tag) -> usize {
        debug_assert!(terms.iter().all(|(v, _)| v.0 < self.vars.len()), "row references undeclared variable");
        let terms = merge_terms(terms);
        self.rows.push(Row { terms, sense, rhs, tag });
        self.rows.len() - 1
    }

    pub fn le(&mut self, terms: Vec<(VarId, f64)>, rhs: f64, tag: Tag) -> usize {
        self.add_row(terms, Sense::Le, rhs, tag)
    }

    pub fn ge(&mut self, terms: Vec<(VarId, f64)>, rhs: f64, tag: Tag) -> usize {
        self.add_row(terms, Sense::Ge, rhs, tag)
    }

    pub fn equal(&mut self, terms: Vec<(VarId, f64)>, rhs: f64, tag: Tag) -> usize {
        self.add_row(terms, Sense::Eq, rhs, tag)
    }

    pub fn set_cost(&mut self, v: VarId, cost: f64) {
        self.vars[v.0].cost = cost;
    }

    pub fn add_cost(&mut self, v: VarId, cost: f64) {
        self.vars[v.0].cost += cost;
    }

    pub fn add_offset(&mut self, c: f64) {
        self.offset += c;
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn fix(&mut self, v: VarId, value: f64) {
        self.set_bounds(v, value, value);
    }

    pub fn var(&self, v: VarId) -> &Variable {
        &self.vars[v.0]
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Binaries whose bounds still leave a choice.
    pub fn num_free_binaries(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary && v.lower < v.upper)
            .count()
    }

    pub fn tags(&self) -> BTreeSet<Tag> {
        self.rows
            .iter()
            .map(|r| r.tag)
            .chain(self.vars.iter().filter_map(|v| v.tag))
            .collect()
    }

    pub fn rows_tagged(&self, tag: Tag) -> impl Iterator<Item = &Row> {
        self.rows.iter().filter(move |r| r.tag == tag)
    }

    pub fn objective(&self, values: &[f64]) -> f64 {
        self.offset + self.vars.iter().zip(values).map(|(v, x)| v.cost * x).sum::<f64>()
    }

    /// Largest row or bound violation and the offending row, if any.
    pub fn max_violation(&self, values: &[f64]) -> (f64, Option<usize>) {
        let mut worst = (0.0, None);
        for (i, r) in self.rows.iter().enumerate() {
            let v = r.violation(values);
            if v > worst.0 {
                worst = (v, Some(i));
            }
        }
        for (v, x) in self.vars.iter().zip(values) {
            let b = (v.lower - x).max(x - v.upper).max(0.0);
            if b > worst.0 {
                worst = (b, None);
            }
        }
        worst
    }

    /// Disjoint union with `other`. Each `(theirs, ours)` alias maps one of
    /// `other`'s variables onto an existing variable here instead of copying
    /// it; costs of aliased variables are added. Returns the new id of every
    /// variable of `other`.
    pub fn append(&mut self, other: &MilpBlock, aliases: &[(VarId, VarId)]) -> Vec<VarId> {
        let mut map: Vec<Option<VarId>> = vec![None; other.vars.len()];
        for &(theirs, ours) in aliases {
            map[theirs.0] = Some(ours);
            self.vars[ours.0].cost += other.vars[theirs.0].cost;
        }
        let map: Vec<VarId> = map
            .into_iter()
            .zip(&other.vars)
            .map(|(m, v)| {
                m.unwrap_or_else(|| {
                    self.vars.push(v.clone());
                    VarId(self.vars.len() - 1)
                })
            })
            .collect();
        for r in &other.rows {
            self.rows.push(Row {
                terms: r.terms.iter().map(|(v, c)| (map[v.0], *c)).collect(),
                sense: r.sense,
                rhs: r.rhs,
                tag: r.tag,
            });
        }
        self.offset += other.offset;
        map
    }

    /// Human-readable LP-format dump.
    pub fn to_lp_string(&self) -> String {
        let mut s = String::from("Minimize\n obj:");
        let term = |s: &mut String, c: f64, name: &str| {
            let _ = write!(s, " {} {} {}", if c < 0.0 { "-" } else { "+" }, c.abs(), name);
        };
        for v in self.vars.iter().filter(|v| v.cost != 0.0) {
            term(&mut s, v.cost, &v.name);
        }
        if self.offset != 0.0 {
            let _ = write!(s, " {} {}", if self.offset < 0.0 { "-" } else { "+" }, self.offset.abs());
        }
        s.push_str("\nSubject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = write!(s, " r{i}_{:?}:", r.tag);
            for (v, c) in &r.terms {
                term(&mut s, *c, &self.vars[v.0].name);
            }
            let op = match r.sense {
                Sense::Le => "<=",
                Sense::Ge => ">=",
                Sense::Eq => "=",
            };
            let _ = writeln!(s, " {op} {}", r.rhs);
        }
        s.push_str("Bounds\n");
        for v in &self.vars {
            let lo = if v.lower.is_finite() { v.lower.to_string() } else { "-inf".into() };
            let hi = if v.upper.is_finite() { v.upper.to_string() } else { "+inf".into() };
            let _ = writeln!(s, " {lo} <= {} <= {hi}", v.name);
        }
        let bins: Vec<&str> = self
            .vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .map(|v| v.name.as_str())
            .collect();
        if !bins.is_empty() {
            let _ = writeln!(s, "Binary\n {}", bins.join(" "));
        }
        s.push_str("End\n");
        s
    }
}
