//! Linear stand-ins for the model's nonlinear terms: circles, squares,
//! absolute values and binary-continuous products.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::milp::{MilpBlock, Tag, VarId};

/// Right-hand side of a disc constraint: a constant radius or `coef · var`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Const(f64),
    Var(VarId, f64),
}

/// Unit normals `(cos θ_k, sin θ_k)` with `θ_k = π(2k+1)/n` and the scaling `cos(π/n)`.
pub fn polygon_normals(n_p: usize) -> Result<(Vec<(f64, f64)>, f64)> {
    if n_p < 4 || n_p % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "polygon needs an even number of sides >= 4, got {n_p}"
        )));
    }
    let normals = (0..n_p)
        .map(|k| {
            let th = PI * (2 * k + 1) as f64 / n_p as f64;
            (th.cos(), th.sin())
        })
        .collect();
    Ok((normals, (PI / n_p as f64).cos()))
}

/// Inner polygonal approximation of `P² + Q² ≤ S²` with `n_p` sides whose
/// vertices lie on the circle.
pub fn polygon_soc(block: &mut MilpBlock, p: VarId, q: VarId, s: Radius, n_p: usize, tag: Tag) -> Result<()> {
    let (normals, scale) = polygon_normals(n_p)?;
    for (c, sn) in normals {
        let mut terms = vec![(p, c), (q, sn)];
        terms.retain(|(_, a)| a.abs() > 1e-15);
        match s {
            Radius::Const(r) => {
                block.le(terms, scale * r, tag);
            }
            Radius::Var(v, coef) => {
                terms.push((v, -scale * coef));
                block.le(terms, 0.0, tag);
            }
        }
    }
    Ok(())
}

/// Tangent lines `(a_j, b_j)` of `x²` at the midpoints of `segments` equal
/// sub-intervals of `[lo, hi]`: `x² ≥ a_j·x + b_j` everywhere.
pub fn tangent_cuts(lo: f64, hi: f64, segments: usize) -> Result<Vec<(f64, f64)>> {
    if segments < 1 {
        return Err(Error::InvalidArgument("at least one segment is required".into()));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "square approximation needs a bounded interval, got [{lo}, {hi}]"
        )));
    }
    let w = (hi - lo) / segments as f64;
    Ok((0..segments)
        .map(|j| {
            let m = lo + w * (j as f64 + 0.5);
            (2.0 * m, -m * m)
        })
        .collect())
}

/// Worst under-estimate of `x²` by the tangent model within one segment.
pub fn tangent_gap(lo: f64, hi: f64, segments: usize) -> f64 {
    let w = (hi - lo) / segments as f64;
    (w / 2.0) * (w / 2.0)
}

/// New variable `y` with `y ≥ a_j·(scale·x) + b_j` for tangents of the square
/// of `scale·x` over `[lo, hi]` (bounds in scaled units).
///
/// `y` under-estimates `(scale·x)²` by at most [`tangent_gap`]; it is only
/// tight where `y` carries positive cost.
pub fn pwl_square_scaled(
    block: &mut MilpBlock,
    x: VarId,
    scale: f64,
    lo: f64,
    hi: f64,
    segments: usize,
    tag: Tag,
) -> Result<VarId> {
    let cuts = tangent_cuts(lo, hi, segments)?;
    let top = lo.abs().max(hi.abs());
    let name = format!("sq_{}", block.var(x).name);
    let y = block.continuous(name, 0.0, top * top);
    for (a, b) in cuts {
        if a == 0.0 {
            // Tangent at the apex; the variable bound already states y ≥ 0.
            continue;
        }
        block.ge(vec![(y, 1.0), (x, -a * scale)], b, tag);
    }
    Ok(y)
}

/// Tangent model of `x²` over `[lo, hi]`.
pub fn pwl_quadratic_on(block: &mut MilpBlock, x: VarId, lo: f64, hi: f64, segments: usize, tag: Tag) -> Result<VarId> {
    pwl_square_scaled(block, x, 1.0, lo, hi, segments, tag)
}

/// Symmetric-interval variant on `[−x_max, x_max]`.
pub fn pwl_quadratic(block: &mut MilpBlock, x: VarId, x_max: f64, segments: usize, tag: Tag) -> Result<VarId> {
    pwl_quadratic_on(block, x, -x_max, x_max, segments, tag)
}

/// `x⁺ ≥ x`, `x⁺ ≥ −x`. Tight only where `x⁺` is cost-penalized or caps `x`.
pub fn abs_value(block: &mut MilpBlock, x: VarId, tag: Tag) -> VarId {
    let v = block.var(x);
    let cap = v.lower.abs().max(v.upper.abs());
    let name = format!("abs_{}", v.name);
    let xp = block.continuous(name, 0.0, cap);
    block.ge(vec![(xp, 1.0), (x, -1.0)], 0.0, tag);
    block.ge(vec![(xp, 1.0), (x, 1.0)], 0.0, tag);
    xp
}

/// Exact `z = y·x` for binary `y` and `x ∈ [0, x_max]`.
pub fn bilinear_binary(block: &mut MilpBlock, y: VarId, x: VarId, x_max: f64, tag: Tag) -> Result<VarId> {
    if !(x_max.is_finite() && x_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "product linearization needs a finite upper bound, got {x_max}"
        )));
    }
    let name = format!("{}*{}", block.var(y).name, block.var(x).name);
    let z = block.continuous(name, 0.0, x_max);
    block.le(vec![(z, 1.0), (y, -x_max)], 0.0, tag);
    block.le(vec![(z, 1.0), (x, -1.0)], 0.0, tag);
    block.ge(vec![(z, 1.0), (x, -1.0), (y, -x_max)], -x_max, tag);
    Ok(z)
}
