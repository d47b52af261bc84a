//! Weighted norms, the Hardy and Poincaré quotients and boundary fluxes.

use super::assembly::OperatorPair;
use super::mesh::Mesh;
use crate::error::{Error, Result};
use crate::geometry::BoundaryPart;

/// Relative slack allowed on the Hardy constant.
pub const HARDY_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    /// `(∫ ∇u·A∇u)^{1/2}`.
    pub h1w: f64,
    /// `∫ x_N^{α−2} u²` (not square-rooted).
    pub hardy_lhs: f64,
}

pub fn norms(ops: &OperatorPair, u: &[f64]) -> Result<Norms> {
    ops.check_admissible(u)?;
    Ok(Norms {
        l2: ops.mass_full().quad_form(u).max(0.0).sqrt(),
        h1w: ops.stiffness_full().quad_form(u).max(0.0).sqrt(),
        hardy_lhs: ops.hardy_full().quad_form(u).max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardyCheck {
    pub ratio: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `4/(1−α)²`.
pub fn hardy_bound(alpha: f64) -> f64 {
    4.0 / ((1.0 - alpha) * (1.0 - alpha))
}

/// `∫ x_N^{α−2}u² / ∫ x_N^α (∂_N u)²` against `4/(1−α)²`.
pub fn hardy_check(ops: &OperatorPair, u: &[f64]) -> Result<HardyCheck> {
    ops.check_admissible(u)?;
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let lhs = ops.hardy_full().quad_form(u);
    let rhs = ops.stiffness_normal_full().quad_form(u);
    let ratio = lhs / rhs;
    let bound = hardy_bound(ops.alpha());
    Ok(HardyCheck { ratio, bound, holds: ratio <= bound * (1.0 + HARDY_TOL) })
}

/// `‖u‖² / ‖u‖²_{H¹(w)}`.
pub fn poincare_check(ops: &OperatorPair, u: &[f64]) -> Result<f64> {
    ops.check_admissible(u)?;
    if u.iter().all(|&v| v == 0.0) {
        return Err(Error::UndefinedRatio);
    }
    Ok(ops.mass_full().quad_form(u) / ops.stiffness_full().quad_form(u))
}

fn check_flux_part(mesh: &Mesh, part: BoundaryPart) -> Result<Vec<usize>> {
    match part {
        BoundaryPart::GammaPlus => Ok(mesh.boundary_nodes(part)),
        BoundaryPart::Degenerate => {
            Err(Error::UnsupportedRegion("the degenerate boundary x_N = 0 has no recoverable flux".into()))
        }
        BoundaryPart::Lateral if mesh.delta().is_none() => {
            Err(Error::UnsupportedRegion("the lateral boundary reaches x_N = 0".into()))
        }
        BoundaryPart::Lateral => Err(Error::UnsupportedRegion("flux recovery is implemented on Γ⁺ only".into())),
    }
}

/// Lumped boundary mass `∫_{Γ⁺} Y_b ds` of each Γ⁺ node (1 in one dimension).
pub fn boundary_lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let nodes = mesh.boundary_nodes(BoundaryPart::GammaPlus);
    match mesh.x1_axis() {
        None => vec![1.0; nodes.len()],
        Some(x) => nodes
            .iter()
            .map(|&k| {
                let (i, _) = mesh.split_index(k);
                0.5 * (x[i + 1] - x[i - 1])
            })
            .collect(),
    }
}

/// Normal flux `x_N^α ∂_N u` on `part`, in the order of
/// `mesh.boundary_nodes(part)`, by variational recovery from the residual of
/// the unconstrained stiffness.
///
/// `div_flux` is a nodal approximation of `div(A∇u)` (for a solution of the
/// evolution equation, `∂_t u − f`); `None` treats it as zero.
pub fn boundary_flux(
    ops: &OperatorPair,
    mesh: &Mesh,
    u: &[f64],
    div_flux: Option<&[f64]>,
    part: BoundaryPart,
) -> Result<Vec<f64>> {
    let nodes = check_flux_part(mesh, part)?;
    let lumped = boundary_lumped_mass(mesh);
    Ok(nodes
        .iter()
        .zip(&lumped)
        .map(|(&b, &m)| {
            let mut r = ops.stiffness_full().row_dot(b, u);
            if let Some(g) = div_flux {
                r += ops.mass_full().row_dot(b, g);
            }
            r / m
        })
        .collect())
}

/// Second-order one-sided finite-difference flux on Γ⁺ (cross-check for
/// [`boundary_flux`]).
pub fn boundary_flux_fd(mesh: &Mesh, u: &[f64], part: BoundaryPart) -> Result<Vec<f64>> {
    let nodes = check_flux_part(mesh, part)?;
    let y = mesh.xn_axis();
    let n = y.len() - 1;
    let (x0, x1, x2) = (y[n], y[n - 1], y[n - 2]);
    // derivative at x0 of the quadratic through (x0, x1, x2)
    let c0 = 1.0 / (x0 - x1) + 1.0 / (x0 - x2);
    let c1 = (x0 - x2) / ((x1 - x0) * (x1 - x2));
    let c2 = (x0 - x1) / ((x2 - x0) * (x2 - x1));
    let weight = x0.powf(mesh.alpha());
    Ok(nodes
        .iter()
        .map(|&b| {
            let (i, _) = mesh.split_index(b);
            let d = c0 * u[b] + c1 * u[mesh.index(i, n - 1)] + c2 * u[mesh.index(i, n - 2)];
            weight * d
        })
        .collect())
}

/// `∫_{Γ⁺} a b ds` for nodal traces on the Γ⁺ nodes (the P1 trace with zero
/// corner values in two dimensions).
pub fn boundary_inner(mesh: &Mesh, a: &[f64], b: &[f64]) -> f64 {
    match mesh.x1_axis() {
        None => a[0] * b[0],
        Some(x) => {
            let m = a.len();
            assert_eq!(m + 2, x.len());
            let at = |v: &[f64], k: usize| if k == 0 || k == m + 1 { 0.0 } else { v[k - 1] };
            (0..=m)
                .map(|c| {
                    let h = x[c + 1] - x[c];
                    let (a0, a1, b0, b1) = (at(a, c), at(a, c + 1), at(b, c), at(b, c + 1));
                    h / 6.0 * (2.0 * a0 * b0 + a0 * b1 + a1 * b0 + 2.0 * a1 * b1)
                })
                .sum()
        }
    }
}
