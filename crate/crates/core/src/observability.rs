//! Boundary observability on Γ⁺: per-datum ratios, the worst case over
//! eigenmode subspaces and the time-window energy bound.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::discretize::{boundary_flux, boundary_inner, Mesh, OperatorPair};
use crate::error::{Error, Result};
use crate::evolution::{
    energy_history, flux_history, solve_with, Direction, Source, SpaceTimeField, TimeGrid, TimeSolver,
};
use crate::geometry::BoundaryPart;
use crate::spectral::Spectrum;

/// Largest `λ_K T` for which a mode subspace counts as resolved; beyond it the
/// late-time flux of the deepest mode is below rounding.
pub const MAX_DECAY: f64 = 60.0;

/// Below this relative size the smallest Gram eigenvalue counts as zero.
pub const SINGULAR_TOL: f64 = 1e-14;

/// `‖y⁰‖² / ∬_{Γ⁺×(0,T)} |∂y/∂ν|²` for the free evolution from `y0`.
pub fn observability_ratio(
    y0: &[f64],
    mesh: &Mesh,
    ops: &OperatorPair,
    grid: &TimeGrid,
    solver: TimeSolver,
) -> Result<f64> {
    ops.check_admissible(y0)?;
    if y0.iter().all(|&v| v == 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let field = solve_with(solver, ops, y0, &Source::Zero, grid)?;
    field_observability_ratio(&field, mesh, ops)
}

/// [`observability_ratio`] for an already evolved forward field with zero
/// source.
pub fn field_observability_ratio(field: &SpaceTimeField, mesh: &Mesh, ops: &OperatorPair) -> Result<f64> {
    if field.direction() != Direction::Forward || !field.source().is_zero() {
        return Err(Error::ContractViolation("expected a forward field with zero source".into()));
    }
    let y0 = field.initial();
    if y0.iter().all(|&v| v == 0.0) {
        return Err(Error::UndefinedRatio);
    }
    let flux = flux_history(field, ops, mesh, BoundaryPart::GammaPlus)?.integral;
    if !(flux >= 1e-300) {
        return Err(Error::DegenerateObservation(flux));
    }
    Ok(ops.mass_full().quad_form(y0) / flux)
}

/// Direction in mode-coefficient space along which the flux Gram matrix is
/// numerically singular.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDirection {
    pub coefficients: Vec<f64>,
    /// Smallest Gram eigenvalue relative to the largest.
    pub relative_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservabilityReport {
    pub alpha: f64,
    pub t_final: f64,
    /// `Some(δ)` on a truncated domain.
    pub delta: Option<f64>,
    pub num_nodes: usize,
    pub modes: usize,
    pub lambda_k_t: f64,
    /// `λ_K T ≤ MAX_DECAY`.
    pub resolved: bool,
    /// `‖Φ_m‖² / ∬|∂_ν y_m|²` per mode.
    pub mode_ratios: Vec<f64>,
    /// `sup_c |c|² / cᵀGc` over the subspace; `+∞` when `failure` is set.
    pub c_obs: f64,
    pub gram: Vec<Vec<f64>>,
    pub failure: Option<NullDirection>,
}

/// Flux Gram matrix `G_mn = ⟨q_m, q_n⟩_{Γ⁺} (1 − e^{−(λ_m+λ_n)T})/(λ_m+λ_n)` of
/// the mode evolutions `e^{−λ_m t}Φ_m`, with `q_m` the Γ⁺ flux of `Φ_m`.
pub fn flux_gram(spectrum: &Spectrum, mesh: &Mesh, ops: &OperatorPair, t_final: f64, k: usize) -> Result<DMatrix<f64>> {
    if k == 0 || k > spectrum.count() {
        return Err(Error::param("k", format!("{k} modes requested from a spectrum of {}", spectrum.count())));
    }
    let fluxes = (0..k)
        .into_par_iter()
        .map(|m| {
            let phi = spectrum.vector(m);
            let div: Vec<f64> = phi.iter().map(|v| -spectrum.value(m) * v).collect();
            boundary_flux(ops, mesh, phi, Some(&div), BoundaryPart::GammaPlus)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut g = DMatrix::zeros(k, k);
    for m in 0..k {
        for n in 0..=m {
            let rate = spectrum.value(m) + spectrum.value(n);
            let v = boundary_inner(mesh, &fluxes[m], &fluxes[n]) * (-(-rate * t_final).exp_m1()) / rate;
            g[(m, n)] = v;
            g[(n, m)] = v;
        }
    }
    Ok(g)
}

/// Worst-case observability ratio over the span of the first `k` modes.
pub fn estimate_constant(
    spectrum: &Spectrum,
    mesh: &Mesh,
    ops: &OperatorPair,
    t_final: f64,
    k: usize,
) -> Result<ObservabilityReport> {
    if !(t_final > 0.0) {
        return Err(Error::param("t_final", format!("{t_final} is not positive")));
    }
    if k == 0 || k > spectrum.count() {
        return Err(Error::param("k", format!("{k} modes requested from a spectrum of {}", spectrum.count())));
    }
    let g = flux_gram(spectrum, mesh, ops, t_final, k)?;
    let mode_ratios: Vec<f64> = (0..k).map(|m| 1.0 / g[(m, m)]).collect();
    let eig = SymmetricEigen::new(g.clone());
    let (imin, &lmin) = eig.eigenvalues.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let lmax = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (c_obs, failure) = if lmin <= SINGULAR_TOL * lmax {
        let mut c: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
        let lead = c.iter().copied().fold(0.0, |a: f64, v| if v.abs() > a.abs() { v } else { a });
        if lead < 0.0 {
            c.iter_mut().for_each(|v| *v = -*v);
        }
        (f64::INFINITY, Some(NullDirection { coefficients: c, relative_eigenvalue: lmin / lmax }))
    } else {
        (1.0 / lmin, None)
    };
    Ok(ObservabilityReport {
        alpha: ops.alpha(),
        t_final,
        delta: mesh.delta(),
        num_nodes: mesh.num_nodes(),
        modes: k,
        lambda_k_t: spectrum.value(k - 1) * t_final,
        resolved: spectrum.value(k - 1) * t_final <= MAX_DECAY,
        mode_ratios,
        c_obs,
        gram: (0..k).map(|m| g.row(m).iter().copied().collect()).collect(),
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowBound {
    /// `∫ y²(0)`.
    pub lhs: f64,
    /// `(2/T)∫_{T/4}^{3T/4}∫ y²`.
    pub rhs: f64,
    pub holds: bool,
}

/// `∫_a^b` of the piecewise-linear interpolant of `(t_j, e_j)`.
fn integrate_linear(times: &[f64], e: &[f64], a: f64, b: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..times.len() - 1 {
        let (t0, t1) = (times[j], times[j + 1]);
        let (lo, hi) = (t0.max(a), t1.min(b));
        if hi <= lo {
            continue;
        }
        let at = |t: f64| e[j] + (e[j + 1] - e[j]) * (t - t0) / (t1 - t0);
        total += 0.5 * (hi - lo) * (at(lo) + at(hi));
    }
    total
}

/// Energy bound on the window `[T/4, 3T/4]` for a field whose energy is
/// non-decreasing in time.
pub fn window_bound_check(field: &SpaceTimeField, ops: &OperatorPair) -> Result<WindowBound> {
    let energy: Vec<f64> = energy_history(field, ops).into_iter().map(|e| e * e).collect();
    let scale = energy.iter().copied().fold(0.0, f64::max);
    if let Some(step) = energy.windows(2).position(|p| p[1] < p[0] - 1e-10 * scale) {
        return Err(Error::ConventionMisuse { step: step + 1 });
    }
    let t = field.grid().t_final();
    let rhs = 2.0 / t * integrate_linear(&field.grid().times(), &energy, 0.25 * t, 0.75 * t);
    let lhs = energy[0];
    Ok(WindowBound { lhs, rhs, holds: lhs <= rhs * (1.0 + 1e-8) })
}
