//! Forward evolution `∂_t y − div(A∇y) = f`, `y = 0` on ∂Ω, `y(0) = y⁰`.
//!
//! Two solvers: the spectral Galerkin solution (each mode coefficient follows
//! its scalar ODE exactly, loads interpolated linearly in time) and the θ-scheme
//! on the full finite-element system.

use crate::discretize::{boundary_flux, boundary_inner, Mesh, OperatorPair};
use crate::error::{Error, Result};
use crate::geometry::BoundaryPart;
use crate::linalg::{axpy, dot, BandCholesky};
use crate::spectral::Spectrum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::param("T", format!("{t_final} must be positive and finite")));
        }
        if steps < 8 {
            return Err(Error::param("steps", format!("{steps} time steps; at least 8 required")));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    /// `t_j`; the last node is exactly `T`.
    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.t_final
        } else {
            self.t_final * j as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| self.time(j)).collect()
    }

    /// Trapezoid weights over the time nodes.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..=self.steps).map(|j| if j == 0 || j == self.steps { 0.5 * dt } else { dt }).collect()
    }
}

/// Right-hand side `f`, nodal per time node.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Zero,
    /// One nodal vector per time node.
    Nodal(Vec<Vec<f64>>),
}

impl Source {
    /// The same nodal vector at every time node.
    pub fn constant(grid: &TimeGrid, f: &[f64]) -> Self {
        Source::Nodal(vec![f.to_vec(); grid.steps() + 1])
    }

    /// Samples `f(t, x)` at the mesh nodes; boundary nodes are set to zero.
    pub fn from_fn(grid: &TimeGrid, mesh: &Mesh, f: impl Fn(f64, &[f64]) -> f64) -> Self {
        Source::Nodal(
            grid.times()
                .into_iter()
                .map(|t| {
                    (0..mesh.num_nodes())
                        .map(|k| if mesh.is_boundary(k) { 0.0 } else { f(t, &mesh.coords(k)) })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Source::Zero => true,
            Source::Nodal(v) => v.iter().all(|f| f.iter().all(|&x| x == 0.0)),
        }
    }

    /// Nodal values at time node `j` (`None` for the zero source).
    pub fn at(&self, j: usize) -> Option<&[f64]> {
        match self {
            Source::Zero => None,
            Source::Nodal(v) => Some(&v[j]),
        }
    }

    fn check(&self, grid: &TimeGrid, nodes: usize) -> Result<()> {
        if let Source::Nodal(v) = self {
            if v.len() != grid.steps() + 1 || v.iter().any(|f| f.len() != nodes) {
                return Err(Error::ContractViolation("source does not match the mesh and time grid".into()));
            }
        }
        Ok(())
    }
}

/// Time orientation of a stored field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Solves the forward equation from `y(0) = y⁰`.
    Forward,
    /// Time-reversed forward solution: solves `∂_t y + div(A∇y) = f` with
    /// data at `t = T`.
    Backward,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    grid: TimeGrid,
    values: Vec<Vec<f64>>,
    rates: Option<Vec<Vec<f64>>>,
    source: Source,
    direction: Direction,
}

impl SpaceTimeField {
    /// Wraps explicit nodal values. `rates`, when given, are `∂_t y` per node.
    pub fn from_parts(
        grid: TimeGrid,
        values: Vec<Vec<f64>>,
        rates: Option<Vec<Vec<f64>>>,
        source: Source,
        direction: Direction,
    ) -> Result<Self> {
        if values.len() != grid.steps() + 1 {
            return Err(Error::ContractViolation(format!(
                "{} time slices for a grid with {} nodes",
                values.len(),
                grid.steps() + 1
            )));
        }
        let n = values[0].len();
        if values.iter().any(|v| v.len() != n) || rates.as_ref().is_some_and(|r| r.len() != values.len()) {
            return Err(Error::ContractViolation("ragged field".into()));
        }
        source.check(&grid, n)?;
        Ok(Self { grid, values, rates, source, direction })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn at(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn final_value(&self) -> &[f64] {
        &self.values[self.grid.steps()]
    }

    pub fn source(&self) -> &Source {
        &self.source
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn num_nodes(&self) -> usize {
        self.values[0].len()
    }

    /// `∂_t y` per time node: stored rates if available, otherwise
    /// second-order finite differences.
    pub fn rates(&self) -> Vec<Vec<f64>> {
        if let Some(r) = &self.rates {
            return r.clone();
        }
        let (s, dt) = (self.grid.steps(), self.grid.dt());
        let y = &self.values;
        (0..=s)
            .map(|j| {
                (0..self.num_nodes())
                    .map(|k| {
                        if j == 0 {
                            (-3.0 * y[0][k] + 4.0 * y[1][k] - y[2][k]) / (2.0 * dt)
                        } else if j == s {
                            (3.0 * y[s][k] - 4.0 * y[s - 1][k] + y[s - 2][k]) / (2.0 * dt)
                        } else {
                            (y[j + 1][k] - y[j - 1][k]) / (2.0 * dt)
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// The field under `t ↦ T − t`; the direction tag flips and stored rates
    /// and the source change sign, so a forward solution of
    /// `∂_t y − div(A∇y) = f` becomes a backward solution of
    /// `∂_t y + div(A∇y) = −f(T − t)`.
    pub fn time_reversed(&self) -> SpaceTimeField {
        let mut values = self.values.clone();
        values.reverse();
        let rates = self.rates.as_ref().map(|r| {
            r.iter().rev().map(|v| v.iter().map(|x| -x).collect()).collect()
        });
        let source = match &self.source {
            Source::Zero => Source::Zero,
            Source::Nodal(v) => Source::Nodal(v.iter().rev().map(|f| f.iter().map(|x| -x).collect()).collect()),
        };
        let direction = match self.direction {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        };
        SpaceTimeField { grid: self.grid, values, rates, source, direction }
    }
}

/// `∫_0^1 e^{−z v} v dv` and `∫_0^1 e^{−z v} dv`.
fn exp_weights(z: f64) -> (f64, f64) {
    if z < 0.5 {
        let (mut w0, mut phi1) = (0.0, 0.0);
        let mut term = 1.0; // (−z)^k / k!
        for k in 0..30 {
            w0 += term / (k as f64 + 2.0);
            phi1 += term / (k as f64 + 1.0);
            term *= -z / (k as f64 + 1.0);
        }
        (w0, phi1)
    } else {
        let e = (-z).exp();
        ((1.0 - e * (1.0 + z)) / (z * z), -(-z).exp_m1() / z)
    }
}

/// Spectral Galerkin evolution in the modes of `spectrum`.
///
/// `y0` and the source are projected onto the modes; each coefficient then
/// follows `c(t_{j+1}) = e^{−λΔ}c(t_j) + ∫ e^{−λ(t_{j+1}−s)} f_n(s) ds` with
/// `f_n` linear on each step, integrated exactly.
pub fn solve_spectral(
    spectrum: &Spectrum,
    ops: &OperatorPair,
    y0: &[f64],
    f: &Source,
    grid: &TimeGrid,
) -> Result<SpaceTimeField> {
    ops.check_admissible(y0)?;
    f.check(grid, ops.num_nodes())?;
    let k = spectrum.count();
    let steps = grid.steps();
    let dt = grid.dt();
    let my0 = ops.mass_full().mul_vec(y0);
    let c0: Vec<f64> = spectrum.vectors().iter().map(|phi| dot(phi, &my0)).collect();
    let loads: Option<Vec<Vec<f64>>> = match f {
        Source::Zero => None,
        Source::Nodal(v) => Some(
            v.iter()
                .map(|fj| {
                    let mf = ops.mass_full().mul_vec(fj);
                    spectrum.vectors().iter().map(|phi| dot(phi, &mf)).collect()
                })
                .collect(),
        ),
    };
    let mut coeffs = vec![c0];
    for j in 0..steps {
        let prev = &coeffs[j];
        let next: Vec<f64> = (0..k)
            .map(|n| {
                let lambda = spectrum.value(n);
                let z = lambda * dt;
                let mut c = (-z).exp() * prev[n];
                if let Some(l) = &loads {
                    let (w0, phi1) = exp_weights(z);
                    c += dt * (w0 * l[j][n] + (phi1 - w0) * l[j + 1][n]);
                }
                c
            })
            .collect();
        coeffs.push(next);
    }
    let mut values = Vec::with_capacity(steps + 1);
    let mut rates = Vec::with_capacity(steps + 1);
    for (j, c) in coeffs.iter().enumerate() {
        values.push(spectrum.synthesize(c));
        let dc: Vec<f64> = (0..k)
            .map(|n| -spectrum.value(n) * c[n] + loads.as_ref().map_or(0.0, |l| l[j][n]))
            .collect();
        rates.push(spectrum.synthesize(&dc));
    }
    // y(0) is the datum itself, not its projection
    values[0] = y0.to_vec();
    SpaceTimeField::from_parts(*grid, values, Some(rates), f.clone(), Direction::Forward)
}

/// θ-scheme `(M + θΔK) y_{j+1} = (M − (1−θ)ΔK) y_j + Δ M f_{j+θ}` for
/// `θ ∈ [1/2, 1]`.
pub fn solve_implicit(
    ops: &OperatorPair,
    y0: &[f64],
    f: &Source,
    grid: &TimeGrid,
    theta: f64,
) -> Result<SpaceTimeField> {
    if !(0.5..=1.0).contains(&theta) {
        return Err(Error::param("theta", format!("{theta} is outside [0.5, 1]")));
    }
    ops.check_admissible(y0)?;
    f.check(grid, ops.num_nodes())?;
    let dt = grid.dt();
    let lhs = ops.m().combine(1.0, ops.k(), theta * dt);
    let chol = BandCholesky::factor(&lhs)?;
    let mut y = ops.restrict(y0);
    let mut values = vec![y0.to_vec()];
    for j in 0..grid.steps() {
        let mut rhs = ops.m().mul_vec(&y);
        if theta < 1.0 {
            axpy(-(1.0 - theta) * dt, &ops.k().mul_vec(&y), &mut rhs);
        }
        if let (Some(f0), Some(f1)) = (f.at(j), f.at(j + 1)) {
            let fm: Vec<f64> = ops
                .restrict(f0)
                .iter()
                .zip(ops.restrict(f1))
                .map(|(a, b)| (1.0 - theta) * a + theta * b)
                .collect();
            axpy(dt, &ops.m().mul_vec(&fm), &mut rhs);
        }
        chol.solve_in_place(&mut rhs);
        y = rhs;
        values.push(ops.prolong(&y));
    }
    SpaceTimeField::from_parts(*grid, values, None, f.clone(), Direction::Forward)
}

/// Time integrator choice for pipelines that solve many problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeSolver {
    /// Spectral Galerkin in the first `modes` eigenpairs (capped at the DOF
    /// count).
    Spectral { modes: usize },
    /// θ-scheme on the full system.
    Implicit { theta: f64 },
}

pub fn solve_with(
    solver: TimeSolver,
    ops: &OperatorPair,
    y0: &[f64],
    f: &Source,
    grid: &TimeGrid,
) -> Result<SpaceTimeField> {
    match solver {
        TimeSolver::Spectral { modes } => {
            let spectrum = crate::spectral::compute_spectrum(ops, modes.min(ops.num_dofs()))?;
            solve_spectral(&spectrum, ops, y0, f, grid)
        }
        TimeSolver::Implicit { theta } => solve_implicit(ops, y0, f, grid, theta),
    }
}

/// `‖y(t_j)‖_{L²}` per time node.
pub fn energy_history(field: &SpaceTimeField, ops: &OperatorPair) -> Vec<f64> {
    field.values().iter().map(|y| ops.mass_full().quad_form(y).max(0.0).sqrt()).collect()
}

/// Space-time squared L² norm by trapezoid in time.
pub fn space_time_l2_sq(field: &SpaceTimeField, ops: &OperatorPair) -> f64 {
    let w = field.grid().trapezoid_weights();
    field.values().iter().zip(w).map(|(y, wj)| wj * ops.mass_full().quad_form(y)).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxHistory {
    /// Flux per time node, over the nodes of the requested part.
    pub values: Vec<Vec<f64>>,
    /// `∬ |∂y/∂ν|² dS dt`.
    pub integral: f64,
}

/// Normal flux `A∇y·ν` on `part` at every time node.
///
/// The flux is recovered variationally with `div(A∇y) = ∂_t y − f` for a
/// forward field and `f − ∂_t y` for a backward one.
pub fn flux_history(
    field: &SpaceTimeField,
    ops: &OperatorPair,
    mesh: &Mesh,
    part: BoundaryPart,
) -> Result<FluxHistory> {
    let rates = field.rates();
    let sign = match field.direction() {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let mut values = Vec::with_capacity(rates.len());
    for (j, (y, r)) in field.values().iter().zip(&rates).enumerate() {
        let mut div: Vec<f64> = r.iter().map(|v| sign * v).collect();
        if let Some(f) = field.source().at(j) {
            axpy(-sign, f, &mut div);
        }
        values.push(boundary_flux(ops, mesh, y, Some(&div), part)?);
    }
    let integral = values
        .iter()
        .zip(field.grid().trapezoid_weights())
        .map(|(q, w)| w * boundary_inner(mesh, q, q))
        .sum();
    Ok(FluxHistory { values, integral })
}

/// `[sup_t ‖y(t)‖ + ‖y‖_{L²(0,T;H¹(w))}] / [‖f‖_{L²(Q)} + ‖y⁰‖]`.
pub fn stability_ratio(field: &SpaceTimeField, ops: &OperatorPair) -> Result<f64> {
    let sup = energy_history(field, ops).into_iter().fold(0.0, f64::max);
    let w = field.grid().trapezoid_weights();
    let h1 = field
        .values()
        .iter()
        .zip(&w)
        .map(|(y, wj)| wj * ops.stiffness_full().quad_form(y))
        .sum::<f64>()
        .sqrt();
    let f_norm = match field.source() {
        Source::Zero => 0.0,
        Source::Nodal(v) => v.iter().zip(&w).map(|(f, wj)| wj * ops.mass_full().quad_form(f)).sum::<f64>().sqrt(),
    };
    let y0 = ops.mass_full().quad_form(field.initial()).sqrt();
    let den = f_norm + y0;
    if den == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok((sup + h1) / den)
}
