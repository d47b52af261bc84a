//! Truncated problems on Ω_δ, extension by zero and δ-convergence sweeps.

use rayon::prelude::*;

use crate::discretize::{assemble, build_mesh, weighted_mass, Mesh, OperatorPair};
use crate::error::{Error, Result};
use crate::evolution::{
    flux_history, solve_with, stability_ratio, Source, SpaceTimeField, TimeGrid, TimeSolver,
};
use crate::geometry::{BoundaryPart, DomainSpec};

/// A solve on Ω_δ together with its mesh and operators.
#[derive(Debug, Clone)]
pub struct TruncatedSolution {
    pub mesh: Mesh,
    pub ops: OperatorPair,
    pub field: SpaceTimeField,
}

/// Lower x_N bound of the support of the nodal field `u`: the bottom of the
/// lowest cell touching a nonzero node. Returns 1 for the zero field.
pub fn support_lower_bound(mesh: &Mesh, u: &[f64]) -> f64 {
    let xn = mesh.xn_axis();
    match (0..mesh.num_nodes()).filter(|&k| u[k] != 0.0).map(|k| mesh.split_index(k).1).min() {
        None => 1.0,
        Some(0) => xn[0],
        Some(j) => xn[j - 1],
    }
}

/// Restriction of nodal data on `full` to the nodes of `sub`.
fn restrict_nodal(map: &[usize], u: &[f64]) -> Vec<f64> {
    map.iter().map(|&k| u[k]).collect()
}

/// Solves the uniformly parabolic problem on Ω_δ, meshed by the nodes of `full`
/// with x_N ≥ δ.
///
/// `y0` and `f` are nodal on `full`; `y0` must vanish on `{x_N ≤ δ}`.
pub fn solve_truncated(
    full: &Mesh,
    delta: f64,
    y0: &[f64],
    f: &Source,
    grid: &TimeGrid,
    solver: TimeSolver,
) -> Result<TruncatedSolution> {
    if full.delta().is_some() {
        return Err(Error::ContractViolation("the parent mesh must cover the full domain".into()));
    }
    let support = support_lower_bound(full, y0);
    if support < delta - 1e-12 {
        return Err(Error::SupportViolation { support_distance: support, delta });
    }
    let mesh = full.submesh(delta)?;
    let map = mesh.node_map_into(full)?;
    let mut y0_sub = restrict_nodal(&map, y0);
    for (k, v) in y0_sub.iter_mut().enumerate() {
        if mesh.is_boundary(k) {
            *v = 0.0;
        }
    }
    let f_sub = match f {
        Source::Zero => Source::Zero,
        Source::Nodal(v) => Source::Nodal(v.iter().map(|fj| restrict_nodal(&map, fj)).collect()),
    };
    let ops = assemble(&mesh, mesh.alpha())?;
    let field = solve_with(solver, &ops, &y0_sub, &f_sub, grid)?;
    Ok(TruncatedSolution { mesh, ops, field })
}

/// Zero extension of a nodal vector on a truncated mesh to `full`.
pub fn extend_by_zero(u: &[f64], truncated: &Mesh, full: &Mesh) -> Result<Vec<f64>> {
    let map = truncated.node_map_into(full)?;
    let mut out = vec![0.0; full.num_nodes()];
    for (&k, &v) in map.iter().zip(u) {
        out[k] = v;
    }
    Ok(out)
}

/// Zero extension of a whole space-time field.
pub fn extend_field(field: &SpaceTimeField, truncated: &Mesh, full: &Mesh) -> Result<SpaceTimeField> {
    let map = truncated.node_map_into(full)?;
    let ext = |u: &[f64]| {
        let mut out = vec![0.0; full.num_nodes()];
        for (&k, &v) in map.iter().zip(u) {
            out[k] = v;
        }
        out
    };
    let values = field.values().iter().map(|u| ext(u)).collect();
    let rates = field.rates().iter().map(|u| ext(u)).collect();
    let source = match field.source() {
        Source::Zero => Source::Zero,
        Source::Nodal(v) => Source::Nodal(v.iter().map(|u| ext(u)).collect()),
    };
    SpaceTimeField::from_parts(*field.grid(), values, Some(rates), source, field.direction())
}

fn merge_axes(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup_by(|x, y| (*x - *y).abs() <= 1e-13);
    out
}

/// Union of two tensor meshes of the same domain, on which P1/Q1 fields of
/// either mesh are again P1/Q1, so their L² distance is exact.
pub struct CommonRefinement {
    mesh: Mesh,
    mass: crate::linalg::CsrMatrix,
}

impl CommonRefinement {
    pub fn new(a: &Mesh, b: &Mesh) -> Result<Self> {
        if a.dimension() != b.dimension() || a.spec() != b.spec() {
            return Err(Error::ContractViolation("meshes of different domains".into()));
        }
        let lower = a.xn_axis()[0].min(b.xn_axis()[0]);
        let axes: Vec<Vec<f64>> = a.axes().iter().zip(b.axes()).map(|(x, y)| merge_axes(x, y)).collect();
        let domain = if lower == 0.0 {
            crate::discretize::MeshDomain::Full(*a.spec())
        } else {
            *a.domain()
        };
        let mesh = Mesh::from_axes(domain, axes)?;
        let mass = weighted_mass(&mesh, 0.0);
        Ok(Self { mesh, mass })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn diff_sq(&self, a: &Mesh, ua: &[f64], b: &Mesh, ub: &[f64]) -> f64 {
        let d: Vec<f64> = (0..self.mesh.num_nodes())
            .map(|k| {
                let p = self.mesh.coords(k);
                a.evaluate(ua, &p) - b.evaluate(ub, &p)
            })
            .collect();
        self.mass.quad_form(&d).max(0.0)
    }
}

/// `‖q_a − q_b‖²_{L²(Γ⁺)}` for nodal Γ⁺ traces of two meshes (zero corner
/// values in two dimensions).
pub fn trace_diff_sq(a: &Mesh, qa: &[f64], b: &Mesh, qb: &[f64]) -> f64 {
    match (a.x1_axis(), b.x1_axis()) {
        (None, None) => (qa[0] - qb[0]).powi(2),
        (Some(xa), Some(xb)) => {
            let eval = |x: &[f64], q: &[f64], s: f64| {
                let full: Vec<f64> = std::iter::once(0.0).chain(q.iter().copied()).chain([0.0]).collect();
                let c = x.partition_point(|&y| y <= s).saturating_sub(1).min(x.len() - 2);
                let t = (s - x[c]) / (x[c + 1] - x[c]);
                (1.0 - t) * full[c] + t * full[c + 1]
            };
            let u = merge_axes(xa, xb);
            let d: Vec<f64> = u.iter().map(|&s| eval(xa, qa, s) - eval(xb, qb, s)).collect();
            u.windows(2)
                .zip(d.windows(2))
                .map(|(x, v)| (x[1] - x[0]) / 3.0 * (v[0] * v[0] + v[0] * v[1] + v[1] * v[1]))
                .sum()
        }
        _ => panic!("trace of meshes of different dimension"),
    }
}

/// Parameters of a δ-sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepSetup {
    pub domain: DomainSpec,
    /// Cells per axis of the uniform sweep mesh; every δ must be one of its
    /// x_N nodes.
    pub n: usize,
    /// Cells per axis of the reference mesh on the full domain.
    pub n_ref: usize,
    /// Grading of the reference meshes.
    pub grading_ref: f64,
    pub grid: TimeGrid,
    pub solver: TimeSolver,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub deltas: Vec<f64>,
    /// `‖Ey_δ − y_ref‖_{L²(Q)}`.
    pub solution_errors: Vec<f64>,
    /// `‖Ey_δ(T) − y_ref(T)‖_{L²(Ω)}`, for zero sources only.
    pub final_errors: Option<Vec<f64>>,
    /// `‖∂_ν y_δ − ∂_ν y_ref‖_{L²(Γ⁺×(0,T))}`, for zero sources only.
    pub flux_errors: Option<Vec<f64>>,
    pub solution_rates: Vec<f64>,
    pub final_rates: Option<Vec<f64>>,
    pub flux_rates: Option<Vec<f64>>,
    /// Largest relative gap between `‖Ey_δ(t)‖` and `‖y_δ(t)‖` (FE norms).
    pub extension_defects: Vec<f64>,
    /// A-priori stability ratio of each truncated solve.
    pub stability_ratios: Vec<f64>,
    /// `‖y_ref − y_ref/2‖_{L²(Q)}` against the half-resolution reference.
    pub self_convergence: f64,
    pub n: usize,
    pub n_ref: usize,
    pub grading_ref: f64,
}

/// Empirical rates `log(e_i/e_{i+1}) / log(δ_i/δ_{i+1})`.
pub fn empirical_rates(deltas: &[f64], errors: &[f64]) -> Vec<f64> {
    deltas
        .windows(2)
        .zip(errors.windows(2))
        .map(|(d, e)| (e[0] / e[1]).ln() / (d[0] / d[1]).ln())
        .collect()
}

type SpaceFn<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);
type SpaceTimeFn<'a> = &'a (dyn Fn(f64, &[f64]) -> f64 + Sync);

fn nodal(mesh: &Mesh, f: SpaceFn) -> Vec<f64> {
    (0..mesh.num_nodes()).map(|k| if mesh.is_boundary(k) { 0.0 } else { f(&mesh.coords(k)) }).collect()
}

fn space_time_diff(cr: &CommonRefinement, a: &Mesh, fa: &SpaceTimeField, b: &Mesh, fb: &SpaceTimeField) -> f64 {
    let w = fa.grid().trapezoid_weights();
    (0..w.len()).map(|j| w[j] * cr.diff_sq(a, fa.at(j), b, fb.at(j))).sum::<f64>().sqrt()
}

fn solve_full(setup: &SweepSetup, n: usize, g: f64, y0: SpaceFn, f: Option<SpaceTimeFn>) -> Result<(Mesh, OperatorPair, SpaceTimeField)> {
    let mesh = build_mesh(setup.domain, n, g)?;
    let ops = assemble(&mesh, setup.domain.alpha())?;
    let source = f.map_or(Source::Zero, |f| Source::from_fn(&setup.grid, &mesh, f));
    let field = solve_with(setup.solver, &ops, &nodal(&mesh, y0), &source, &setup.grid)?;
    Ok((mesh, ops, field))
}

/// Solves on Ω_δ for every δ and compares the zero extensions with a reference
/// solve on the full degenerate domain.
pub fn delta_sweep(setup: &SweepSetup, y0: SpaceFn, f: Option<SpaceTimeFn>, deltas: &[f64]) -> Result<ConvergenceReport> {
    if deltas.is_empty() || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::param("deltas", "must be non-empty and strictly decreasing"));
    }
    let sweep = build_mesh(setup.domain, setup.n, 1.0)?;
    let sweep_ops = assemble(&sweep, setup.domain.alpha())?;
    for &d in deltas {
        sweep.submesh(d)?;
    }
    let (ref_mesh, ref_ops, reference) = solve_full(setup, setup.n_ref, setup.grading_ref, y0, f)?;
    let (half_mesh, _, half) = solve_full(setup, setup.n_ref / 2, setup.grading_ref, y0, f)?;
    let self_cr = CommonRefinement::new(&ref_mesh, &half_mesh)?;
    let self_convergence = space_time_diff(&self_cr, &ref_mesh, &reference, &half_mesh, &half);
    let cr = CommonRefinement::new(&sweep, &ref_mesh)?;
    let zero_source = f.is_none();
    let ref_flux = if zero_source {
        Some(flux_history(&reference, &ref_ops, &ref_mesh, BoundaryPart::GammaPlus)?)
    } else {
        None
    };
    let y0_sweep = nodal(&sweep, y0);
    let source = f.map_or(Source::Zero, |f| Source::from_fn(&setup.grid, &sweep, f));
    let steps = setup.grid.steps();
    let w = setup.grid.trapezoid_weights();

    struct PerDelta {
        solution: f64,
        final_err: f64,
        flux: f64,
        defect: f64,
        stability: f64,
    }
    let rows: Vec<PerDelta> = deltas
        .par_iter()
        .map(|&delta| -> Result<PerDelta> {
            let sol = solve_truncated(&sweep, delta, &y0_sweep, &source, &setup.grid, setup.solver)?;
            let ext = extend_field(&sol.field, &sol.mesh, &sweep)?;
            let solution = space_time_diff(&cr, &sweep, &ext, &ref_mesh, &reference);
            let final_err = cr.diff_sq(&sweep, ext.at(steps), &ref_mesh, reference.at(steps)).sqrt();
            let defect = (0..=steps)
                .map(|j| {
                    let a = sweep_ops.mass_full().quad_form(ext.at(j)).sqrt();
                    let b = sol.ops.mass_full().quad_form(sol.field.at(j)).sqrt();
                    if b == 0.0 {
                        a
                    } else {
                        (a - b).abs() / b
                    }
                })
                .fold(0.0, f64::max);
            let flux = match &ref_flux {
                Some(rf) => {
                    let q = flux_history(&sol.field, &sol.ops, &sol.mesh, BoundaryPart::GammaPlus)?;
                    (0..=steps)
                        .map(|j| w[j] * trace_diff_sq(&sol.mesh, &q.values[j], &ref_mesh, &rf.values[j]))
                        .sum::<f64>()
                        .sqrt()
                }
                None => f64::NAN,
            };
            let stability = stability_ratio(&sol.field, &sol.ops).unwrap_or(f64::NAN);
            Ok(PerDelta { solution, final_err, flux, defect, stability })
        })
        .collect::<Result<_>>()?;

    let solution_errors: Vec<f64> = rows.iter().map(|r| r.solution).collect();
    let (final_errors, flux_errors) = if zero_source {
        (Some(rows.iter().map(|r| r.final_err).collect::<Vec<_>>()), Some(rows.iter().map(|r| r.flux).collect::<Vec<_>>()))
    } else {
        (None, None)
    };
    Ok(ConvergenceReport {
        deltas: deltas.to_vec(),
        solution_rates: empirical_rates(deltas, &solution_errors),
        final_rates: final_errors.as_ref().map(|e| empirical_rates(deltas, e)),
        flux_rates: flux_errors.as_ref().map(|e| empirical_rates(deltas, e)),
        solution_errors,
        final_errors,
        flux_errors,
        extension_defects: rows.iter().map(|r| r.defect).collect(),
        stability_ratios: rows.iter().map(|r| r.stability).collect(),
        self_convergence,
        n: setup.n,
        n_ref: setup.n_ref,
        grading_ref: setup.grading_ref,
    })
}
