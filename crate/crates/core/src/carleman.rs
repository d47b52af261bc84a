//! Carleman weights, the conjugated field `z = e^{−sξ}y` and discrete
//! Carleman budgets.
//!
//! Everything is computed for backward fields, `∂_t y + div(A∇y) = f` on a
//! truncated domain. The weight `e^{−2sξ}` spans hundreds of orders of
//! magnitude, so every integral is accumulated as a natural logarithm: each time
//! slice is rescaled by its largest weight (attained on Γ⁺) and the slices are
//! combined with a log-sum-exp.

use rayon::prelude::*;

use crate::discretize::{boundary_inner, weighted_mass, Mesh, OperatorPair};
use crate::error::{Error, Result};
use crate::evolution::{flux_history, Direction, Source, SpaceTimeField, TimeGrid};
use crate::geometry::BoundaryPart;

/// The weight system `η = x_N^{2−α}`, `Θ = [t(T−t)]^{−4}`, `ξ = Θ(γ − η)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanWeights {
    alpha: f64,
    t_final: f64,
    gamma: f64,
    s: f64,
}

/// Pointwise values of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightValues {
    pub theta: f64,
    pub xi: f64,
    pub grad_xi: Vec<f64>,
    pub xi_t: f64,
    /// `e^{−sξ}`.
    pub decay: f64,
}

impl CarlemanWeights {
    /// Weights on a domain with `sup x_N = 1`, so `γ = 2`.
    pub fn new(alpha: f64, t_final: f64, s: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} is not in (0, 1)")));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::param("t_final", format!("{t_final} is not positive")));
        }
        check_s(s)?;
        Ok(Self { alpha, t_final, gamma: 2.0, s })
    }

    pub fn with_s(&self, s: f64) -> Result<Self> {
        check_s(s)?;
        Ok(Self { s, ..*self })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn eta(&self, xn: f64) -> f64 {
        xn.powf(2.0 - self.alpha)
    }

    /// `Θ(t)`, infinite at the endpoints.
    pub fn theta(&self, t: f64) -> f64 {
        let u = t * (self.t_final - t);
        if u <= 0.0 {
            f64::INFINITY
        } else {
            u.powi(-4)
        }
    }

    /// `Θ′(t) = −4u^{−5}u′` with `u = t(T−t)`.
    pub fn theta_prime(&self, t: f64) -> f64 {
        let u = t * (self.t_final - t);
        -4.0 * u.powi(-5) * (self.t_final - 2.0 * t)
    }

    /// `Θ″(t) = 20u^{−6}u′² + 8u^{−5}`.
    pub fn theta_second(&self, t: f64) -> f64 {
        let u = t * (self.t_final - t);
        let du = self.t_final - 2.0 * t;
        20.0 * u.powi(-6) * du * du + 8.0 * u.powi(-5)
    }

    /// `div(A∇ξ) = −(2−α)Θ`.
    pub fn div_a_grad_xi(&self, t: f64) -> f64 {
        -(2.0 - self.alpha) * self.theta(t)
    }

    /// `A∇ξ·∇ξ = (2−α)²Θ²x_N^{2−α}`.
    pub fn a_grad_xi_sq(&self, t: f64, xn: f64) -> f64 {
        let c = (2.0 - self.alpha) * self.theta(t);
        c * c * self.eta(xn)
    }
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 1.0 && s.is_finite()) {
        return Err(Error::param("s", format!("{s} is below 1")));
    }
    Ok(())
}

/// Weight values at `(t, x)`. At `t ∈ {0, T}` the limits `Θ = ξ = +∞`,
/// `e^{−sξ} = 0` are returned.
pub fn eval_weights(w: &CarlemanWeights, t: f64, x: &[f64]) -> Result<WeightValues> {
    if !(0.0..=w.t_final).contains(&t) {
        return Err(Error::param("t", format!("{t} is outside [0, {}]", w.t_final)));
    }
    let dim = x.len();
    if dim == 0 {
        return Err(Error::param("x", "empty point"));
    }
    let xn = x[dim - 1];
    let mut grad_xi = vec![0.0; dim];
    if t == 0.0 || t == w.t_final {
        if xn > 0.0 {
            grad_xi[dim - 1] = f64::NEG_INFINITY;
        }
        let xi_t = if t == 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
        return Ok(WeightValues { theta: f64::INFINITY, xi: f64::INFINITY, grad_xi, xi_t, decay: 0.0 });
    }
    let theta = w.theta(t);
    let xi = theta * (w.gamma - w.eta(xn));
    grad_xi[dim - 1] = -(2.0 - w.alpha) * theta * xn.powf(1.0 - w.alpha);
    let xi_t = w.theta_prime(t) * (w.gamma - w.eta(xn));
    Ok(WeightValues { theta, xi, grad_xi, xi_t, decay: (-w.s * xi).exp() })
}

/// `z = e^{−sξ}y` stored as `e^{log_scale}·values`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZField {
    pub weights: CarlemanWeights,
    pub grid: TimeGrid,
    /// `max −sξ = −sΘ(T/2)(γ − 1)`.
    pub log_scale: f64,
    pub values: Vec<Vec<f64>>,
}

fn check_truncated(mesh: &Mesh, field: &SpaceTimeField, w: &CarlemanWeights) -> Result<()> {
    if mesh.delta().is_none() {
        return Err(Error::ContractViolation("Carleman budgets need a truncated domain".into()));
    }
    if field.num_nodes() != mesh.num_nodes() {
        return Err(Error::ContractViolation("field does not match the mesh".into()));
    }
    if (field.grid().t_final() - w.t_final).abs() > 1e-12 * w.t_final {
        return Err(Error::ContractViolation("field horizon differs from the weights' T".into()));
    }
    if mesh.alpha() != w.alpha {
        return Err(Error::ContractViolation("weights and mesh disagree on α".into()));
    }
    Ok(())
}

/// `−s(ξ(t, x) − min_x ξ(t, ·)) = −sΘ(t)(1 − η(x))` per node.
fn relative_log_weight(w: &CarlemanWeights, theta: f64, mesh: &Mesh) -> Vec<f64> {
    let xn = mesh.xn_axis();
    (0..mesh.num_nodes())
        .map(|k| {
            let (_, j) = mesh.split_index(k);
            -w.s * theta * (1.0 - w.eta(xn[j]))
        })
        .collect()
}

/// Conjugates `field` by `e^{−sξ}`; the endpoint slices are identically zero.
pub fn transform(field: &SpaceTimeField, w: &CarlemanWeights, mesh: &Mesh) -> Result<ZField> {
    check_truncated(mesh, field, w)?;
    let grid = *field.grid();
    let log_scale = -w.s * w.theta(0.5 * w.t_final) * (w.gamma - 1.0);
    let values = (0..=grid.steps())
        .map(|j| {
            let y = field.at(j);
            if j == 0 || j == grid.steps() {
                return vec![0.0; y.len()];
            }
            let theta = w.theta(grid.time(j));
            // slice maximum of −sξ relative to the global one
            let shift = -w.s * theta * (w.gamma - 1.0) - log_scale;
            relative_log_weight(w, theta, mesh)
                .iter()
                .zip(y)
                .map(|(lw, v)| (lw + shift).exp() * v)
                .collect()
        })
        .collect();
    Ok(ZField { weights: *w, grid, log_scale, values })
}

/// Residual of `e^{−sξ}f = P₁z + P₂z`, in the units of `e^{log_scale}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PResidual {
    pub log_scale: f64,
    /// `‖e^{−sξ}f − P₁z − P₂z‖` over interior space-time nodes.
    pub residual: f64,
    /// `‖e^{−sξ}f‖` over the same nodes.
    pub source: f64,
}

impl PResidual {
    pub fn relative(&self) -> f64 {
        if self.source == 0.0 {
            self.residual
        } else {
            self.residual / self.source
        }
    }
}

/// Evaluates `P₁z = z_t + 2sA∇z·∇ξ + sz div(A∇ξ)` and
/// `P₂z = div(A∇z) + sξ_t z + s²zA∇ξ·∇ξ` with central differences in time and
/// in x_N and the lumped discrete operator for `div(A∇z)`, and returns the
/// lumped-mass norm of the residual against the backward source `f`.
pub fn p_residual(z: &ZField, f: &Source, mesh: &Mesh, ops: &OperatorPair) -> Result<PResidual> {
    let grid = &z.grid;
    let n = mesh.num_nodes();
    if z.values.len() != grid.steps() + 1 || z.values.iter().any(|v| v.len() != n) || ops.num_nodes() != n {
        return Err(Error::ContractViolation("z does not match the mesh or the time grid".into()));
    }
    if let Source::Nodal(v) = f {
        if v.len() != z.values.len() || v.iter().any(|s| s.len() != n) {
            return Err(Error::ContractViolation("source does not match the mesh or the time grid".into()));
        }
    }
    let w = &z.weights;
    let (s, a) = (w.s, w.alpha);
    let dt = grid.dt();
    let xn = mesh.xn_axis();
    let lumped = ops.lumped_mass();
    let interior = ops.interior();
    let (mut res_sq, mut src_sq) = (0.0, 0.0);
    for j in 1..grid.steps() {
        let t = grid.time(j);
        let theta = w.theta(t);
        let theta_p = w.theta_prime(t);
        let zj = &z.values[j];
        let kz = ops.stiffness_full().mul_vec(zj);
        let rel = relative_log_weight(w, theta, mesh);
        let shift = -s * theta * (w.gamma - 1.0) - z.log_scale;
        let (mut r_slice, mut f_slice) = (0.0, 0.0);
        for &k in interior {
            let (i, jn) = mesh.split_index(k);
            let x = xn[jn];
            let zt = (z.values[j + 1][k] - z.values[j - 1][k]) / (2.0 * dt);
            let dzn = (zj[mesh.index(i, jn + 1)] - zj[mesh.index(i, jn - 1)]) / (xn[jn + 1] - xn[jn - 1]);
            let div = -kz[k] / lumped[k];
            let zk = zj[k];
            let p1 = zt - 2.0 * s * (2.0 - a) * theta * x * dzn + s * zk * w.div_a_grad_xi(t);
            let p2 = div + s * theta_p * (w.gamma - w.eta(x)) * zk + s * s * w.a_grad_xi_sq(t, x) * zk;
            let fw = f.at(j).map_or(0.0, |fj| (rel[k] + shift).exp() * fj[k]);
            let r = fw - p1 - p2;
            r_slice += lumped[k] * r * r;
            f_slice += lumped[k] * fw * fw;
        }
        res_sq += dt * r_slice;
        src_sq += dt * f_slice;
    }
    Ok(PResidual { log_scale: z.log_scale, residual: res_sq.sqrt(), source: src_sq.sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Inequality {
    /// `s∬Θx_N^α(∂_N z)² + s³∬Θ³z²x_N^{2−α} ≤ ‖e^{−sξ}f‖² + Cs∬_{Γ⁺}Θ|∂_ν z|²`.
    Energy,
    /// `s∬Θy²e^{−2sξ} ≤ ‖e^{−sξ}f‖² + Cs∬_{Γ⁺}Θ|∂_ν y|²e^{−2sξ}`.
    Weighted,
}

/// The terms of a discrete Carleman inequality, as natural logarithms
/// (`−∞` for a vanishing term).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CarlemanBudget {
    pub which: Inequality,
    pub s: f64,
    /// `log s∬Θx_N^α(∂_N z)²`.
    pub log_gradient: f64,
    /// `log s³∬Θ³z²x_N^{2−α}`.
    pub log_mass: f64,
    /// `log s∬Θz²`.
    pub log_weighted: f64,
    /// `log ‖e^{−sξ}f‖²`.
    pub log_source: f64,
    /// `log s∬_{Γ⁺}Θ|∂_ν z|²` (without the constant).
    pub log_boundary: f64,
    pub constant: f64,
    pub holds: bool,
}

impl CarlemanBudget {
    pub fn log_lhs(&self) -> f64 {
        match self.which {
            Inequality::Energy => log_add(self.log_gradient, self.log_mass),
            Inequality::Weighted => self.log_weighted,
        }
    }

    /// Smallest constant making the inequality hold:
    /// `(lhs − ‖e^{−sξ}f‖²)/boundary`, 0 when the source term alone suffices,
    /// `+∞` when the boundary term vanishes but is needed.
    pub fn required_constant(&self) -> f64 {
        let lhs = self.log_lhs();
        if lhs <= self.log_source {
            return 0.0;
        }
        if self.log_boundary == f64::NEG_INFINITY {
            return f64::INFINITY;
        }
        // log(lhs − src) = lhs + log(1 − e^{src − lhs})
        let excess = lhs + (-(self.log_source - lhs).exp()).ln_1p();
        (excess - self.log_boundary).exp()
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    log_sum_exp(&[a, b])
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Per-slice quantities of a field that do not depend on `s`.
struct Prepared<'a> {
    field: &'a SpaceTimeField,
    /// `∫_{Γ⁺}|∂_ν y|²` per time node.
    boundary: Vec<f64>,
}

fn prepare<'a>(field: &'a SpaceTimeField, mesh: &Mesh, ops: &OperatorPair, w: &CarlemanWeights) -> Result<Prepared<'a>> {
    check_truncated(mesh, field, w)?;
    if field.direction() != Direction::Backward {
        return Err(Error::ContractViolation("Carleman budgets are defined for backward fields".into()));
    }
    let flux = flux_history(field, ops, mesh, BoundaryPart::GammaPlus)?;
    let boundary = flux.values.iter().map(|q| boundary_inner(mesh, q, q)).collect();
    Ok(Prepared { field, boundary })
}

fn ln_or_neg_inf(v: f64) -> f64 {
    if v > 0.0 {
        v.ln()
    } else {
        f64::NEG_INFINITY
    }
}

fn budget(
    p: &Prepared,
    w: &CarlemanWeights,
    mesh: &Mesh,
    ops: &OperatorPair,
    mass_weight: &crate::linalg::CsrMatrix,
    which: Inequality,
    constant: f64,
) -> CarlemanBudget {
    let grid = p.field.grid();
    let s = w.s;
    let mut terms: [Vec<f64>; 5] = Default::default();
    for j in 1..grid.steps() {
        let theta = w.theta(grid.time(j));
        let slice = -s * theta * (w.gamma - 1.0);
        let base = grid.dt().ln() + 2.0 * slice;
        let rel = relative_log_weight(w, theta, mesh);
        let y = p.field.at(j);
        let zt: Vec<f64> = rel.iter().zip(y).map(|(lw, v)| lw.exp() * v).collect();
        let lt = theta.ln();
        terms[0].push(base + lt + ln_or_neg_inf(ops.stiffness_normal_full().quad_form(&zt)));
        terms[1].push(base + 3.0 * lt + ln_or_neg_inf(mass_weight.quad_form(&zt)));
        terms[2].push(base + lt + ln_or_neg_inf(ops.mass_full().quad_form(&zt)));
        let src = match p.field.source().at(j) {
            Some(f) => {
                let ft: Vec<f64> = rel.iter().zip(f).map(|(lw, v)| lw.exp() * v).collect();
                ln_or_neg_inf(ops.mass_full().quad_form(&ft))
            }
            None => f64::NEG_INFINITY,
        };
        terms[3].push(base + src);
        // η = 1 on Γ⁺, so the boundary weight is the slice maximum
        terms[4].push(base + lt + ln_or_neg_inf(p.boundary[j]));
    }
    let ls = s.ln();
    let log_gradient = ls + log_sum_exp(&terms[0]);
    let log_mass = 3.0 * ls + log_sum_exp(&terms[1]);
    let log_weighted = ls + log_sum_exp(&terms[2]);
    let log_source = log_sum_exp(&terms[3]);
    let log_boundary = ls + log_sum_exp(&terms[4]);
    let mut b = CarlemanBudget {
        which,
        s,
        log_gradient,
        log_mass,
        log_weighted,
        log_source,
        log_boundary,
        constant,
        holds: false,
    };
    let lhs = b.log_lhs();
    let rhs = log_add(log_source, constant.ln() + log_boundary);
    b.holds = lhs == f64::NEG_INFINITY || lhs <= rhs + 1e-12;
    b
}

/// Discrete budget of `which` for a backward field on a truncated mesh, with
/// `holds` decided against the boundary constant `constant`.
pub fn check_inequality(
    field: &SpaceTimeField,
    w: &CarlemanWeights,
    mesh: &Mesh,
    ops: &OperatorPair,
    which: Inequality,
    constant: f64,
) -> Result<CarlemanBudget> {
    if !(constant >= 0.0) {
        return Err(Error::param("constant", format!("{constant} is negative")));
    }
    let p = prepare(field, mesh, ops, w)?;
    let mw = weighted_mass(mesh, 2.0 - w.alpha);
    Ok(budget(&p, w, mesh, ops, &mw, which, constant))
}

/// `n` logarithmically spaced values in `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|k| (lo.ln() + (hi / lo).ln() * k as f64 / (n - 1) as f64).exp()).collect()
}

/// Twenty logarithmically spaced values in `[1, 200]`.
pub fn default_s_grid() -> Vec<f64> {
    log_grid(1.0, 200.0, 20)
}

/// Required constants `[s][field]` over an s-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantTable {
    pub s_grid: Vec<f64>,
    pub required: Vec<Vec<f64>>,
}

impl ConstantTable {
    /// Largest required constant over all fields and grid points.
    pub fn max(&self) -> f64 {
        self.required.iter().flatten().copied().fold(0.0, f64::max)
    }
}

fn check_grid(s_grid: &[f64]) -> Result<()> {
    if s_grid.is_empty() || s_grid[0] < 1.0 || s_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::param("s_grid", "must be non-empty, strictly ascending and start at s ≥ 1"));
    }
    Ok(())
}

/// Required constants of every field at every grid value of `s`.
pub fn constant_table(
    fields: &[SpaceTimeField],
    template: &CarlemanWeights,
    mesh: &Mesh,
    ops: &OperatorPair,
    s_grid: &[f64],
    which: Inequality,
) -> Result<ConstantTable> {
    if fields.is_empty() {
        return Err(Error::param("fields", "empty field collection"));
    }
    check_grid(s_grid)?;
    let prepared = fields.iter().map(|f| prepare(f, mesh, ops, template)).collect::<Result<Vec<_>>>()?;
    let mw = weighted_mass(mesh, 2.0 - template.alpha);
    let required = s_grid
        .par_iter()
        .map(|&s| {
            let w = template.with_s(s)?;
            Ok(prepared.iter().map(|p| budget(p, &w, mesh, ops, &mw, which, 0.0).required_constant()).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    Ok(ConstantTable { s_grid: s_grid.to_vec(), required })
}

/// Outcome of the search for an empirical `s₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct S0Estimate {
    /// `None` when no grid point qualifies.
    pub s0: Option<f64>,
    /// Largest required constant over the passing region (NaN if empty).
    pub constant: f64,
    /// Whether every field satisfies the inequality at each grid value.
    pub holds: Vec<bool>,
    pub table: ConstantTable,
}

/// Smallest grid value `s₀` such that every field satisfies `which` with the
/// calibrated constant `calibration` at `s₀` and at all larger grid values.
pub fn find_s0(
    fields: &[SpaceTimeField],
    template: &CarlemanWeights,
    mesh: &Mesh,
    ops: &OperatorPair,
    s_grid: &[f64],
    which: Inequality,
    calibration: f64,
) -> Result<S0Estimate> {
    if !(calibration >= 0.0) {
        return Err(Error::param("calibration", format!("{calibration} is negative")));
    }
    let table = constant_table(fields, template, mesh, ops, s_grid, which)?;
    let holds: Vec<bool> = table.required.iter().map(|r| r.iter().all(|&c| c <= calibration)).collect();
    let first = holds.iter().rposition(|&h| !h).map_or(0, |k| k + 1);
    let (s0, constant) = if first < s_grid.len() {
        let c = table.required[first..].iter().flatten().copied().fold(0.0, f64::max);
        (Some(s_grid[first]), c)
    } else {
        (None, f64::NAN)
    };
    Ok(S0Estimate { s0, constant, holds, table })
}

/// Fitted growth of `|Θ′|` and `|Θ″|` against `Θ` near the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    /// Slope of `log|Θ′|` against `log Θ`.
    pub first: f64,
    /// Slope of `log|Θ″|` against `log Θ`.
    pub second: f64,
    /// `max |Θ′|/Θ^{5/4}` over the fitted nodes.
    pub first_constant: f64,
    /// `max |Θ″|/Θ^{3/2}` over the fitted nodes.
    pub second_constant: f64,
}

fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Least-squares growth exponents on the interior grid nodes within `T/32` of
/// either endpoint, where `Θ` blows up.
pub fn growth_exponents(w: &CarlemanWeights, grid: &TimeGrid) -> Result<GrowthFit> {
    let t = w.t_final;
    let nodes: Vec<f64> = (1..grid.steps())
        .map(|j| grid.time(j))
        .filter(|&tj| tj <= t / 32.0 || tj >= t - t / 32.0)
        .collect();
    if nodes.len() < 4 {
        return Err(Error::param("grid", "too coarse to resolve the endpoint layers"));
    }
    let lt: Vec<f64> = nodes.iter().map(|&tj| w.theta(tj).ln()).collect();
    let l1: Vec<f64> = nodes.iter().map(|&tj| w.theta_prime(tj).abs().ln()).collect();
    let l2: Vec<f64> = nodes.iter().map(|&tj| w.theta_second(tj).abs().ln()).collect();
    let c1 = l1.iter().zip(&lt).map(|(a, b)| (a - 1.25 * b).exp()).fold(0.0, f64::max);
    let c2 = l2.iter().zip(&lt).map(|(a, b)| (a - 1.5 * b).exp()).fold(0.0, f64::max);
    Ok(GrowthFit { first: slope(&lt, &l1), second: slope(&lt, &l2), first_constant: c1, second_constant: c2 })
}
