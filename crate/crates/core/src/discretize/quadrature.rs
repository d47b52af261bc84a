//! Weighted one-dimensional element integrals.
//!
//! The weights x^p appearing in the assembled forms are integrated in closed
//! form wherever that is numerically sound: on cells touching x = 0 and on
//! cells close to it. Far from the origin the monomial expansion of the
//! product of hat functions cancels badly, while x^p is analytic on a disc
//! several cell-widths wide, so a 12-point Gauss–Legendre rule is exact to
//! rounding there.

use std::sync::OnceLock;

/// `∫_a^b x^q dx` for `0 ≤ a < b`, stable as `q + 1 → 0`.
pub fn pow_integral(a: f64, b: f64, q: f64) -> f64 {
    let e = q + 1.0;
    if a == 0.0 {
        assert!(e > 0.0, "∫_0^b x^{q} dx diverges");
        return b.powf(e) / e;
    }
    let log_ratio = (b / a).ln();
    if e.abs() < 1e-300 {
        return log_ratio;
    }
    a.powf(e) * (e * log_ratio).exp_m1() / e
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gl12() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(12))
}

/// `[[∫ x^p Y₀Y₀, ∫ x^p Y₀Y₁], [·, ∫ x^p Y₁Y₁]]` over `[a, b]`, where `Y₀, Y₁`
/// are the linear hat functions of the cell.
///
/// For `a = 0` and `p ≤ -1` the entries involving `Y₀` diverge; they are
/// returned as zero and callers must only apply the matrix to vectors that
/// vanish at `x = 0`.
pub fn weighted_moments(a: f64, b: f64, p: f64) -> [[f64; 2]; 2] {
    let h = b - a;
    if a == 0.0 {
        let bp = b.powf(p + 1.0);
        let y11 = bp / (p + 3.0);
        let y01 = if p > -2.0 { bp * (1.0 / (p + 2.0) - 1.0 / (p + 3.0)) } else { 0.0 };
        let y00 = if p > -1.0 {
            bp * (1.0 / (p + 1.0) - 2.0 / (p + 2.0) + 1.0 / (p + 3.0))
        } else {
            0.0
        };
        return [[y00, y01], [y01, y11]];
    }
    if a / h <= 4.0 {
        let m0 = pow_integral(a, b, p);
        let m1 = pow_integral(a, b, p + 1.0);
        let m2 = pow_integral(a, b, p + 2.0);
        let h2 = h * h;
        let y00 = (b * b * m0 - 2.0 * b * m1 + m2) / h2;
        let y01 = (-a * b * m0 + (a + b) * m1 - m2) / h2;
        let y11 = (a * a * m0 - 2.0 * a * m1 + m2) / h2;
        return [[y00, y01], [y01, y11]];
    }
    let (nodes, weights) = gl12();
    let mut out = [[0.0; 2]; 2];
    for (s, w) in nodes.iter().zip(weights) {
        let t = 0.5 * (s + 1.0);
        let x = a + h * t;
        let wx = 0.5 * h * w * x.powf(p);
        let (y0, y1) = (1.0 - t, t);
        out[0][0] += wx * y0 * y0;
        out[0][1] += wx * y0 * y1;
        out[1][1] += wx * y1 * y1;
    }
    out[1][0] = out[0][1];
    out
}
