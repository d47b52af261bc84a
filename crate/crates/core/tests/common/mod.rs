//! Closed-form oracles shared by the integration tests.
#![allow(dead_code)]

use degen_core::discretize::{assemble, build_mesh, Mesh, OperatorPair};
use degen_core::geometry::{make_domain, DomainKind};

/// `x^{−ν} J_ν(x)` up to the constant factor `2^{−ν}/Γ(ν+1)`.
fn bessel_reduced(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * (nu + kf));
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1.0) && kf > q.sqrt() {
            break;
        }
    }
    sum
}

/// First `count` positive zeros of `J_ν` by sign scan and bisection.
pub fn bessel_zeros(nu: f64, count: usize) -> Vec<f64> {
    let mut zeros = Vec::new();
    let step = 0.05;
    let mut a = step;
    let mut fa = bessel_reduced(nu, a);
    while zeros.len() < count {
        let b = a + step;
        let fb = bessel_reduced(nu, b);
        if fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let fm = bessel_reduced(nu, mid);
                if fm * flo <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            zeros.push(0.5 * (lo + hi));
        }
        a = b;
        fa = fb;
    }
    zeros
}

/// Dirichlet eigenvalues of `−(x^α u′)′` on (0, 1).
pub fn degenerate_eigenvalues(alpha: f64, count: usize) -> Vec<f64> {
    let nu = (1.0 - alpha) / (2.0 - alpha);
    let c = 0.5 * (2.0 - alpha);
    bessel_zeros(nu, count).into_iter().map(|j| c * c * j * j).collect()
}

/// `∫_0^1 x^p Σ c_k x^k dx`.
pub fn monomial_integral(p: f64, coeffs: &[f64]) -> f64 {
    coeffs.iter().enumerate().map(|(k, c)| c / (p + k as f64 + 1.0)).sum()
}

pub fn interval(alpha: f64, n: usize, g: f64) -> (Mesh, OperatorPair) {
    let d = make_domain(DomainKind::Interval, alpha).unwrap();
    let mesh = build_mesh(d, n, g).unwrap();
    let ops = assemble(&mesh, alpha).unwrap();
    (mesh, ops)
}

pub fn square(alpha: f64, n: usize, g: f64) -> (Mesh, OperatorPair) {
    let d = make_domain(DomainKind::Square, alpha).unwrap();
    let mesh = build_mesh(d, n, g).unwrap();
    let ops = assemble(&mesh, alpha).unwrap();
    (mesh, ops)
}
