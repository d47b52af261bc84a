//! Generalized eigenpairs `K Φ = λ M Φ` of the weighted operator.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::discretize::OperatorPair;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, BandCholesky, CsrMatrix};
use crate::rng::UniformStream;

/// Problems with at most this many DOFs are solved densely.
const DENSE_LIMIT: usize = 400;
const MAX_ITERATIONS: usize = 2000;
const RESIDUAL_TOL: f64 = 1e-11;
const START_SEED: u64 = 0x5EED_0F_E16E;

/// The first `count` eigenpairs, ascending, mass-orthonormal.
#[derive(Debug, Clone)]
pub struct Spectrum {
    values: Vec<f64>,
    /// Nodal vectors (zero on the boundary).
    vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    pub fn count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, n: usize) -> f64 {
        self.values[n]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn vector(&self, n: usize) -> &[f64] {
        &self.vectors[n]
    }

    /// Keeps the first `k` pairs.
    pub fn truncated(&self, k: usize) -> Spectrum {
        Spectrum { values: self.values[..k].to_vec(), vectors: self.vectors[..k].to_vec() }
    }

    /// `Σ c_i Φ_i`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        assert!(coeffs.len() <= self.count());
        let mut u = vec![0.0; self.vectors[0].len()];
        for (c, phi) in coeffs.iter().zip(&self.vectors) {
            axpy(*c, phi, &mut u);
        }
        u
    }
}

/// Computes the `k` smallest eigenpairs of `(K, M)` on interior DOFs.
///
/// Each eigenvector is scaled so that its entry of largest magnitude is
/// positive.
pub fn compute_spectrum(ops: &OperatorPair, k: usize) -> Result<Spectrum> {
    let n = ops.num_dofs();
    if k == 0 || k > n {
        return Err(Error::param("k", format!("{k} eigenpairs requested from {n} degrees of freedom")));
    }
    let (values, vectors) = if n <= DENSE_LIMIT || 3 * k > n {
        dense_pairs(ops.k(), ops.m(), k)?
    } else {
        subspace_pairs(ops.k(), ops.m(), k)?
    };
    let mut pairs: Vec<(f64, Vec<f64>)> = values
        .into_iter()
        .zip(vectors)
        .map(|(lambda, mut v)| {
            let norm = ops.m().quad_form(&v).sqrt();
            v.iter_mut().for_each(|x| *x /= norm);
            fix_sign(&mut v);
            (lambda, v)
        })
        .collect();
    pairs.sort_by(|a, b| {
        if (a.0 - b.0).abs() <= 1e-12 * a.0.abs().max(b.0.abs()) {
            a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
        } else {
            a.0.total_cmp(&b.0)
        }
    });
    let (values, vectors) = pairs.into_iter().map(|(l, v)| (l, ops.prolong(&v))).unzip();
    Ok(Spectrum { values, vectors })
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn to_dense(a: &CsrMatrix) -> DMatrix<f64> {
    let n = a.dim();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        for (j, v) in a.row(i) {
            d[(i, j)] = v;
        }
    }
    d
}

/// Dense route through the Cholesky factor of K: with `K = L Lᵀ` the pencil
/// becomes the standard problem `L⁻¹ M L⁻ᵀ w = λ⁻¹ w`, whose largest
/// eigenvalues are the ones wanted and are resolved to full relative
/// accuracy even on strongly graded meshes.
fn dense_pairs(k_mat: &CsrMatrix, m_mat: &CsrMatrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let kd = to_dense(k_mat);
    let md = to_dense(m_mat);
    let chol = kd.cholesky().ok_or(Error::NotPositiveDefinite { pivot: 0, value: f64::NAN })?;
    let l = chol.l();
    let a = l.solve_lower_triangular(&md).expect("triangular factor is nonsingular");
    let c = l.solve_lower_triangular(&a.transpose()).expect("triangular factor is nonsingular");
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let lt = l.transpose();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for &i in order.iter().take(k) {
        let mu = eig.eigenvalues[i];
        if !(mu > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: i, value: mu });
        }
        let w = eig.eigenvectors.column(i).into_owned();
        let phi = lt.solve_upper_triangular(&w).expect("triangular factor is nonsingular");
        values.push(1.0 / mu);
        vectors.push(phi.iter().copied().collect());
    }
    Ok((values, vectors))
}

/// M-orthonormalizes `cols` in place (two passes of modified Gram–Schmidt).
/// Columns that collapse are replaced by fresh random vectors.
fn m_orthonormalize(cols: &mut [Vec<f64>], m: &CsrMatrix, stream: &mut UniformStream) {
    let mut mcols: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
    for j in 0..cols.len() {
        let mut attempts = 0;
        loop {
            let initial = m.quad_form(&cols[j]).sqrt();
            for _ in 0..2 {
                for (i, mi) in mcols.iter().enumerate() {
                    let r = dot(mi, &cols[j]);
                    let (head, tail) = cols.split_at_mut(j);
                    axpy(-r, &head[i], &mut tail[0]);
                }
            }
            let norm = m.quad_form(&cols[j]).sqrt();
            if norm > 1e-10 * initial && norm > 0.0 {
                cols[j].iter_mut().for_each(|x| *x /= norm);
                mcols.push(m.mul_vec(&cols[j]));
                break;
            }
            attempts += 1;
            assert!(attempts < 10, "cannot extend an M-orthonormal basis");
            cols[j] = stream.vector(cols[j].len());
        }
    }
}

/// Inverse subspace iteration with Rayleigh–Ritz on an M-orthonormal block.
fn subspace_pairs(k_mat: &CsrMatrix, m_mat: &CsrMatrix, k: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = k_mat.dim();
    let p = n.min((2 * k).max(k + 8));
    let chol = BandCholesky::factor(k_mat)?;
    let mut stream = UniformStream::new(START_SEED);
    let mut x: Vec<Vec<f64>> = (0..p).map(|_| stream.vector(n)).collect();
    m_orthonormalize(&mut x, m_mat, &mut stream);
    let mut ritz: Option<Vec<f64>> = None;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let mut y: Vec<Vec<f64>> = x.iter().map(|xi| chol.solve(&m_mat.mul_vec(xi))).collect();
        if let Some(values) = &ritz {
            residual = (0..k)
                .map(|i| {
                    let mut r = y[i].clone();
                    r.iter_mut().zip(&x[i]).for_each(|(ri, xi)| *ri = values[i] * *ri - xi);
                    m_mat.quad_form(&r).sqrt()
                })
                .fold(0.0, f64::max);
            if residual < RESIDUAL_TOL {
                return Ok((values[..k].to_vec(), x.into_iter().take(k).collect()));
            }
        }
        m_orthonormalize(&mut y, m_mat, &mut stream);
        let ky: Vec<Vec<f64>> = y.iter().map(|yi| k_mat.mul_vec(yi)).collect();
        let mut kr = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..=i {
                let v = 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i]));
                kr[(i, j)] = v;
                kr[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(kr);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        x = order
            .iter()
            .map(|&c| {
                let mut v = vec![0.0; n];
                for (r, yr) in y.iter().enumerate() {
                    axpy(eig.eigenvectors[(r, c)], yr, &mut v);
                }
                v
            })
            .collect();
        ritz = Some(order.iter().map(|&c| eig.eigenvalues[c]).collect());
    }
    Err(Error::EigenNoConvergence { iterations: MAX_ITERATIONS, residual })
}

/// `uᵀKu / uᵀMu` for an admissible nodal vector.
pub fn rayleigh(ops: &OperatorPair, u: &[f64]) -> Result<f64> {
    ops.check_admissible(u)?;
    let den = ops.mass_full().quad_form(u);
    if den == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(ops.stiffness_full().quad_form(u) / den)
}

/// Coefficients `u_i = Φ_iᵀ M u` for `i < count`.
pub fn expand(spectrum: &Spectrum, ops: &OperatorPair, u: &[f64], count: usize) -> Result<Vec<f64>> {
    if count > spectrum.count() {
        return Err(Error::param("count", format!("{count} coefficients from a spectrum of {}", spectrum.count())));
    }
    let mu = ops.mass_full().mul_vec(u);
    Ok(spectrum.vectors[..count].iter().map(|phi| dot(phi, &mu)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, build_mesh};
    use crate::geometry::{make_domain, DomainKind};

    fn ops_1d(alpha: f64, n: usize, g: f64) -> OperatorPair {
        let d = make_domain(DomainKind::Interval, alpha).unwrap();
        assemble(&build_mesh(d, n, g).unwrap(), alpha).unwrap()
    }

    #[test]
    fn dense_and_subspace_agree() {
        let ops = ops_1d(0.5, 300, 2.0);
        let (dv, _) = dense_pairs(ops.k(), ops.m(), 6).unwrap();
        let (sv, svec) = subspace_pairs(ops.k(), ops.m(), 6).unwrap();
        for (a, b) in dv.iter().zip(&sv) {
            assert!((a - b).abs() / a < 1e-11, "{a} vs {b}");
        }
        for (i, v) in svec.iter().enumerate() {
            let kv = ops.k().quad_form(v);
            assert!((kv - sv[i]).abs() / sv[i] < 1e-10);
        }
    }

    #[test]
    fn classical_limit_eigenvalues() {
        let ops = ops_1d(1e-12, 512, 1.0);
        let s = compute_spectrum(&ops, 5).unwrap();
        for (n, lambda) in s.values().iter().enumerate() {
            let exact = ((n + 1) as f64 * std::f64::consts::PI).powi(2);
            assert!((lambda - exact).abs() / exact < 1e-3);
        }
    }

    #[test]
    fn sign_convention_and_rayleigh() {
        let ops = ops_1d(0.5, 64, 2.0);
        let s = compute_spectrum(&ops, 3).unwrap();
        for v in s.vectors() {
            let m = v.iter().cloned().fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
            assert!(m > 0.0);
        }
        let mix: Vec<f64> = s.vector(0).iter().zip(s.vector(1)).map(|(a, b)| a + b).collect();
        let r = rayleigh(&ops, &mix).unwrap();
        assert!((r - 0.5 * (s.value(0) + s.value(1))).abs() / r < 1e-10);
        let c = expand(&s, &ops, s.vector(2), 3).unwrap();
        assert!(c[0].abs() < 1e-10 && c[1].abs() < 1e-10 && (c[2] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn request_bounds() {
        let ops = ops_1d(0.5, 8, 1.0);
        assert!(compute_spectrum(&ops, 0).is_err());
        assert!(compute_spectrum(&ops, 8).is_err());
        assert_eq!(compute_spectrum(&ops, 7).unwrap().count(), 7);
    }
}
