//! Assembly of the weighted stiffness, mass and singular-weight matrices.
//!
//! On a tensor mesh every form factorizes into one-dimensional element
//! matrices: the stiffness is `K₁ ⊗ M_N + M₁ ⊗ K_N^α` with the x_N factor
//! carrying the weight x_N^α, integrated exactly per cell.

use super::mesh::Mesh;
use super::quadrature::{pow_integral, weighted_moments};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

type Elem = [[f64; 2]; 2];

fn mass_elem(a: f64, b: f64) -> Elem {
    let h = b - a;
    [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]]
}

fn stiff_elem(a: f64, b: f64, weight_integral: f64) -> Elem {
    let h = b - a;
    let c = weight_integral / (h * h);
    [[c, -c], [-c, c]]
}

/// Assembles `Σ_cells A₁(cell) ⊗ A_N(cell)` (or `A_N` alone in 1D) over all
/// mesh nodes. Each entry of `terms` is a pair of element-matrix generators for
/// the x₁ and x_N factors.
fn assemble_tensor(mesh: &Mesh, terms: &[(&dyn Fn(f64, f64) -> Elem, &dyn Fn(f64, f64) -> Elem)]) -> CsrMatrix {
    let xn = mesh.xn_axis();
    let mut triplets = Vec::new();
    match mesh.x1_axis() {
        None => {
            for c in 0..xn.len() - 1 {
                let (a, b) = (xn[c], xn[c + 1]);
                let mut e = [[0.0; 2]; 2];
                for (_, fy) in terms {
                    let ey = fy(a, b);
                    for r in 0..2 {
                        for s in 0..2 {
                            e[r][s] += ey[r][s];
                        }
                    }
                }
                for r in 0..2 {
                    for s in 0..2 {
                        triplets.push((c + r, c + s, e[r][s]));
                    }
                }
            }
        }
        Some(x1) => {
            let ny_cells = xn.len() - 1;
            let nx_cells = x1.len() - 1;
            let ys: Vec<Vec<Elem>> =
                terms.iter().map(|(_, fy)| (0..ny_cells).map(|c| fy(xn[c], xn[c + 1])).collect()).collect();
            let xs: Vec<Vec<Elem>> =
                terms.iter().map(|(fx, _)| (0..nx_cells).map(|c| fx(x1[c], x1[c + 1])).collect()).collect();
            for cj in 0..ny_cells {
                for ci in 0..nx_cells {
                    let nodes = [
                        mesh.index(ci, cj),
                        mesh.index(ci + 1, cj),
                        mesh.index(ci, cj + 1),
                        mesh.index(ci + 1, cj + 1),
                    ];
                    for (lr, &gr) in nodes.iter().enumerate() {
                        for (ls, &gs) in nodes.iter().enumerate() {
                            let (ir, jr) = (lr % 2, lr / 2);
                            let (is, js) = (ls % 2, ls / 2);
                            let v: f64 = (0..terms.len()).map(|t| xs[t][ci][ir][is] * ys[t][cj][jr][js]).sum();
                            triplets.push((gr, gs, v));
                        }
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_nodes(), &triplets)
}

/// `∫ x_N^p u v dx` on the whole mesh (no boundary elimination).
///
/// For `p ≤ −1` the rows of nodes on `x_N = 0` are meaningless and only valid
/// against vectors vanishing there.
pub fn weighted_mass(mesh: &Mesh, p: f64) -> CsrMatrix {
    assemble_tensor(mesh, &[(&mass_elem, &|a, b| weighted_moments(a, b, p))])
}

/// The discrete pair (K, M) with Dirichlet conditions on all of ∂Ω.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    alpha: f64,
    stiffness_full: CsrMatrix,
    stiffness_normal_full: CsrMatrix,
    mass_full: CsrMatrix,
    hardy_full: CsrMatrix,
    interior: Vec<usize>,
    position: Vec<Option<usize>>,
    k: CsrMatrix,
    m: CsrMatrix,
}

/// Assembles the weighted operators of `mesh` for the exponent `alpha`.
pub fn assemble(mesh: &Mesh, alpha: f64) -> Result<OperatorPair> {
    if alpha != mesh.alpha() {
        return Err(Error::param("alpha", format!("{alpha} does not match the mesh's domain (α = {})", mesh.alpha())));
    }
    let weighted_stiff = |a: f64, b: f64| stiff_elem(a, b, pow_integral(a, b, alpha));
    let plain_stiff = |a: f64, b: f64| stiff_elem(a, b, b - a);
    let normal = assemble_tensor(mesh, &[(&mass_elem, &weighted_stiff)]);
    let stiffness_full = if mesh.dimension() == 2 {
        assemble_tensor(mesh, &[(&plain_stiff, &mass_elem), (&mass_elem, &weighted_stiff)])
    } else {
        normal.clone()
    };
    let mass_full = assemble_tensor(mesh, &[(&mass_elem, &mass_elem)]);
    let hardy_full = weighted_mass(mesh, alpha - 2.0);
    let interior = mesh.interior_nodes();
    let mut position = vec![None; mesh.num_nodes()];
    for (k, &i) in interior.iter().enumerate() {
        position[i] = Some(k);
    }
    let k = stiffness_full.restrict(&interior);
    let m = mass_full.restrict(&interior);
    Ok(OperatorPair {
        alpha,
        stiffness_full,
        stiffness_normal_full: normal,
        mass_full,
        hardy_full,
        interior,
        position,
        k,
        m,
    })
}

impl OperatorPair {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Stiffness on interior degrees of freedom.
    pub fn k(&self) -> &CsrMatrix {
        &self.k
    }

    /// Mass on interior degrees of freedom.
    pub fn m(&self) -> &CsrMatrix {
        &self.m
    }

    /// Unconstrained stiffness over all nodes.
    pub fn stiffness_full(&self) -> &CsrMatrix {
        &self.stiffness_full
    }

    /// Unconstrained `∫ x_N^α ∂_N u ∂_N v`.
    pub fn stiffness_normal_full(&self) -> &CsrMatrix {
        &self.stiffness_normal_full
    }

    pub fn mass_full(&self) -> &CsrMatrix {
        &self.mass_full
    }

    /// `∫ x_N^{α−2} u v`, valid for vectors vanishing on x_N = 0.
    pub fn hardy_full(&self) -> &CsrMatrix {
        &self.hardy_full
    }

    /// Interior node indices; DOF `k` is node `interior()[k]`.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn num_nodes(&self) -> usize {
        self.position.len()
    }

    pub fn num_dofs(&self) -> usize {
        self.interior.len()
    }

    /// DOF index of a node, `None` on the boundary.
    pub fn dof(&self, node: usize) -> Option<usize> {
        self.position[node]
    }

    /// Interior values of a nodal vector.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.num_nodes());
        self.interior.iter().map(|&i| u[i]).collect()
    }

    /// Nodal vector with the given interior values and zero boundary values.
    pub fn prolong(&self, dofs: &[f64]) -> Vec<f64> {
        assert_eq!(dofs.len(), self.num_dofs());
        let mut u = vec![0.0; self.num_nodes()];
        for (&i, &v) in self.interior.iter().zip(dofs) {
            u[i] = v;
        }
        u
    }

    /// Row sums of the full mass matrix.
    pub fn lumped_mass(&self) -> Vec<f64> {
        (0..self.num_nodes()).map(|i| self.mass_full.row(i).map(|(_, v)| v).sum()).collect()
    }

    /// Checks that `u` vanishes on every boundary node.
    pub fn check_admissible(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.num_nodes() {
            return Err(Error::ContractViolation(format!(
                "vector of length {} on a mesh with {} nodes",
                u.len(),
                self.num_nodes()
            )));
        }
        for (i, (&v, p)) in u.iter().zip(&self.position).enumerate() {
            if p.is_none() && v != 0.0 {
                return Err(Error::ContractViolation(format!("boundary node {i} carries the value {v:e}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::mesh::build_mesh;
    use crate::geometry::{make_domain, DomainKind};
    use crate::linalg::BandCholesky;

    #[test]
    fn classical_limit_stencil() {
        let alpha = 1e-12;
        let d = make_domain(DomainKind::Interval, alpha).unwrap();
        let n = 16;
        let mesh = build_mesh(d, n, 1.0).unwrap();
        let ops = assemble(&mesh, alpha).unwrap();
        let h = 1.0 / n as f64;
        for i in 0..ops.num_dofs() {
            assert!((ops.k().get(i, i) - 2.0 / h).abs() < 1e-9);
            if i + 1 < ops.num_dofs() {
                assert!((ops.k().get(i, i + 1) + 1.0 / h).abs() < 1e-9);
            }
            assert!((ops.m().get(i, i) - 2.0 * h / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn first_cell_entry_is_exact() {
        let alpha = 0.5;
        let d = make_domain(DomainKind::Interval, alpha).unwrap();
        let mesh = build_mesh(d, 64, 2.0).unwrap();
        let ops = assemble(&mesh, alpha).unwrap();
        let h = mesh.xn_axis()[1];
        let expected = h.powf(alpha - 1.0) / (alpha + 1.0);
        let k = ops.stiffness_full();
        assert!((k.get(0, 0) - expected).abs() / expected < 1e-13);
        assert!((k.get(0, 1) + expected).abs() / expected < 1e-13);
    }

    #[test]
    fn square_operators_are_symmetric_and_definite() {
        let alpha = 0.5;
        let d = make_domain(DomainKind::Square, alpha).unwrap();
        let mesh = build_mesh(d, 12, 2.0).unwrap();
        let ops = assemble(&mesh, alpha).unwrap();
        for a in [ops.k(), ops.m(), ops.stiffness_full(), ops.mass_full()] {
            assert!(a.symmetry_defect() < 1e-14);
        }
        assert!(BandCholesky::factor(ops.k()).is_ok());
        assert!(BandCholesky::factor(ops.m()).is_ok());
        // total mass of the square
        let ones = vec![1.0; mesh.num_nodes()];
        assert!((ops.mass_full().quad_form(&ones) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_kills_constants_and_matches_exact_energy() {
        let alpha = 0.3;
        let d = make_domain(DomainKind::Square, alpha).unwrap();
        let mesh = build_mesh(d, 8, 2.0).unwrap();
        let ops = assemble(&mesh, alpha).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        assert!(ops.stiffness_full().mul_vec(&ones).iter().all(|v| v.abs() < 1e-12));
        // u = x₁ + x₂ is bilinear, so the discrete energy is exact:
        // ∫ 1 + x₂^α = 1 + 1/(1+α)
        let u = mesh.interpolate(|p| p[0] + p[1]);
        let e = ops.stiffness_full().quad_form(&u);
        assert!((e - (1.0 + 1.0 / (1.0 + alpha))).abs() < 1e-13);
        let en = ops.stiffness_normal_full().quad_form(&u);
        assert!((en - 1.0 / (1.0 + alpha)).abs() < 1e-13);
    }

    #[test]
    fn alpha_mismatch_is_rejected() {
        let d = make_domain(DomainKind::Interval, 0.5).unwrap();
        let mesh = build_mesh(d, 8, 1.0).unwrap();
        assert!(assemble(&mesh, 0.4).is_err());
    }
}
