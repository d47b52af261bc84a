//! Tensor-product meshes on the interval, the square and their truncations.
//!
//! Nodes are numbered lexicographically with x₁ fastest: node `(i, j)` (x₁
//! index `i`, x_N index `j`) has index `i + nx·j`. In one dimension `nx = 1`
//! and the index is the x_N index.

use crate::error::{Error, Result};
use crate::geometry::{BoundaryPart, DomainSpec, TruncatedDomain};

/// The region a mesh discretizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshDomain {
    Full(DomainSpec),
    Truncated(TruncatedDomain),
}

impl MeshDomain {
    pub fn spec(&self) -> &DomainSpec {
        match self {
            MeshDomain::Full(d) => d,
            MeshDomain::Truncated(t) => t.parent(),
        }
    }

    /// Lower x_N bound: 0 for the full domain, δ for a truncation.
    pub fn xn_lower(&self) -> f64 {
        match self {
            MeshDomain::Full(_) => 0.0,
            MeshDomain::Truncated(t) => t.delta(),
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match self {
            MeshDomain::Full(_) => None,
            MeshDomain::Truncated(t) => Some(t.delta()),
        }
    }
}

impl From<DomainSpec> for MeshDomain {
    fn from(d: DomainSpec) -> Self {
        MeshDomain::Full(d)
    }
}

impl From<TruncatedDomain> for MeshDomain {
    fn from(t: TruncatedDomain) -> Self {
        MeshDomain::Truncated(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    domain: MeshDomain,
    /// `axes[0]` is x₁ in two dimensions; the last axis is always x_N.
    axes: Vec<Vec<f64>>,
    grading: f64,
    parts: Vec<Option<BoundaryPart>>,
}

/// Builds a tensor mesh with `n` cells per axis.
///
/// The x_N nodes are `offset + span·(j/n)^g`; truncated domains ignore `g` and
/// are meshed uniformly.
pub fn build_mesh(domain: impl Into<MeshDomain>, n: usize, g: f64) -> Result<Mesh> {
    let domain = domain.into();
    if n < 4 {
        return Err(Error::param("n", format!("{n} cells per axis; at least 4 required")));
    }
    if !(g >= 1.0) || !g.is_finite() {
        return Err(Error::param("g", format!("grading {g} must be a finite number ≥ 1")));
    }
    let g = if domain.delta().is_some() { 1.0 } else { g };
    let lower = domain.xn_lower();
    let span = 1.0 - lower;
    let xn: Vec<f64> = (0..=n)
        .map(|j| if j == n { 1.0 } else { lower + span * (j as f64 / n as f64).powf(g) })
        .collect();
    let mut axes = Vec::new();
    if domain.spec().dimension() == 2 {
        axes.push((0..=n).map(|i| i as f64 / n as f64).collect());
    }
    axes.push(xn);
    Ok(Mesh::assemble_parts(domain, axes, g))
}

impl Mesh {
    /// Mesh from explicit axis coordinates.
    ///
    /// Each axis must be strictly increasing, end at 1 and start at 0 (x₁) or at
    /// the domain's lower x_N bound.
    pub fn from_axes(domain: impl Into<MeshDomain>, axes: Vec<Vec<f64>>) -> Result<Mesh> {
        let domain = domain.into();
        let dim = domain.spec().dimension();
        if axes.len() != dim {
            return Err(Error::param("axes", format!("{} axes for a {dim}-dimensional domain", axes.len())));
        }
        for (k, axis) in axes.iter().enumerate() {
            let lower = if k + 1 == dim { domain.xn_lower() } else { 0.0 };
            if axis.len() < 2 || axis[0] != lower || *axis.last().unwrap() != 1.0 {
                return Err(Error::param("axes", format!("axis {k} must run from {lower} to 1")));
            }
            if axis.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::param("axes", format!("axis {k} is not strictly increasing")));
            }
        }
        Ok(Mesh::assemble_parts(domain, axes, f64::NAN))
    }

    fn assemble_parts(domain: MeshDomain, axes: Vec<Vec<f64>>, grading: f64) -> Mesh {
        let dim = axes.len();
        let nx = if dim == 2 { axes[0].len() } else { 1 };
        let ny = axes[dim - 1].len();
        let full = domain.delta().is_none();
        let mut parts = vec![None; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let side = dim == 2 && (i == 0 || i == nx - 1);
                let part = if j == 0 {
                    Some(if full { BoundaryPart::Degenerate } else { BoundaryPart::Lateral })
                } else if j == ny - 1 {
                    Some(if side { BoundaryPart::Lateral } else { BoundaryPart::GammaPlus })
                } else if side {
                    Some(BoundaryPart::Lateral)
                } else {
                    None
                };
                parts[i + nx * j] = part;
            }
        }
        Mesh { domain, axes, grading, parts }
    }

    pub fn domain(&self) -> &MeshDomain {
        &self.domain
    }

    pub fn spec(&self) -> &DomainSpec {
        self.domain.spec()
    }

    pub fn alpha(&self) -> f64 {
        self.spec().alpha()
    }

    pub fn delta(&self) -> Option<f64> {
        self.domain.delta()
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    /// Grading exponent; NaN for meshes built from explicit axes.
    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// The x₁ axis; `None` in one dimension.
    pub fn x1_axis(&self) -> Option<&[f64]> {
        (self.dimension() == 2).then(|| self.axes[0].as_slice())
    }

    pub fn xn_axis(&self) -> &[f64] {
        self.axes.last().unwrap()
    }

    /// Nodes per row along x₁ (1 in one dimension).
    pub fn nx(&self) -> usize {
        if self.dimension() == 2 {
            self.axes[0].len()
        } else {
            1
        }
    }

    /// Nodes along x_N.
    pub fn ny(&self) -> usize {
        self.xn_axis().len()
    }

    pub fn num_nodes(&self) -> usize {
        self.parts.len()
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.nx() * j
    }

    /// `(x₁ index, x_N index)` of a node.
    pub fn split_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let (i, j) = self.split_index(idx);
        if self.dimension() == 2 {
            vec![self.axes[0][i], self.xn_axis()[j]]
        } else {
            vec![self.xn_axis()[j]]
        }
    }

    pub fn boundary_part(&self, idx: usize) -> Option<BoundaryPart> {
        self.parts[idx]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.parts[idx].is_some()
    }

    /// Interior node indices in increasing order.
    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&k| self.parts[k].is_none()).collect()
    }

    /// Boundary nodes of one part in increasing order.
    pub fn boundary_nodes(&self, part: BoundaryPart) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&k| self.parts[k] == Some(part)).collect()
    }

    /// Smallest cell width along x_N.
    pub fn h_min(&self) -> f64 {
        self.xn_axis().windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Largest cell width over all axes.
    pub fn h_max(&self) -> f64 {
        self.axes
            .iter()
            .flat_map(|a| a.windows(2).map(|w| w[1] - w[0]))
            .fold(0.0, f64::max)
    }

    /// Nodal interpolant of `f`.
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.num_nodes()).map(|k| f(&self.coords(k))).collect()
    }

    /// Evaluates the P1/Q1 field with nodal values `u` at `point`. Points
    /// outside the mesh's bounding box evaluate to 0.
    pub fn evaluate(&self, u: &[f64], point: &[f64]) -> f64 {
        assert_eq!(u.len(), self.num_nodes());
        let mut weights = [[0usize; 2]; 2];
        let mut t = [0.0; 2];
        for (k, axis) in self.axes.iter().enumerate() {
            match locate(axis, point[k]) {
                Some((c, s)) => {
                    weights[k] = [c, c + 1];
                    t[k] = s;
                }
                None => return 0.0,
            }
        }
        if self.dimension() == 1 {
            let [a, b] = weights[0];
            return (1.0 - t[0]) * u[a] + t[0] * u[b];
        }
        let [i0, i1] = weights[0];
        let [j0, j1] = weights[1];
        let (s, r) = (t[0], t[1]);
        (1.0 - s) * (1.0 - r) * u[self.index(i0, j0)]
            + s * (1.0 - r) * u[self.index(i1, j0)]
            + (1.0 - s) * r * u[self.index(i0, j1)]
            + s * r * u[self.index(i1, j1)]
    }

    /// Mesh of Ω_δ made of this mesh's nodes with x_N ≥ δ. `δ` must be a node
    /// of the x_N axis (up to 1e-12).
    pub fn submesh(&self, delta: f64) -> Result<Mesh> {
        let truncated = crate::geometry::truncate(self.spec(), delta)?;
        let xn = self.xn_axis();
        let start = xn
            .iter()
            .position(|&x| (x - delta).abs() <= 1e-12)
            .ok_or_else(|| Error::ContractViolation(format!("δ = {delta} is not a node of the x_N axis")))?;
        let mut axes = self.axes.clone();
        let last = axes.len() - 1;
        axes[last] = std::iter::once(delta).chain(xn[start + 1..].iter().copied()).collect();
        let mut mesh = Mesh::from_axes(truncated, axes)?;
        if self.delta().is_none() && self.grading == 1.0 {
            mesh.grading = 1.0;
        }
        Ok(mesh)
    }

    /// For every node of `self`, the index of the coincident node of `other`
    /// (coordinates equal to 1e-12).
    pub fn node_map_into(&self, other: &Mesh) -> Result<Vec<usize>> {
        if self.dimension() != other.dimension() {
            return Err(Error::ContractViolation("meshes of different dimension".into()));
        }
        let axis_maps: Vec<Vec<usize>> = self
            .axes
            .iter()
            .zip(&other.axes)
            .map(|(a, b)| {
                a.iter()
                    .map(|&x| {
                        let k = b.partition_point(|&y| y < x - 1e-12);
                        if k < b.len() && (b[k] - x).abs() <= 1e-12 {
                            Ok(k)
                        } else {
                            Err(Error::ContractViolation(format!("node {x} has no counterpart in the target mesh")))
                        }
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok((0..self.num_nodes())
            .map(|k| {
                let (i, j) = self.split_index(k);
                if self.dimension() == 2 {
                    other.index(axis_maps[0][i], axis_maps[1][j])
                } else {
                    axis_maps[0][j]
                }
            })
            .collect())
    }
}

/// Cell index `c` with `axis[c] ≤ x ≤ axis[c+1]` and the local coordinate.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let (first, last) = (axis[0], *axis.last().unwrap());
    if x < first || x > last {
        return None;
    }
    let c = axis.partition_point(|&y| y <= x).saturating_sub(1).min(axis.len() - 2);
    Some((c, (x - axis[c]) / (axis[c + 1] - axis[c])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_domain, truncate, DomainKind};

    #[test]
    fn node_formula() {
        let d = make_domain(DomainKind::Interval, 0.5).unwrap();
        let m = build_mesh(d, 4, 1.0).unwrap();
        assert_eq!(m.xn_axis(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let m = build_mesh(d, 4, 2.0).unwrap();
        assert_eq!(m.xn_axis(), &[0.0, 0.0625, 0.25, 0.5625, 1.0]);
        assert!(build_mesh(d, 3, 1.0).is_err());
        assert!(build_mesh(d, 8, 0.5).is_err());
    }

    #[test]
    fn truncated_square_is_uniform() {
        let d = make_domain(DomainKind::Square, 0.5).unwrap();
        let m = build_mesh(truncate(&d, 0.2).unwrap(), 4, 3.0).unwrap();
        let expected = [0.2, 0.4, 0.6, 0.8, 1.0];
        for (a, b) in m.xn_axis().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(m.grading(), 1.0);
        assert_eq!(m.num_nodes(), 25);
    }

    #[test]
    fn boundary_sets_partition() {
        let d = make_domain(DomainKind::Square, 0.5).unwrap();
        let m = build_mesh(d, 6, 2.0).unwrap();
        let deg = m.boundary_nodes(BoundaryPart::Degenerate);
        let top = m.boundary_nodes(BoundaryPart::GammaPlus);
        let lat = m.boundary_nodes(BoundaryPart::Lateral);
        assert_eq!(deg.len(), 7);
        assert_eq!(top.len(), 5);
        assert_eq!(lat.len(), 12);
        assert_eq!(deg.len() + top.len() + lat.len() + m.interior_nodes().len(), 49);
        for &k in &top {
            assert_eq!(m.coords(k)[1], 1.0);
        }
        // the node sets agree with the continuous classification
        for k in 0..m.num_nodes() {
            assert_eq!(m.boundary_part(k), d.boundary_part(&m.coords(k)));
        }
    }

    #[test]
    fn submesh_is_nested() {
        let d = make_domain(DomainKind::Square, 0.5).unwrap();
        let full = build_mesh(d, 20, 1.0).unwrap();
        let sub = full.submesh(0.1).unwrap();
        assert_eq!(sub.xn_axis()[0], 0.1);
        let map = sub.node_map_into(&full).unwrap();
        for (k, &f) in map.iter().enumerate() {
            assert_eq!(sub.coords(k), full.coords(f));
        }
        assert!(full.submesh(0.125).is_err());
        // Γ⁺ node sets coincide
        let top_sub: Vec<_> = sub.boundary_nodes(BoundaryPart::GammaPlus).iter().map(|&k| map[k]).collect();
        assert_eq!(top_sub, full.boundary_nodes(BoundaryPart::GammaPlus));
    }

    #[test]
    fn bilinear_evaluation_reproduces_bilinear_functions() {
        let d = make_domain(DomainKind::Square, 0.5).unwrap();
        let m = build_mesh(d, 5, 2.0).unwrap();
        let f = |p: &[f64]| 1.0 + 2.0 * p[0] - p[1] + 3.0 * p[0] * p[1];
        let u = m.interpolate(f);
        for p in [[0.13, 0.77], [0.0, 0.0], [1.0, 1.0], [0.5, 0.01]] {
            assert!((m.evaluate(&u, &p) - f(&p)).abs() < 1e-14);
        }
        assert_eq!(m.evaluate(&u, &[0.5, 1.5]), 0.0);
    }
}
