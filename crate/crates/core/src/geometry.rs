//! Domains, their boundary partition and the truncated family Ω_δ.
//!
//! Two geometries are supported: the unit interval (N = 1) and the unit
//! square (N = 2). The last coordinate is always the degenerate direction x_N,
//! with diffusion matrix `A = diag(1, …, 1, x_N^α)`.

use crate::error::{Error, Result};

pub const DEFAULT_DELTA0: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Interval,
    Square,
}

impl DomainKind {
    pub fn dimension(self) -> usize {
        match self {
            DomainKind::Interval => 1,
            DomainKind::Square => 2,
        }
    }
}

/// Part of ∂Ω a boundary point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryPart {
    /// Γ_N⁰, where x_N = 0 and the diffusion weight vanishes.
    Degenerate,
    /// Γ⁺, where the weighted normal has a positive e_N component.
    GammaPlus,
    /// Everything else.
    Lateral,
}

/// Classifies a boundary point from its outward normal.
///
/// `(A ν)·e_N = x_N^α ν_N`; a positive value puts the point on Γ⁺. Points with
/// x_N = 0 are degenerate, the rest lateral. Corners (where the normal is
/// undefined) should be passed with `normal = None`: they go to the degenerate
/// part when x_N = 0 and to the lateral part otherwise.
pub fn classify_boundary_point(alpha: f64, point: &[f64], normal: Option<&[f64]>) -> BoundaryPart {
    let xn = *point.last().expect("non-empty point");
    if let Some(nu) = normal {
        let weighted = xn.max(0.0).powf(alpha) * nu.last().copied().unwrap_or(0.0);
        if weighted > 0.0 {
            return BoundaryPart::GammaPlus;
        }
    }
    if xn == 0.0 {
        BoundaryPart::Degenerate
    } else {
        BoundaryPart::Lateral
    }
}

/// The continuous problem description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    kind: DomainKind,
    alpha: f64,
    delta0: f64,
}

impl DomainSpec {
    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    pub fn with_delta0(mut self, delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0 && 3.0 * delta0 < 1.0) {
            return Err(Error::param("delta0", format!("{delta0} must lie in (0, 1/3)")));
        }
        self.delta0 = delta0;
        Ok(self)
    }

    /// `M = sup_{x∈Ω} |x| + 1`.
    pub fn bound_m(&self) -> f64 {
        (self.dimension() as f64).sqrt() + 1.0
    }

    /// The whole domain as a slab.
    pub fn region(&self) -> Slab {
        Slab { dimension: self.dimension(), xn_lower: 0.0, xn_upper: 1.0 }
    }

    /// Classifies a point of ∂Ω.
    pub fn boundary_part(&self, point: &[f64]) -> Option<BoundaryPart> {
        assert_eq!(point.len(), self.dimension());
        let on = |v: f64| v == 0.0 || v == 1.0;
        if !point.iter().all(|&v| (0.0..=1.0).contains(&v)) || !point.iter().any(|&v| on(v)) {
            return None;
        }
        let normal = outward_normal(point);
        Some(classify_boundary_point(self.alpha, point, normal.as_deref()))
    }

    /// Γ⁺ as the set {x_N = 1} (the top edge, or the point x = 1).
    pub fn gamma_plus_xn(&self) -> f64 {
        1.0
    }
}

/// Outward unit normal of the unit cube at a boundary point; `None` at corners.
fn outward_normal(point: &[f64]) -> Option<Vec<f64>> {
    let mut normal = vec![0.0; point.len()];
    let mut faces = 0;
    for (k, &v) in point.iter().enumerate() {
        if v == 0.0 {
            normal[k] = -1.0;
            faces += 1;
        } else if v == 1.0 {
            normal[k] = 1.0;
            faces += 1;
        }
    }
    (faces == 1).then_some(normal)
}

/// Builds a domain with its boundary partition.
pub fn make_domain(kind: DomainKind, alpha: f64) -> Result<DomainSpec> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} is outside the open interval (0, 1)")));
    }
    Ok(DomainSpec { kind, alpha, delta0: DEFAULT_DELTA0 })
}

/// `(0,1)^{N−1} × (xn_lower, xn_upper)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slab {
    pub dimension: usize,
    pub xn_lower: f64,
    pub xn_upper: f64,
}

impl Slab {
    pub fn contains(&self, point: &[f64]) -> bool {
        let (xn, rest) = point.split_last().expect("non-empty point");
        rest.iter().all(|&v| v > 0.0 && v < 1.0) && *xn > self.xn_lower && *xn < self.xn_upper
    }

    /// Set inclusion `self ⊆ other`.
    pub fn is_subset_of(&self, other: &Slab) -> bool {
        self.dimension == other.dimension
            && self.xn_lower >= other.xn_lower
            && self.xn_upper <= other.xn_upper
    }
}

/// Ω_δ = Ω ∩ {x_N > δ}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedDomain {
    parent: DomainSpec,
    delta: f64,
}

impl TruncatedDomain {
    pub fn parent(&self) -> &DomainSpec {
        &self.parent
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn region(&self) -> Slab {
        Slab { dimension: self.parent.dimension(), xn_lower: self.delta, xn_upper: 1.0 }
    }
}

fn check_delta(d: &DomainSpec, delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < d.delta0) {
        return Err(Error::param("delta", format!("{delta} is outside (0, {})", d.delta0)));
    }
    Ok(())
}

pub fn truncate(d: &DomainSpec, delta: f64) -> Result<TruncatedDomain> {
    check_delta(d, delta)?;
    Ok(TruncatedDomain { parent: *d, delta })
}

/// `{x ∈ Ω : dist(x, Γ⁺) < δ}`, the strip below the top edge.
pub fn collar(d: &DomainSpec, delta: f64) -> Result<Slab> {
    check_delta(d, delta)?;
    Ok(Slab { dimension: d.dimension(), xn_lower: 1.0 - delta, xn_upper: 1.0 })
}
