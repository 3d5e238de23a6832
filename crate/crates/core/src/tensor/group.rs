use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use super::OrthogonalMatrix;
use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

/// Closed subgroup of O(3).
#[derive(Clone, Debug)]
pub enum PointGroup {
    /// Explicit element list, closed under products.
    Finite(Vec<OrthogonalMatrix>),
    /// All proper rotations.
    SO3,
    /// Rotations about a unit axis.
    SO2 { axis: [f64; 3] },
}

/// Group element with its Haar quadrature weight. Weights sum to one.
#[derive(Clone, Copy, Debug)]
pub struct WeightedElement {
    pub q: OrthogonalMatrix,
    pub weight: f64,
}

/// Equispaced rotations used for the SO(2) trapezoid rule.
pub const SO2_POINTS: usize = 64;
/// Trapezoid points per Euler angle α, γ in the SO(3) rule.
const SO3_AZIMUTH_POINTS: usize = 16;
/// Gauss-Legendre points in cos β in the SO(3) rule.
const SO3_POLAR_POINTS: usize = 8;

impl PointGroup {
    /// The 48-element full octahedral group, closure of its three generators.
    pub fn octahedral() -> Self {
        let generators = [
            Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0),
            Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0),
            Matrix3::new(0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0),
        ];
        PointGroup::Finite(closure(&generators))
    }

    /// The eight reflections `diag(±1, ±1, ±1)`.
    pub fn orthotropic() -> Self {
        let mut els = Vec::with_capacity(8);
        for s in 0..8u32 {
            let sign = |b: u32| if s & (1 << b) == 0 { 1.0 } else { -1.0 };
            els.push(OrthogonalMatrix(Matrix3::from_diagonal(&Vector3::new(
                sign(0),
                sign(1),
                sign(2),
            ))));
        }
        PointGroup::Finite(els)
    }

    pub fn trivial() -> Self {
        PointGroup::Finite(vec![OrthogonalMatrix::identity()])
    }

    /// Validates a finite element list: identity, closure and inverses to 1e-10.
    pub fn finite(elements: Vec<OrthogonalMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::validation("point group has no elements"));
        }
        let contains = |m: &Matrix3<f64>| elements.iter().any(|e| (e.0 - m).abs().max() < 1e-10);
        if !contains(&Matrix3::identity()) {
            return Err(Error::validation("point group does not contain the identity"));
        }
        for a in &elements {
            if !contains(&a.0.transpose()) {
                return Err(Error::validation("point group is missing an inverse"));
            }
            for b in &elements {
                if !contains(&(a.0 * b.0)) {
                    return Err(Error::validation("point group is not closed under products"));
                }
            }
        }
        Ok(PointGroup::Finite(elements))
    }

    pub fn so2(axis: [f64; 3]) -> Result<Self> {
        let n = Vector3::from(axis).norm();
        if !((n - 1.0).abs() <= 1e-12) {
            return Err(Error::validation(format!("SO(2) axis must be a unit vector (norm {n})")));
        }
        Ok(PointGroup::SO2 { axis })
    }

    /// Conjugates every element by `r`: `Q ↦ rᵀ Q r`.
    pub fn conjugate(&self, r: &OrthogonalMatrix) -> Self {
        match self {
            PointGroup::Finite(els) => PointGroup::Finite(
                els.iter().map(|q| r.transpose().compose(q).compose(r)).collect(),
            ),
            PointGroup::SO3 => PointGroup::SO3,
            PointGroup::SO2 { axis } => {
                let a = r.0.transpose() * Vector3::from(*axis);
                PointGroup::SO2 { axis: [a[0], a[1], a[2]] }
            }
        }
    }

    pub fn len(&self) -> Option<usize> {
        match self {
            PointGroup::Finite(els) => Some(els.len()),
            _ => None,
        }
    }

    /// Quadrature nodes for the normalized Haar measure.
    ///
    /// Exact for finite groups. The SO(2) rule integrates trigonometric
    /// polynomials of degree below 64 exactly; the SO(3) rule is exact for
    /// matrix-entry polynomials of degree up to 4, which covers `act2` and `act4`.
    pub fn quadrature(&self) -> Result<Vec<WeightedElement>> {
        match self {
            PointGroup::Finite(els) => {
                if els.is_empty() {
                    return Err(Error::validation("point group has no elements"));
                }
                let w = 1.0 / els.len() as f64;
                Ok(els.iter().map(|&q| WeightedElement { q, weight: w }).collect())
            }
            PointGroup::SO2 { axis } => {
                let a = Vector3::from(*axis);
                let w = 1.0 / SO2_POINTS as f64;
                (0..SO2_POINTS)
                    .map(|k| {
                        let q = OrthogonalMatrix::rotation(&a, 2.0 * PI * k as f64 / SO2_POINTS as f64)?;
                        Ok(WeightedElement { q, weight: w })
                    })
                    .collect()
            }
            PointGroup::SO3 => {
                let (u, wu) = gauss_legendre(SO3_POLAR_POINTS);
                let na = SO3_AZIMUTH_POINTS;
                let mut out = Vec::with_capacity(na * na * u.len());
                for (ui, wi) in u.iter().zip(&wu) {
                    let beta = ui.acos();
                    let ry = OrthogonalMatrix::rotation(&Vector3::y(), beta)?;
                    for ia in 0..na {
                        let rza = OrthogonalMatrix::rotation(&Vector3::z(), 2.0 * PI * ia as f64 / na as f64)?;
                        for ig in 0..na {
                            let rzg = OrthogonalMatrix::rotation(&Vector3::z(), 2.0 * PI * ig as f64 / na as f64)?;
                            out.push(WeightedElement {
                                q: rza.compose(&ry).compose(&rzg),
                                weight: 0.5 * wi / (na * na) as f64,
                            });
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

fn closure(generators: &[Matrix3<f64>]) -> Vec<OrthogonalMatrix> {
    let mut els: Vec<Matrix3<f64>> = vec![Matrix3::identity()];
    let mut frontier = els.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for a in &frontier {
            for g in generators {
                let p = a * g;
                // generators are signed permutations, so products are exact
                if !els.iter().any(|e| (e - p).abs().max() < 1e-12) {
                    els.push(p);
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    els.into_iter().map(OrthogonalMatrix).collect()
}
