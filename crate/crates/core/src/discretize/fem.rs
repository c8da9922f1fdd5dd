//! Piecewise-linear Galerkin assembly of the Laplace-Beltrami operator.
//!
//! Each flat triangle carries a constant metric. In round mode that metric is
//! the Euclidean one of the triangle plane. In pullback mode it is the metric of
//! the bent Scherk surface at the triangle's centroid, transported to the
//! triangle plane by the rotation taking the plane normal to the centroid
//! direction. Since that rotation is an isometry, a conformal surface metric
//! gives the round stiffness exactly and only rescales the mass.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CsrMatrix, Mesh, ScalarField, SparseCholesky};
use crate::scherk::SphereChart;
use crate::transforms::pulled_geometry_in_chart;
use crate::{Error, Result};

/// Metric used for assembly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MetricMode {
    RoundSphere,
    /// The metric of the bent surface at bending parameter `tau`, pulled back
    /// through the inverse Gauss map.
    SigmaPullback(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MassMode {
    Consistent,
    Lumped,
}

/// Stiffness and mass matrices over all mesh nodes.
#[derive(Clone, Debug)]
pub struct LbSystem {
    pub metric: MetricMode,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
}

impl LbSystem {
    /// Row sums of the mass matrix.
    pub fn lumped_mass(&self) -> Vec<f64> {
        (0..self.mass.nrows).map(|r| self.mass.row(r).map(|(_, v)| v).sum()).collect()
    }

    /// `u^T K v`.
    pub fn energy(&self, u: &[f64], v: &[f64]) -> f64 {
        self.stiffness.matvec(v).iter().zip(u).map(|(a, b)| a * b).sum()
    }

    /// `u^T M v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.matvec(v).iter().zip(u).map(|(a, b)| a * b).sum()
    }
}

fn rotate_onto(m: &Vector3<f64>, c: &Vector3<f64>, x: &Vector3<f64>) -> Vector3<f64> {
    let v = m.cross(c);
    let cos = m.dot(c);
    x + v.cross(x) + v.cross(&v.cross(x)) / (1.0 + cos)
}

struct Element {
    nodes: [usize; 3],
    stiffness: [[f64; 3]; 3],
    area: f64,
}

fn element(mesh: &Mesh, t: usize, metric: MetricMode) -> Result<Element> {
    let tri = mesh.triangles[t];
    let [a, b, c] = tri.map(|v| mesh.nodes[v]);
    let normal = (b - a).cross(&(c - a));
    let twice_area = normal.norm();
    if !(twice_area > 1e-14) {
        return Err(Error::DegenerateTriangle { triangle: t, reason: "zero area".into() });
    }
    let m = normal / twice_area;
    let f1 = (b - a).normalize();
    let f2 = m.cross(&f1);
    let local = [Vector2::zeros(), Vector2::new((b - a).dot(&f1), (b - a).dot(&f2)), Vector2::new((c - a).dot(&f1), (c - a).dot(&f2))];

    let g = match metric {
        MetricMode::RoundSphere => Matrix2::identity(),
        MetricMode::SigmaPullback(tau) => {
            let center = (a + b + c).normalize();
            let e1 = rotate_onto(&m, &center, &f1);
            let e2 = center.cross(&e1);
            let chart = SphereChart { center, e1, e2 };
            pulled_geometry_in_chart(tau, &chart, 0.0)?.g0tau
        }
    };
    let ginv = g.try_inverse().ok_or_else(|| Error::DegenerateTriangle { triangle: t, reason: "singular metric".into() })?;
    let flat_area = 0.5 * twice_area;
    let area = flat_area * g.determinant().sqrt();

    // gradients of the barycentric hat functions in local coordinates
    let d = 2.0 * flat_area;
    let grads: [Vector2<f64>; 3] = std::array::from_fn(|k| {
        let p = local[(k + 1) % 3];
        let q = local[(k + 2) % 3];
        Vector2::new(p.y - q.y, q.x - p.x) / d
    });
    let mut stiffness = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            stiffness[i][j] = area * grads[i].dot(&(ginv * grads[j]));
        }
    }
    Ok(Element { nodes: tri, stiffness, area })
}

/// Assemble stiffness and mass matrices for `-Delta` under the chosen metric.
pub fn assemble_lb(mesh: &Mesh, metric: MetricMode, mass: MassMode) -> Result<LbSystem> {
    let elements: Vec<Element> =
        (0..mesh.triangles.len()).into_par_iter().map(|t| element(mesh, t, metric)).collect::<Result<_>>()?;
    let n = mesh.nodes.len();
    let mut kt = Vec::with_capacity(9 * elements.len());
    let mut mt = Vec::with_capacity(9 * elements.len());
    for e in &elements {
        for i in 0..3 {
            for j in 0..3 {
                kt.push((e.nodes[i], e.nodes[j], e.stiffness[i][j]));
                match mass {
                    MassMode::Consistent => {
                        let w = if i == j { e.area / 6.0 } else { e.area / 12.0 };
                        mt.push((e.nodes[i], e.nodes[j], w));
                    }
                    MassMode::Lumped => {
                        if i == j {
                            mt.push((e.nodes[i], e.nodes[i], e.area / 3.0));
                        }
                    }
                }
            }
        }
    }
    Ok(LbSystem {
        metric,
        stiffness: CsrMatrix::from_triplets(n, n, &kt),
        mass: CsrMatrix::from_triplets(n, n, &mt),
    })
}

/// Discrete harmonic function (round metric) with the given boundary values.
///
/// Only the entries of `boundary` at boundary nodes are read.
pub fn harmonic_extension(mesh: &Mesh, boundary: &ScalarField) -> Result<ScalarField> {
    if boundary.len() != mesh.nodes.len() {
        return Err(Error::BoundaryData(format!(
            "field has {} values, mesh has {} nodes",
            boundary.len(),
            mesh.nodes.len()
        )));
    }
    let sys = assemble_lb(mesh, MetricMode::RoundSphere, MassMode::Consistent)?;
    let interior: Vec<usize> = mesh.interior_nodes().collect();
    let mut slot = vec![usize::MAX; mesh.nodes.len()];
    for (k, &i) in interior.iter().enumerate() {
        slot[i] = k;
    }
    let mut trip = Vec::new();
    let mut rhs = vec![0.0; interior.len()];
    for (k, &i) in interior.iter().enumerate() {
        for (j, v) in sys.stiffness.row(i) {
            if slot[j] != usize::MAX {
                trip.push((k, slot[j], v));
            } else {
                rhs[k] -= v * boundary.values[j];
            }
        }
    }
    let kii = CsrMatrix::from_triplets(interior.len(), interior.len(), &trip);
    let u = SparseCholesky::new(&kii)?.solve(&rhs);
    let mut out = vec![0.0; mesh.nodes.len()];
    for i in mesh.boundary_nodes() {
        out[i] = boundary.values[i];
    }
    for (k, &i) in interior.iter().enumerate() {
        out[i] = u[k];
    }
    Ok(ScalarField { values: out })
}
