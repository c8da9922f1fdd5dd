//! Meshes of the punctured sphere and the discrete operators living on them.

mod fem;
mod geometry;
mod mesh;
mod sparse;
mod stencil;
mod symmetry;

pub use fem::{assemble_lb, harmonic_extension, LbSystem, MassMode, MetricMode};
pub use geometry::GeometryCache;
pub use mesh::{build_closed_sphere, build_mesh, segments_for, BoundaryTag, Mesh};
pub use sparse::{CsrMatrix, SparseCholesky, SparseLu};
pub use stencil::{HJet, JetStencils, NodeStencil};
pub use symmetry::{symmetric_projector, Reduction, SymmetricProjector, SymmetryClass};

use serde::{Deserialize, Serialize};

/// Node-indexed real values on a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        ScalarField { values: vec![0.0; n] }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn(usize, &nalgebra::Vector3<f64>) -> f64) -> Self {
        ScalarField { values: mesh.nodes.iter().enumerate().map(|(i, n)| f(i, n)).collect() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, k: f64) -> Self {
        ScalarField { values: self.values.iter().map(|v| v * k).collect() }
    }

    /// Worst violation of the two mirror relations for a symmetry class.
    pub fn symmetry_defect(&self, mesh: &Mesh, class: SymmetryClass) -> f64 {
        let Some((sx, sy)) = class.signs() else { return 0.0 };
        (0..self.values.len())
            .map(|i| {
                let a = (self.values[mesh.rxz[i]] - sx * self.values[i]).abs();
                let b = (self.values[mesh.ryz[i]] - sy * self.values[i]).abs();
                a.max(b)
            })
            .fold(0.0, f64::max)
    }
}
