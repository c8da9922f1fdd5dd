//! Per-node geometry of the bent surface, pulled back to node charts.

use rayon::prelude::*;

use super::{JetStencils, Mesh};
use crate::transforms::{pulled_geometry_in_chart, PulledGeometry};
use crate::Result;

/// Pulled-back geometry at every node of a mesh for one bending parameter.
#[derive(Clone, Debug)]
pub struct GeometryCache {
    pub tau: f64,
    pub phi0: f64,
    pub nodes: Vec<PulledGeometry>,
}

impl GeometryCache {
    /// Geometry in the charts of `stencils`, so jets and geometry share coordinates.
    pub fn new(mesh: &Mesh, stencils: &JetStencils, tau: f64) -> Result<Self> {
        let nodes = stencils
            .charts
            .par_iter()
            .map(|chart| pulled_geometry_in_chart(tau, chart, 0.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(GeometryCache { tau, phi0: mesh.phi0, nodes })
    }

    /// `|A|^2 / 2` of the unbent surface at each node.
    pub fn conformal_factors(&self) -> Vec<f64> {
        self.nodes.iter().map(|g| 0.5 * g.norm_a_sq).collect()
    }
}
