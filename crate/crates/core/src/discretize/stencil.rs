//! Second-order jets of nodal fields from weighted least-squares cubic fits.
//!
//! Each node gets the gnomonic chart of the sphere at its position. A cubic
//! polynomial interpolating the node value is fitted to the values on the
//! surrounding two-ring (three-ring when the two-ring is small), and the fitted
//! first and second derivatives are precomputed as linear stencils.

use nalgebra::DMatrix;
use rayon::prelude::*;

use super::Mesh;
use crate::scherk::SphereChart;
use crate::{Error, Result};

/// Value, gradient `(h_s, h_t)` and Hessian `(h_ss, h_st, h_tt)` in a node chart.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

impl HJet {
    pub fn hessian(&self) -> nalgebra::Matrix2<f64> {
        nalgebra::Matrix2::new(self.hess[0], self.hess[1], self.hess[1], self.hess[2])
    }

    /// Component `k` in the order value, h_s, h_t, h_ss, h_st, h_tt.
    pub fn component(&self, k: usize) -> f64 {
        match k {
            0 => self.value,
            1 | 2 => self.grad[k - 1],
            _ => self.hess[k - 3],
        }
    }

    pub fn component_mut(&mut self, k: usize) -> &mut f64 {
        match k {
            0 => &mut self.value,
            1 | 2 => &mut self.grad[k - 1],
            _ => &mut self.hess[k - 3],
        }
    }
}

/// Derivative stencil of one node.
#[derive(Clone, Debug)]
pub struct NodeStencil {
    pub neighbors: Vec<usize>,
    /// `weights[c][j]` for the derivative components h_s, h_t, h_ss, h_st, h_tt.
    pub weights: [Vec<f64>; 5],
    /// Weight on the centre value (minus the sum of the neighbour weights).
    pub center: [f64; 5],
}

/// Charts and derivative stencils for every node of a mesh.
#[derive(Clone, Debug)]
pub struct JetStencils {
    pub charts: Vec<SphereChart>,
    pub stencils: Vec<Option<NodeStencil>>,
}

const MIN_NEIGHBORS: usize = 14;

fn rings(adj: &[Vec<usize>], i: usize, depth: usize) -> Vec<usize> {
    let mut seen = vec![i];
    let mut frontier = vec![i];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            for &w in &adj[v] {
                if !seen.contains(&w) {
                    seen.push(w);
                    next.push(w);
                }
            }
        }
        frontier = next;
    }
    seen.remove(0);
    seen.sort_unstable();
    seen
}

fn build_stencil(mesh: &Mesh, adj: &[Vec<usize>], chart: &SphereChart, i: usize) -> Result<NodeStencil> {
    let mut neighbors = rings(adj, i, 2);
    if neighbors.len() < MIN_NEIGHBORS {
        neighbors = rings(adj, i, 3);
    }
    let coords: Vec<(f64, f64)> = neighbors.iter().map(|&j| chart.coords(&mesh.nodes[j])).collect();
    let rho = coords.iter().map(|(s, t)| (s * s + t * t).sqrt()).sum::<f64>() / coords.len() as f64;
    let n = neighbors.len();
    let mut v = DMatrix::zeros(n, 9);
    for (r, &(s, t)) in coords.iter().enumerate() {
        let (u, w) = (s / rho, t / rho);
        let d2 = u * u + w * w;
        let sw = 1.0 / d2.sqrt();
        let row = [u, w, 0.5 * u * u, u * w, 0.5 * w * w, u * u * u, u * u * w, u * w * w, w * w * w];
        for (c, x) in row.iter().enumerate() {
            v[(r, c)] = sw * x;
        }
    }
    // Householder QR; nalgebra's SVD loses accuracy on some of these systems.
    let qr = v.qr();
    let r_diag = qr.r().diagonal().map(f64::abs);
    if !(r_diag.min() > 1e-8 * r_diag.max()) {
        return Err(Error::InvalidParameter(format!("jet fit at node {i} is ill-conditioned")));
    }
    let pinv = qr
        .r()
        .solve_upper_triangular(&qr.q().transpose())
        .ok_or_else(|| Error::InvalidParameter(format!("jet fit at node {i} is singular")))?;
    let scale = [1.0 / rho, 1.0 / rho, 1.0 / (rho * rho), 1.0 / (rho * rho), 1.0 / (rho * rho)];
    let mut weights: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    let mut center = [0.0; 5];
    for c in 0..5 {
        for r in 0..n {
            let (s, t) = coords[r];
            let sw = rho / (s * s + t * t).sqrt();
            let w = pinv[(c, r)] * sw * scale[c];
            weights[c][r] = w;
            center[c] -= w;
        }
    }
    Ok(NodeStencil { neighbors, weights, center })
}

impl JetStencils {
    /// Stencils at interior nodes; boundary nodes only get a chart.
    pub fn build(mesh: &Mesh) -> Result<Self> {
        let adj = mesh.neighbors();
        let charts: Vec<SphereChart> = mesh.nodes.iter().map(|n| SphereChart::canonical(*n)).collect();
        let stencils = (0..mesh.nodes.len())
            .into_par_iter()
            .map(|i| {
                if mesh.boundary_tag[i].is_boundary() {
                    Ok(None)
                } else {
                    build_stencil(mesh, &adj, &charts[i], i).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(JetStencils { charts, stencils })
    }

    /// Jet of a nodal field at interior node `i`.
    pub fn jet(&self, i: usize, values: &[f64]) -> HJet {
        let st = self.stencils[i].as_ref().expect("jets are only defined at interior nodes");
        let mut d = [0.0; 5];
        for c in 0..5 {
            let mut acc = st.center[c] * values[i];
            for (w, &j) in st.weights[c].iter().zip(&st.neighbors) {
                acc += w * values[j];
            }
            d[c] = acc;
        }
        HJet { value: values[i], grad: [d[0], d[1]], hess: [d[2], d[3], d[4]] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_mesh;
    use crate::taylor::Taylor2;

    fn field(n: &nalgebra::Vector3<f64>) -> f64 {
        n.x * n.y + n.z * n.z * n.z + 0.5 * (2.0 * n.x).sin()
    }

    fn exact_jet(chart: &SphereChart) -> [f64; 6] {
        let p = chart.point_jet();
        let f: Taylor2 = p[0] * p[1] + p[2] * p[2] * p[2] + (p[0] * 2.0).sin() * 0.5;
        [f.partial(0, 0), f.partial(1, 0), f.partial(0, 1), f.partial(2, 0), f.partial(1, 1), f.partial(0, 2)]
    }

    fn max_errors(r: u32) -> (f64, f64) {
        let mesh = build_mesh(0.3, r).unwrap();
        let st = JetStencils::build(&mesh).unwrap();
        let values: Vec<f64> = mesh.nodes.iter().map(field).collect();
        let (mut e1, mut e2) = (0.0f64, 0.0f64);
        for i in mesh.interior_nodes() {
            let jet = st.jet(i, &values);
            let ex = exact_jet(&st.charts[i]);
            for k in 1..3 {
                e1 = e1.max((jet.component(k) - ex[k]).abs());
            }
            for k in 3..6 {
                e2 = e2.max((jet.component(k) - ex[k]).abs());
            }
        }
        (e1, e2)
    }

    #[test]
    fn fitted_jets_converge() {
        // cubic fits: third-order gradients, second-order Hessians
        let (g4, h4) = max_errors(4);
        let (g5, h5) = max_errors(5);
        assert!(g5 < 5e-4 && h5 < 5e-2, "{g5} {h5}");
        assert!(g4 / g5 > 6.0, "{g4} {g5}");
        assert!(h4 / h5 > 3.0, "{h4} {h5}");
    }

    #[test]
    fn cubics_in_the_chart_are_exact_everywhere() {
        let mesh = build_mesh(0.2, 4).unwrap();
        let st = JetStencils::build(&mesh).unwrap();
        for i in mesh.interior_nodes() {
            let chart = st.charts[i];
            let values: Vec<f64> = mesh
                .nodes
                .iter()
                .map(|n| {
                    if n.dot(&chart.center) <= 0.1 {
                        return 0.0;
                    }
                    let (s, t) = chart.coords(n);
                    2.0 * s - t + 0.5 * s * s + 3.0 * s * t - t * t + s * s * t - t * t * t
                })
                .collect();
            let jet = st.jet(i, &values);
            let expected = [0.0, 2.0, -1.0, 1.0, 3.0, -2.0];
            for k in 1..6 {
                assert!((jet.component(k) - expected[k]).abs() < 1e-9, "node {i} component {k}");
            }
        }
    }

    #[test]
    fn quadratics_in_the_chart_are_exact() {
        let mesh = build_mesh(0.3, 3).unwrap();
        let st = JetStencils::build(&mesh).unwrap();
        let i = mesh.interior_nodes().nth(100).unwrap();
        let chart = st.charts[i];
        let values: Vec<f64> = mesh
            .nodes
            .iter()
            .map(|n| {
                if n.dot(&chart.center) <= 0.1 {
                    return 0.0;
                }
                let (s, t) = chart.coords(n);
                1.0 + 2.0 * s - t + 0.5 * s * s + 3.0 * s * t - t * t + s * s * t
            })
            .collect();
        let jet = st.jet(i, &values);
        let expected = [1.0, 2.0, -1.0, 1.0, 3.0, -2.0];
        for k in 0..6 {
            assert!((jet.component(k) - expected[k]).abs() < 1e-9, "{k}: {}", jet.component(k));
        }
    }
}


