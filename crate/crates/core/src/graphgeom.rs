//! Normal graphs over the bent Scherk surface: their geometry, the shrinker
//! residual `F(h, tau) = H + tau e1.nu + tau^2 X.nu`, the same residual computed
//! on the rescaled immersion, and an embeddedness check.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{CsrMatrix, GeometryCache, HJet, JetStencils, Mesh, ScalarField};
use crate::taylor::{tcross, tderiv, tdot, tnormalize, tvalue, TVec3, Taylor2};
use crate::transforms::{bend, bend_normal, PulledGeometry};
use crate::{Error, Result};

/// Default embeddedness threshold on `max |h|`.
pub const DEFAULT_DELTA: f64 = 0.125;

/// Largest admissible `|h| |A|`, keeping `Id - hA` safely invertible.
pub const TUBULAR_BOUND: f64 = 0.5;

/// Geometry of the graph `X + h nu` at one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphSample {
    pub x_h: Vector3<f64>,
    pub nu_h: Vector3<f64>,
    /// Unnormalised normal direction `nu - (Id - hA)^-1 grad h`.
    pub nu_tilde: Vector3<f64>,
    /// `1 / |nu_tilde|`.
    pub btilde: f64,
    pub g_h: Matrix2<f64>,
    pub a_h: Matrix2<f64>,
    pub mean_curvature: f64,
}

fn tangents(geo: &PulledGeometry) -> [Vector3<f64>; 2] {
    let d = |a: usize, b: usize| Vector3::from(geo.x_jet.map(|c| c.partial(a, b)));
    [d(1, 0), d(0, 1)]
}

/// Graph geometry from the jet of `h` in the chart of `geo`.
///
/// `node` only labels the error raised outside the tubular domain.
pub fn graph_sample(node: usize, jet: &HJet, geo: &PulledGeometry) -> Result<GraphSample> {
    let h = jet.value;
    let shape = geo.shape;
    let kappa = geo.shape_norm();
    if !(h.abs() * kappa < TUBULAR_BOUND) {
        return Err(Error::TubularDomain { node, value: h.abs() * kappa });
    }
    let g = geo.g0tau;
    let gi = geo.g_inverse();
    let a = geo.a0tau;
    let dh = Vector2::new(jet.grad[0], jet.grad[1]);
    let grad_h = gi * dh;
    let m_inv = (Matrix2::identity() - shape * h).try_inverse().ok_or(Error::TubularDomain { node, value: h.abs() * kappa })?;
    let xi = -(m_inv * grad_h);
    let frame = tangents(geo);
    let tangential = frame[0] * xi[0] + frame[1] * xi[1];
    let nu_tilde = geo.nu0tau + tangential;
    let btilde = 1.0 / (xi.dot(&(g * xi)) + 1.0).sqrt();
    let nu_h = nu_tilde * btilde;

    // <A rho, A xi> as a bilinear form
    let aa = a * gi * a;
    let g_h = g - a * (2.0 * h) + aa * (h * h) + dh * dh.transpose();

    let gam = &geo.christoffel;
    let hess = Matrix2::from_fn(|i, j| {
        jet.hessian()[(i, j)] - gam[0][(i, j)] * dh[0] - gam[1][(i, j)] * dh[1]
    });
    let w = m_inv * grad_h;
    let mut a_tilde = a - aa * h + hess;
    for i in 0..2 {
        for j in 0..2 {
            // h (nabla_i A) e_j + A e_i D_j h + A e_j D_i h
            let v = geo.grad_a[i].column(j) * h + shape.column(i) * dh[j] + shape.column(j) * dh[i];
            a_tilde[(i, j)] += w.dot(&(g * v));
        }
    }
    let a_h = a_tilde * btilde;
    let g_h_inv = g_h.try_inverse().ok_or(Error::TubularDomain { node, value: h.abs() * kappa })?;
    Ok(GraphSample {
        x_h: geo.x0tau + geo.nu0tau * h,
        nu_h,
        nu_tilde,
        btilde,
        g_h,
        a_h,
        mean_curvature: (g_h_inv * a_h).trace(),
    })
}

/// `F = H + tau e1.nu + tau^2 X.nu` for a graph sample.
pub fn shrinker_residual(sample: &GraphSample, tau: f64) -> f64 {
    sample.mean_curvature + tau * sample.nu_h.x + tau * tau * sample.x_h.dot(&sample.nu_h)
}

/// Quadratic polynomial in the chart with the given jet.
fn jet_polynomial(jet: &HJet) -> Taylor2 {
    let mut p = Taylor2::ZERO;
    p.c[0] = jet.value;
    p.c[1] = jet.grad[0];
    p.c[2] = jet.grad[1];
    p.c[3] = 0.5 * jet.hess[0];
    p.c[4] = jet.hess[1];
    p.c[5] = 0.5 * jet.hess[2];
    p
}

/// `H + Y.n` of the rescaled graph `Y = tau (X + h nu) + e1`, computed directly
/// from jets of `Y` with the normal taken from `Y_s x Y_t`.
pub fn rescaled_sample_residual(jet: &HJet, geo: &PulledGeometry) -> Result<f64> {
    let tau = geo.tau;
    if tau == 0.0 {
        return Err(Error::InvalidParameter("rescaled residual needs tau != 0".into()));
    }
    let hp = jet_polynomial(jet);
    let xh: TVec3 = std::array::from_fn(|k| geo.x_jet[k] + hp * geo.nu_jet[k]);
    let y: TVec3 = [xh[0] * tau + 1.0, xh[1] * tau, xh[2] * tau];
    let ys = tderiv(&y, 0);
    let yt = tderiv(&y, 1);
    let mut n = tnormalize(&tcross(&ys, &yt));
    // orient like the unperturbed normal, as the graph normal is
    if tvalue(&n).dot(&geo.nu0tau) < 0.0 {
        n = n.map(|c| -c);
    }
    let d1 = [ys, yt];
    let d2 = [[tderiv(&ys, 0), tderiv(&ys, 1)], [tderiv(&yt, 0), tderiv(&yt, 1)]];
    let g = Matrix2::from_fn(|i, j| tdot(&d1[i], &d1[j]).value());
    let b = Matrix2::from_fn(|i, j| tdot(&d2[i][j], &n).value());
    let gi = g.try_inverse().ok_or_else(|| Error::InvalidParameter("degenerate rescaled metric".into()))?;
    Ok((gi * b).trace() + tvalue(&y).dot(&tvalue(&n)))
}

/// Fixed mesh, jet stencils and bent geometry for evaluating graph quantities.
#[derive(Clone, Debug)]
pub struct GraphProblem<'a> {
    pub mesh: &'a Mesh,
    pub stencils: JetStencils,
    pub cache: GeometryCache,
}

impl<'a> GraphProblem<'a> {
    pub fn new(mesh: &'a Mesh, tau: f64) -> Result<Self> {
        let stencils = JetStencils::build(mesh)?;
        let cache = GeometryCache::new(mesh, &stencils, tau)?;
        Ok(GraphProblem { mesh, stencils, cache })
    }

    /// The same mesh and stencils at another bending parameter.
    pub fn at_tau(&self, tau: f64) -> Result<Self> {
        let cache = GeometryCache::new(self.mesh, &self.stencils, tau)?;
        Ok(GraphProblem { mesh: self.mesh, stencils: self.stencils.clone(), cache })
    }

    pub fn tau(&self) -> f64 {
        self.cache.tau
    }

    fn check_len(&self, h: &ScalarField) -> Result<()> {
        if h.len() != self.mesh.nodes.len() {
            return Err(Error::InvalidParameter(format!(
                "field has {} values, mesh has {} nodes",
                h.len(),
                self.mesh.nodes.len()
            )));
        }
        Ok(())
    }

    /// Graph samples at interior nodes (`None` on the boundary).
    pub fn samples(&self, h: &ScalarField) -> Result<Vec<Option<GraphSample>>> {
        self.check_len(h)?;
        (0..self.mesh.nodes.len())
            .into_par_iter()
            .map(|i| match self.stencils.stencils[i] {
                None => Ok(None),
                Some(_) => graph_sample(i, &self.stencils.jet(i, &h.values), &self.cache.nodes[i]).map(Some),
            })
            .collect()
    }

    /// `F(h, tau)` at interior nodes; boundary entries are zero.
    pub fn residual(&self, h: &ScalarField) -> Result<ScalarField> {
        let tau = self.tau();
        let values = self.samples(h)?.iter().map(|s| s.map_or(0.0, |s| shrinker_residual(&s, tau))).collect();
        Ok(ScalarField { values })
    }

    /// `H + X.nu` of the rescaled graph at interior nodes; boundary entries are zero.
    pub fn rescaled_residual(&self, h: &ScalarField) -> Result<ScalarField> {
        self.check_len(h)?;
        if self.tau() == 0.0 {
            return Err(Error::InvalidParameter("rescaled residual needs tau != 0".into()));
        }
        let values = (0..self.mesh.nodes.len())
            .into_par_iter()
            .map(|i| match self.stencils.stencils[i] {
                None => Ok(0.0),
                Some(_) => {
                    let jet = self.stencils.jet(i, &h.values);
                    let kappa = self.cache.nodes[i].shape_norm();
                    if !(jet.value.abs() * kappa < TUBULAR_BOUND) {
                        return Err(Error::TubularDomain { node: i, value: jet.value.abs() * kappa });
                    }
                    rescaled_sample_residual(&jet, &self.cache.nodes[i])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField { values })
    }

    /// Derivative of the nodal residual with respect to all nodal values of `h`.
    ///
    /// Rows of boundary nodes are empty. The dependence of `F` on the local jet
    /// is differentiated by central differences; the jet is linear in `h`.
    pub fn jacobian(&self, h: &ScalarField) -> Result<CsrMatrix> {
        self.check_len(h)?;
        let tau = self.tau();
        let n = self.mesh.nodes.len();
        let rows = (0..n)
            .into_par_iter()
            .map(|i| -> Result<Vec<(usize, usize, f64)>> {
                let Some(st) = &self.stencils.stencils[i] else { return Ok(Vec::new()) };
                let geo = &self.cache.nodes[i];
                let jet = self.stencils.jet(i, &h.values);
                let mut sens = [0.0; 6];
                for (c, s) in sens.iter_mut().enumerate() {
                    let step = 1e-6;
                    let mut plus = jet;
                    let mut minus = jet;
                    *plus.component_mut(c) += step;
                    *minus.component_mut(c) -= step;
                    let fp = shrinker_residual(&graph_sample(i, &plus, geo)?, tau);
                    let fm = shrinker_residual(&graph_sample(i, &minus, geo)?, tau);
                    *s = (fp - fm) / (2.0 * step);
                }
                let mut row = Vec::with_capacity(st.neighbors.len() + 1);
                let center = sens[0] + (0..5).map(|c| sens[c + 1] * st.center[c]).sum::<f64>();
                row.push((i, i, center));
                for (k, &j) in st.neighbors.iter().enumerate() {
                    let v: f64 = (0..5).map(|c| sens[c + 1] * st.weights[c][k]).sum();
                    row.push((i, j, v));
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        let t: Vec<_> = rows.into_iter().flatten().collect();
        Ok(CsrMatrix::from_triplets(n, n, &t))
    }

    /// Positions `X + h nu` of the graph at every node, before rescaling.
    pub fn graph_points(&self, h: &ScalarField) -> Vec<Vector3<f64>> {
        self.cache.nodes.iter().zip(&h.values).map(|(g, &v)| g.x0tau + g.nu0tau * v).collect()
    }
}

/// `F(h, tau)` on a mesh.
pub fn residual_f(mesh: &Mesh, h: &ScalarField, tau: f64) -> Result<ScalarField> {
    GraphProblem::new(mesh, tau)?.residual(h)
}

/// `H + X.nu` of the rescaled graph on a mesh; `F = tau` times this.
pub fn rescaled_residual(mesh: &Mesh, h: &ScalarField, tau: f64) -> Result<ScalarField> {
    if tau == 0.0 {
        return Err(Error::InvalidParameter("rescaled residual needs tau != 0".into()));
    }
    GraphProblem::new(mesh, tau)?.rescaled_residual(h)
}

/// One period of the graph as a triangle surface in space.
///
/// Triangles that straddle the seam `y = -pi/2 ~ 3pi/2` use lifted copies of
/// their low vertices, displaced by one period.
#[derive(Clone, Debug)]
pub struct PeriodSurface {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// Mesh node of each vertex and the number of periods it is shifted by.
    pub origin: Vec<(usize, i32)>,
}

/// Position of the graph point over node `i` shifted by `k` periods.
fn shifted_point(problem: &GraphProblem, h: &ScalarField, i: usize, k: i32) -> Vector3<f64> {
    let geo = &problem.cache.nodes[i];
    if k == 0 {
        return geo.x0tau + geo.nu0tau * h.values[i];
    }
    let p = geo.point.position() + Vector3::new(0.0, 2.0 * PI * k as f64, 0.0);
    let tau = problem.tau();
    bend(tau, &p) + bend_normal(tau, &p, &problem.mesh.nodes[i]) * h.values[i]
}

pub fn period_surface(problem: &GraphProblem, h: &ScalarField) -> PeriodSurface {
    let mesh = problem.mesh;
    let mut vertices: Vec<Vector3<f64>> = problem.graph_points(h);
    let mut origin: Vec<(usize, i32)> = (0..mesh.nodes.len()).map(|i| (i, 0)).collect();
    let mut lifted: HashMap<usize, usize> = HashMap::new();
    let ys: Vec<f64> = problem.cache.nodes.iter().map(|g| g.point.y).collect();
    let mut triangles = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let lo = tri.iter().map(|&v| ys[v]).fold(f64::INFINITY, f64::min);
        let hi = tri.iter().map(|&v| ys[v]).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo <= PI {
            triangles.push(*tri);
            continue;
        }
        let t = tri.map(|v| {
            if ys[v] < 0.5 * PI {
                *lifted.entry(v).or_insert_with(|| {
                    vertices.push(shifted_point(problem, h, v, 1));
                    origin.push((v, 1));
                    vertices.len() - 1
                })
            } else {
                v
            }
        });
        triangles.push(t);
    }
    PeriodSurface { vertices, triangles, origin }
}

/// Result of [`embeddedness_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddednessReport {
    pub tau: f64,
    pub max_abs_h: f64,
    pub delta: f64,
    pub delta_ok: bool,
    pub triangles_scanned: usize,
    pub intersections: usize,
    /// Half the narrowest width of the holes of the graph.
    pub clearance: f64,
    pub clearance_at_rest: f64,
    pub pass: bool,
}

/// `min(pi, 2 sqrt 2 asinh 1) / 2`, the narrowest hole half-width of the unbent surface.
pub fn narrowest_hole_half_width() -> f64 {
    0.5 * PI.min(2.0 * 2f64.sqrt() * 1f64.asinh())
}

fn seg_hits_triangle(p: &Vector3<f64>, q: &Vector3<f64>, tri: &[Vector3<f64>; 3]) -> bool {
    const EPS: f64 = 1e-12;
    let d = q - p;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let pv = d.cross(&e2);
    let det = e1.dot(&pv);
    let scale = e1.norm() * e2.norm() * d.norm();
    if det.abs() <= 1e-14 * scale {
        return false;
    }
    let inv = 1.0 / det;
    let s = p - tri[0];
    let u = s.dot(&pv) * inv;
    if u < EPS || u > 1.0 - EPS {
        return false;
    }
    let qv = s.cross(&e1);
    let v = d.dot(&qv) * inv;
    if v < EPS || u + v > 1.0 - EPS {
        return false;
    }
    let t = e2.dot(&qv) * inv;
    t > EPS && t < 1.0 - EPS
}

fn triangles_intersect(a: &[Vector3<f64>; 3], b: &[Vector3<f64>; 3]) -> bool {
    (0..3).any(|k| seg_hits_triangle(&a[k], &a[(k + 1) % 3], b))
        || (0..3).any(|k| seg_hits_triangle(&b[k], &b[(k + 1) % 3], a))
}

/// Number of intersecting pairs among the triangles of one period and its two
/// neighbouring periods; triangles sharing a vertex are not compared.
fn count_intersections(problem: &GraphProblem, h: &ScalarField, surf: &PeriodSurface) -> usize {
    let copies: Vec<Vec<Vector3<f64>>> = [-1, 1]
        .iter()
        .map(|&k| surf.origin.iter().map(|&(i, s)| shifted_point(problem, h, i, s + k)).collect())
        .collect();
    let vert = |copy: usize, v: usize| if copy == 0 { surf.vertices[v] } else { copies[copy - 1][v] };
    let nt = surf.triangles.len();
    let tri_pts = |copy: usize, t: usize| surf.triangles[t].map(|v| vert(copy, v));

    let cell = 2.0
        * surf
            .triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| (surf.vertices[a] - surf.vertices[b]).norm())
            .fold(0.0, f64::max);
    let key = |p: &Vector3<f64>| [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64];
    let mut grid: HashMap<[i64; 3], Vec<(usize, usize)>> = HashMap::new();
    for copy in 0..3 {
        for t in 0..nt {
            let pts = tri_pts(copy, t);
            let lo = pts.iter().fold(Vector3::repeat(f64::INFINITY), |m, p| m.inf(p));
            let hi = pts.iter().fold(Vector3::repeat(f64::NEG_INFINITY), |m, p| m.sup(p));
            let (kl, kh) = (key(&lo), key(&hi));
            for i in kl[0]..=kh[0] {
                for j in kl[1]..=kh[1] {
                    for k in kl[2]..=kh[2] {
                        grid.entry([i, j, k]).or_default().push((copy, t));
                    }
                }
            }
        }
    }
    let mut pairs: Vec<((usize, usize), (usize, usize))> = Vec::new();
    for bucket in grid.values() {
        for (x, &a) in bucket.iter().enumerate() {
            for &b in &bucket[x + 1..] {
                if a.0 != 0 && b.0 != 0 {
                    continue;
                }
                pairs.push(if a < b { (a, b) } else { (b, a) });
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    let tol = 1e-9 * cell;
    pairs
        .par_iter()
        .filter(|&&(a, b)| {
            let pa = tri_pts(a.0, a.1);
            let pb = tri_pts(b.0, b.1);
            let touching = pa.iter().any(|p| pb.iter().any(|q| (p - q).norm() <= tol));
            !touching && triangles_intersect(&pa, &pb)
        })
        .count()
}

/// Half the narrowest hole width, measured between the graph points over the
/// two mirror curves `n_z = 0` (the lines `y = 0, pi` at rest) and over the
/// two arcs of `n_y = 0, n_x n_z > 0` (the curve `sinh x sinh z = 1` at rest).
fn hole_clearance(mesh: &Mesh, pts: &[Vector3<f64>]) -> f64 {
    let min_between = |a: &[usize], b: &[usize]| {
        a.iter()
            .flat_map(|&i| b.iter().map(move |&j| (pts[i] - pts[j]).norm()))
            .fold(f64::INFINITY, f64::min)
    };
    let pick = |f: &dyn Fn(&Vector3<f64>) -> bool| -> Vec<usize> {
        (0..mesh.nodes.len()).filter(|&i| f(&mesh.nodes[i])).collect()
    };
    let upper = pick(&|n| n.z == 0.0 && n.y > 0.0);
    let lower = pick(&|n| n.z == 0.0 && n.y < 0.0);
    let arc_a = pick(&|n| n.y == 0.0 && n.x > 0.0 && n.z > 0.0);
    let arc_b = pick(&|n| n.y == 0.0 && n.x < 0.0 && n.z < 0.0);
    0.5 * min_between(&upper, &lower).min(min_between(&arc_a, &arc_b))
}

/// Embeddedness of the graph of `h`: the `max |h| < delta` criterion, a
/// triangle intersection scan of one period against itself and its
/// neighbours, and the hole clearance.
pub fn embeddedness_check(problem: &GraphProblem, h: &ScalarField, delta: f64) -> Result<EmbeddednessReport> {
    problem.check_len(h)?;
    let max_abs_h = h.max_abs();
    let surf = period_surface(problem, h);
    let intersections = count_intersections(problem, h, &surf);
    let clearance = hole_clearance(problem.mesh, &problem.graph_points(h));
    let delta_ok = max_abs_h < delta;
    Ok(EmbeddednessReport {
        tau: problem.tau(),
        max_abs_h,
        delta,
        delta_ok,
        triangles_scanned: surf.triangles.len(),
        intersections,
        clearance,
        clearance_at_rest: narrowest_hole_half_width(),
        pass: delta_ok && intersections == 0 && clearance > 0.0,
    })
}
