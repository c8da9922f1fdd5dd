//! The symmetric Dirichlet problem `F(h, tau) = 0` for normal graphs over the
//! bent Scherk piece: linearisation, chord Newton, and assembly of the
//! N-handle core from one solved period.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    assemble_lb, build_mesh, harmonic_extension, symmetric_projector, BoundaryTag, CsrMatrix, MassMode, Mesh,
    MetricMode, Reduction, ScalarField, SparseLu, SymmetryClass,
};
use crate::graphgeom::{embeddedness_check, period_surface, EmbeddednessReport, GraphProblem, DEFAULT_DELTA};
use crate::scherk::{phi0_from_c0, BendParams};
use crate::spectral::kernel_check_on;
use crate::transforms::scale;
use crate::{Error, Result};

/// Smallest accepted distance of 2 from the class Dirichlet spectrum.
pub const MIN_KERNEL_GAP: f64 = 1e-6;

/// Which derivative the Newton iteration solves with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// `D_h F(0, 0)`, the linearisation at the unbent surface.
    ChordAtOrigin,
    /// `D_h F(0, tau)`, frozen at the bent surface.
    ChordAtBase,
    /// `D_h F(h_k, tau)`, refreshed every step.
    Full,
}

impl std::str::FromStr for JacobianMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "chord_at_origin" => Ok(JacobianMode::ChordAtOrigin),
            "chord_at_base" => Ok(JacobianMode::ChordAtBase),
            "full" => Ok(JacobianMode::Full),
            _ => Err(Error::Parse(format!("unknown jacobian mode '{s}' (chord_at_origin, chord_at_base, full)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub tau: f64,
    pub c0: f64,
    pub newton_tol: f64,
    pub max_iters: usize,
    pub jacobian_mode: JacobianMode,
    pub refinement: u32,
    /// Bound on `|tau|`; at most `1 / (2 c0)`.
    pub eta: f64,
    /// Bound on `max |f|` for the boundary data.
    pub delta0: f64,
    /// Embeddedness threshold on `max |h|`.
    pub delta: f64,
    pub class: SymmetryClass,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tau: 1.0 / 16.0,
            c0: 3.0,
            newton_tol: 1e-10,
            max_iters: 25,
            jacobian_mode: JacobianMode::ChordAtBase,
            refinement: 4,
            eta: 0.5 / 3.0,
            delta0: 1e-2,
            delta: DEFAULT_DELTA,
            class: SymmetryClass::XzInvYzAnti,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter(format!("newton_tol must be positive, got {}", self.newton_tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be positive".into()));
        }
        if self.class == SymmetryClass::All {
            return Err(Error::InvalidParameter("the Dirichlet problem is posed on a symmetry class".into()));
        }
        if !(self.delta0 > 0.0 && self.delta > 0.0) {
            return Err(Error::InvalidParameter("delta0 and delta must be positive".into()));
        }
        BendParams::with_eta(self.tau, self.c0, 1, self.eta)?;
        Ok(())
    }

    pub fn phi0(&self) -> f64 {
        phi0_from_c0(self.c0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub tau: f64,
    pub jacobian_mode: JacobianMode,
    pub h: ScalarField,
    /// Weighted residual norms, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub embedded: bool,
    pub symmetric: bool,
    pub symmetry_defect: f64,
    /// `max |h - f|` over boundary nodes.
    pub boundary_error: f64,
    pub embeddedness: EmbeddednessReport,
    /// Second-order Sobolev norm of `h` on the unbent surface over the same on the bent one.
    pub norm_ratio: f64,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap_or(&f64::NAN)
    }
}

/// `u -> Delta_g u + |A|^2 u` at `tau = 0`, restricted to one symmetry class.
#[derive(Clone, Debug)]
pub struct LinearizedOperator {
    /// Rows at interior nodes; boundary rows are empty.
    pub matrix: CsrMatrix,
    pub class: SymmetryClass,
    /// Distance of 2 from the Dirichlet spectrum of the class.
    pub gap: f64,
}

impl LinearizedOperator {
    pub fn apply(&self, mesh: &Mesh, u: &ScalarField) -> Result<ScalarField> {
        let defect = u.symmetry_defect(mesh, self.class);
        if defect > 1e-12 * u.max_abs().max(1.0) {
            return Err(Error::InvalidParameter(format!("field is not in class {} (defect {defect:e})", self.class)));
        }
        Ok(ScalarField { values: self.matrix.matvec(&u.values) })
    }
}

/// The linearisation at the unbent surface, assembled through the sphere as
/// `(|A|^2 / 2)(Delta_S2 + 2)`. Fails if 2 is too close to the Dirichlet spectrum.
pub fn linearized_operator(problem: &GraphProblem, class: SymmetryClass) -> Result<LinearizedOperator> {
    if problem.tau() != 0.0 {
        return Err(Error::InvalidParameter("the linearised operator is taken at tau = 0".into()));
    }
    let kernel = kernel_check_on(problem.mesh, class)?;
    if kernel.gap < MIN_KERNEL_GAP {
        return Err(Error::SingularOperator { gap: kernel.gap });
    }
    Ok(LinearizedOperator { matrix: sphere_operator(problem), class, gap: kernel.gap })
}

fn sphere_operator(problem: &GraphProblem) -> CsrMatrix {
    // the gnomonic charts are geodesic at their centre, so Delta_S2 = d_ss + d_tt there
    let conf = problem.cache.conformal_factors();
    let n = problem.mesh.nodes.len();
    let mut t = Vec::new();
    for (i, st) in problem.stencils.stencils.iter().enumerate() {
        let Some(st) = st else { continue };
        let c = conf[i];
        t.push((i, i, c * (st.center[2] + st.center[4] + 2.0)));
        for (k, &j) in st.neighbors.iter().enumerate() {
            t.push((i, j, c * (st.weights[2][k] + st.weights[4][k])));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// `v = dF/dtau (0, 0)` by a central difference in `tau`.
pub fn tau_derivative_field(problem: &GraphProblem, dtau: f64) -> Result<ScalarField> {
    if !(dtau > 0.0) {
        return Err(Error::InvalidParameter(format!("dtau must be positive, got {dtau}")));
    }
    let zero = ScalarField::zeros(problem.mesh.nodes.len());
    let plus = problem.at_tau(dtau)?.residual(&zero)?;
    let minus = problem.at_tau(-dtau)?.residual(&zero)?;
    let values = plus.values.iter().zip(&minus.values).map(|(p, m)| (p - m) / (2.0 * dtau)).collect();
    Ok(ScalarField { values })
}

/// Lumped mass of the bent surface's metric at every node.
pub fn surface_mass(mesh: &Mesh, tau: f64) -> Result<Vec<f64>> {
    Ok(assemble_lb(mesh, MetricMode::SigmaPullback(tau), MassMode::Lumped)?.lumped_mass())
}

/// Mass-weighted L2 norm over interior nodes.
pub fn weighted_norm(mesh: &Mesh, mass: &[f64], f: &ScalarField) -> f64 {
    mesh.interior_nodes().map(|i| mass[i] * f.values[i] * f.values[i]).sum::<f64>().sqrt()
}

/// Discrete second-order Sobolev norm of `h` over the surface of `problem`.
pub fn sobolev_norm(problem: &GraphProblem, mass: &[f64], h: &ScalarField) -> f64 {
    problem
        .mesh
        .interior_nodes()
        .map(|i| {
            let jet = problem.stencils.jet(i, &h.values);
            let geo = &problem.cache.nodes[i];
            let gi = geo.g_inverse();
            let dh = nalgebra::Vector2::new(jet.grad[0], jet.grad[1]);
            let hess = Matrix2::from_fn(|a, b| {
                jet.hessian()[(a, b)] - geo.christoffel[0][(a, b)] * dh[0] - geo.christoffel[1][(a, b)] * dh[1]
            });
            let mixed = gi * hess;
            let density = jet.value * jet.value + dh.dot(&(gi * dh)) + (mixed * mixed).trace();
            mass[i] * density
        })
        .sum::<f64>()
        .sqrt()
}

/// Random boundary data in a symmetry class: low Fourier modes along each
/// puncture circle, symmetrised, scaled to `max |f| = amplitude`. Interior values are zero.
pub fn random_symmetric_trace(mesh: &Mesh, class: SymmetryClass, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = ScalarField::zeros(mesh.nodes.len());
    for tag in BoundaryTag::CIRCLES {
        let c = tag.center().expect("circles have centres");
        let u = if c.x.abs() > 0.5 { Vector3::z() } else { Vector3::x() };
        let v = c.cross(&u);
        let coeffs: Vec<(f64, f64)> = (0..5).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        for i in (0..mesh.nodes.len()).filter(|&i| mesh.boundary_tag[i] == tag) {
            let n = mesh.nodes[i];
            let theta = n.dot(&v).atan2(n.dot(&u));
            f.values[i] = coeffs.iter().enumerate().map(|(k, (a, b))| a * (k as f64 * theta).cos() + b * (k as f64 * theta).sin()).sum();
        }
    }
    let f = symmetric_projector(mesh, class).apply(&f);
    let m = f.max_abs();
    if m > 0.0 { f.scaled(amplitude / m) } else { f }
}

fn boundary_max(mesh: &Mesh, f: &ScalarField) -> f64 {
    mesh.boundary_nodes().map(|i| f.values[i].abs()).fold(0.0, f64::max)
}

/// Solve `F(h, tau) = 0` with `h = f` on the boundary by chord or full Newton.
pub fn newton_solve(mesh: &Mesh, f: &ScalarField, config: &SolveConfig) -> Result<SolveResult> {
    config.validate()?;
    if f.len() != mesh.nodes.len() {
        return Err(Error::BoundaryData(format!("field has {} values, mesh has {} nodes", f.len(), mesh.nodes.len())));
    }
    let defect = f.symmetry_defect(mesh, config.class);
    if defect > 1e-12 * boundary_max(mesh, f).max(1.0) {
        return Err(Error::BoundaryData(format!("boundary data is not in class {} (defect {defect:e})", config.class)));
    }
    let fmax = boundary_max(mesh, f);
    if fmax > config.delta0 {
        return Err(Error::BoundaryData(format!("max |f| = {fmax} exceeds delta0 = {}", config.delta0)));
    }

    let problem = GraphProblem::new(mesh, config.tau)?;
    let red = Reduction::interior(mesh, config.class);
    let mass = surface_mass(mesh, config.tau)?;
    let projector = symmetric_projector(mesh, config.class);

    let mut h = projector.apply(&harmonic_extension(mesh, f)?);
    for i in mesh.boundary_nodes() {
        h.values[i] = f.values[i];
    }

    let factor = |jac: &CsrMatrix| SparseLu::new(&red.collocate(jac));
    let mut chord = match config.jacobian_mode {
        JacobianMode::ChordAtOrigin => {
            let origin = problem.at_tau(0.0)?;
            Some(factor(&linearized_operator(&origin, config.class)?.matrix)?)
        }
        JacobianMode::ChordAtBase => Some(factor(&problem.jacobian(&ScalarField::zeros(mesh.nodes.len()))?)?),
        JacobianMode::Full => None,
    };

    let mut residual = problem.residual(&h)?;
    let mut history = vec![weighted_norm(mesh, &mass, &residual)];
    let mut iterations = 0;
    loop {
        if iterations >= config.max_iters {
            return Err(Error::NonConvergence { history });
        }
        let rhs: Vec<f64> = red.restrict(&residual.values).iter().map(|v| -v).collect();
        let step = match &chord {
            Some(lu) => lu.solve(&rhs),
            None => factor(&problem.jacobian(&h)?)?.solve(&rhs),
        };
        let delta = red.extend(&step);
        for i in mesh.interior_nodes() {
            h.values[i] += delta[i];
        }
        iterations += 1;
        residual = problem.residual(&h)?;
        let norm = weighted_norm(mesh, &mass, &residual);
        history.push(norm);
        if !norm.is_finite() || norm > 1e3 * history[0].max(config.newton_tol) {
            return Err(Error::NonConvergence { history });
        }
        if norm <= config.newton_tol {
            break;
        }
        if config.jacobian_mode == JacobianMode::Full {
            chord = None;
        }
    }

    let embeddedness = embeddedness_check(&problem, &h, config.delta)?;
    let symmetry_defect = h.symmetry_defect(mesh, config.class);
    let boundary_error = mesh.boundary_nodes().map(|i| (h.values[i] - f.values[i]).abs()).fold(0.0, f64::max);
    let base = problem.at_tau(0.0)?;
    let base_mass = surface_mass(mesh, 0.0)?;
    let bent = sobolev_norm(&problem, &mass, &h);
    let flat = sobolev_norm(&base, &base_mass, &h);
    let norm_ratio = if bent > 0.0 { flat / bent } else { 1.0 };
    Ok(SolveResult {
        tau: config.tau,
        jacobian_mode: config.jacobian_mode,
        h,
        residual_history: history,
        iterations,
        embedded: embeddedness.pass,
        symmetric: symmetry_defect <= 1e-12,
        symmetry_defect,
        boundary_error,
        embeddedness,
        norm_ratio,
    })
}

/// Settings of the core assembly beyond the solve itself.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoreConfig {
    pub solve: SolveConfig,
    /// Exponent `p` of the smallness gate `max |f~| <= delta0 / (2 N^p)`.
    pub gate_exponent: i32,
    /// Smallest admitted handle count.
    pub n_min: u32,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig { solve: SolveConfig::default(), gate_exponent: 3, n_min: 8 }
    }
}

/// The assembled core surface with its diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoreSurface {
    pub n: u32,
    pub c: f64,
    pub tau: f64,
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    /// `h~ = h / N` at every vertex.
    pub h_tilde: Vec<f64>,
    pub euler_characteristic: i64,
    pub boundary_components: usize,
    pub genus: i64,
    /// Largest distance from a reflected or rotated vertex to the nearest vertex.
    pub mirror_defect: f64,
    pub rotation_defect: f64,
    pub rescaled_residual_max: f64,
    /// Mass-weighted norm of `H + Y.n` over the solved period.
    pub rescaled_residual_norm: f64,
    pub plane_distance: f64,
    pub cylinder_distance: f64,
    /// Predicted size of both end deviations for the given truncation.
    pub asymptote_bound: f64,
    /// The Newton solve, absent for the unsolved core `h = 0`.
    pub solve: Option<SolveResult>,
}

/// Maximum distance from `T(v)` to the nearest vertex, over all vertices.
pub fn invariance_defect(vertices: &[Vector3<f64>], transform: impl Fn(&Vector3<f64>) -> Vector3<f64> + Sync) -> f64 {
    let cell = 1e-3;
    let key = |p: &Vector3<f64>| [(p.x / cell).floor() as i64, (p.y / cell).floor() as i64, (p.z / cell).floor() as i64];
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, v) in vertices.iter().enumerate() {
        grid.entry(key(v)).or_default().push(i);
    }
    vertices
        .par_iter()
        .map(|v| {
            let w = transform(v);
            let k = key(&w);
            let mut best = f64::INFINITY;
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(ids) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            for &j in ids {
                                best = best.min((vertices[j] - w).norm());
                            }
                        }
                    }
                }
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Euler characteristic and number of boundary loops of a triangle soup.
pub fn topology(vertex_count: usize, triangles: &[[usize; 3]]) -> (i64, usize) {
    let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut used = vec![false; vertex_count];
    triangles.iter().flatten().for_each(|&v| used[v] = true);
    let v = used.iter().filter(|&&u| u).count() as i64;
    let chi = v - edges.len() as i64 + triangles.len() as i64;

    // boundary loops by union-find over boundary edges
    let mut parent: Vec<usize> = (0..vertex_count).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let mut on_boundary = vec![false; vertex_count];
    for (&(a, b), &c) in &edges {
        if c == 1 {
            on_boundary[a] = true;
            on_boundary[b] = true;
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            parent[ra] = rb;
        }
    }
    let mut roots: Vec<usize> = (0..vertex_count).filter(|&i| on_boundary[i]).map(|i| find(&mut parent, i)).collect();
    roots.sort_unstable();
    roots.dedup();
    (chi, roots.len())
}

/// Solve one period at `tau = 1/N` with data `f = N f~` and assemble the N
/// rotated copies into the core, sharing the seam vertices between copies.
pub fn solve_core(n: u32, c: f64, f_tilde: &ScalarField, mesh: &Mesh, config: &CoreConfig) -> Result<CoreSurface> {
    if n < config.n_min {
        return Err(Error::InvalidParameter(format!("N = {n} is below the minimum {}", config.n_min)));
    }
    let tau = 1.0 / n as f64;
    let solve_cfg = SolveConfig { tau, c0: c, ..config.solve };
    solve_cfg.validate()?;
    if (mesh.phi0 - phi0_from_c0(c)).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("mesh puncture radius {} does not match C = {c}", mesh.phi0)));
    }
    let mismatch = f_tilde.symmetry_defect(mesh, solve_cfg.class);
    if mismatch > 1e-10 {
        return Err(Error::ReflectionMismatch { mismatch });
    }
    let gate = solve_cfg.delta0 / (2.0 * (n as f64).powi(config.gate_exponent));
    let ft = boundary_max(mesh, f_tilde);
    if ft > gate {
        return Err(Error::BoundaryData(format!("max |f~| = {ft} exceeds delta0 / (2 N^{}) = {gate}", config.gate_exponent)));
    }

    let f = f_tilde.scaled(n as f64);
    let solve = newton_solve(mesh, &f, &solve_cfg)?;
    let mut core = assemble_core(n, c, mesh, &solve.h)?;
    core.solve = Some(solve);
    Ok(core)
}

/// The N-handle core of the graph of `h` over the period at `tau = 1/N`.
pub fn assemble_core(n: u32, c: f64, mesh: &Mesh, h: &ScalarField) -> Result<CoreSurface> {
    if n == 0 {
        return Err(Error::InvalidParameter("handle count must be positive".into()));
    }
    let tau = 1.0 / n as f64;
    let problem = GraphProblem::new(mesh, tau)?;

    // one period in scaled coordinates, then N rotated copies
    let period = period_surface(&problem, h);
    let nn = mesh.nodes.len();
    let base: Vec<Vector3<f64>> =
        problem.graph_points(h).iter().map(|p| scale(tau, p)).collect::<Result<_>>()?;
    let rotations: Vec<Rotation3<f64>> =
        (0..n).map(|k| Rotation3::from_axis_angle(&Vector3::z_axis(), 2.0 * PI * k as f64 / n as f64)).collect();
    let mut vertices = Vec::with_capacity(n as usize * nn);
    let mut h_tilde = Vec::with_capacity(n as usize * nn);
    for rot in &rotations {
        vertices.extend(base.iter().map(|p| rot * p));
        h_tilde.extend(h.values.iter().map(|v| v * tau));
    }
    let mut triangles = Vec::with_capacity(n as usize * period.triangles.len());
    for k in 0..n as usize {
        for t in &period.triangles {
            triangles.push(t.map(|v| {
                let (node, shift) = period.origin[v];
                let copy = (k + shift as usize) % n as usize;
                copy * nn + node
            }));
        }
    }

    let (chi, loops) = topology(vertices.len(), &triangles);
    let genus = (2 - chi - loops as i64) / 2;
    let rotation_defect = invariance_defect(&vertices, |p| Vector3::new(p.x, -p.y, -p.z));
    let mirror_defect = (0..2 * n)
        .map(|k| {
            let theta = PI / (2.0 * n as f64) + k as f64 * PI / n as f64;
            let normal = Vector3::new(-theta.sin(), theta.cos(), 0.0);
            invariance_defect(&vertices, |p| p - normal * (2.0 * p.dot(&normal)))
        })
        .fold(0.0, f64::max);

    let rescaled = problem.rescaled_residual(h)?;
    let mass = surface_mass(mesh, tau)?;
    let ends = |tags: [BoundaryTag; 2]| mesh.boundary_nodes().filter(move |&i| tags.contains(&mesh.boundary_tag[i]));
    let plane_distance = ends([BoundaryTag::C1, BoundaryTag::C2]).map(|i| base[i].z.abs()).fold(0.0, f64::max);
    let cylinder_distance =
        ends([BoundaryTag::C3, BoundaryTag::C4]).map(|i| (base[i].xy().norm() - 1.0).abs()).fold(0.0, f64::max);
    // at |x| = C (or |z| = C) the other coordinate is at most asinh(1 / sinh C)
    let asymptote_bound = tau * ((1.0 / c.sinh()).asinh() + h.max_abs());

    Ok(CoreSurface {
        n,
        c,
        tau,
        vertices,
        triangles,
        h_tilde,
        euler_characteristic: chi,
        boundary_components: loops,
        genus,
        mirror_defect,
        rotation_defect,
        rescaled_residual_max: rescaled.max_abs(),
        rescaled_residual_norm: weighted_norm(mesh, &mass, &rescaled),
        plane_distance,
        cylinder_distance,
        asymptote_bound,
        solve: None,
    })
}

/// Mesh for a solve configuration.
pub fn config_mesh(config: &SolveConfig) -> Result<Mesh> {
    build_mesh(config.phi0(), config.refinement)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::build_mesh;
    use approx::assert_relative_eq;

    fn mesh3() -> Mesh {
        build_mesh(phi0_from_c0(3.0), 3).unwrap()
    }

    fn x_field(mesh: &Mesh) -> ScalarField {
        let x = ScalarField::from_fn(mesh, |i, n| if mesh.boundary_tag[i].is_boundary() { 0.0 } else { n.x * (1.0 + n.y * n.y) });
        symmetric_projector(mesh, SymmetryClass::XzInvYzAnti).apply(&x)
    }

    #[test]
    fn operator_matches_the_chart_laplacian() {
        // Delta_g u + |A|^2 u from the pulled metric and Christoffel symbols
        let mesh = mesh3();
        let p = GraphProblem::new(&mesh, 0.0).unwrap();
        let op = linearized_operator(&p, SymmetryClass::XzInvYzAnti).unwrap();
        let u = x_field(&mesh);
        let lu = op.apply(&mesh, &u).unwrap();
        for i in mesh.interior_nodes() {
            let jet = p.stencils.jet(i, &u.values);
            let geo = &p.cache.nodes[i];
            let gi = geo.g_inverse();
            let dh = [jet.grad[0], jet.grad[1]];
            let hess = Matrix2::from_fn(|a, b| {
                jet.hessian()[(a, b)] - geo.christoffel[0][(a, b)] * dh[0] - geo.christoffel[1][(a, b)] * dh[1]
            });
            let expected = (gi * hess).trace() + geo.norm_a_sq * u.values[i];
            assert!((lu.values[i] - expected).abs() < 1e-10 * (1.0 + expected.abs()), "{i}: {} {expected}", lu.values[i]);
        }
    }

    #[test]
    fn operator_rejects_fields_outside_the_class() {
        let mesh = mesh3();
        let p = GraphProblem::new(&mesh, 0.0).unwrap();
        let op = linearized_operator(&p, SymmetryClass::XzInvYzAnti).unwrap();
        let ones = ScalarField { values: vec![1.0; mesh.nodes.len()] };
        assert!(op.apply(&mesh, &ones).is_err());
        assert!(linearized_operator(&p.at_tau(0.01).unwrap(), SymmetryClass::XzInvYzAnti).is_err());
    }

    #[test]
    fn operator_is_the_first_order_term_of_the_residual() {
        let mesh = mesh3();
        let p = GraphProblem::new(&mesh, 0.0).unwrap();
        let op = linearized_operator(&p, SymmetryClass::XzInvYzAnti).unwrap();
        let u = x_field(&mesh).scaled(0.1);
        let lu = op.apply(&mesh, &u).unwrap();
        let errs: Vec<f64> = [1e-2, 1e-3]
            .iter()
            .map(|&eps| {
                let f = p.residual(&u.scaled(eps)).unwrap();
                f.values.iter().zip(&lu.values).map(|(a, b)| (a / eps - b).abs()).fold(0.0, f64::max)
            })
            .collect();
        // difference quotient error is first order in eps
        assert!((errs[0] / errs[1]).log10() > 0.8, "{errs:?}");
    }

    #[test]
    fn tau_derivative_is_symmetric_nonzero_and_step_independent() {
        let mesh = mesh3();
        let p = GraphProblem::new(&mesh, 0.0).unwrap();
        let v5 = tau_derivative_field(&p, 1e-5).unwrap();
        let v4 = tau_derivative_field(&p, 1e-4).unwrap();
        assert!(v5.max_abs() > 1e-2);
        assert!(v5.symmetry_defect(&mesh, SymmetryClass::XzInvYzAnti) < 1e-10);
        let diff = v5.values.iter().zip(&v4.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-6 * v5.max_abs(), "{diff}");
    }

    #[test]
    fn trivial_problem_returns_zero_in_one_step() {
        let mesh = mesh3();
        let cfg = SolveConfig { tau: 0.0, refinement: 3, ..SolveConfig::default() };
        let r = newton_solve(&mesh, &ScalarField::zeros(mesh.nodes.len()), &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(r.h.max_abs() < 1e-12);
        assert!(r.embedded && r.symmetric);
    }

    #[test]
    fn solution_scales_with_tau() {
        let mesh = mesh3();
        let zero = ScalarField::zeros(mesh.nodes.len());
        let sizes: Vec<f64> = [1.0 / 32.0, 1.0 / 64.0]
            .iter()
            .map(|&tau| {
                let cfg = SolveConfig { tau, refinement: 3, ..SolveConfig::default() };
                let r = newton_solve(&mesh, &zero, &cfg).unwrap();
                let f = GraphProblem::new(&mesh, tau).unwrap().residual(&r.h).unwrap();
                assert!(weighted_norm(&mesh, &surface_mass(&mesh, tau).unwrap(), &f) <= 1e-10);
                assert!(r.symmetric && r.boundary_error == 0.0);
                r.h.max_abs()
            })
            .collect();
        assert_relative_eq!(sizes[0] / sizes[1], 2.0, max_relative = 0.1);
    }

    #[test]
    fn random_data_solve_contracts() {
        let mesh = mesh3();
        let f = random_symmetric_trace(&mesh, SymmetryClass::XzInvYzAnti, 42, 1e-3);
        assert_relative_eq!(f.max_abs(), 1e-3, epsilon = 1e-15);
        let cfg = SolveConfig { refinement: 3, ..SolveConfig::default() };
        let r = newton_solve(&mesh, &f, &cfg).unwrap();
        assert!(r.iterations <= 12, "{:?}", r.residual_history);
        for w in r.residual_history[1..].windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(r.boundary_error <= 1e-12 && r.embedded);
        assert!(r.norm_ratio <= 2.0, "{}", r.norm_ratio);
    }

    #[test]
    fn data_outside_the_class_is_rejected() {
        let mesh = mesh3();
        let f = ScalarField::from_fn(&mesh, |i, _| if mesh.boundary_tag[i].is_boundary() { 1e-3 } else { 0.0 });
        assert!(matches!(newton_solve(&mesh, &f, &SolveConfig::default()), Err(Error::BoundaryData(_))));
    }

    #[test]
    fn topology_of_a_tetrahedron_and_a_strip() {
        let tet = [[0, 1, 2], [0, 3, 1], [1, 3, 2], [2, 3, 0]];
        assert_eq!(topology(4, &tet), (2, 0));
        let strip = [[0, 1, 2], [1, 3, 2]];
        assert_eq!(topology(4, &strip), (1, 1));
    }

    #[test]
    fn small_core_is_closed_up_and_symmetric() {
        let c = 3.0;
        let mesh = build_mesh(phi0_from_c0(c), 3).unwrap();
        let cfg = CoreConfig { n_min: 1, ..CoreConfig::default() };
        let n = 8;
        let core = solve_core(n, c, &ScalarField::zeros(mesh.nodes.len()), &mesh, &cfg).unwrap();
        assert_eq!(core.euler_characteristic, -2 * n as i64);
        assert_eq!(core.boundary_components, 4);
        assert!(core.mirror_defect < 1e-10 && core.rotation_defect < 1e-10, "{} {}", core.mirror_defect, core.rotation_defect);
        assert!(core.plane_distance <= core.asymptote_bound && core.cylinder_distance <= core.asymptote_bound);
    }

    #[test]
    fn core_gate_and_minimum_n() {
        let mesh = mesh3();
        let cfg = CoreConfig::default();
        let f = random_symmetric_trace(&mesh, SymmetryClass::XzInvYzAnti, 1, 1e-3);
        assert!(matches!(solve_core(8, 3.0, &f, &mesh, &cfg), Err(Error::BoundaryData(_))));
        assert!(solve_core(4, 3.0, &ScalarField::zeros(mesh.nodes.len()), &mesh, &cfg).is_err());
    }
}
