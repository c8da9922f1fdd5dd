//! Eigenpairs of the round Laplacian on the sphere minus four discs, restricted
//! to symmetry classes, and the checks built on them: the distance of 2 from
//! the Dirichlet spectrum, convergence of the first eigenfunction to `x`, and
//! the radial supersolution inequality near a puncture.

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{
    assemble_lb, build_closed_sphere, build_mesh, CsrMatrix, LbSystem, MassMode, Mesh, MetricMode, Reduction,
    ScalarField, SparseCholesky, SparseLu, SymmetryClass,
};
use crate::{Error, Result};

/// `||x||^2` over the unit sphere.
pub const X_NORM_SQ: f64 = 4.0 * std::f64::consts::PI / 3.0;

/// Eigenvalues of `-Delta` on a (possibly punctured) sphere in one class.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenReport {
    /// Puncture radius, zero for the closed sphere.
    pub phi0: f64,
    pub class: SymmetryClass,
    pub refinement: u32,
    pub eigenvalues: Vec<f64>,
    /// `||(K - lambda M) u|| / ||M u||` for each pair.
    pub residuals: Vec<f64>,
    /// Nodal eigenfields, `M`-normalised to one.
    #[serde(skip)]
    pub eigenfields: Vec<ScalarField>,
}

/// Knobs of the shift-invert subspace iteration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenSettings {
    pub tol: f64,
    pub max_iters: usize,
    /// Block vectors beyond the requested count.
    pub guard: usize,
    pub seed: u64,
}

impl Default for EigenSettings {
    fn default() -> Self {
        EigenSettings { tol: 1e-10, max_iters: 2000, guard: 6, seed: 0x5eed }
    }
}

enum ShiftSolver {
    Cholesky(SparseCholesky),
    Lu(SparseLu),
}

impl ShiftSolver {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            ShiftSolver::Cholesky(f) => f.solve(b),
            ShiftSolver::Lu(f) => f.solve(b),
        }
    }
}

fn dense_columns(m: &CsrMatrix, cols: &[DVector<f64>]) -> Vec<DVector<f64>> {
    cols.par_iter().map(|c| DVector::from_vec(m.matvec(c.as_slice()))).collect()
}

fn gram(a: &[DVector<f64>], b: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| a[i].dot(&b[j]))
}

/// Generalised eigenpairs `K u = lambda M u` nearest to `shift`.
///
/// Subspace iteration on `(K - shift M)^-1 M` with a Rayleigh-Ritz step on
/// every sweep. Returns pairs sorted by eigenvalue, eigenvectors `M`-normalised.
pub fn shift_invert_pairs(
    k: &CsrMatrix,
    m: &CsrMatrix,
    count: usize,
    shift: f64,
    settings: EigenSettings,
) -> Result<(Vec<f64>, Vec<DVector<f64>>, Vec<f64>)> {
    let n = k.nrows;
    if count == 0 || count > n {
        return Err(Error::InvalidParameter(format!("cannot compute {count} eigenpairs of a {n}x{n} problem")));
    }
    let p = (count + settings.guard).min(n);
    let shifted = k.add_scaled(1.0, m, -shift);
    let solver = match SparseCholesky::new(&shifted) {
        Ok(f) if shift <= 0.0 => ShiftSolver::Cholesky(f),
        _ => ShiftSolver::Lu(SparseLu::new(&shifted)?),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut q: Vec<DVector<f64>> = (0..p).map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))).collect();
    let mut worst = f64::INFINITY;
    for _ in 0..settings.max_iters {
        let mq = dense_columns(m, &q);
        let z: Vec<DVector<f64>> = mq.par_iter().map(|c| DVector::from_vec(solver.solve(c.as_slice()))).collect();

        // Rayleigh-Ritz on span(z), whitening the projected mass matrix
        let kz = dense_columns(k, &z);
        let mz = dense_columns(m, &z);
        let kp = gram(&z, &kz);
        let mp = gram(&z, &mz);
        let me = SymmetricEigen::new((&mp + mp.transpose()) * 0.5);
        let dmax = me.eigenvalues.max();
        let keep: Vec<usize> = (0..p).filter(|&i| me.eigenvalues[i] > 1e-13 * dmax).collect();
        let white = DMatrix::from_fn(p, keep.len(), |r, c| me.eigenvectors[(r, keep[c])] / me.eigenvalues[keep[c]].sqrt());
        let reduced = white.transpose() * &kp * &white;
        let re = SymmetricEigen::new((&reduced + reduced.transpose()) * 0.5);
        let mut order: Vec<usize> = (0..keep.len()).collect();
        order.sort_by(|&a, &b| (re.eigenvalues[a] - shift).abs().total_cmp(&(re.eigenvalues[b] - shift).abs()));
        let coeffs = &white * &re.eigenvectors;
        let mut theta = Vec::with_capacity(p);
        q = order
            .iter()
            .map(|&c| {
                theta.push(re.eigenvalues[c]);
                let mut v = DVector::zeros(n);
                for (j, zj) in z.iter().enumerate() {
                    v.axpy(coeffs[(j, c)], zj, 1.0);
                }
                v
            })
            .collect();
        // refill a block that lost rank with fresh random directions
        while q.len() < p {
            q.push(DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)));
        }

        let residuals: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|i| {
                let ku = DVector::from_vec(k.matvec(q[i].as_slice()));
                let mu = DVector::from_vec(m.matvec(q[i].as_slice()));
                (ku - &mu * theta[i]).norm() / mu.norm()
            })
            .collect();
        worst = residuals.iter().cloned().fold(0.0, f64::max);
        if worst <= settings.tol {
            let mut pairs: Vec<(f64, DVector<f64>, f64)> =
                (0..count).map(|i| (theta[i], q[i].clone(), residuals[i])).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let values = pairs.iter().map(|p| p.0).collect();
            let res = pairs.iter().map(|p| p.2).collect();
            let vecs = pairs.into_iter().map(|p| p.1).collect();
            return Ok((values, vecs, res));
        }
    }
    Err(Error::EigenNonConvergence { iterations: settings.max_iters, residual: worst })
}

/// Round-sphere system of a mesh with consistent mass.
pub fn round_system(mesh: &Mesh) -> Result<LbSystem> {
    assemble_lb(mesh, MetricMode::RoundSphere, MassMode::Consistent)
}

/// Lowest `count` eigenpairs of `-Delta` with zero Dirichlet data, in a class.
pub fn class_spectrum(mesh: &Mesh, class: SymmetryClass, count: usize, settings: EigenSettings) -> Result<EigenReport> {
    let sys = round_system(mesh)?;
    let red = Reduction::interior(mesh, class);
    let kr = red.galerkin(&sys.stiffness);
    let mr = red.galerkin(&sys.mass);
    // the closed sphere has a constant null vector, so shift below zero
    let shift = if mesh.is_closed() { -0.5 } else { 0.0 };
    let (eigenvalues, vecs, residuals) = shift_invert_pairs(&kr, &mr, count, shift, settings)?;
    let eigenfields = vecs.iter().map(|v| ScalarField { values: red.extend(v.as_slice()) }).collect();
    Ok(EigenReport { phi0: mesh.phi0, class, refinement: mesh.refinement, eigenvalues, residuals, eigenfields })
}

pub fn punctured_spectrum(phi0: f64, class: SymmetryClass, count: usize, refinement: u32) -> Result<EigenReport> {
    let mesh = build_mesh(phi0, refinement)?;
    class_spectrum(&mesh, class, count, EigenSettings::default())
}

pub fn closed_sphere_spectrum(refinement: u32, class: SymmetryClass, count: usize) -> Result<EigenReport> {
    let mesh = build_closed_sphere(refinement)?;
    class_spectrum(&mesh, class, count, EigenSettings::default())
}

/// Distance of 2 from the class spectrum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelReport {
    pub phi0: f64,
    pub class: SymmetryClass,
    pub refinement: u32,
    pub nearest_eigenvalue: f64,
    pub residual: f64,
    pub gap: f64,
}

/// `min |lambda - 2|` over the Dirichlet spectrum of a class, by shift-invert at 2.
pub fn kernel_check_on(mesh: &Mesh, class: SymmetryClass) -> Result<KernelReport> {
    let sys = round_system(mesh)?;
    let red = Reduction::interior(mesh, class);
    let kr = red.galerkin(&sys.stiffness);
    let mr = red.galerkin(&sys.mass);
    let settings = EigenSettings { guard: 4, ..EigenSettings::default() };
    let (values, _, residuals) = shift_invert_pairs(&kr, &mr, 1, 2.0, settings)?;
    Ok(KernelReport {
        phi0: mesh.phi0,
        class,
        refinement: mesh.refinement,
        nearest_eigenvalue: values[0],
        residual: residuals[0],
        gap: (values[0] - 2.0).abs(),
    })
}

/// Kernel check on the symmetric class of the construction.
pub fn kernel_check(phi0: f64, refinement: u32) -> Result<KernelReport> {
    kernel_check_on(&build_mesh(phi0, refinement)?, SymmetryClass::XzInvYzAnti)
}

/// Outcome of [`supersolution_check`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SupersolutionReport {
    pub beta: f64,
    pub phi_j: f64,
    pub points: usize,
    /// `-cot beta + 4 beta`, negative for admissible `beta`.
    pub admissibility: f64,
    /// Largest `Delta zeta + 2 zeta` over the grid.
    pub max_value: f64,
    /// Largest gap between the finite-difference Laplacian and `-cot phi`.
    pub laplacian_discrepancy: f64,
    pub pass: bool,
}

fn zeta(beta: f64, p: &Vector3<f64>) -> f64 {
    2.0 * beta - p.z.clamp(-1.0, 1.0).acos()
}

fn sphere_point(phi: f64, theta: f64) -> Vector3<f64> {
    Vector3::new(phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos())
}

/// Spherical Laplacian by second differences in `(phi, theta)`.
fn fd_laplacian(f: impl Fn(&Vector3<f64>) -> f64, phi: f64, theta: f64) -> f64 {
    let d = 1e-4;
    let at = |a: f64, b: f64| f(&sphere_point(a, b));
    let f0 = at(phi, theta);
    let fpp = (at(phi + d, theta) - 2.0 * f0 + at(phi - d, theta)) / (d * d);
    let fp = (at(phi + d, theta) - at(phi - d, theta)) / (2.0 * d);
    let ftt = (at(phi, theta + d) - 2.0 * f0 + at(phi, theta - d)) / (d * d);
    fpp + phi.cos() / phi.sin() * fp + ftt / (phi.sin() * phi.sin())
}

/// Checks `Delta zeta + 2 zeta < 0` for `zeta = 2 beta - phi` on a polar grid of
/// the annulus `phi_j <= phi <= beta` about a puncture centre.
pub fn supersolution_check(beta: f64, phi_j: f64, points: usize) -> Result<SupersolutionReport> {
    if !(0.0 < phi_j && phi_j < beta && beta < std::f64::consts::FRAC_PI_2) {
        return Err(Error::InvalidParameter(format!("need 0 < phi_j < beta < pi/2, got phi_j = {phi_j}, beta = {beta}")));
    }
    let admissibility = -1.0 / beta.tan() + 4.0 * beta;
    if !(admissibility < 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} is not admissible: -cot(beta) + 4 beta = {admissibility}")));
    }
    let side = (points as f64).sqrt().ceil() as usize;
    let side = side.max(2);
    let (max_value, discrepancy) = (0..side * side)
        .into_par_iter()
        .map(|k| {
            let phi = phi_j + (beta - phi_j) * (k / side) as f64 / (side - 1) as f64;
            let theta = 2.0 * std::f64::consts::PI * (k % side) as f64 / side as f64;
            let lap = fd_laplacian(|p| zeta(beta, p), phi, theta);
            let value = lap + 2.0 * zeta(beta, &sphere_point(phi, theta));
            (value, (lap + 1.0 / phi.tan()).abs())
        })
        .reduce(|| (f64::NEG_INFINITY, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    Ok(SupersolutionReport {
        beta,
        phi_j,
        points: side * side,
        admissibility,
        max_value,
        laplacian_discrepancy: discrepancy,
        pass: max_value < 0.0,
    })
}

/// Distance between the first class eigenfunction and `x` on a test region.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub phi0: f64,
    pub eigenvalue: f64,
    /// `||u||^2` after normalisation, `4 pi / 3` up to quadrature.
    pub norm_sq: f64,
    pub l2_distance: f64,
    pub grad_distance: f64,
}

/// Scale an eigenfield to `||u||^2 = 4 pi / 3` with `<u, x> > 0`.
pub fn normalize_like_x(mesh: &Mesh, sys: &LbSystem, u: &ScalarField) -> Result<ScalarField> {
    let norm_sq = sys.inner(&u.values, &u.values);
    if !(norm_sq > 0.0) {
        return Err(Error::InvalidParameter("cannot normalise a zero eigenfield".into()));
    }
    let x: Vec<f64> = mesh.nodes.iter().map(|n| n.x).collect();
    let sign = if sys.inner(&u.values, &x) < 0.0 { -1.0 } else { 1.0 };
    Ok(u.scaled(sign * (X_NORM_SQ / norm_sq).sqrt()))
}

fn p1_gradient(p: [Vector3<f64>; 3], u: [f64; 3]) -> Vector3<f64> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let g = nalgebra::Matrix2::new(e1.dot(&e1), e1.dot(&e2), e1.dot(&e2), e2.dot(&e2));
    let c = g.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros) * nalgebra::Vector2::new(u[1] - u[0], u[2] - u[0]);
    e1 * c[0] + e2 * c[1]
}

/// Nodes and triangles farther than `margin` (geodesic) from every puncture centre.
fn test_region(mesh: &Mesh, margin: f64) -> (Vec<bool>, Vec<usize>) {
    let centers = [Vector3::x(), -Vector3::x(), Vector3::z(), -Vector3::z()];
    let inside: Vec<bool> = mesh
        .nodes
        .iter()
        .map(|n| centers.iter().all(|c| n.dot(c).clamp(-1.0, 1.0).acos() > margin))
        .collect();
    let tris = (0..mesh.triangles.len()).filter(|&t| mesh.triangles[t].iter().all(|&v| inside[v])).collect();
    (inside, tris)
}

/// First eigenfunction of the symmetric class against `x` on the region at
/// geodesic distance more than `margin` from the punctures.
pub fn eigenfunction_convergence(phi0s: &[f64], refinement: u32, margin: f64) -> Result<Vec<ConvergenceRow>> {
    if let Some(&bad) = phi0s.iter().find(|&&p| !(p < margin)) {
        return Err(Error::InvalidParameter(format!("test region margin {margin} must exceed phi0 = {bad}")));
    }
    phi0s
        .par_iter()
        .map(|&phi0| {
            let mesh = build_mesh(phi0, refinement)?;
            let report = class_spectrum(&mesh, SymmetryClass::XzInvYzAnti, 1, EigenSettings::default())?;
            let sys = round_system(&mesh)?;
            let u = normalize_like_x(&mesh, &sys, &report.eigenfields[0])?;
            let (inside, tris) = test_region(&mesh, margin);
            let lumped = sys.lumped_mass();
            let l2 = (0..mesh.nodes.len())
                .filter(|&i| inside[i])
                .map(|i| lumped[i] * (u.values[i] - mesh.nodes[i].x).powi(2))
                .sum::<f64>()
                .sqrt();
            let grad = tris
                .iter()
                .map(|&t| {
                    let tri = mesh.triangles[t];
                    let p = tri.map(|v| mesh.nodes[v]);
                    let du = p1_gradient(p, tri.map(|v| u.values[v]));
                    let dx = p1_gradient(p, tri.map(|v| mesh.nodes[v].x));
                    (du - dx).norm()
                })
                .fold(0.0, f64::max);
            Ok(ConvergenceRow {
                phi0,
                eigenvalue: report.eigenvalues[0],
                norm_sq: sys.inner(&u.values, &u.values),
                l2_distance: l2,
                grad_distance: grad,
            })
        })
        .collect()
}

/// Absolute correlation `|<u, v>| / (|u| |v|)` in the mass inner product.
pub fn correlation(sys: &LbSystem, u: &[f64], v: &[f64]) -> f64 {
    sys.inner(u, v).abs() / (sys.inner(u, u) * sys.inner(v, v)).sqrt()
}
