//! Bending maps `Phi_tau`, scaling maps `H_tau` and geometry pulled back to the
//! unbent Scherk slab.

use nalgebra::{Matrix2, Matrix3, Vector3};

use crate::scherk::{gauss_map, inverse_gauss_jet, Chart, ShapeData, SphereChart, SurfacePoint};
use crate::taylor::{tdot, tderiv, tnormalize, tvalue, TVec3, Taylor2};
use crate::{Error, Result};

/// Below this bending parameter the series forms replace the closed forms.
const SMALL_TAU: f64 = 1e-6;

/// `expm1(tau x) / tau`, continuous at `tau = 0`.
fn expm1_over(tau: f64, x: f64) -> f64 {
    if tau.abs() < SMALL_TAU {
        let u = tau * x;
        x * (1.0 + u / 2.0 + u * u / 6.0 + u * u * u / 24.0)
    } else {
        (tau * x).exp_m1() / tau
    }
}

/// `(cos(tau y) - 1) / tau`, continuous at `tau = 0`.
fn cosm1_over(tau: f64, y: f64) -> f64 {
    if tau.abs() < SMALL_TAU {
        let u = tau * y;
        -0.5 * u * y * (1.0 - u * u / 12.0)
    } else {
        let s = (0.5 * tau * y).sin();
        -2.0 * s * s / tau
    }
}

/// `sin(tau y) / tau`, continuous at `tau = 0`.
fn sin_over(tau: f64, y: f64) -> f64 {
    if tau.abs() < SMALL_TAU {
        let u = tau * y;
        y * (1.0 - u * u / 6.0 + u * u * u * u / 120.0)
    } else {
        (tau * y).sin() / tau
    }
}

/// The bending map `((e^{tau x} cos tau y - 1) / tau, e^{tau x} sin(tau y) / tau, z)`.
pub fn bend(tau: f64, p: &Vector3<f64>) -> Vector3<f64> {
    if tau == 0.0 {
        return *p;
    }
    let c = (tau * p.y).cos();
    Vector3::new(
        expm1_over(tau, p.x) * c + cosm1_over(tau, p.y),
        (tau * p.x).exp() * sin_over(tau, p.y),
        p.z,
    )
}

/// Rotation about the `z` axis by `angle`.
pub fn rotation_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Analytic Jacobian `R(tau y) diag(e^{tau x}, e^{tau x}, 1)`.
pub fn bend_jacobian(tau: f64, p: &Vector3<f64>) -> Matrix3<f64> {
    let e = (tau * p.x).exp();
    rotation_z(tau * p.y) * Matrix3::from_diagonal(&Vector3::new(e, e, 1.0))
}

/// Unit normal of the bent surface from the unbent normal `n` at `p`.
pub fn bend_normal(tau: f64, p: &Vector3<f64>, n: &Vector3<f64>) -> Vector3<f64> {
    let e = (-tau * p.x).exp();
    (rotation_z(tau * p.y) * Vector3::new(e * n.x, e * n.y, n.z)).normalize()
}

/// The scaling map `(tau x + 1, tau y, tau z)`.
pub fn scale(tau: f64, p: &Vector3<f64>) -> Result<Vector3<f64>> {
    if tau == 0.0 {
        return Err(Error::InvalidParameter("scaling map needs tau != 0".into()));
    }
    Ok(Vector3::new(tau * p.x + 1.0, tau * p.y, tau * p.z))
}

/// Inverse of [`scale`].
pub fn unscale(tau: f64, q: &Vector3<f64>) -> Result<Vector3<f64>> {
    if tau == 0.0 {
        return Err(Error::InvalidParameter("scaling map needs tau != 0".into()));
    }
    Ok(Vector3::new((q.x - 1.0) / tau, q.y / tau, q.z / tau))
}

/// Bending applied to a jet of slab coordinates.
pub fn bend_jet(tau: f64, p: &TVec3) -> TVec3 {
    let (x0, y0) = (p[0].value(), p[1].value());
    let ex = (tau * x0).exp();
    let (sy, cy) = (tau * y0).sin_cos();
    let t2 = tau * tau;
    let e_over = p[0].compose([expm1_over(tau, x0), ex, tau * ex, t2 * ex]);
    let c_over = p[1].compose([cosm1_over(tau, y0), -sy, -tau * cy, t2 * sy]);
    let s_over = p[1].compose([sin_over(tau, y0), cy, -tau * sy, -t2 * cy]);
    let cos_ty = p[1].compose([cy, -tau * sy, -t2 * cy, t2 * tau * sy]);
    let exp_tx = p[0].compose([ex, tau * ex, t2 * ex, t2 * tau * ex]);
    [e_over * cos_ty + c_over, exp_tx * s_over, p[2]]
}

/// Bent unit normal as a jet, from slab coordinates and the unbent normal.
pub fn bend_normal_jet(tau: f64, p: &TVec3, n: &TVec3) -> TVec3 {
    let (x0, y0) = (p[0].value(), p[1].value());
    let em = (-tau * x0).exp();
    let (sy, cy) = (tau * y0).sin_cos();
    let t2 = tau * tau;
    let e = p[0].compose([em, -tau * em, t2 * em, -t2 * tau * em]);
    let c = p[1].compose([cy, -tau * sy, -t2 * cy, t2 * tau * sy]);
    let s = p[1].compose([sy, tau * cy, -t2 * sy, -t2 * tau * cy]);
    let (u, v) = (e * n[0], e * n[1]);
    tnormalize(&[c * u - s * v, s * u + c * v, n[2]])
}

/// Geometry of the bent surface at one point, expressed in the sphere chart of
/// the unbent normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulledGeometry {
    pub tau: f64,
    pub point: SurfacePoint,
    pub chart: SphereChart,
    /// `Phi_tau(p)`.
    pub x0tau: Vector3<f64>,
    pub nu0tau: Vector3<f64>,
    pub g0tau: Matrix2<f64>,
    /// Second fundamental form `<X_ij, nu>`.
    pub a0tau: Matrix2<f64>,
    /// Shape operator `g^-1 a` as a (1,1) tensor, `A[(i, j)] = A^i_j`.
    pub shape: Matrix2<f64>,
    /// Covariant derivatives, `grad_a[k][(i, j)] = (nabla_k A)^i_j`.
    pub grad_a: [Matrix2<f64>; 2],
    /// Christoffel symbols, `christoffel[k][(i, j)] = Gamma^k_ij`.
    pub christoffel: [Matrix2<f64>; 2],
    pub norm_a_sq: f64,
    /// Third-order jets of the bent immersion and bent normal in the chart.
    pub x_jet: TVec3,
    pub nu_jet: TVec3,
}

impl PulledGeometry {
    pub fn mean_curvature(&self) -> f64 {
        self.shape.trace()
    }

    pub fn g_inverse(&self) -> Matrix2<f64> {
        self.g0tau.try_inverse().expect("metric is positive definite")
    }

    /// Operator norm of `A` with respect to `g`, the largest principal curvature.
    pub fn shape_norm(&self) -> f64 {
        // eigenvalues of A are real since A is g-self-adjoint
        let tr = self.shape.trace();
        let det = self.shape.determinant();
        let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
        (0.5 * tr).abs() + disc
    }

    /// Shape data of the bent surface in the same chart.
    pub fn as_shape_data(&self) -> ShapeData {
        crate::scherk::shape_from_jets(Chart::Sphere, &self.x_jet, &self.nu_jet)
    }
}

/// Pulled geometry at `p` in the canonical sphere chart of its normal.
pub fn pulled_geometry(tau: f64, p: &SurfacePoint) -> Result<PulledGeometry> {
    let n = gauss_map(p)?;
    pulled_geometry_in_chart(tau, &SphereChart::canonical(n), 0.0)
}

/// Pulled geometry in a given sphere chart; the chart centre is the unbent normal.
pub fn pulled_geometry_in_chart(tau: f64, chart: &SphereChart, phi0: f64) -> Result<PulledGeometry> {
    let slab = inverse_gauss_jet(chart, phi0)?;
    let n = chart.point_jet();
    let point = crate::scherk::inverse_gauss(&chart.center, phi0)?;
    let x = bend_jet(tau, &slab);
    let nu = bend_normal_jet(tau, &slab, &n);

    let xi = [tderiv(&x, 0), tderiv(&x, 1)];
    let ni = [tderiv(&nu, 0), tderiv(&nu, 1)];
    let xij = [[tderiv(&xi[0], 0), tderiv(&xi[0], 1)], [tderiv(&xi[1], 0), tderiv(&xi[1], 1)]];

    // g, a and A as jets valid to second order
    let g = [[tdot(&xi[0], &xi[0]), tdot(&xi[0], &xi[1])], [tdot(&xi[1], &xi[0]), tdot(&xi[1], &xi[1])]];
    let mut a = [[Taylor2::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = -(tdot(&xi[i], &ni[j]) + tdot(&xi[j], &ni[i])) * 0.5;
        }
    }
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    let rdet = det.recip();
    let ginv = [[g[1][1] * rdet, -(g[0][1] * rdet)], [-(g[1][0] * rdet), g[0][0] * rdet]];
    let mut shape_jet = [[Taylor2::ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            shape_jet[i][j] = ginv[i][0] * a[0][j] + ginv[i][1] * a[1][j];
        }
    }

    let val = |m: &[[Taylor2; 2]; 2]| Matrix2::from_fn(|i, j| m[i][j].value());
    let g0 = val(&g);
    let gi = val(&ginv);
    let a0 = val(&a);
    let shape = val(&shape_jet);

    let mut christoffel = [Matrix2::zeros(); 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += gi[(k, l)] * tdot(&xij[i][j], &xi[l]).value();
                }
                christoffel[k][(i, j)] = s;
            }
        }
    }

    let mut grad_a = [Matrix2::zeros(); 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut v = shape_jet[i][j].d(k).value();
                for l in 0..2 {
                    v += christoffel[i][(k, l)] * shape[(l, j)] - christoffel[l][(k, j)] * shape[(i, l)];
                }
                grad_a[k][(i, j)] = v;
            }
        }
    }

    Ok(PulledGeometry {
        tau,
        point,
        chart: *chart,
        x0tau: tvalue(&x),
        nu0tau: tvalue(&nu),
        g0tau: g0,
        a0tau: a0,
        shape,
        grad_a,
        christoffel,
        norm_a_sq: (shape * shape).trace(),
        x_jet: x,
        nu_jet: nu,
    })
}
