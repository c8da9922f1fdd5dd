//! The Scherk surface `sin y = sinh x sinh z` on the slab `y in (-pi/2, 3pi/2]`.
//!
//! Points are parametrised by their Gauss image in the sphere minus four
//! puncture discs. The upper hemisphere `n_y > 0` covers sheet A and the lower
//! hemisphere covers sheet B; the seam `y = -pi/2 ~ 3pi/2` sits on the equator
//! arcs where `n_x n_z < 0`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector3};
use serde::{Deserialize, Serialize};

use crate::taylor::{tderiv, tdot, tnormalize, tvalue, TVec3, Taylor2};
use crate::{Error, Result};

/// Tolerance used when checking that a point lies on the surface.
pub const ON_SURFACE_TOL: f64 = 1e-10;

/// Which of the two sheets of the fundamental slab a point lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sheet {
    /// `y in (-pi/2, pi/2]`
    A,
    /// `y in (pi/2, 3pi/2]`
    B,
}

/// A point of the Scherk slab.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub sheet: Sheet,
}

impl SurfacePoint {
    /// Build a point, lifting `y` into the slab and checking the implicit equation.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let y = lift_y(y);
        let residual = implicit_value(&Vector3::new(x, y, z));
        if residual.abs() > ON_SURFACE_TOL {
            return Err(Error::OffSurface { residual });
        }
        Ok(Self::from_lifted(x, y, z))
    }

    fn from_lifted(x: f64, y: f64, z: f64) -> Self {
        let sheet = if y <= FRAC_PI_2 { Sheet::A } else { Sheet::B };
        SurfacePoint { x, y, z, sheet }
    }

    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// Parameters of a bent Scherk piece.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BendParams {
    pub tau: f64,
    pub c0: f64,
    pub n: u32,
    pub eta: f64,
}

impl BendParams {
    /// Parameters with the largest admissible bending bound `eta = 1 / (2 c0)`.
    pub fn new(tau: f64, c0: f64, n: u32) -> Result<Self> {
        Self::with_eta(tau, c0, n, 0.5 / c0)
    }

    pub fn with_eta(tau: f64, c0: f64, n: u32, eta: f64) -> Result<Self> {
        if !(c0 > 0.0) || !c0.is_finite() {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("handle count must be positive".into()));
        }
        if !(eta > 0.0 && eta <= 0.5 / c0 * (1.0 + 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in (0, 1/(2 c0)] = (0, {}], got {eta}",
                0.5 / c0
            )));
        }
        if !(tau.abs() < eta) {
            return Err(Error::InvalidParameter(format!("|tau| = {} must be below eta = {eta}", tau.abs())));
        }
        Ok(BendParams { tau, c0, n, eta })
    }

    pub fn phi0(&self) -> f64 {
        phi0_from_c0(self.c0)
    }
}

/// Puncture radius on the sphere matching the truncation `|x|, |z| <= c0`.
pub fn phi0_from_c0(c0: f64) -> f64 {
    c0.tanh().acos()
}

/// Truncation constant matching a puncture radius.
pub fn c0_from_phi0(phi0: f64) -> f64 {
    phi0.cos().atanh()
}

/// Lift an angle into `(-pi/2, 3pi/2]`; the value `-pi/2` itself stays on sheet A.
pub fn lift_y(y: f64) -> f64 {
    let mut y = y;
    if y == -FRAC_PI_2 {
        return y;
    }
    while y < -FRAC_PI_2 {
        y += 2.0 * PI;
    }
    while y > 1.5 * PI {
        y -= 2.0 * PI;
    }
    y
}

/// `sin y - sinh x sinh z`.
pub fn implicit_value(p: &Vector3<f64>) -> f64 {
    p.y.sin() - p.x.sinh() * p.z.sinh()
}

fn normal_unchecked(x: f64, y: f64, z: f64) -> Vector3<f64> {
    Vector3::new(-z.tanh(), y.cos() / (z.cosh() * x.cosh()), -x.tanh())
}

/// Unit normal `(-tanh z, cos y / (cosh z cosh x), -tanh x)`, the normalised
/// gradient of `sin y - sinh x sinh z` oriented so that `nu(0) = (0, 1, 0)`.
pub fn gauss_map(p: &SurfacePoint) -> Result<Vector3<f64>> {
    let residual = implicit_value(&p.position());
    if residual.abs() > ON_SURFACE_TOL {
        return Err(Error::OffSurface { residual });
    }
    Ok(normal_unchecked(p.x, p.y, p.z))
}

fn check_puncture(n: &Vector3<f64>, phi0: f64) -> Result<()> {
    let bound = phi0.cos() + 1e-12;
    if n.x.abs() >= bound || n.z.abs() >= bound {
        return Err(Error::PunctureProximity { nx: n.x, ny: n.y, nz: n.z, phi0 });
    }
    Ok(())
}

/// Inverse of the Gauss map on the punctured sphere.
///
/// Points on the boundary circles themselves are admitted; only normals strictly
/// inside a puncture disc are rejected.
pub fn inverse_gauss(n: &Vector3<f64>, phi0: f64) -> Result<SurfacePoint> {
    check_puncture(n, phi0)?;
    let x = -n.z.atanh();
    let z = -n.x.atanh();
    let y = (x.sinh() * z.sinh()).atan2(n.y * x.cosh() * z.cosh());
    let y = if y < -FRAC_PI_2 { y + 2.0 * PI } else { y };
    Ok(SurfacePoint::from_lifted(x, y, z))
}

/// The rotation `rho(p) = (x, -y, -z)` and the reflection `sigma(p) = (x, pi - y, z)`.
pub fn symmetry_images(p: &SurfacePoint) -> (SurfacePoint, SurfacePoint) {
    let rho = SurfacePoint::from_lifted(p.x, lift_y(-p.y), -p.z);
    let sigma = SurfacePoint::from_lifted(p.x, lift_y(PI - p.y), p.z);
    (rho, sigma)
}

/// Gnomonic chart of the unit sphere centred at a point with a right-handed frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereChart {
    pub center: Vector3<f64>,
    pub e1: Vector3<f64>,
    pub e2: Vector3<f64>,
}

impl SphereChart {
    /// Frame built from the `z` axis, or from the `x` axis close to the poles.
    pub fn canonical(center: Vector3<f64>) -> Self {
        let axis = if center.z.abs() < 0.9 { Vector3::z() } else { Vector3::x() };
        let e1 = axis.cross(&center).normalize();
        let e2 = center.cross(&e1);
        SphereChart { center, e1, e2 }
    }

    /// Gnomonic coordinates of a unit vector (must lie in the open hemisphere).
    pub fn coords(&self, n: &Vector3<f64>) -> (f64, f64) {
        let d = n.dot(&self.center);
        (n.dot(&self.e1) / d, n.dot(&self.e2) / d)
    }

    pub fn point(&self, s: f64, t: f64) -> Vector3<f64> {
        (self.center + self.e1 * s + self.e2 * t).normalize()
    }

    /// The unit vector as a third-order jet in the chart coordinates.
    pub fn point_jet(&self) -> TVec3 {
        let s = Taylor2::var_s(0.0);
        let t = Taylor2::var_t(0.0);
        let raw: TVec3 = std::array::from_fn(|k| s * self.e1[k] + t * self.e2[k] + self.center[k]);
        tnormalize(&raw)
    }
}

/// Jet of the inverse Gauss map `(x, y, z)` in a sphere chart.
///
/// `y` is continued smoothly from its lifted value at the chart centre, so the
/// jet is valid across the seam.
pub fn inverse_gauss_jet(chart: &SphereChart, phi0: f64) -> Result<TVec3> {
    check_puncture(&chart.center, phi0)?;
    let n = chart.point_jet();
    let x = -n[2].atanh();
    let z = -n[0].atanh();
    let y = (x.sinh() * z.sinh()).atan2(&(n[1] * x.cosh() * z.cosh()));
    let mut y = y;
    y.c[0] = inverse_gauss(&chart.center, phi0)?.y;
    Ok([x, y, z])
}

/// Coordinate chart used for shape data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// Gnomonic chart of the Gauss image centred at the normal.
    Sphere,
    /// Graph chart `(x, z) -> (x, y(x, z), z)` on the point's sheet.
    Xz,
}

/// First and second fundamental data at a point, in a chart.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeData {
    pub chart: Chart,
    pub position: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub g: Matrix2<f64>,
    /// Second fundamental form `a_ij = <X_ij, nu>`.
    pub a: Matrix2<f64>,
    /// Shape operator `A = g^-1 a`.
    pub shape: Matrix2<f64>,
    /// `|A|^2 = tr(A A)`.
    pub norm_a_sq: f64,
    /// Pullback of the round metric by the Gauss map, `<nu_i, nu_j>`.
    pub gauss_pullback: Matrix2<f64>,
}

impl ShapeData {
    fn from_parts(
        chart: Chart,
        position: Vector3<f64>,
        normal: Vector3<f64>,
        g: Matrix2<f64>,
        a: Matrix2<f64>,
        gauss_pullback: Matrix2<f64>,
    ) -> Self {
        let shape = g.try_inverse().expect("metric is positive definite") * a;
        let norm_a_sq = (shape * shape).trace();
        ShapeData { chart, position, normal, g, a, shape, norm_a_sq, gauss_pullback }
    }

    pub fn mean_curvature(&self) -> f64 {
        self.shape.trace()
    }

    /// `|A|^2 / 2`, the ratio between the Gauss-pulled round metric and `g`.
    pub fn conformal_factor(&self) -> f64 {
        0.5 * self.norm_a_sq
    }

    /// Relative Frobenius defect of `nu^* g_S2 = |A|^2 g / 2`.
    pub fn conformality_residual(&self) -> f64 {
        (self.gauss_pullback - self.g * self.conformal_factor()).norm() / self.g.norm()
    }
}

fn xz_y_value(x: f64, z: f64, sheet: Sheet) -> f64 {
    let w = (x.sinh() * z.sinh()).asin();
    match sheet {
        Sheet::A => w,
        Sheet::B => PI - w,
    }
}

fn check_xz_chart(p: &SurfacePoint) -> Result<()> {
    let value = (p.x.sinh() * p.z.sinh()).abs();
    if value > 1.0 - 1e-6 {
        return Err(Error::DegenerateChart { value });
    }
    Ok(())
}

fn check_on_surface(p: &SurfacePoint) -> Result<()> {
    let residual = implicit_value(&p.position());
    if residual.abs() > ON_SURFACE_TOL {
        return Err(Error::OffSurface { residual });
    }
    Ok(())
}

/// Immersion and unit normal jets in the requested chart.
pub fn surface_jets(p: &SurfacePoint, chart: Chart) -> Result<(TVec3, TVec3)> {
    check_on_surface(p)?;
    match chart {
        Chart::Sphere => {
            let n = normal_unchecked(p.x, p.y, p.z);
            let sc = SphereChart::canonical(n);
            let x = inverse_gauss_jet(&sc, 0.0)?;
            Ok((x, sc.point_jet()))
        }
        Chart::Xz => {
            check_xz_chart(p)?;
            let x = Taylor2::var_s(p.x);
            let z = Taylor2::var_t(p.z);
            let w = (x.sinh() * z.sinh()).asin();
            let y = match p.sheet {
                Sheet::A => w,
                Sheet::B => -w + PI,
            };
            let nu = [-z.tanh(), y.cos() * (z.cosh() * x.cosh()).recip(), -x.tanh()];
            Ok(([x, y, z], nu))
        }
    }
}

/// Shape data from analytic derivatives of the immersion and of the closed-form normal.
pub fn shape_data(p: &SurfacePoint, chart: Chart) -> Result<ShapeData> {
    let (x, nu) = surface_jets(p, chart)?;
    Ok(shape_from_jets(chart, &x, &nu))
}

pub(crate) fn shape_from_jets(chart: Chart, x: &TVec3, nu: &TVec3) -> ShapeData {
    let xi = [tderiv(x, 0), tderiv(x, 1)];
    let ni = [tderiv(nu, 0), tderiv(nu, 1)];
    let m = |f: &dyn Fn(usize, usize) -> f64| Matrix2::from_fn(|i, j| f(i, j));
    let g = m(&|i, j| tdot(&xi[i], &xi[j]).value());
    let a = m(&|i, j| -tdot(&xi[i], &ni[j]).value());
    let a = (a + a.transpose()) * 0.5;
    let gp = m(&|i, j| tdot(&ni[i], &ni[j]).value());
    ShapeData::from_parts(chart, tvalue(x), tvalue(nu), g, a, gp)
}

/// Shape data from central finite differences with step `step`.
///
/// The immersion is differentiated numerically; the normal is the normalised
/// cross product of the difference tangents, and the Gauss pullback uses
/// differences of the closed-form normal.
pub fn shape_data_fd(p: &SurfacePoint, chart: Chart, step: f64) -> Result<ShapeData> {
    check_on_surface(p)?;
    let (immersion, normal): (Box<dyn Fn(f64, f64) -> Vector3<f64>>, Box<dyn Fn(f64, f64) -> Vector3<f64>>) =
        match chart {
            Chart::Sphere => {
                let sc = SphereChart::canonical(normal_unchecked(p.x, p.y, p.z));
                let y0 = p.y;
                let imm = move |s: f64, t: f64| {
                    let n = sc.point(s, t);
                    let x = -n.z.atanh();
                    let z = -n.x.atanh();
                    let y = (x.sinh() * z.sinh()).atan2(n.y * x.cosh() * z.cosh());
                    // continue the branch of the centre value
                    let y = y + 2.0 * PI * ((y0 - y) / (2.0 * PI)).round();
                    Vector3::new(x, y, z)
                };
                (Box::new(imm), Box::new(move |s, t| sc.point(s, t)))
            }
            Chart::Xz => {
                check_xz_chart(p)?;
                let (x0, z0, sheet) = (p.x, p.z, p.sheet);
                let imm = move |s: f64, t: f64| {
                    let (x, z) = (x0 + s, z0 + t);
                    Vector3::new(x, xz_y_value(x, z, sheet), z)
                };
                let nrm = move |s: f64, t: f64| {
                    let (x, z) = (x0 + s, z0 + t);
                    normal_unchecked(x, xz_y_value(x, z, sheet), z)
                };
                (Box::new(imm), Box::new(nrm))
            }
        };
    let h = step;
    let x00 = immersion(0.0, 0.0);
    let d1 = |f: &dyn Fn(f64, f64) -> Vector3<f64>, i: usize| {
        let (ds, dt) = if i == 0 { (h, 0.0) } else { (0.0, h) };
        (f(ds, dt) - f(-ds, -dt)) / (2.0 * h)
    };
    let xi = [d1(&immersion, 0), d1(&immersion, 1)];
    let xss = (immersion(h, 0.0) - x00 * 2.0 + immersion(-h, 0.0)) / (h * h);
    let xtt = (immersion(0.0, h) - x00 * 2.0 + immersion(0.0, -h)) / (h * h);
    let xst = (immersion(h, h) - immersion(h, -h) - immersion(-h, h) + immersion(-h, -h)) / (4.0 * h * h);
    let mut nu = xi[0].cross(&xi[1]).normalize();
    let nu_closed = normal(0.0, 0.0);
    if nu.dot(&nu_closed) < 0.0 {
        nu = -nu;
    }
    let g = Matrix2::from_fn(|i, j| xi[i].dot(&xi[j]));
    let a = Matrix2::new(xss.dot(&nu), xst.dot(&nu), xst.dot(&nu), xtt.dot(&nu));
    let ni = [d1(&normal, 0), d1(&normal, 1)];
    let gp = Matrix2::from_fn(|i, j| ni[i].dot(&ni[j]));
    Ok(ShapeData::from_parts(chart, x00, nu, g, a, gp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn on_sheet(x: f64, z: f64, sheet: Sheet) -> SurfacePoint {
        SurfacePoint::new(x, xz_y_value(x, z, sheet), z).unwrap()
    }

    #[test]
    fn implicit_value_examples() {
        assert_eq!(implicit_value(&Vector3::zeros()), 0.0);
        let a = 1f64.asinh();
        assert!(implicit_value(&Vector3::new(a, FRAC_PI_2, a)).abs() < 1e-15);
        // sinh(1) = (e - 1/e) / 2
        let e = std::f64::consts::E;
        let s = 0.5 * (e - 1.0 / e);
        assert_relative_eq!(implicit_value(&Vector3::new(1.0, 0.0, 1.0)), -s * s, epsilon = 1e-15);
        assert_relative_eq!(implicit_value(&Vector3::new(1.0, 0.0, 1.0)), -1.3810978455418157, epsilon = 1e-12);
    }

    #[test]
    fn gauss_map_examples() {
        let n = gauss_map(&SurfacePoint::new(0.0, 0.0, 0.0).unwrap()).unwrap();
        assert_eq!(n, Vector3::new(0.0, 1.0, 0.0));
        let n = gauss_map(&SurfacePoint::new(0.0, PI, 0.0).unwrap()).unwrap();
        assert_relative_eq!(n, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        // (1, asin(sinh^2 1), 1) is off the slab of validity of asin, so use the
        // closed form with the implicit equation as the check.
        let s = 1f64.sinh();
        assert!(s * s > 1.0);
        let x = 0.8f64;
        let y = (x.sinh() * x.sinh()).asin();
        let p = SurfacePoint::new(x, y, x).unwrap();
        let n = gauss_map(&p).unwrap();
        assert_relative_eq!(n.x, -x.tanh(), epsilon = 1e-15);
        assert_relative_eq!(n.z, -x.tanh(), epsilon = 1e-15);
        assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-14);
        let h = 1e-5;
        let imm = |s: f64, t: f64| Vector3::new(x + s, xz_y_value(x + s, x + t, Sheet::A), x + t);
        let ts = (imm(h, 0.0) - imm(-h, 0.0)) / (2.0 * h);
        let tt = (imm(0.0, h) - imm(0.0, -h)) / (2.0 * h);
        assert!(ts.dot(&n).abs() < 1e-9);
        assert!(tt.dot(&n).abs() < 1e-9);
    }

    #[test]
    fn off_surface_is_rejected() {
        let p = SurfacePoint { x: 1.0, y: 0.0, z: 1.0, sheet: Sheet::A };
        assert!(matches!(gauss_map(&p), Err(Error::OffSurface { .. })));
        assert!(SurfacePoint::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn inverse_gauss_examples() {
        let phi0 = phi0_from_c0(3.0);
        let p = inverse_gauss(&Vector3::new(0.0, 1.0, 0.0), phi0).unwrap();
        assert_eq!((p.x, p.y, p.z, p.sheet), (0.0, 0.0, 0.0, Sheet::A));
        let p = inverse_gauss(&Vector3::new(0.0, -1.0, 0.0), phi0).unwrap();
        assert_relative_eq!(p.y, PI, epsilon = 1e-15);
        assert_eq!(p.sheet, Sheet::B);
        let err = inverse_gauss(&Vector3::new(0.0, 0.0, 1.0), phi0);
        assert!(matches!(err, Err(Error::PunctureProximity { .. })));
        // seam: n_y = 0 with n_x n_z < 0 gives y = -pi/2 on sheet A
        let n = Vector3::new(0.6, 0.0, -0.8);
        let p = inverse_gauss(&n, 0.1).unwrap();
        assert_eq!(p.y, -FRAC_PI_2);
        assert_eq!(p.sheet, Sheet::A);
    }

    #[test]
    fn phi0_for_c0_three() {
        // arccos(tanh 3) from tanh 3 = (e^6 - 1) / (e^6 + 1)
        let e6 = 6f64.exp();
        let expected = ((e6 - 1.0) / (e6 + 1.0)).acos();
        assert_relative_eq!(phi0_from_c0(3.0), expected, epsilon = 1e-15);
        assert!((phi0_from_c0(3.0) - 0.0993).abs() < 1e-3);
        assert_relative_eq!(c0_from_phi0(phi0_from_c0(3.0)), 3.0, epsilon = 1e-9);
    }

    #[test]
    fn symmetry_examples() {
        let (r, s) = symmetry_images(&SurfacePoint::new(0.0, 0.0, 0.0).unwrap());
        assert_eq!((r.x, r.y, r.z), (0.0, 0.0, 0.0));
        assert_relative_eq!(s.y, PI, epsilon = 1e-15);
        let a = 1f64.asinh();
        let p = SurfacePoint::new(a, FRAC_PI_2, a).unwrap();
        let (_, s) = symmetry_images(&p);
        assert_eq!(s, p);
    }

    #[test]
    fn bend_params_gate() {
        assert!(BendParams::new(0.1, 3.0, 8).is_ok());
        assert!(BendParams::new(0.2, 3.0, 8).is_err());
        assert!(BendParams::with_eta(0.01, 3.0, 8, 0.2).is_err());
        assert!(BendParams::new(0.01, 3.0, 0).is_err());
    }

    #[test]
    fn analytic_shape_data_is_minimal_and_conformal() {
        for &(x, z, sheet) in &[(0.0, 0.0, Sheet::A), (0.3, -0.5, Sheet::A), (1.2, 0.4, Sheet::B), (-2.0, 0.1, Sheet::B)] {
            let p = on_sheet(x, z, sheet);
            for chart in [Chart::Sphere, Chart::Xz] {
                let sd = shape_data(&p, chart).unwrap();
                assert!(sd.mean_curvature().abs() < 1e-10, "{chart:?} {}", sd.mean_curvature());
                assert!(sd.conformality_residual() < 1e-10);
                assert!(sd.norm_a_sq > 0.0);
                assert_relative_eq!(sd.normal, gauss_map(&p).unwrap(), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn curvature_at_origin() {
        // At the origin y = asin(x z + ...) ~ x z, so a = [[0,1],[1,0]] and |A|^2 = 2.
        let sd = shape_data(&SurfacePoint::new(0.0, 0.0, 0.0).unwrap(), Chart::Xz).unwrap();
        assert_relative_eq!(sd.norm_a_sq, 2.0, epsilon = 1e-14);
        assert_relative_eq!(sd.g, Matrix2::identity(), epsilon = 1e-14);
    }

    #[test]
    fn charts_agree_on_invariants() {
        let p = on_sheet(0.7, -0.9, Sheet::A);
        let a = shape_data(&p, Chart::Sphere).unwrap();
        let b = shape_data(&p, Chart::Xz).unwrap();
        assert_relative_eq!(a.norm_a_sq, b.norm_a_sq, max_relative = 1e-10);
        // gnomonic centre: the pulled round metric is the identity
        assert_relative_eq!(a.gauss_pullback, Matrix2::identity(), epsilon = 1e-12);
    }

    #[test]
    fn xz_chart_degenerates_near_gluing_curve() {
        let a = 1f64.asinh();
        let p = SurfacePoint::new(a, FRAC_PI_2, a).unwrap();
        assert!(matches!(shape_data(&p, Chart::Xz), Err(Error::DegenerateChart { .. })));
        assert!(shape_data(&p, Chart::Sphere).is_ok());
    }

    #[test]
    fn finite_difference_mean_curvature_converges() {
        let p = on_sheet(0.4, 0.6, Sheet::A);
        let steps = [1e-2, 5e-3, 2.5e-3];
        let hs: Vec<f64> = steps
            .iter()
            .map(|&h| shape_data_fd(&p, Chart::Xz, h).unwrap().mean_curvature().abs())
            .collect();
        for w in hs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{hs:?}");
        }
    }

    proptest! {
        #[test]
        fn gauss_round_trip(nx in -0.9f64..0.9, nz in -0.9f64..0.9, up in any::<bool>()) {
            prop_assume!(nx * nx + nz * nz < 0.999);
            let ny = (1.0 - nx * nx - nz * nz).sqrt() * if up { 1.0 } else { -1.0 };
            let n = Vector3::new(nx, ny, nz);
            let p = inverse_gauss(&n, 0.1).unwrap();
            prop_assert!(implicit_value(&p.position()).abs() < 1e-10);
            let back = gauss_map(&p).unwrap();
            prop_assert!((back - n).norm() < 1e-10);
            let again = inverse_gauss(&back, 0.1).unwrap();
            prop_assert!((again.position() - p.position()).norm() < 1e-9);
            prop_assert_eq!(p.sheet == Sheet::A, ny > 0.0);
        }

        #[test]
        fn symmetry_images_stay_on_surface(nx in -0.9f64..0.9, nz in -0.9f64..0.9, up in any::<bool>()) {
            prop_assume!(nx * nx + nz * nz < 0.999);
            let ny = (1.0 - nx * nx - nz * nz).sqrt() * if up { 1.0 } else { -1.0 };
            let n = Vector3::new(nx, ny, nz);
            let p = inverse_gauss(&n, 0.1).unwrap();
            let (r, s) = symmetry_images(&p);
            prop_assert!(implicit_value(&r.position()).abs() < 1e-12);
            prop_assert!(implicit_value(&s.position()).abs() < 1e-12);
            // sigma reflects the normal across the xz-plane, rho across the yz-plane
            let ns = gauss_map(&s).unwrap();
            prop_assert!((ns - Vector3::new(n.x, -n.y, n.z)).norm() < 1e-10);
            let nr = gauss_map(&r).unwrap();
            prop_assert!((nr - Vector3::new(-n.x, n.y, n.z)).norm() < 1e-10);
        }
    }
}
