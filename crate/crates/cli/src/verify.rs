//! The analytic-identity suite behind `shrinker verify`.

use serde::Serialize;
use shrinker_core::discretize::{build_mesh, symmetric_projector, ScalarField, SymmetryClass};
use shrinker_core::graphgeom::GraphProblem;
use shrinker_core::scherk::{inverse_gauss, phi0_from_c0, shape_data, shape_data_fd, Chart};
use shrinker_core::solver::{linearized_operator, surface_mass, weighted_norm};
use shrinker_core::spectral::supersolution_check;

pub const CHECKS: [&str; 5] = ["minimality", "conformality", "scaling", "linearization", "supersolution"];

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub refinement: u32,
    pub broken: Option<String>,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

fn result(name: &str, value: f64, threshold: f64, pass: bool, detail: String) -> CheckResult {
    CheckResult { name: name.into(), pass, value, threshold, detail }
}

/// Run every check; `broken` names one check whose measured quantity is perturbed.
pub fn run(refinement: u32, broken: Option<&str>) -> shrinker_core::Result<VerifyReport> {
    let kick = |name: &str| if broken == Some(name) { 1.0 } else { 0.0 };
    let c0 = 3.0;
    let mesh = build_mesh(phi0_from_c0(c0), refinement)?;
    let points: Vec<_> = mesh
        .interior_nodes()
        .step_by(5)
        .map(|i| inverse_gauss(&mesh.nodes[i], mesh.phi0))
        .collect::<shrinker_core::Result<_>>()?;
    let mut checks = Vec::new();

    // mean curvature of the unbent surface vanishes, second order in the difference step
    let mut maxh = Vec::new();
    for step in [4e-2, 2e-2, 1e-2] {
        let mut worst: f64 = 0.0;
        for p in &points {
            worst = worst.max((shape_data_fd(p, Chart::Sphere, step)?.mean_curvature() + kick("minimality")).abs());
        }
        maxh.push(worst);
    }
    let order = (maxh[1] / maxh[2]).log2().min((maxh[0] / maxh[1]).log2());
    checks.push(result("minimality", order, 1.8, order >= 1.8, format!("max |H| {maxh:?}")));

    let mut conf: f64 = 0.0;
    for p in &points {
        conf = conf.max(shape_data(p, Chart::Sphere)?.conformality_residual());
    }
    conf += kick("conformality");
    checks.push(result("conformality", conf, 1e-6, conf <= 1e-6, "relative defect of the Gauss pullback".into()));

    let tau = 1.0 / 16.0;
    let problem = GraphProblem::new(&mesh, tau)?;
    let projector = symmetric_projector(&mesh, SymmetryClass::XzInvYzAnti);
    let field = |k: f64| {
        let raw = ScalarField::from_fn(&mesh, |i, n| {
            if mesh.boundary_tag[i].is_boundary() { 0.0 } else { n.x * (1.0 + k * n.y * n.y - 0.5 * k * n.z) }
        });
        let f = projector.apply(&raw);
        f.scaled(1.0 / f.max_abs())
    };
    let mut scaling: f64 = 0.0;
    for k in [0.0, 1.0, 2.0] {
        let h = field(k).scaled(0.05);
        let f = problem.residual(&h)?;
        let r = problem.rescaled_residual(&h)?;
        let d = f.values.iter().zip(&r.values).map(|(a, b)| (a - tau * b).abs()).fold(0.0, f64::max);
        scaling = scaling.max(d);
    }
    scaling += 1e-6 * kick("scaling");
    checks.push(result("scaling", scaling, 1e-9, scaling <= 1e-9, "max |F - tau (H + X.nu)| at tau = 1/16".into()));

    let base = problem.at_tau(0.0)?;
    let op = linearized_operator(&base, SymmetryClass::XzInvYzAnti)?;
    let mass = surface_mass(&mesh, 0.0)?;
    let u = field(1.0);
    let lu = op.apply(&mesh, &u)?;
    let mut ratios = Vec::new();
    for eps in [1e-2, 1e-3, 1e-4] {
        let f = base.residual(&u.scaled(eps))?;
        let err = ScalarField { values: f.values.iter().zip(&lu.values).map(|(a, b)| a - eps * (1.0 + kick("linearization")) * b).collect() };
        ratios.push(weighted_norm(&mesh, &mass, &err) / (eps * eps));
    }
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(result("linearization", spread, 3.0, spread <= 3.0, format!("ratios {ratios:?}")));

    let s = supersolution_check(0.2, 0.02, 10_000)?;
    let value = s.max_value + 10.0 * kick("supersolution");
    checks.push(result(
        "supersolution",
        value,
        0.0,
        value < 0.0 && s.admissibility < 0.0,
        format!("admissibility {}", s.admissibility),
    ));

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport { refinement, broken: broken.map(str::to_string), checks, pass })
}
