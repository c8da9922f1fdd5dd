//! Acceptance suite: one line per criterion, nonzero exit if any criterion fails.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shrinker_core::discretize::{build_closed_sphere, build_mesh, symmetric_projector, Mesh, ScalarField, SymmetryClass};
use shrinker_core::graphgeom::{GraphProblem, DEFAULT_DELTA};
use shrinker_core::scherk::{inverse_gauss, phi0_from_c0, shape_data, shape_data_fd, Chart};
use shrinker_core::solver::{
    linearized_operator, newton_solve, random_symmetric_trace, solve_core, surface_mass, weighted_norm, CoreConfig,
    JacobianMode, SolveConfig,
};
use shrinker_core::spectral::{
    class_spectrum, closed_sphere_spectrum, correlation, kernel_check_on, round_system, supersolution_check,
    EigenSettings,
};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok { Ok(detail) } else { Err(detail) }
}

fn sci(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ")
}

fn c0_mesh(r: u32) -> Mesh {
    build_mesh(phi0_from_c0(3.0), r).expect("mesh")
}

/// Smooth random field in the construction's class, zero on the boundary.
fn random_symmetric_field(mesh: &Mesh, seed: u64, amplitude: f64) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
    let raw = ScalarField::from_fn(mesh, |i, n| {
        if mesh.boundary_tag[i].is_boundary() {
            return 0.0;
        }
        n.x * (c[0] + c[1] * n.y * n.y + c[2] * n.z + c[3] * n.x * n.x + c[4] * n.z * n.z + c[5] * n.y)
    });
    let f = symmetric_projector(mesh, SymmetryClass::XzInvYzAnti).apply(&raw);
    f.scaled(amplitude / f.max_abs())
}

fn minimality() -> Outcome {
    let mesh = build_mesh(phi0_from_c0(3.0), 3).map_err(|e| e.to_string())?;
    let points: Vec<_> = mesh.interior_nodes().step_by(5).map(|i| inverse_gauss(&mesh.nodes[i], mesh.phi0).unwrap()).collect();
    let steps = [4e-2, 2e-2, 1e-2];
    let maxh: Vec<f64> = steps
        .iter()
        .map(|&s| {
            points
                .iter()
                .map(|p| shape_data_fd(p, Chart::Sphere, s).unwrap().mean_curvature().abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let orders: Vec<f64> = maxh.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let order = orders.iter().cloned().fold(f64::INFINITY, f64::min);
    check(order >= 1.8, format!("max |H| [{}] over {} points, observed order {order:.3}", sci(&maxh), points.len()))
}

fn conformality() -> Outcome {
    let mesh = build_mesh(phi0_from_c0(3.0), 4).map_err(|e| e.to_string())?;
    let worst = mesh
        .interior_nodes()
        .map(|i| {
            let p = inverse_gauss(&mesh.nodes[i], mesh.phi0).unwrap();
            shape_data(&p, Chart::Sphere).unwrap().conformality_residual()
        })
        .fold(0.0, f64::max);
    check(worst <= 1e-6, format!("worst relative defect {worst:.3e} over {} nodes", mesh.interior_nodes().count()))
}

fn closed_sphere() -> Outcome {
    let r = closed_sphere_spectrum(4, SymmetryClass::All, 9).map_err(|e| e.to_string())?;
    let exact = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
    let values_ok = r.eigenvalues.iter().zip(exact).all(|(l, e)| if e == 0.0 { l.abs() <= 0.02 } else { (l / e - 1.0).abs() <= 0.02 });
    let residuals_ok = r.residuals.iter().all(|&x| x <= 1e-8);

    let mesh = build_closed_sphere(4).map_err(|e| e.to_string())?;
    let sys = round_system(&mesh).map_err(|e| e.to_string())?;
    let cases: [(SymmetryClass, &str, fn(&nalgebra::Vector3<f64>) -> f64); 3] = [
        (SymmetryClass::XzInvYzAnti, "x", |n| n.x),
        (SymmetryClass::XzAntiYzInv, "y", |n| n.y),
        (SymmetryClass::XzInvYzInv, "z", |n| n.z),
    ];
    let mut fields = Vec::new();
    let mut fields_ok = true;
    for (class, name, f) in cases {
        let s = class_spectrum(&mesh, class, 3, EigenSettings::default()).map_err(|e| e.to_string())?;
        let target: Vec<f64> = mesh.nodes.iter().map(f).collect();
        let best = s
            .eigenvalues
            .iter()
            .zip(&s.eigenfields)
            .filter(|(l, _)| (*l / 2.0 - 1.0).abs() <= 0.02)
            .map(|(_, u)| correlation(&sys, &u.values, &target))
            .fold(0.0, f64::max);
        fields_ok &= best > 0.999;
        fields.push(format!("{name} in {class}: {best:.6}"));
    }
    check(
        values_ok && residuals_ok && fields_ok,
        format!("eigenvalues {:.4?}; eigenfield correlations {}", r.eigenvalues, fields.join(", ")),
    )
}

fn punctured_gap() -> Outcome {
    let phis = [0.3, 0.15, 0.075];
    let mut lambdas = Vec::new();
    let mut gaps = Vec::new();
    for &phi0 in &phis {
        let mesh = build_mesh(phi0, 5).map_err(|e| e.to_string())?;
        let s = class_spectrum(&mesh, SymmetryClass::XzInvYzAnti, 1, EigenSettings::default()).map_err(|e| e.to_string())?;
        let k = kernel_check_on(&mesh, SymmetryClass::XzInvYzAnti).map_err(|e| e.to_string())?;
        lambdas.push(s.eigenvalues[0]);
        gaps.push(k.gap);
    }
    let in_window = lambdas.iter().all(|&l| 0.5 < l && l < 2.5);
    let decreasing = lambdas.windows(2).all(|w| w[1] < w[0]) && lambdas.iter().all(|&l| l > 2.0);
    let gap_ok = gaps.iter().all(|&g| g > 0.05);
    check(
        in_window && decreasing && gap_ok,
        format!(
            "phi0 {phis:?}: lambda_1 {lambdas:.4?} (in (1/2, 5/2): {in_window}, decreasing toward 2: {decreasing}), gaps {gaps:.4?} (> 0.05: {gap_ok})"
        ),
    )
}

fn supersolution() -> Outcome {
    let r = supersolution_check(0.2, 0.02, 10_000).map_err(|e| e.to_string())?;
    check(
        r.max_value < 0.0 && r.admissibility < 0.0 && (r.admissibility + 4.13).abs() < 0.01,
        format!("max(Delta zeta + 2 zeta) = {:.4} over {} points, -cot(0.2) + 0.8 = {:.4}", r.max_value, r.points, r.admissibility),
    )
}

fn scaling_identity() -> Outcome {
    let mesh = c0_mesh(4);
    let tau = 1.0 / 16.0;
    let problem = GraphProblem::new(&mesh, tau).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let h = random_symmetric_field(&mesh, 100 + seed, 0.05);
        let f = problem.residual(&h).map_err(|e| e.to_string())?;
        let r = problem.rescaled_residual(&h).map_err(|e| e.to_string())?;
        let d = f.values.iter().zip(&r.values).map(|(a, b)| (a - tau * b).abs()).fold(0.0, f64::max);
        worst = worst.max(d);
    }
    check(worst <= 1e-9, format!("max |F - tau (H + X.nu)| = {worst:.3e} over 5 fields, tau = 1/16"))
}

fn linearization() -> Outcome {
    let mesh = c0_mesh(4);
    let problem = GraphProblem::new(&mesh, 0.0).map_err(|e| e.to_string())?;
    let op = linearized_operator(&problem, SymmetryClass::XzInvYzAnti).map_err(|e| e.to_string())?;
    let mass = surface_mass(&mesh, 0.0).map_err(|e| e.to_string())?;
    let u = random_symmetric_field(&mesh, 7, 1.0);
    let lu = op.apply(&mesh, &u).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&eps| {
            let f = problem.residual(&u.scaled(eps)).unwrap();
            let err = ScalarField { values: f.values.iter().zip(&lu.values).map(|(a, b)| a - eps * b).collect() };
            weighted_norm(&mesh, &mass, &err) / (eps * eps)
        })
        .collect();
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    check(hi / lo <= 3.0, format!("||F(eps u) - eps L u|| / eps^2 = [{}], spread {:.3}", sci(&ratios), hi / lo))
}

fn newton() -> Outcome {
    let mesh = c0_mesh(4);
    let f = random_symmetric_trace(&mesh, SymmetryClass::XzInvYzAnti, 2024, 1e-3);
    let cfg = SolveConfig { tau: 1.0 / 16.0, refinement: 4, jacobian_mode: JacobianMode::ChordAtBase, ..SolveConfig::default() };
    let r = newton_solve(&mesh, &f, &cfg).map_err(|e| e.to_string())?;
    let zero = newton_solve(&mesh, &ScalarField::zeros(mesh.nodes.len()), &SolveConfig { tau: 0.0, ..cfg })
        .map_err(|e| e.to_string())?;
    let ok = r.final_residual() <= 1e-9
        && r.iterations <= 12
        && r.symmetry_defect <= 1e-12
        && r.embedded
        && r.embeddedness.max_abs_h < DEFAULT_DELTA
        && r.embeddedness.intersections == 0
        && zero.iterations == 1
        && zero.h.max_abs() <= 1e-12;
    check(
        ok,
        format!(
            "{} iterations, residual {:.3e}, symmetry defect {:.1e}, max|h| {:.4}, intersections {}; zero data: {} step, max|h| {:.1e}",
            r.iterations,
            r.final_residual(),
            r.symmetry_defect,
            r.embeddedness.max_abs_h,
            r.embeddedness.intersections,
            zero.iterations,
            zero.h.max_abs()
        ),
    )
}

fn core_assembly() -> Outcome {
    let n = 8;
    let mesh = c0_mesh(4);
    let cfg = CoreConfig::default();
    let core = solve_core(n, 3.0, &ScalarField::zeros(mesh.nodes.len()), &mesh, &cfg).map_err(|e| e.to_string())?;
    let tol = cfg.solve.newton_tol;
    let ok = core.euler_characteristic == -2 * n as i64
        && core.boundary_components == 4
        && core.mirror_defect <= 1e-10
        && core.rotation_defect <= 1e-10
        && core.rescaled_residual_norm <= 16.0 * tol;
    check(
        ok,
        format!(
            "chi = {} (expected -2N = {}), {} boundary loops, genus {}, mirror defect {:.1e}, rotation defect {:.1e}, rescaled residual {:.3e} (bound {:.1e}), {} Newton steps",
            core.euler_characteristic,
            -2 * n as i64,
            core.boundary_components,
            core.genus,
            core.mirror_defect,
            core.rotation_defect,
            core.rescaled_residual_norm,
            16.0 * tol,
            core.solve.as_ref().map_or(0, |s| s.iterations)
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("minimality", minimality),
        ("conformality", conformality),
        ("closed-sphere spectrum", closed_sphere),
        ("punctured-sphere gap", punctured_gap),
        ("supersolution", supersolution),
        ("scaling identity", scaling_identity),
        ("linearization order", linearization),
        ("newton solve", newton),
        ("core assembly", core_assembly),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({secs:.1}s): {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
