use shrinker_core::discretize::{build_mesh, ScalarField, SymmetryClass};
use shrinker_core::io::{read_obj, read_ply, write_obj, write_ply};
use shrinker_core::scherk::phi0_from_c0;
use shrinker_core::solver::{random_symmetric_trace, solve_core, topology, CoreConfig, SolveConfig};
use shrinker_core::Error;

#[test]
fn solved_core_survives_a_file_round_trip() {
    let n = 8;
    let mesh = build_mesh(phi0_from_c0(3.0), 3).unwrap();
    let cfg = CoreConfig { solve: SolveConfig { refinement: 3, ..SolveConfig::default() }, ..CoreConfig::default() };
    let f = random_symmetric_trace(&mesh, SymmetryClass::XzInvYzAnti, 5, 5e-6);
    let core = solve_core(n, 3.0, &f, &mesh, &cfg).unwrap();
    let solve = core.solve.as_ref().unwrap();
    assert!(solve.final_residual() <= 1e-9);
    // at tau = 1/8 the graph leaves the delta band, so only the intersection scan is asserted
    assert_eq!(solve.embeddedness.intersections, 0);

    let dir = tempfile::tempdir().unwrap();
    write_obj(dir.path().join("core.obj"), &core.vertices, &core.triangles).unwrap();
    write_ply(dir.path().join("core.ply"), &core.vertices, &core.triangles, Some(&core.h_tilde)).unwrap();
    let (v, t) = read_obj(dir.path().join("core.obj")).unwrap();
    assert_eq!(v, core.vertices);
    assert_eq!(topology(v.len(), &t), (-2 * n as i64, 4));
    let ply = read_ply(dir.path().join("core.ply")).unwrap();
    assert_eq!(ply.triangles, core.triangles);
    assert_eq!(ply.scalar.unwrap(), core.h_tilde);
}

#[test]
fn oversized_or_asymmetric_data_is_refused() {
    let mesh = build_mesh(phi0_from_c0(3.0), 3).unwrap();
    let cfg = CoreConfig { solve: SolveConfig { refinement: 3, ..SolveConfig::default() }, ..CoreConfig::default() };
    let big = random_symmetric_trace(&mesh, SymmetryClass::XzInvYzAnti, 5, 1e-3);
    assert!(matches!(solve_core(8, 3.0, &big, &mesh, &cfg), Err(Error::BoundaryData(_))));

    let wrong = random_symmetric_trace(&mesh, SymmetryClass::XzAntiYzInv, 5, 1e-6);
    assert!(matches!(solve_core(8, 3.0, &wrong, &mesh, &cfg), Err(Error::ReflectionMismatch { .. })));

    let zero = ScalarField::zeros(mesh.nodes.len());
    assert!(matches!(solve_core(4, 3.0, &zero, &mesh, &cfg), Err(Error::InvalidParameter(_))));
}
