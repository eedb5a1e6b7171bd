//! Nyström pipeline on the unit disk against the radial and multilayer oracles.

use cavishift::cavity_spectrum::{
    assemble_k, default_probes, eigenpairs, exterior_mode, extract_residue, find_resonance, track_branch,
    BranchSeed, CavityConfig, ModeEvaluator, SpectrumError,
};
use cavishift::geometry::{build_volume_quadrature, Shape2D};
use cavishift::oracle_suite::multilayer::{multilayer_disk_resonances, RadialLayerStack, SearchWindow};
use cavishift::oracle_suite::radial::{disk_operator_eigenvalue, disk_pole_data};
use cavishift::special_functions::Medium;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn disk() -> CavityConfig {
    CavityConfig::new(Shape2D::disk(1.0), 1.0, 1.0, 1.0, 10.0)
}

fn oracle_root(order: i32, guess: Complex64) -> Complex64 {
    let s = RadialLayerStack::disk(1.0, 11.0, 1.0, Medium::new(1.0, 1.0), order);
    multilayer_disk_resonances(&s, &SearchWindow::around(guess, 0.05, 0.04)).unwrap()[0]
}

#[test]
fn eigenvalues_match_radial_reduction() {
    let cav = disk();
    let q = build_volume_quadrature(&cav.shape, 24).unwrap();
    let w = c(0.69, 0.0);
    let op = assemble_k(&cav, &q, w).unwrap();
    let pairs = eigenpairs(&op, 6).unwrap();
    // monopole (n = 0) and the dipole pair (n = 1)
    let l0 = disk_operator_eigenvalue(0, w, 1.0, pairs[0].lambda).unwrap();
    let l1 = disk_operator_eigenvalue(1, w, 1.0, pairs[1].lambda).unwrap();
    assert!((pairs[0].lambda - l0).norm() < 1e-4 * l0.norm(), "{} {}", pairs[0].lambda, l0);
    assert!((pairs[1].lambda - l1).norm() < 1e-4 * l1.norm(), "{} {}", pairs[1].lambda, l1);
    assert!((pairs[2].lambda - l1).norm() < 1e-4 * l1.norm());
}

#[test]
fn branch_along_real_axis_matches_oracle() {
    let cav = disk();
    let q = build_volume_quadrature(&cav.shape, 24).unwrap();
    let path: Vec<Complex64> = (0..6).map(|j| c(0.5 + 0.05 * j as f64, 0.0)).collect();
    let b = track_branch(&cav, &q, BranchSeed::Rank { index: 0 }, &path).unwrap();
    let mut seed = b.samples[0].lambda;
    for s in &b.samples {
        let l = disk_operator_eigenvalue(0, s.omega, 1.0, seed).unwrap();
        assert!((s.lambda - l).norm() < 1e-4 * l.norm());
        seed = l;
    }
}

#[test]
fn monopole_resonance_pole_data_and_gradient() {
    let cav = disk();
    let q = build_volume_quadrature(&cav.shape, 24).unwrap();
    let exact = oracle_root(0, c(0.25, -0.12));
    let rec = find_resonance(&cav, &q, c(0.26, -0.11), BranchSeed::Nearest, Default::default()).unwrap();
    assert!((rec.omega0 - exact).norm() / exact.norm() < 1e-4, "{} {}", rec.omega0, exact);
    let pole = disk_pole_data(0, exact, 1.0, 1.0, 1.0, 10.0).unwrap();
    assert!((rec.c - pole.c).norm() / pole.c.norm() < 1e-3, "{} {}", rec.c, pole.c);
    let ev = ModeEvaluator::new(&rec).unwrap();
    let (_, g) = ev.value_and_gradient([0.0, 0.0]).unwrap();
    assert!(g[0].norm() < 1e-6 && g[1].norm() < 1e-6, "{g:?}");
    // representation reproduces a stored nodal sample
    let idx = (q.radial / 3) * q.angular + 3;
    let (v, _) = ev.value_and_gradient(q.nodes[idx]).map_err(|e| format!("{e:?} {:?}", q.nodes[idx])).unwrap();
    assert!((v - rec.mode[idx]).norm() < 1e-6 * rec.mode[idx].norm());
    assert!(matches!(
        ev.value_and_gradient([0.999, 0.0]),
        Err(SpectrumError::NearBoundary { .. })
    ));
}

#[test]
fn dipole_gradient_matches_radial_oracle() {
    let cav = disk();
    let q = build_volume_quadrature(&cav.shape, 32).unwrap();
    let exact = oracle_root(1, c(0.69, -0.066));
    let rec = find_resonance(&cav, &q, c(0.7, -0.06), BranchSeed::Nearest, Default::default()).unwrap();
    assert!((rec.omega0 - exact).norm() / exact.norm() < 1e-4);
    let pole = disk_pole_data(1, exact, 1.0, 1.0, 1.0, 10.0).unwrap();
    let (_, g) = ModeEvaluator::new(&rec).unwrap().value_and_gradient([0.0, 0.0]).unwrap();
    let gg = g[0] * g[0] + g[1] * g[1];
    eprintln!("grad^2 {gg} oracle {}  c {} oracle {}", pole.center_gradient_sq, rec.c, pole.c);
    assert!((gg - pole.center_gradient_sq).norm() / pole.center_gradient_sq.norm() < 1e-3);
    assert!((rec.c - pole.c).norm() / pole.c.norm() < 1e-3);
}

#[test]
fn residue_contour_route() {
    let cav = disk();
    let q = build_volume_quadrature(&cav.shape, 16).unwrap();
    let rec = find_resonance(&cav, &q, c(0.25, -0.12), BranchSeed::Nearest, Default::default()).unwrap();
    let probes = default_probes(&q, 8);
    let rho = 0.1 * rec.omega0.im.abs();
    let r = extract_residue(&rec, rho, 32, &probes).unwrap();
    eprintln!(
        "sigma {:.3e} asym {:.3e} winding {} remainder {:.3e} agreement {:.3e} c {} {}",
        r.sigma_ratio, r.asymmetry, r.winding, r.remainder_ratio, r.agreement, r.c_contour, r.c_analytic
    );
    assert!(r.sigma_ratio <= 1e-3);
    assert!(r.asymmetry <= 1e-8);
    assert_eq!(r.winding, 1);
    assert!(r.agreement <= 1e-3);
    // the dipole is doubly degenerate on the disk: the rank-one test must fail
    let recd = find_resonance(&cav, &q, c(0.69, -0.066), BranchSeed::Nearest, Default::default()).unwrap();
    let rho = 0.1 * recd.omega0.im.abs();
    assert!(matches!(
        extract_residue(&recd, rho, 32, &probes),
        Err(SpectrumError::NotRankOne { .. })
    ));
}

#[test]
fn exterior_field_is_outgoing() {
    let cav = disk();
    let q = build_volume_quadrature(&cav.shape, 16).unwrap();
    let rec = find_resonance(&cav, &q, c(0.69, -0.066), BranchSeed::Nearest, Default::default()).unwrap();
    let g = exterior_mode(&rec).unwrap();
    let k = cav.wavenumber(rec.omega0);
    let x = [1.8, 0.5];
    let h = 1e-3;
    let f = |dx: f64, dy: f64| g.value([x[0] + dx, x[1] + dy]).map_err(|e| format!("{e:?}")).unwrap();
    let lap = (f(h, 0.0) + f(-h, 0.0) + f(0.0, h) + f(0.0, -h) - 4.0 * f(0.0, 0.0)) / (h * h);
    assert!((lap + k * k * f(0.0, 0.0)).norm() < 1e-5 * f(0.0, 0.0).norm());
    let (_, grad) = g.value_and_gradient(x).unwrap();
    let fdx = (f(1e-6, 0.0) - f(-1e-6, 0.0)) / 2e-6;
    assert!((fdx - grad[0]).norm() < 1e-6 * grad[0].norm().max(1.0));
    // far field: |g| sqrt(r) / |exp(i k r)| tends to a constant
    let amp = |r: f64| g.value([r, 0.0]).unwrap().norm() * r.sqrt() / (c(0.0, 1.0) * k * r).exp().norm();
    let (a1, a2) = (amp(40.0), amp(80.0));
    assert!((a1 - a2).abs() < 0.02 * a2, "{a1} {a2}");
    assert!(g.value([0.5, 0.0]).is_err());
}
