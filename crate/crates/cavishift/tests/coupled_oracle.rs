//! Coupled cavity/particle solver against the Nyström pipeline, the
//! multilayer oracle and the small-particle prediction.

use cavishift::cavity_spectrum::{exterior_mode, find_resonance, BranchSeed, CavityConfig};
use cavishift::geometry::{build_boundary_quadrature, build_volume_quadrature, Shape2D};
use cavishift::oracle_suite::coupled::{coupled_perturbed_resonance, CoupledOptions};
use cavishift::oracle_suite::multilayer::{multilayer_disk_resonances, Layer, RadialLayerStack, SearchWindow};
use cavishift::particle_ops::{polarization_tensor, ParticleConfig, Permeability, Position};
use cavishift::shift_predictor::external_shift;
use cavishift::special_functions::Medium;
use num_complex::Complex64;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn disk() -> CavityConfig {
    CavityConfig::new(Shape2D::disk(1.0), 1.0, 1.0, 1.0, 10.0)
}

fn particle(delta: f64, center: [f64; 2], mu_c: f64, position: Position) -> ParticleConfig {
    ParticleConfig::new(Shape2D::disk(1.0), delta, center, Permeability::Constant { mu_c }, position)
}

#[test]
fn external_particle_matches_prediction() {
    let cav = disk();
    let res = 24;
    let q = build_volume_quadrature(&cav.shape, res).unwrap();
    let rec = find_resonance(&cav, &q, c(0.26, -0.11), BranchSeed::Nearest, Default::default()).unwrap();
    let opts = CoupledOptions::default();
    let base = coupled_perturbed_resonance(&cav, &particle(0.02, [1.5, 0.0], 1.0, Position::External), res, 12, rec.omega0, &opts)
        .unwrap();
    // without contrast the coupled system is the bare cavity
    assert!((base.omega - rec.omega0).norm() < 1e-9 * rec.omega0.norm(), "{} {}", base.omega, rec.omega0);
    let p = particle(0.02, [1.5, 0.0], 0.5, Position::External);
    let pert = coupled_perturbed_resonance(&cav, &p, res, 12, rec.omega0, &opts).unwrap();
    let m = polarization_tensor(&build_boundary_quadrature(&Shape2D::disk(1.0), 128).unwrap(), c(2.0, 0.0)).unwrap();
    let pred = external_shift(&rec, &exterior_mode(&rec).unwrap(), &p, &m).unwrap().leading();
    let shift = pert.omega - base.omega;
    assert!((shift - pred).norm() < 1e-2 * shift.norm(), "{shift} vs {pred}");
}

#[test]
fn concentric_particle_matches_multilayer() {
    let delta = 0.1;
    let stack = |mu_c: f64| RadialLayerStack {
        layers: vec![
            Layer { radius: delta, eps: 11.0, mu: mu_c },
            Layer { radius: 1.0, eps: 11.0, mu: 1.0 },
        ],
        outer: Medium::new(1.0, 1.0),
        order: 1,
    };
    let win = SearchWindow::around(c(0.6885, -0.0662), 0.03, 0.03);
    let w0 = multilayer_disk_resonances(&stack(1.0), &win).unwrap()[0];
    let wd = multilayer_disk_resonances(&stack(0.5), &win).unwrap()[0];
    let cav = disk();
    let opts = CoupledOptions::default();
    let base = coupled_perturbed_resonance(&cav, &particle(delta, [0.0, 0.0], 1.0, Position::Internal), 24, 12, w0, &opts)
        .unwrap();
    let pert = coupled_perturbed_resonance(&cav, &particle(delta, [0.0, 0.0], 0.5, Position::Internal), 24, 12, w0, &opts)
        .unwrap();
    assert!((pert.omega - wd).norm() < 1e-3 * wd.norm(), "{} {}", pert.omega, wd);
    let (shift, exact) = (pert.omega - base.omega, wd - w0);
    assert!((shift - exact).norm() < 1e-2 * exact.norm(), "{shift} vs {exact}");
}
