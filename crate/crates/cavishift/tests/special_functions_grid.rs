use cavishift::oracle_suite::highprec::{highprec_reference, HpFunction};
use cavishift::special_functions::{bessel_j, bessel_j_deriv, hankel1, hankel1_deriv};
use num_complex::Complex64;
use std::f64::consts::PI;

fn grid() -> Vec<Complex64> {
    let mut pts = Vec::new();
    for i in 0..10 {
        for j in 0..10 {
            let re = -50.0 + 100.0 * (i as f64 + 0.37) / 10.0;
            let im = -20.0 + 40.0 * (j as f64 + 0.61) / 10.0;
            pts.push(Complex64::new(re, im));
        }
    }
    pts
}

#[test]
fn grid_against_high_precision() {
    let mut worst: f64 = 0.0;
    for z in grid() {
        for n in [0, 1, 2, 5] {
            let j = bessel_j(n, z).unwrap();
            let jr = highprec_reference(HpFunction::BesselJ(n), z).unwrap().to_c64();
            let h = hankel1(n, z).unwrap();
            let hr = highprec_reference(HpFunction::Hankel1(n), z).unwrap().to_c64();
            let ej = (j - jr).norm() / jr.norm();
            let eh = (h - hr).norm() / hr.norm();
            if ej.max(eh) > 1e-11 {
                println!("z={z} n={n} ej={ej:.2e} eh={eh:.2e}");
            }
            worst = worst.max(ej).max(eh);
        }
    }
    println!("worst {worst:e}");
    assert!(worst <= 1e-10);
}

#[test]
fn grid_wronskian() {
    for z in grid() {
        for n in [0, 1, 3] {
            let w = bessel_j(n, z).unwrap() * hankel1_deriv(n, z).unwrap()
                - bessel_j_deriv(n, z).unwrap() * hankel1(n, z).unwrap();
            let expect = Complex64::new(0.0, 2.0) / (PI * z);
            let scale = (bessel_j(n, z).unwrap() * hankel1_deriv(n, z).unwrap()).norm().max(expect.norm());
            let rel = (w - expect).norm() / scale;
            assert!(rel <= 1e-10, "z={z} n={n} rel={rel:e}");
        }
    }
}
