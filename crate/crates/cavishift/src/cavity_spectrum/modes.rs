use super::operator::area_potentials;
use super::resonance::ResonanceRecord;
use super::{Result, SpectrumError};
use crate::geometry::{BoundaryIntegrator, BoundarySample, Point, Shape2D, VolumeQuadrature};
use crate::special_functions::gamma2d_radial;
use num_complex::Complex64;

/// Nodes closer than this to the evaluation point are treated as the point
/// itself (their contribution vanishes after singularity subtraction).
const SAME_POINT: f64 = 1e-12;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Evaluates a resonant mode and its gradient at interior points from the
/// integral representation `e = alpha(omega0) K[e]`.
pub struct ModeEvaluator {
    quad: VolumeQuadrature,
    mode: Vec<Complex64>,
    beta: Complex64,
    k: Complex64,
    shape: Shape2D,
    integrator: BoundaryIntegrator,
    min_distance: f64,
}

impl ModeEvaluator {
    pub fn new(record: &ResonanceRecord) -> Result<Self> {
        let quad = record.quadrature()?;
        let min_distance = 2.0 * quad.spacing();
        Ok(ModeEvaluator {
            mode: record.mode.clone(),
            beta: record.cavity.alpha(record.omega0),
            k: record.cavity.wavenumber(record.omega0),
            shape: record.cavity.shape.clone(),
            integrator: BoundaryIntegrator::new(&record.cavity.shape),
            quad,
            min_distance,
        })
    }

    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    /// `(e(z), grad e(z))` for `z` inside, at least two node spacings from
    /// the boundary.
    ///
    /// The value solves `e(z) (1 + beta (I(z) - sum w Gamma)) = -beta sum w Gamma e_l`;
    /// the gradient subtracts the first-order Taylor polynomial of `e` at `z`
    /// from the density, which leaves an `O(r)` integrand, and adds back the
    /// exact moments `P = grad I` and `Q_ij = int d_i Gamma(z - y) (y - z)_j dy`
    /// as boundary integrals.
    pub fn value_and_gradient(&self, z: Point) -> Result<(Complex64, [Complex64; 2])> {
        if !self.shape.contains(z) {
            return Err(SpectrumError::WrongSide(z));
        }
        let (distance, _) = self.shape.distance_to_boundary(z);
        if distance < self.min_distance {
            return Err(SpectrumError::NearBoundary {
                point: z,
                distance,
                required: self.min_distance,
            });
        }
        let beta = self.beta;
        let k = self.k;
        let mut s_g = czero();
        let mut s_ge = czero();
        for ((x, w), e) in self.quad.nodes.iter().zip(&self.quad.weights).zip(&self.mode) {
            let r = (z[0] - x[0]).hypot(z[1] - x[1]);
            if r < SAME_POINT {
                continue;
            }
            let g = gamma2d_radial(k, r).0 * *w;
            s_g += g;
            s_ge += g * e;
        }
        let i_z = area_potentials(&self.shape, &[z], k)[0].0;
        let ez = -beta * s_ge / (1.0 + beta * (i_z - s_g));

        // sum w grad Gamma (e_l - e(z)) and sum w grad Gamma (x_l - z)^T
        let mut s_de = [czero(); 2];
        let mut s_dx = [[czero(); 2]; 2];
        for ((x, w), e) in self.quad.nodes.iter().zip(&self.quad.weights).zip(&self.mode) {
            let d = [z[0] - x[0], z[1] - x[1]];
            let r = d[0].hypot(d[1]);
            if r < SAME_POINT {
                continue;
            }
            let dr = gamma2d_radial(k, r).1 * (*w / r);
            let grad = [dr * d[0], dr * d[1]];
            let de = e - ez;
            for i in 0..2 {
                s_de[i] += grad[i] * de;
                for j in 0..2 {
                    s_dx[i][j] += grad[i] * (-d[j]);
                }
            }
        }
        // P_i = -oint Gamma nu_i, Q_ij = -oint Gamma (y - z)_j nu_i + delta_ij I
        let b = self.integrator.integrate(z, &|s: &BoundarySample| {
            let d = [s.pos[0] - z[0], s.pos[1] - z[1]];
            let g = gamma2d_radial(k, d[0].hypot(d[1])).0;
            [
                -g * s.normal[0],
                -g * s.normal[1],
                -g * d[0] * s.normal[0],
                -g * d[1] * s.normal[0],
                -g * d[0] * s.normal[1],
                -g * d[1] * s.normal[1],
            ]
        });
        let p = [b[0], b[1]];
        let q = [[b[2] + i_z, b[3]], [b[4], b[5] + i_z]];
        let mut a = [[czero(); 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let id = if i == j { 1.0 } else { 0.0 };
                a[i][j] = id + beta * (q[i][j] - s_dx[i][j]);
            }
        }
        let rhs = [-beta * (s_de[0] + ez * p[0]), -beta * (s_de[1] + ez * p[1])];
        let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
        let g = [
            (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det,
            (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
        ];
        Ok((ez, g))
    }
}

/// One-shot wrapper around [`ModeEvaluator`].
pub fn mode_value_and_gradient(record: &ResonanceRecord, z: Point) -> Result<(Complex64, [Complex64; 2])> {
    ModeEvaluator::new(record)?.value_and_gradient(z)
}

/// Exterior field `g(x) = alpha(omega0) int_Omega e(y) Gamma(x - y) dy`,
/// i.e. the outgoing continuation of `-e` outside the cavity.
pub struct ExteriorMode {
    quad: VolumeQuadrature,
    mode: Vec<Complex64>,
    beta: Complex64,
    k: Complex64,
    shape: Shape2D,
    min_distance: f64,
}

pub fn exterior_mode(record: &ResonanceRecord) -> Result<ExteriorMode> {
    let quad = record.quadrature()?;
    // the exterior sum has a smooth integrand; trapezoid error in the angle
    // decays like exp(-2 pi distance / spacing)
    Ok(ExteriorMode {
        min_distance: quad.spacing(),
        quad,
        mode: record.mode.clone(),
        beta: record.cavity.alpha(record.omega0),
        k: record.cavity.wavenumber(record.omega0),
        shape: record.cavity.shape.clone(),
    })
}

impl ExteriorMode {
    pub fn value_and_gradient(&self, x: Point) -> Result<(Complex64, [Complex64; 2])> {
        if self.shape.contains(x) {
            return Err(SpectrumError::WrongSide(x));
        }
        let (distance, _) = self.shape.distance_to_boundary(x);
        if distance < self.min_distance {
            return Err(SpectrumError::NearBoundary {
                point: x,
                distance,
                required: self.min_distance,
            });
        }
        let mut g = czero();
        let mut grad = [czero(); 2];
        for ((y, w), e) in self.quad.nodes.iter().zip(&self.quad.weights).zip(&self.mode) {
            let d = [x[0] - y[0], x[1] - y[1]];
            let r = d[0].hypot(d[1]);
            let (gv, gr) = gamma2d_radial(self.k, r);
            let we = e * *w;
            g += gv * we;
            grad[0] += gr * (d[0] / r) * we;
            grad[1] += gr * (d[1] / r) * we;
        }
        Ok((self.beta * g, [self.beta * grad[0], self.beta * grad[1]]))
    }

    pub fn value(&self, x: Point) -> Result<Complex64> {
        Ok(self.value_and_gradient(x)?.0)
    }
}
