//! Smooth 2D shapes, volume and boundary quadratures, and stable shape
//! hashing for operator caches.
//!
//! Every supported shape is star-shaped about its center and described by a
//! boundary curve `p(t)`, `t in [0, 2 pi)`, traversed counterclockwise in the
//! shape's local frame. The interior is parametrized by `x = c + R (rho p(t))`
//! with `rho in [0, 1]`, which gives a tensor Gauss-Legendre (radial) x
//! trapezoid (angular) volume rule that is spectrally accurate for smooth
//! integrands.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use thiserror::Error;

pub type Point = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid shape parameters: {0}")]
    InvalidShape(String),
    #[error("invalid quadrature request: {0}")]
    InvalidQuadrature(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeKind {
    Disk {
        radius: f64,
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    /// `r(t) = r0 + sum_m (cos_m[m-1] cos(m t) + sin_m[m-1] sin(m t))`.
    Star {
        r0: f64,
        #[serde(default)]
        cos_m: Vec<f64>,
        #[serde(default)]
        sin_m: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shape2D {
    #[serde(flatten)]
    pub kind: ShapeKind,
    #[serde(default)]
    pub center: Point,
    #[serde(default)]
    pub rotation: f64,
}

/// Boundary sample: position, outward unit normal, and `|p'(t)|`.
#[derive(Clone, Copy, Debug)]
pub struct BoundarySample {
    pub pos: Point,
    pub normal: Point,
    pub speed: f64,
}

impl Shape2D {
    pub fn disk(radius: f64) -> Self {
        Shape2D {
            kind: ShapeKind::Disk { radius },
            center: [0.0, 0.0],
            rotation: 0.0,
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Shape2D {
            kind: ShapeKind::Ellipse { a, b },
            center: [0.0, 0.0],
            rotation: 0.0,
        }
    }

    pub fn star(r0: f64, cos_m: Vec<f64>, sin_m: Vec<f64>) -> Self {
        Shape2D {
            kind: ShapeKind::Star { r0, cos_m, sin_m },
            center: [0.0, 0.0],
            rotation: 0.0,
        }
    }

    pub fn with_center(mut self, center: Point) -> Self {
        self.center = center;
        self
    }

    pub fn with_rotation(mut self, rotation: f64) -> Self {
        self.rotation = rotation;
        self
    }

    /// Image under `x -> shift + scale * x` (scaling about the origin of the
    /// reference frame, so a reference shape centered at 0 becomes
    /// `shift + scale * B`).
    pub fn scaled_translated(&self, scale: f64, shift: Point) -> Self {
        let kind = match &self.kind {
            ShapeKind::Disk { radius } => ShapeKind::Disk { radius: radius * scale },
            ShapeKind::Ellipse { a, b } => ShapeKind::Ellipse {
                a: a * scale,
                b: b * scale,
            },
            ShapeKind::Star { r0, cos_m, sin_m } => ShapeKind::Star {
                r0: r0 * scale,
                cos_m: cos_m.iter().map(|c| c * scale).collect(),
                sin_m: sin_m.iter().map(|c| c * scale).collect(),
            },
        };
        Shape2D {
            kind,
            center: [
                shift[0] + scale * self.center[0],
                shift[1] + scale * self.center[1],
            ],
            rotation: self.rotation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64| v.is_finite();
        if !finite(self.center[0]) || !finite(self.center[1]) || !finite(self.rotation) {
            return Err(GeometryError::InvalidShape("non-finite center or rotation".into()));
        }
        match &self.kind {
            ShapeKind::Disk { radius } => {
                if !(finite(*radius) && *radius > 0.0) {
                    return Err(GeometryError::InvalidShape(format!("disk radius {radius} must be positive")));
                }
            }
            ShapeKind::Ellipse { a, b } => {
                if !(finite(*a) && finite(*b) && *a > 0.0 && *b > 0.0) {
                    return Err(GeometryError::InvalidShape(format!(
                        "ellipse semi-axes ({a}, {b}) must be positive"
                    )));
                }
            }
            ShapeKind::Star { r0, cos_m, sin_m } => {
                if !(finite(*r0) && *r0 > 0.0) || cos_m.iter().chain(sin_m).any(|c| !finite(*c)) {
                    return Err(GeometryError::InvalidShape("star coefficients must be finite, r0 > 0".into()));
                }
                let m = 4096;
                let min_r = (0..m)
                    .map(|j| self.star_radius(2.0 * PI * j as f64 / m as f64).0)
                    .fold(f64::INFINITY, f64::min);
                if min_r < 1e-3 * r0 {
                    return Err(GeometryError::InvalidShape(
                        "star radius function must stay positive (boundary would self-intersect)".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `(r, r', r'')` of a star shape at parameter `t`.
    fn star_radius(&self, t: f64) -> (f64, f64, f64) {
        match &self.kind {
            ShapeKind::Star { r0, cos_m, sin_m } => {
                let mut r = *r0;
                let mut dr = 0.0;
                let mut ddr = 0.0;
                let terms = cos_m.len().max(sin_m.len());
                for i in 0..terms {
                    let m = (i + 1) as f64;
                    let a = cos_m.get(i).copied().unwrap_or(0.0);
                    let b = sin_m.get(i).copied().unwrap_or(0.0);
                    let (s, c) = (m * t).sin_cos();
                    r += a * c + b * s;
                    dr += m * (-a * s + b * c);
                    ddr += -m * m * (a * c + b * s);
                }
                (r, dr, ddr)
            }
            _ => unreachable!("star_radius on non-star shape"),
        }
    }

    /// Local-frame boundary point and its first two parameter derivatives.
    pub fn local_curve(&self, t: f64) -> (Point, Point, Point) {
        let (s, c) = t.sin_cos();
        match &self.kind {
            ShapeKind::Disk { radius } => {
                let r = *radius;
                ([r * c, r * s], [-r * s, r * c], [-r * c, -r * s])
            }
            ShapeKind::Ellipse { a, b } => ([a * c, b * s], [-a * s, b * c], [-a * c, -b * s]),
            ShapeKind::Star { .. } => {
                let (r, dr, ddr) = self.star_radius(t);
                (
                    [r * c, r * s],
                    [dr * c - r * s, dr * s + r * c],
                    [ddr * c - 2.0 * dr * s - r * c, ddr * s + 2.0 * dr * c - r * s],
                )
            }
        }
    }

    fn rotate(&self, v: Point) -> Point {
        let (s, c) = self.rotation.sin_cos();
        [c * v[0] - s * v[1], s * v[0] + c * v[1]]
    }

    fn unrotate(&self, v: Point) -> Point {
        let (s, c) = self.rotation.sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }

    /// Global boundary point, velocity and acceleration at parameter `t`.
    pub fn curve(&self, t: f64) -> (Point, Point, Point) {
        let (p, dp, ddp) = self.local_curve(t);
        let p = self.rotate(p);
        (
            [self.center[0] + p[0], self.center[1] + p[1]],
            self.rotate(dp),
            self.rotate(ddp),
        )
    }

    pub fn boundary_sample(&self, t: f64) -> BoundarySample {
        let (pos, d, _) = self.curve(t);
        let speed = d[0].hypot(d[1]);
        BoundarySample {
            pos,
            normal: [d[1] / speed, -d[0] / speed],
            speed,
        }
    }

    /// Signed curvature (positive for convex arcs) at parameter `t`.
    pub fn curvature(&self, t: f64) -> f64 {
        let (_, d, dd) = self.curve(t);
        (d[0] * dd[1] - d[1] * dd[0]) / d[0].hypot(d[1]).powi(3)
    }

    /// Point at polar-mapped coordinates `(rho, t)`.
    pub fn mapped_point(&self, rho: f64, t: f64) -> Point {
        let (p, _, _) = self.local_curve(t);
        let v = self.rotate([rho * p[0], rho * p[1]]);
        [self.center[0] + v[0], self.center[1] + v[1]]
    }

    /// Jacobian factor `p(t) x p'(t)` of the polar map (without the `rho`).
    fn map_jacobian(&self, t: f64) -> f64 {
        let (p, dp, _) = self.local_curve(t);
        p[0] * dp[1] - p[1] * dp[0]
    }

    pub fn area(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disk { radius } => PI * radius * radius,
            ShapeKind::Ellipse { a, b } => PI * a * b,
            ShapeKind::Star { .. } => {
                let m = 2048;
                let h = 2.0 * PI / m as f64;
                (0..m).map(|j| 0.5 * self.map_jacobian(j as f64 * h)).sum::<f64>() * h
            }
        }
    }

    pub fn perimeter(&self) -> f64 {
        let m = 2048;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|j| {
                let (_, d, _) = self.local_curve(j as f64 * h);
                d[0].hypot(d[1])
            })
            .sum::<f64>()
            * h
    }

    /// Largest distance from the center to the boundary.
    pub fn max_radius(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disk { radius } => *radius,
            ShapeKind::Ellipse { a, b } => a.max(*b),
            ShapeKind::Star { .. } => (0..2048)
                .map(|j| self.star_radius(2.0 * PI * j as f64 / 2048.0).0)
                .fold(0.0, f64::max),
        }
    }

    pub fn diameter(&self) -> f64 {
        match &self.kind {
            ShapeKind::Disk { radius } => 2.0 * radius,
            ShapeKind::Ellipse { a, b } => 2.0 * a.max(*b),
            ShapeKind::Star { .. } => {
                let m = 512;
                let pts: Vec<Point> = (0..m).map(|j| self.curve(2.0 * PI * j as f64 / m as f64).0).collect();
                let mut d: f64 = 0.0;
                for a in &pts {
                    for b in &pts {
                        d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
                    }
                }
                d
            }
        }
    }

    /// Boundary radius function in the local frame along direction `theta`
    /// measured from the center (for star shapes this is `r(theta)`).
    fn radial_extent(&self, theta: f64) -> f64 {
        match &self.kind {
            ShapeKind::Disk { radius } => *radius,
            ShapeKind::Ellipse { a, b } => {
                let (s, c) = theta.sin_cos();
                1.0 / ((c / a).powi(2) + (s / b).powi(2)).sqrt()
            }
            ShapeKind::Star { .. } => self.star_radius(theta).0,
        }
    }

    /// Whether `x` lies strictly inside the shape.
    pub fn contains(&self, x: Point) -> bool {
        let v = self.unrotate([x[0] - self.center[0], x[1] - self.center[1]]);
        let r = v[0].hypot(v[1]);
        if r == 0.0 {
            return true;
        }
        r < self.radial_extent(v[1].atan2(v[0]))
    }

    /// Distance from `x` to the boundary curve, with the parameter of the
    /// closest point.
    pub fn distance_to_boundary(&self, x: Point) -> (f64, f64) {
        let m = 720;
        let mut best = (f64::INFINITY, 0.0);
        for j in 0..m {
            let t = 2.0 * PI * j as f64 / m as f64;
            let p = self.curve(t).0;
            let d = (p[0] - x[0]).hypot(p[1] - x[1]);
            if d < best.0 {
                best = (d, t);
            }
        }
        // Newton on g(t) = (p(t) - x) . p'(t)
        let mut t = best.1;
        for _ in 0..30 {
            let (p, d, dd) = self.curve(t);
            let r = [p[0] - x[0], p[1] - x[1]];
            let g = r[0] * d[0] + r[1] * d[1];
            let dg = d[0] * d[0] + d[1] * d[1] + r[0] * dd[0] + r[1] * dd[1];
            if dg <= 0.0 {
                break;
            }
            let step = (g / dg).clamp(-0.05, 0.05);
            t -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let p = self.curve(t).0;
        let d = (p[0] - x[0]).hypot(p[1] - x[1]);
        if d < best.0 {
            (d, t.rem_euclid(2.0 * PI))
        } else {
            best
        }
    }

    /// Canonical text encoding used for hashing.
    fn canonical(&self) -> String {
        let f = |v: f64| format!("{:.12e}", if v == 0.0 { 0.0 } else { v });
        let mut s = match &self.kind {
            ShapeKind::Disk { radius } => format!("disk;{}", f(*radius)),
            ShapeKind::Ellipse { a, b } => format!("ellipse;{};{}", f(*a), f(*b)),
            ShapeKind::Star { r0, cos_m, sin_m } => {
                let c: Vec<String> = cos_m.iter().map(|v| f(*v)).collect();
                let s: Vec<String> = sin_m.iter().map(|v| f(*v)).collect();
                format!("star;{};[{}];[{}]", f(*r0), c.join(","), s.join(","))
            }
        };
        s.push_str(&format!(";c={},{};rot={}", f(self.center[0]), f(self.center[1]), f(self.rotation)));
        s
    }
}

/// Stable identifier of a shape at a given resolution.
pub fn shape_hash(shape: &Shape2D, resolution: usize) -> String {
    let mut h = Sha256::new();
    h.update(shape.canonical().as_bytes());
    h.update(format!(";res={resolution}").as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            } else {
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
            }
            // p1 = P_n(z), p0 = P_{n-1}(z)
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Tensor-product volume rule on a shape.
#[derive(Clone, Debug)]
pub struct VolumeQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub radial: usize,
    pub angular: usize,
    /// Radial coordinate `rho` of each node (same order as `nodes`).
    pub rho: Vec<f64>,
    /// Angular parameter `t` of each node.
    pub theta: Vec<f64>,
    pub shape: Shape2D,
}

impl VolumeQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(*x)).sum()
    }

    pub fn integrate_complex(&self, f: impl Fn(Point) -> Complex64) -> Complex64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| *w * f(*x)).sum()
    }

    /// Characteristic node spacing near the boundary (largest gap).
    pub fn spacing(&self) -> f64 {
        let rmax = self.shape.max_radius();
        let angular = self.shape.perimeter() / self.angular as f64;
        let mut radial: f64 = 0.0;
        let mut prev = 0.0;
        for i in 0..self.radial {
            let r = self.rho[i * self.angular];
            radial = radial.max(r - prev);
            prev = r;
        }
        radial = radial.max(1.0 - prev);
        angular.max(radial * rmax)
    }
}

/// Gauss-Legendre (radial) x trapezoid (angular) rule with `resolution`
/// nodes in each direction, `resolution^2` nodes in total.
pub fn build_volume_quadrature(shape: &Shape2D, resolution: usize) -> Result<VolumeQuadrature> {
    build_volume_quadrature_with(shape, resolution, resolution)
}

pub fn build_volume_quadrature_with(shape: &Shape2D, radial: usize, angular: usize) -> Result<VolumeQuadrature> {
    shape.validate()?;
    if radial < 4 || angular < 4 {
        return Err(GeometryError::InvalidQuadrature(format!(
            "resolution ({radial}, {angular}) below the minimum of 4"
        )));
    }
    let (gx, gw) = gauss_legendre(radial);
    let h = 2.0 * PI / angular as f64;
    let n = radial * angular;
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut rho = Vec::with_capacity(n);
    let mut theta = Vec::with_capacity(n);
    for i in 0..radial {
        let r = 0.5 * (gx[i] + 1.0);
        let wr = 0.5 * gw[i];
        for j in 0..angular {
            let t = (j as f64 + 0.5) * h;
            nodes.push(shape.mapped_point(r, t));
            weights.push(wr * h * r * shape.map_jacobian(t));
            rho.push(r);
            theta.push(t);
        }
    }
    Ok(VolumeQuadrature {
        nodes,
        weights,
        radial,
        angular,
        rho,
        theta,
        shape: shape.clone(),
    })
}

/// Equispaced-parameter boundary rule with trapezoid weights.
#[derive(Clone, Debug)]
pub struct BoundaryQuadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub normals: Vec<Point>,
    /// Parameter values `t_j = 2 pi j / n`.
    pub params: Vec<f64>,
    /// `|p'(t_j)|`.
    pub speed: Vec<f64>,
    pub curvature: Vec<f64>,
    pub shape: Shape2D,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

pub fn build_boundary_quadrature(shape: &Shape2D, n: usize) -> Result<BoundaryQuadrature> {
    shape.validate()?;
    if n < 16 || n % 2 != 0 {
        return Err(GeometryError::InvalidQuadrature(format!(
            "boundary node count {n} must be even and at least 16"
        )));
    }
    let h = 2.0 * PI / n as f64;
    let mut q = BoundaryQuadrature {
        nodes: Vec::with_capacity(n),
        weights: Vec::with_capacity(n),
        normals: Vec::with_capacity(n),
        params: Vec::with_capacity(n),
        speed: Vec::with_capacity(n),
        curvature: Vec::with_capacity(n),
        shape: shape.clone(),
    };
    for j in 0..n {
        let t = j as f64 * h;
        let s = shape.boundary_sample(t);
        q.nodes.push(s.pos);
        q.normals.push(s.normal);
        q.weights.push(s.speed * h);
        q.params.push(t);
        q.speed.push(s.speed);
        q.curvature.push(shape.curvature(t));
    }
    Ok(q)
}

const PANEL_ORDER: usize = 16;
const BASE_PANELS: usize = 32;
const MAX_DEPTH: u32 = 40;

/// Adaptive panel quadrature of a boundary integral `oint f(y) dsigma(y)`
/// whose integrand may be nearly singular at a target point `x`. Panels
/// are bisected until their length is below the distance to `x`.
pub struct BoundaryIntegrator {
    shape: Shape2D,
    gl_x: Vec<f64>,
    gl_w: Vec<f64>,
}

impl BoundaryIntegrator {
    pub fn new(shape: &Shape2D) -> Self {
        let (gl_x, gl_w) = gauss_legendre(PANEL_ORDER);
        BoundaryIntegrator {
            shape: shape.clone(),
            gl_x,
            gl_w,
        }
    }

    pub fn integrate<const M: usize>(
        &self,
        x: Point,
        f: &impl Fn(&BoundarySample) -> [Complex64; M],
    ) -> [Complex64; M] {
        let mut acc = [Complex64::new(0.0, 0.0); M];
        let h = 2.0 * PI / BASE_PANELS as f64;
        for p in 0..BASE_PANELS {
            self.panel(x, p as f64 * h, (p + 1) as f64 * h, 0, f, &mut acc);
        }
        acc
    }

    fn panel<const M: usize>(
        &self,
        x: Point,
        a: f64,
        b: f64,
        depth: u32,
        f: &impl Fn(&BoundarySample) -> [Complex64; M],
        acc: &mut [Complex64; M],
    ) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let samples: Vec<BoundarySample> = self
            .gl_x
            .iter()
            .map(|g| self.shape.boundary_sample(mid + half * g))
            .collect();
        if depth < MAX_DEPTH {
            let len: f64 = samples.iter().zip(&self.gl_w).map(|(s, w)| s.speed * w * half).sum();
            let dist = samples
                .iter()
                .map(|s| (s.pos[0] - x[0]).hypot(s.pos[1] - x[1]))
                .fold(f64::INFINITY, f64::min);
            if len > 0.75 * dist {
                self.panel(x, a, mid, depth + 1, f, acc);
                self.panel(x, mid, b, depth + 1, f, acc);
                return;
            }
        }
        for (s, w) in samples.iter().zip(&self.gl_w) {
            let v = f(s);
            let ds = s.speed * w * half;
            for m in 0..M {
                acc[m] += v[m] * ds;
            }
        }
    }
}
