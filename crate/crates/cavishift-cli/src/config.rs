//! Run configuration: one TOML file with `[cavity]`, `[particle]`,
//! `[solver]`, `[sweep]` and `[output]` sections. The grammar is documented
//! in the README.

use cavishift::cavity_spectrum::{BranchSeed, CavityConfig, ResonanceOptions};
use cavishift::geometry::Shape2D;
use cavishift::particle_ops::{DrudeParams, ParticleConfig, Permeability, Position};
use cavishift::shift_predictor::PlasmonicOptions;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;

/// Configuration error with the 1-based line it refers to, when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub cavity: CavitySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particle: Option<ParticleSection>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub shape: Shape2D,
    pub eps_c: f64,
    pub eps_m: f64,
    pub mu_m: f64,
    pub tau: f64,
    pub resolution: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleChoice {
    /// Concentric multilayer disks (centered disk particle in a disk cavity).
    Concentric,
    /// Coupled cavity/particle volume solver.
    Coupled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    pub shape: Shape2D,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Strictly decreasing sizes for a convergence table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    pub center: [f64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drude_omega_p: Option<f64>,
    pub position: Position,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleChoice>,
    /// Particle volume resolution for the coupled oracle.
    #[serde(default = "default_particle_resolution")]
    pub oracle_resolution: usize,
    #[serde(default = "default_boundary_nodes")]
    pub boundary_nodes: usize,
    /// `|lambda(omega0) - lambda_j|` below which a Drude particle counts as
    /// matched to its W-cluster.
    #[serde(default = "default_degenerate_tol")]
    pub degenerate_tol: f64,
}

fn default_degenerate_tol() -> f64 {
    PlasmonicOptions::default().degenerate_tol
}

fn default_particle_resolution() -> usize {
    12
}

fn default_boundary_nodes() -> usize {
    128
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Starting frequencies `[re, im]`.
    #[serde(default)]
    pub seeds: Vec<[f64; 2]>,
    /// Search window `[re_min, re_max, im_min, im_max]`; resonances outside
    /// are dropped, and its center seeds the search when `seeds` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
    #[serde(default = "default_branch")]
    pub branch: BranchSeed,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Contour residue cross-check; radius defaults to `0.1 |Im omega0|`.
    #[serde(default)]
    pub contour: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_radius: Option<f64>,
    #[serde(default = "default_contour_points")]
    pub contour_points: usize,
    #[serde(default = "default_probes")]
    pub probes: usize,
}

fn default_branch() -> BranchSeed {
    BranchSeed::Nearest
}

fn default_tol() -> f64 {
    ResonanceOptions::default().tol
}

fn default_max_iter() -> usize {
    ResonanceOptions::default().max_iter
}

fn default_contour_points() -> usize {
    16
}

fn default_probes() -> usize {
    8
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            seeds: Vec::new(),
            window: None,
            branch: default_branch(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            contour: false,
            contour_radius: None,
            contour_points: default_contour_points(),
            probes: default_probes(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Delta,
    OmegaP,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

/// 1-based line of `key = ...` inside `[section]` (or a dotted subsection).
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            continue;
        }
        if current == section || current.starts_with(&format!("{section}.")) {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate_with(text)?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    fn validate_with(&self, text: &str) -> Result<(), ConfigError> {
        let fail = |section: &str, key: &str, message: String| ConfigError {
            line: locate(text, section, key),
            message,
        };
        let c = &self.cavity;
        for (key, v) in [("eps_c", c.eps_c), ("eps_m", c.eps_m), ("mu_m", c.mu_m), ("tau", c.tau)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(fail("cavity", key, format!("cavity.{key} = {v} must be positive")));
            }
        }
        if c.resolution < 4 {
            return Err(fail("cavity", "resolution", "cavity.resolution must be at least 4".into()));
        }
        c.shape
            .validate()
            .map_err(|e| fail("cavity", "shape", format!("cavity.shape: {e}")))?;
        if let Some(p) = &self.particle {
            if let Some(d) = p.delta {
                if !(d.is_finite() && d > 0.0) {
                    return Err(fail("particle", "delta", format!("particle.delta = {d} must be positive")));
                }
            }
            if let Some(ds) = &p.deltas {
                if ds.iter().any(|d| !(d.is_finite() && *d > 0.0)) || ds.windows(2).any(|w| w[1] >= w[0]) {
                    return Err(fail(
                        "particle",
                        "deltas",
                        "particle.deltas must be positive and strictly decreasing".into(),
                    ));
                }
            }
            if p.delta.is_none() && p.deltas.as_ref().is_none_or(|d| d.is_empty()) {
                return Err(fail("particle", "delta", "particle needs delta or deltas".into()));
            }
            match (p.mu_c, p.drude_omega_p) {
                (Some(m), None) if m.is_finite() && m > 0.0 => {}
                (Some(m), None) => return Err(fail("particle", "mu_c", format!("particle.mu_c = {m} must be positive"))),
                (None, Some(w)) if w.is_finite() && w > 0.0 => {}
                (None, Some(w)) => {
                    return Err(fail("particle", "drude_omega_p", format!("particle.drude_omega_p = {w} must be positive")))
                }
                _ => {
                    return Err(fail(
                        "particle",
                        "mu_c",
                        "particle needs exactly one of mu_c and drude_omega_p".into(),
                    ))
                }
            }
            if !(p.degenerate_tol.is_finite() && p.degenerate_tol >= 0.0) {
                return Err(fail("particle", "degenerate_tol", "particle.degenerate_tol must be non-negative".into()));
            }
            if p.boundary_nodes < 16 {
                return Err(fail("particle", "boundary_nodes", "particle.boundary_nodes must be at least 16".into()));
            }
            p.shape
                .validate()
                .map_err(|e| fail("particle", "shape", format!("particle.shape: {e}")))?;
        }
        let s = &self.solver;
        if !(s.tol.is_finite() && s.tol > 0.0) {
            return Err(fail("solver", "tol", format!("solver.tol = {} must be positive", s.tol)));
        }
        if let Some(r) = s.contour_radius {
            if !(r.is_finite() && r > 0.0) {
                return Err(fail("solver", "contour_radius", format!("solver.contour_radius = {r} must be positive")));
            }
        }
        if let Some(w) = s.window {
            if !(w[0] < w[1] && w[2] < w[3]) {
                return Err(fail("solver", "window", "solver.window must be [re_min, re_max, im_min, im_max]".into()));
            }
        }
        if let Some(sw) = &self.sweep {
            if sw.values.is_empty() || sw.values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(fail("sweep", "values", "sweep.values must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn cavity_config(&self) -> CavityConfig {
        let c = &self.cavity;
        CavityConfig::new(c.shape.clone(), c.eps_c, c.eps_m, c.mu_m, c.tau)
    }

    pub fn resonance_options(&self) -> ResonanceOptions {
        ResonanceOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }

    /// Seeds from `solver.seeds`, else the window center.
    pub fn seeds(&self) -> Vec<Complex64> {
        if !self.solver.seeds.is_empty() {
            return self.solver.seeds.iter().map(|s| Complex64::new(s[0], s[1])).collect();
        }
        match self.solver.window {
            Some(w) => vec![Complex64::new(0.5 * (w[0] + w[1]), 0.5 * (w[2] + w[3]))],
            None => Vec::new(),
        }
    }

    pub fn in_window(&self, w: Complex64) -> bool {
        match self.solver.window {
            Some(b) => w.re >= b[0] && w.re <= b[1] && w.im >= b[2] && w.im <= b[3],
            None => true,
        }
    }
}

impl ParticleSection {
    pub fn permeability(&self, mu_m: f64) -> Permeability {
        match (self.mu_c, self.drude_omega_p) {
            (Some(mu_c), _) => Permeability::Constant { mu_c },
            (None, Some(omega_p)) => Permeability::Drude(DrudeParams { omega_p, mu_m }),
            (None, None) => Permeability::Constant { mu_c: mu_m },
        }
    }

    /// All sizes of this run: `delta` first, then `deltas`.
    pub fn sizes(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.delta.into_iter().collect();
        if let Some(ds) = &self.deltas {
            v.extend(ds.iter().copied().filter(|d| Some(*d) != self.delta));
        }
        v
    }

    pub fn config(&self, delta: f64, mu_m: f64) -> ParticleConfig {
        ParticleConfig::new(self.shape.clone(), delta, self.center, self.permeability(mu_m), self.position)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DISK: &str = r#"
[cavity]
shape = { kind = "disk", radius = 1.0 }
eps_c = 1.0
eps_m = 1.0
mu_m = 1.0
tau = 10.0
resolution = 24

[solver]
seeds = [[0.69, -0.066]]
"#;

    #[test]
    fn parses_minimal_disk() {
        let c = RunConfig::parse(DISK).unwrap();
        assert_eq!(c.cavity.resolution, 24);
        assert_eq!(c.seeds(), vec![Complex64::new(0.69, -0.066)]);
        assert!(c.particle.is_none());
        assert_eq!(c.output.formats, vec![Format::Json, Format::Csv]);
    }

    #[test]
    fn negative_tau_names_field_and_line() {
        let bad = DISK.replace("tau = 10.0", "tau = -1.0");
        let e = RunConfig::parse(&bad).unwrap_err();
        assert_eq!(e.line, Some(7));
        assert!(e.message.contains("cavity.tau"), "{e}");
    }

    #[test]
    fn syntax_and_unknown_keys_have_lines() {
        let e = RunConfig::parse(&DISK.replace("eps_m = 1.0", "eps_m = = 1.0")).unwrap_err();
        assert_eq!(e.line, Some(5));
        let e = RunConfig::parse(&DISK.replace("eps_m = 1.0", "eps_x = 1.0")).unwrap_err();
        assert!(e.line.is_some() && e.message.contains("eps_x"), "{e}");
    }

    #[test]
    fn delta_list_must_decrease() {
        let text = format!(
            "{DISK}\n[particle]\nshape = {{ kind = \"disk\", radius = 1.0 }}\ndeltas = [0.02, 0.03]\ncenter = [0.0, 0.0]\nmu_c = 0.5\nposition = \"internal\"\n"
        );
        let e = RunConfig::parse(&text).unwrap_err();
        assert!(e.message.contains("strictly decreasing"));
        assert_eq!(e.line, Some(15));
    }
}
