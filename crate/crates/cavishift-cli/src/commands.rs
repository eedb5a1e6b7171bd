//! The six subcommands. Each writes its result files into the output
//! directory and returns a short report; wall-clock timings go to a
//! `<name>.timing.json` sidecar so that the result files stay
//! byte-identical between runs.

use crate::cache::OperatorCache;
use crate::config::{Format, OracleChoice, ParticleSection, RunConfig, SweepParameter};
use crate::output::{num, to_json, to_json_pretty, write_file, ResultRecord, Table};
use anyhow::{anyhow, bail, Context as _, Result};
use cavishift::cavity_spectrum::{
    assemble_k, default_probes, exterior_mode, extract_residue, find_resonance_with, CavityConfig, ExteriorMode,
    ResidueRoute, ResonanceRecord,
};
use cavishift::geometry::{build_boundary_quadrature, build_volume_quadrature, ShapeKind, VolumeQuadrature};
use cavishift::oracle_suite::convergence::{convergence_study, ConvergenceTable};
use cavishift::oracle_suite::coupled::{coupled_perturbed_resonance, CoupledOptions};
use cavishift::oracle_suite::multilayer::{multilayer_disk_resonances, Layer, RadialLayerStack, SearchWindow};
use cavishift::oracle_suite::OracleError;
use cavishift::particle_ops::{
    assemble_np, coupling_coefficients, polarization_tensor, w_spectrum, ParticleConfig, Permeability,
    PolarizationTensor, Position, WSpectrum,
};
use cavishift::shift_predictor::{
    external_shift, internal_shift, plasmonic_shift, PlasmonicOptions, ShiftCase, ShiftPrediction,
};
use cavishift::validation::{run_all, CriterionOutcome, ValidationOptions};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

/// Highest angular order scanned when cross-listing disk resonances.
const MAX_DISK_ORDER: i32 = 16;

/// Size of the W-spectrum used for plasmonic particles.
const W_COUNT: usize = 8;

pub struct Context {
    pub out: PathBuf,
    pub cache: Option<OperatorCache>,
    pub quick: bool,
    pub tolerance_scale: f64,
}

impl Context {
    pub fn new(out: impl Into<PathBuf>) -> Self {
        Context {
            out: out.into(),
            cache: None,
            quick: false,
            tolerance_scale: 1.0,
        }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub success: bool,
}

impl Report {
    fn ok() -> Self {
        Report {
            success: true,
            ..Default::default()
        }
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }
}

/// Wall-clock phases of one command.
#[derive(Debug, Default, Serialize)]
pub struct Timings {
    pub phases: BTreeMap<String, f64>,
}

impl Timings {
    fn add(&mut self, phase: &str, seconds: f64) {
        *self.phases.entry(phase.to_string()).or_default() += seconds;
    }
}

fn emit(
    ctx: &Context,
    formats: &[Format],
    name: &str,
    record: &ResultRecord,
    table: Option<&Table>,
    report: &mut Report,
) -> Result<()> {
    if formats.contains(&Format::Json) {
        write_file(&ctx.out, &format!("{name}.json"), &to_json_pretty(record)?)?;
        report.files.push(ctx.out.join(format!("{name}.json")));
    }
    if let (Some(t), true) = (table, formats.contains(&Format::Csv)) {
        write_file(&ctx.out, &format!("{name}.csv"), &t.render())?;
        report.files.push(ctx.out.join(format!("{name}.csv")));
    }
    Ok(())
}

fn emit_csv(ctx: &Context, name: &str, contents: &str, report: &mut Report) -> Result<()> {
    write_file(&ctx.out, name, contents)?;
    report.files.push(ctx.out.join(name));
    Ok(())
}

fn emit_timing(ctx: &Context, name: &str, t: &Timings) -> Result<()> {
    write_file(&ctx.out, &format!("{name}.timing.json"), &serde_json::to_string_pretty(t)?)
}

fn cpair(w: Complex64) -> [String; 2] {
    [num(w.re), num(w.im)]
}

// ---------------------------------------------------------------------------
// resonances

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContourSummary {
    pub radius: f64,
    pub points: usize,
    pub c_contour: Complex64,
    pub agreement: f64,
    pub sigma_ratio: f64,
    pub remainder_ratio: f64,
    pub winding: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskOracleMatch {
    pub order: i32,
    pub omega: Complex64,
    pub relative_difference: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEntry {
    pub seed: Complex64,
    pub omega0: Complex64,
    pub lambda0: Complex64,
    pub c: Complex64,
    pub c_route: ResidueRoute,
    pub char_residual: f64,
    pub nondegeneracy: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour: Option<ContourSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_error: Option<String>,
    /// Exact disk resonance of the same angular order (disk cavities only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multilayer: Option<DiskOracleMatch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: Complex64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonancesPayload {
    pub nodes: usize,
    pub resonances: Vec<ResonanceEntry>,
    pub failures: Vec<SeedFailure>,
}

struct Solved {
    quad: VolumeQuadrature,
    records: Vec<(Complex64, ResonanceRecord)>,
    failures: Vec<SeedFailure>,
}

fn solve_resonances(cfg: &RunConfig, ctx: &Context, timings: &mut Timings) -> Result<Solved> {
    let cavity = cfg.cavity_config();
    let quad = build_volume_quadrature(&cavity.shape, cfg.cavity.resolution)?;
    let seeds = cfg.seeds();
    if seeds.is_empty() {
        bail!("no starting frequency: set solver.seeds or solver.window");
    }
    let assembly_ns = AtomicU64::new(0);
    let assemble = |w: Complex64| {
        let t = Instant::now();
        let op = match &ctx.cache {
            Some(c) => c.operator(&cavity, &quad, w),
            None => assemble_k(&cavity, &quad, w),
        };
        assembly_ns.fetch_add(t.elapsed().as_nanos() as u64, Ordering::Relaxed);
        op
    };
    let start = Instant::now();
    let results: Vec<_> = seeds
        .par_iter()
        .map(|&s| (s, find_resonance_with(&cavity, &quad, s, cfg.solver.branch, cfg.resonance_options(), &assemble)))
        .collect();
    timings.add("solve", start.elapsed().as_secs_f64());
    timings.add("assembly", assembly_ns.load(Ordering::Relaxed) as f64 * 1e-9);

    let mut records: Vec<(Complex64, ResonanceRecord)> = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(rec) => {
                let dup = records
                    .iter()
                    .any(|(_, o)| (o.omega0 - rec.omega0).norm() <= 1e-8 * rec.omega0.norm().max(1.0));
                if !dup && cfg.in_window(rec.omega0) {
                    records.push((seed, rec));
                }
            }
            Err(e) => failures.push(SeedFailure {
                seed,
                error: e.to_string(),
            }),
        }
    }
    if records.is_empty() {
        let why: Vec<String> = failures.iter().map(|f| format!("seed {}: {}", f.seed, f.error)).collect();
        bail!("no resonance found in the window ({})", why.join("; "));
    }
    Ok(Solved {
        quad,
        records,
        failures,
    })
}

/// Nearest exact resonance of a homogeneous disk cavity, scanning angular
/// orders `0..=MAX_DISK_ORDER`.
fn disk_cross_listing(cavity: &CavityConfig, w0: Complex64) -> Option<DiskOracleMatch> {
    let ShapeKind::Disk { radius } = cavity.shape.kind else {
        return None;
    };
    let eps = cavity.tau * cavity.eps_c + cavity.eps_m;
    let win = SearchWindow::around(w0, 0.02 * w0.norm(), 0.5 * w0.im.abs().max(1e-4));
    let found: Vec<(i32, Complex64)> = (0..=MAX_DISK_ORDER)
        .into_par_iter()
        .filter_map(|order| {
            let stack = RadialLayerStack::disk(radius, eps, cavity.mu_m, cavity.medium(), order);
            let roots = multilayer_disk_resonances(&stack, &win).ok()?;
            roots
                .into_iter()
                .min_by(|a, b| (a - w0).norm().total_cmp(&(b - w0).norm()))
                .map(|r| (order, r))
        })
        .collect();
    found
        .into_iter()
        .min_by(|a, b| (a.1 - w0).norm().total_cmp(&(b.1 - w0).norm()))
        .map(|(order, omega)| DiskOracleMatch {
            order,
            omega,
            relative_difference: (omega - w0).norm() / omega.norm(),
        })
}

fn contour_check(cfg: &RunConfig, quad: &VolumeQuadrature, rec: &ResonanceRecord) -> Result<ContourSummary> {
    let s = &cfg.solver;
    let radius = s.contour_radius.unwrap_or(0.1 * rec.omega0.im.abs());
    let probes = default_probes(quad, s.probes);
    let x = extract_residue(rec, radius, s.contour_points, &probes)?;
    Ok(ContourSummary {
        radius,
        points: s.contour_points,
        c_contour: x.c_contour,
        agreement: x.agreement,
        sigma_ratio: x.sigma_ratio,
        remainder_ratio: x.remainder_ratio,
        winding: x.winding,
    })
}

pub fn cmd_resonances(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    let mut timings = Timings::default();
    let mut report = Report::ok();
    let solved = solve_resonances(cfg, ctx, &mut timings)?;
    let cavity = cfg.cavity_config();
    let start = Instant::now();
    let entries: Vec<ResonanceEntry> = solved
        .records
        .par_iter()
        .map(|(seed, rec)| {
            let (contour, contour_error) = if cfg.solver.contour {
                match contour_check(cfg, &solved.quad, rec) {
                    Ok(c) => (Some(c), None),
                    Err(e) => (None, Some(e.to_string())),
                }
            } else {
                (None, None)
            };
            ResonanceEntry {
                seed: *seed,
                omega0: rec.omega0,
                lambda0: rec.lambda0,
                c: rec.c,
                c_route: rec.c_route.clone(),
                char_residual: rec.char_residual,
                nondegeneracy: rec.nondegeneracy(),
                iterations: rec.iterations,
                contour,
                contour_error,
                multilayer: disk_cross_listing(&cavity, rec.omega0),
            }
        })
        .collect();
    timings.add("post", start.elapsed().as_secs_f64());

    let mut table = Table::new(&["index", "re_omega", "im_omega", "re_c", "im_c", "nondegeneracy", "oracle_order", "oracle_relative"]);
    let mut scatter = Table::new(&["re_omega", "im_omega", "source"]);
    for (i, e) in entries.iter().enumerate() {
        let [wr, wi] = cpair(e.omega0);
        let [cr, ci] = cpair(e.c);
        let (order, rel) = match &e.multilayer {
            Some(m) => (m.order.to_string(), num(m.relative_difference)),
            None => (String::new(), String::new()),
        };
        table.push(vec![i.to_string(), wr.clone(), wi.clone(), cr, ci, num(e.nondegeneracy), order, rel]);
        scatter.push(vec![wr, wi, "nystrom".into()]);
        if let Some(m) = &e.multilayer {
            let [r, i] = cpair(m.omega);
            scatter.push(vec![r, i, "multilayer".into()]);
        }
        let oracle = e
            .multilayer
            .as_ref()
            .map(|m| format!(", multilayer n={} rel diff {:.2e}", m.order, m.relative_difference))
            .unwrap_or_default();
        report.line(format!("omega0 = {:.12} {:+.12}i{oracle}", e.omega0.re, e.omega0.im));
    }
    for f in &solved.failures {
        report.line(format!("seed {} failed: {}", f.seed, f.error));
    }
    let payload = ResonancesPayload {
        nodes: solved.quad.len(),
        resonances: entries,
        failures: solved.failures,
    };
    let record = ResultRecord::new("resonance", cfg, &payload)?;
    emit(ctx, &cfg.output.formats, "resonances", &record, Some(&table), &mut report)?;
    if cfg.output.formats.contains(&Format::Csv) {
        emit_csv(ctx, "resonances_scatter.csv", &scatter.render(), &mut report)?;
    }
    if let Some(c) = &ctx.cache {
        let hits = c.stats.hits.load(Ordering::Relaxed);
        let misses = c.stats.misses.load(Ordering::Relaxed);
        timings.add("cache_hits", hits as f64);
        timings.add("cache_misses", misses as f64);
    }
    emit_timing(ctx, "resonances", &timings)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// modes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub omega0: Complex64,
    pub normalization: Complex64,
    pub file: String,
}

pub fn cmd_modes(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    let mut timings = Timings::default();
    let mut report = Report::ok();
    let solved = solve_resonances(cfg, ctx, &mut timings)?;
    let mut summaries = Vec::new();
    for (i, (_, rec)) in solved.records.iter().enumerate() {
        let mut t = Table::new(&["x", "y", "weight", "re_e", "im_e"]);
        for ((p, w), e) in solved.quad.nodes.iter().zip(&solved.quad.weights).zip(&rec.mode) {
            t.push(vec![num(p[0]), num(p[1]), num(*w), num(e.re), num(e.im)]);
        }
        let file = format!("mode_{i}.csv");
        emit_csv(ctx, &file, &t.render(), &mut report)?;
        report.line(format!("mode {i}: omega0 = {:.12} {:+.12}i -> {file}", rec.omega0.re, rec.omega0.im));
        summaries.push(ModeSummary {
            omega0: rec.omega0,
            normalization: rec.normalization,
            file,
        });
    }
    let record = ResultRecord::new("mode", cfg, &summaries)?;
    emit(ctx, &cfg.output.formats, "modes", &record, None, &mut report)?;
    emit_timing(ctx, "modes", &timings)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// polarization

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarizationPayload {
    pub contrast: f64,
    /// Tensor of the reference shape `B`.
    pub tensor: PolarizationTensor,
    pub principal_values: [f64; 2],
    pub principal_axes: [[f64; 2]; 2],
    /// Tensor of `delta B` for every configured size.
    pub scaled: Vec<(f64, PolarizationTensor)>,
    /// Neumann-Poincare eigenvalues of `B`.
    pub np_spectrum: Vec<f64>,
}

fn particle_section(cfg: &RunConfig) -> Result<&ParticleSection> {
    cfg.particle.as_ref().ok_or_else(|| anyhow!("this command needs a [particle] section"))
}

pub fn cmd_polarization(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    let mut report = Report::ok();
    let p = particle_section(cfg)?;
    let contrast = match p.permeability(cfg.cavity.mu_m) {
        Permeability::Constant { mu_c } => cfg.cavity.mu_m / mu_c,
        Permeability::Drude(_) => bail!("polarization needs a constant mu_c (the Drude contrast depends on omega)"),
    };
    let bq = build_boundary_quadrature(&p.shape, p.boundary_nodes)?;
    let tensor = polarization_tensor(&bq, Complex64::new(contrast, 0.0))?;
    let (values, axes) = tensor.principal_axes();
    let np = assemble_np(&bq)?;
    let payload = PolarizationPayload {
        contrast,
        tensor,
        principal_values: values,
        principal_axes: axes,
        scaled: p.sizes().into_iter().map(|d| (d, tensor.scaled(d))).collect(),
        np_spectrum: np.eigenvalues().to_vec(),
    };
    let mut table = Table::new(&["index", "np_eigenvalue"]);
    for (i, v) in payload.np_spectrum.iter().enumerate() {
        table.push(vec![i.to_string(), num(*v)]);
    }
    report.line(format!(
        "M = [[{:.10}, {:.10}], [{:.10}, {:.10}]], principal values {:.10}, {:.10}",
        tensor.m[0][0].re, tensor.m[0][1].re, tensor.m[1][0].re, tensor.m[1][1].re, values[0], values[1]
    ));
    let record = ResultRecord::new("polarization", cfg, &payload)?;
    emit(ctx, &cfg.output.formats, "polarization", &record, Some(&table), &mut report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// shift and sweep

/// Everything a shift prediction needs besides the particle itself.
struct ShiftModel {
    rec: ResonanceRecord,
    tensor: Option<PolarizationTensor>,
    exterior: Option<ExteriorMode>,
    spectrum: Option<WSpectrum>,
    plasmonic: PlasmonicOptions,
}

impl ShiftModel {
    fn new(rec: ResonanceRecord, cfg: &RunConfig, p: &ParticleSection) -> Result<Self> {
        let bq = build_boundary_quadrature(&p.shape, p.boundary_nodes)?;
        let (tensor, spectrum) = match p.permeability(cfg.cavity.mu_m) {
            Permeability::Constant { mu_c } => {
                (Some(polarization_tensor(&bq, Complex64::new(cfg.cavity.mu_m / mu_c, 0.0))?), None)
            }
            Permeability::Drude(_) => (None, Some(w_spectrum(&bq, W_COUNT)?)),
        };
        let exterior = match p.position {
            Position::External => Some(exterior_mode(&rec)?),
            Position::Internal => None,
        };
        Ok(ShiftModel {
            rec,
            tensor,
            exterior,
            spectrum,
            plasmonic: PlasmonicOptions {
                degenerate_tol: p.degenerate_tol,
                ..Default::default()
            },
        })
    }

    fn predict(&self, particle: &ParticleConfig) -> Result<ShiftPrediction> {
        Ok(match (particle.permeability, particle.position) {
            (Permeability::Constant { .. }, Position::Internal) => {
                internal_shift(&self.rec, particle, self.tensor.as_ref().expect("constant particle"))?
            }
            (Permeability::Constant { .. }, Position::External) => external_shift(
                &self.rec,
                self.exterior.as_ref().expect("external particle"),
                particle,
                self.tensor.as_ref().expect("constant particle"),
            )?,
            (Permeability::Drude(_), Position::Internal) => {
                let spec = self.spectrum.as_ref().expect("drude particle");
                let couplings = coupling_coefficients(&self.rec, particle, spec)?;
                plasmonic_shift(&self.rec, particle, spec, &couplings, &self.plasmonic)?
            }
            (Permeability::Drude(_), Position::External) => {
                bail!("plasmonic shifts are implemented for internal particles only")
            }
        })
    }
}

fn first_resonance(cfg: &RunConfig, ctx: &Context, timings: &mut Timings) -> Result<ResonanceRecord> {
    let solved = solve_resonances(cfg, ctx, timings)?;
    Ok(solved.records.into_iter().next().expect("at least one record").1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftRow {
    pub delta: f64,
    pub prediction: ShiftPrediction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftPayload {
    pub omega0: Complex64,
    pub c: Complex64,
    pub predictions: Vec<ShiftRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleChoice>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceTable>,
}

fn oracle_err(e: impl std::fmt::Display) -> OracleError {
    OracleError::Numerical(e.to_string())
}

/// Exact shift of a centered disk particle in a disk cavity, from the
/// three-layer radial determinant.
fn concentric_oracle(
    cfg: &RunConfig,
    p: &ParticleSection,
    omega0: Complex64,
) -> Result<impl Fn(f64) -> Result<Complex64, OracleError> + Sync> {
    let cavity = cfg.cavity_config();
    let (ShapeKind::Disk { radius }, ShapeKind::Disk { radius: rp }) = (&cavity.shape.kind, &p.shape.kind) else {
        bail!("the concentric oracle needs a disk cavity and a disk particle");
    };
    if p.center != cavity.shape.center || p.shape.center != [0.0, 0.0] || p.position != Position::Internal {
        bail!("the concentric oracle needs an internal particle at the cavity center");
    }
    let Permeability::Constant { mu_c } = p.permeability(cavity.mu_m) else {
        bail!("the concentric oracle needs a constant mu_c");
    };
    let order = disk_cross_listing(&cavity, omega0)
        .ok_or_else(|| anyhow!("no disk resonance of order <= {MAX_DISK_ORDER} near {omega0}"))?
        .order;
    let (radius, rp) = (*radius, *rp);
    let eps = cavity.tau * cavity.eps_c + cavity.eps_m;
    let half = 0.05 * omega0.norm();
    Ok(move |delta: f64| {
        let root = |mu: f64| -> Result<Complex64, OracleError> {
            let stack = RadialLayerStack {
                layers: vec![
                    Layer {
                        radius: delta * rp,
                        eps,
                        mu,
                    },
                    Layer {
                        radius,
                        eps,
                        mu: cavity.mu_m,
                    },
                ],
                outer: cavity.medium(),
                order,
            };
            multilayer_disk_resonances(&stack, &SearchWindow::around(omega0, half, half))?
                .into_iter()
                .min_by(|a, b| (a - omega0).norm().total_cmp(&(b - omega0).norm()))
                .ok_or_else(|| OracleError::Numerical(format!("no layered root near {omega0} at delta = {delta}")))
        };
        Ok(root(mu_c)? - root(cavity.mu_m)?)
    })
}

pub fn cmd_shift(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    let mut timings = Timings::default();
    let mut report = Report::ok();
    let p = particle_section(cfg)?;
    let rec = first_resonance(cfg, ctx, &mut timings)?;
    let omega0 = rec.omega0;
    let model = ShiftModel::new(rec, cfg, p)?;
    let mu_m = cfg.cavity.mu_m;
    let sizes = p.sizes();
    let start = Instant::now();
    let predictions: Vec<ShiftRow> = sizes
        .iter()
        .map(|&d| {
            model
                .predict(&p.config(d, mu_m))
                .map(|prediction| ShiftRow { delta: d, prediction })
                .with_context(|| format!("shift prediction at delta = {d}"))
        })
        .collect::<Result<_>>()?;
    timings.add("prediction", start.elapsed().as_secs_f64());

    let mut table = Table::new(&["delta", "root", "re_shift", "im_shift", "case", "flags"]);
    for row in &predictions {
        let pr = &row.prediction;
        for (k, r) in pr.roots.iter().enumerate() {
            let [a, b] = cpair(*r);
            table.push(vec![num(row.delta), k.to_string(), a, b, case_name(pr.case).into(), pr.flags.join(";")]);
        }
        let flags = if pr.flags.is_empty() {
            String::new()
        } else {
            format!(" [{}]", pr.flags.join(", "))
        };
        report.line(format!(
            "delta = {}: {} root(s), leading shift {:.6e} {:+.6e}i{flags}",
            row.delta,
            pr.roots.len(),
            pr.leading().re,
            pr.leading().im
        ));
    }

    let deltas = p.deltas.clone().unwrap_or_default();
    let convergence = match p.oracle {
        Some(choice) if !deltas.is_empty() => {
            let start = Instant::now();
            let predict = |d: f64| {
                model
                    .predict(&p.config(d, mu_m))
                    .map(|s| s.leading())
                    .unwrap_or(Complex64::new(f64::NAN, f64::NAN))
            };
            let table = match choice {
                OracleChoice::Concentric => {
                    let oracle = concentric_oracle(cfg, p, omega0)?;
                    convergence_study(predict, oracle, &deltas)?
                }
                OracleChoice::Coupled => {
                    let cavity = cfg.cavity_config();
                    let res = cfg.cavity.resolution;
                    let opts = CoupledOptions::default();
                    let oracle = |d: f64| -> Result<Complex64, OracleError> {
                        let pert = p.config(d, mu_m);
                        let mut base = pert.clone();
                        base.permeability = Permeability::Constant { mu_c: mu_m };
                        let b = coupled_perturbed_resonance(&cavity, &base, res, p.oracle_resolution, omega0, &opts)?;
                        let seed = b.omega + predict(d);
                        let seed = if seed.is_finite() { seed } else { b.omega };
                        let q = coupled_perturbed_resonance(&cavity, &pert, res, p.oracle_resolution, seed, &opts)
                            .map_err(oracle_err)?;
                        Ok(q.omega - b.omega)
                    };
                    convergence_study(predict, oracle, &deltas)?
                }
            };
            timings.add("oracle", start.elapsed().as_secs_f64());
            match &table.fit {
                Some(f) => report.line(format!(
                    "convergence vs {:?} oracle: slope {:.4} (fit residual {:.2e}), max relative error {:.3e}",
                    choice,
                    f.slope,
                    f.residual,
                    table.rows.iter().map(|r| r.relative).fold(0.0, f64::max)
                )),
                None => report.line("convergence: prediction and oracle agree to round-off"),
            }
            if cfg.output.formats.contains(&Format::Csv) {
                emit_csv(ctx, "shift_convergence.csv", &table.to_csv(), &mut report)?;
            }
            Some(table)
        }
        Some(_) => bail!("particle.oracle needs a particle.deltas list"),
        None => None,
    };

    let payload = ShiftPayload {
        omega0,
        c: model.rec.c,
        predictions,
        oracle: p.oracle,
        convergence,
    };
    let record = ResultRecord::new("shift", cfg, &payload)?;
    emit(ctx, &cfg.output.formats, "shift", &record, Some(&table), &mut report)?;
    emit_timing(ctx, "shift", &timings)?;
    Ok(report)
}

fn case_name(c: ShiftCase) -> &'static str {
    match c {
        ShiftCase::Internal => "internal",
        ShiftCase::External => "external",
        ShiftCase::Plasmonic => "plasmonic",
        ShiftCase::Exceptional => "exceptional",
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction: Option<ShiftPrediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPayload {
    pub parameter: SweepParameter,
    pub omega0: Complex64,
    pub points: Vec<SweepPoint>,
}

pub fn cmd_sweep(cfg: &RunConfig, ctx: &Context) -> Result<Report> {
    let mut timings = Timings::default();
    let mut report = Report::ok();
    let sweep = cfg.sweep.as_ref().ok_or_else(|| anyhow!("sweep needs a [sweep] section"))?;
    let p = particle_section(cfg)?;
    if sweep.parameter == SweepParameter::OmegaP && p.drude_omega_p.is_none() {
        bail!("an omega_p sweep needs a Drude particle (particle.drude_omega_p)");
    }
    let rec = first_resonance(cfg, ctx, &mut timings)?;
    let omega0 = rec.omega0;
    let model = ShiftModel::new(rec, cfg, p)?;
    let mu_m = cfg.cavity.mu_m;
    let base_delta = p.sizes().first().copied();
    let start = Instant::now();
    // parallel map, collected in input order: independent of worker count
    let points: Vec<SweepPoint> = sweep
        .values
        .par_iter()
        .map(|&v| {
            let particle = match sweep.parameter {
                SweepParameter::Delta => Ok(p.config(v, mu_m)),
                SweepParameter::OmegaP => base_delta
                    .map(|d| {
                        let mut q = p.clone();
                        q.drude_omega_p = Some(v);
                        q.config(d, mu_m)
                    })
                    .ok_or_else(|| anyhow!("particle.delta is required for an omega_p sweep")),
            };
            match particle.and_then(|q| model.predict(&q)) {
                Ok(pr) => SweepPoint {
                    value: v,
                    prediction: Some(pr),
                    error: None,
                },
                Err(e) => SweepPoint {
                    value: v,
                    prediction: None,
                    error: Some(format!("{e:#}")),
                },
            }
        })
        .collect();
    timings.add("sweep", start.elapsed().as_secs_f64());
    let name = match sweep.parameter {
        SweepParameter::Delta => "delta",
        SweepParameter::OmegaP => "omega_p",
    };
    let mut table = Table::new(&[name, "root", "re_shift", "im_shift", "re_omega", "im_omega", "flags"]);
    let mut failed = 0;
    for pt in &points {
        match &pt.prediction {
            Some(pr) => {
                for (k, r) in pr.roots.iter().enumerate() {
                    let [a, b] = cpair(*r);
                    let [c, d] = cpair(omega0 + r);
                    table.push(vec![num(pt.value), k.to_string(), a, b, c, d, pr.flags.join(";")]);
                }
            }
            None => failed += 1,
        }
    }
    report.line(format!("{} sweep: {} values, {} failed", name, points.len(), failed));
    if let Some(e) = points.iter().find_map(|p| p.error.as_ref()) {
        report.line(format!("first failure: {e}"));
    }
    let payload = SweepPayload {
        parameter: sweep.parameter,
        omega0,
        points,
    };
    let record = ResultRecord::new("sweep", cfg, &payload)?;
    emit(ctx, &cfg.output.formats, "sweep", &record, Some(&table), &mut report)?;
    emit_timing(ctx, "sweep", &timings)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// validate

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Determinism {
    pub quick: bool,
    pub identical: bool,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationPayload {
    pub options: ValidationOptions,
    pub criteria: Vec<CriterionOutcome>,
    pub determinism: Determinism,
    pub passed: bool,
}

fn run_with_workers(workers: usize, opts: &ValidationOptions) -> Result<Vec<CriterionOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    Ok(pool.install(|| run_all(opts)))
}

/// Runs the quick criteria set under two worker counts and compares the
/// serialized outcomes byte for byte. `current` may be a quick run already
/// made under `rayon::current_num_threads()` workers.
/// Returns the check and the two worker counts used.
pub fn determinism_check(
    opts: &ValidationOptions,
    current: Option<&[CriterionOutcome]>,
) -> Result<(Determinism, [usize; 2])> {
    let quick = ValidationOptions { quick: true, ..*opts };
    let here = rayon::current_num_threads();
    let other = if here == 1 { 2 } else { 1 };
    let a = match current {
        Some(c) => to_json(&c)?,
        None => to_json(&run_all(&quick))?,
    };
    let b = to_json(&run_with_workers(other, &quick)?)?;
    let d = Determinism {
        quick: true,
        identical: a == b,
        bytes: a.len(),
    };
    Ok((d, [here, other]))
}

pub fn cmd_validate(cfg: Option<&RunConfig>, ctx: &Context) -> Result<Report> {
    let mut report = Report::ok();
    let mut timings = Timings::default();
    let opts = ValidationOptions {
        quick: ctx.quick,
        tolerance_scale: ctx.tolerance_scale,
        enforce_runtime: !ctx.quick,
    };
    let start = Instant::now();
    let criteria = run_all(&opts);
    timings.add("criteria", start.elapsed().as_secs_f64());
    for c in &criteria {
        if let Some(t) = &c.timing {
            timings.add(&format!("criterion_{}", c.id), t.elapsed.as_secs_f64());
        }
    }
    let start = Instant::now();
    let (determinism, workers) = determinism_check(&opts, if ctx.quick { Some(&criteria) } else { None })?;
    timings.add("determinism", start.elapsed().as_secs_f64());

    let mut table = Table::new(&["criterion", "title", "status", "metric", "value", "limit"]);
    for c in &criteria {
        let status = if c.passed { "PASS" } else { "FAIL" };
        for m in &c.metrics {
            table.push(vec![
                c.id.to_string(),
                c.title.clone(),
                status.into(),
                m.name.clone(),
                num(m.value),
                num(m.limit),
            ]);
        }
        let detail: Vec<String> = c
            .metrics
            .iter()
            .map(|m| format!("{} = {:.3e} ({} {:.1e})", m.name, m.value, if m.passed { "ok" } else { "over" }, m.limit))
            .collect();
        report.line(format!("{status} {:>2} {}: {}", c.id, c.title, detail.join(", ")));
        for n in c.notes.iter().filter(|n| n.starts_with("error")) {
            report.line(format!("      {n}"));
        }
    }
    let det_status = if determinism.identical { "PASS" } else { "FAIL" };
    table.push(vec![
        "11".into(),
        "determinism".into(),
        det_status.into(),
        "identical_json".into(),
        if determinism.identical { "1" } else { "0" }.into(),
        "1".into(),
    ]);
    report.line(format!(
        "{det_status} 11 determinism: {} bytes of quick-mode JSON, workers {} vs {}",
        determinism.bytes, workers[0], workers[1]
    ));
    let passed = criteria.iter().all(|c| c.passed) && determinism.identical;
    report.success = passed;
    let payload = ValidationPayload {
        options: opts,
        criteria,
        determinism,
        passed,
    };
    let formats = cfg.map(|c| c.output.formats.clone()).unwrap_or_else(|| vec![Format::Json, Format::Csv]);
    let input = (cfg, opts);
    let record = ResultRecord::new("validation", &input, &payload)?;
    emit(ctx, &formats, "validation", &record, Some(&table), &mut report)?;
    emit_timing(ctx, "validation", &timings)?;
    Ok(report)
}

/// Output directory: `--out`, else the configured one.
pub fn resolve_out(flag: Option<&Path>, cfg: Option<&RunConfig>) -> PathBuf {
    match (flag, cfg) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(c)) => c.output.directory.clone(),
        (None, None) => PathBuf::from("out"),
    }
}
