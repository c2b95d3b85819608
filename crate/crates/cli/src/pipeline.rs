//! Stage execution and bundle output.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sinai_core::billiard::{lyapunov_estimate, random_phase_point};
use sinai_core::eigensolver::{
    assemble_laplacian, read_archive, solve_below, solve_lowest, write_archive, write_eigen_table, Laplacian,
    SolverOptions,
};
use sinai_core::geometry::{Base, BoundaryCondition, SurfaceSpec};
use sinai_core::spectral::{doubling_cuts, kuznecov_curve, qer_variance, weyl_average, SpectralEnsemble, TestFunction};
use sinai_core::Spectrum;

use crate::config::{Check, ExperimentConfig};
use crate::criteria::{self, Outcome, Timing};
use crate::error::{CliError, Result};
use crate::plot::{line_chart, Series};

pub const SCHEMA_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const TIMINGS_FILE: &str = "timings.json";
pub const ARCHIVE_FILE: &str = "eigenpairs.bin";
pub const LYAPUNOV_BOUNCES: usize = 10_000;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Everything `report` needs; free of wall-clock data so that equal configs
/// give equal files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub surface: Value,
    pub resolution: usize,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub stages: BTreeMap<String, Value>,
    pub criteria: Vec<Outcome>,
}

impl Report {
    pub fn hard_failures(&self) -> Vec<&Outcome> {
        self.criteria.iter().filter(|o| o.hard && !o.pass).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: BTreeMap<String, f64>,
    pub criteria: Vec<Timing>,
}

/// A solved configuration with its boundary data.
pub struct SpectralRun {
    pub name: String,
    pub spectrum: Spectrum,
    pub ensemble: SpectralEnsemble,
    /// Seconds spent solving, zero when the archive was reused.
    pub solve_seconds: f64,
    /// Seconds spent on traces and nodal analysis.
    pub analysis_seconds: f64,
    pub reused_archive: bool,
}

fn solve(cfg: &ExperimentConfig, lap: &Laplacian) -> sinai_core::Result<Spectrum> {
    match cfg.lambda_cut {
        Some(cut) => solve_below(lap, cut, &SolverOptions::default()),
        None => solve_lowest(lap, cfg.modes),
    }
}

/// Solve `cfg` or reuse the archive already in `dir`.
pub fn spectral_run(
    name: &str,
    cfg: &ExperimentConfig,
    spec: &SurfaceSpec,
    dir: &Path,
    nodal: bool,
) -> Result<SpectralRun> {
    fs::create_dir_all(dir)?;
    let lap = assemble_laplacian(spec, cfg.resolution).map_err(|e| CliError::stage("spectrum", e))?;
    let archive = dir.join(ARCHIVE_FILE);
    let t = Instant::now();
    let cached = (cfg.lambda_cut.is_none() && archive.exists())
        .then(|| File::open(&archive).ok())
        .flatten()
        .and_then(|f| read_archive(BufReader::new(f), &lap.grid).ok())
        .filter(|s| s.pairs.len() == cfg.modes);
    let reused = cached.is_some();
    let spectrum = match cached {
        Some(s) => {
            log::info!("{name}: reusing {}", archive.display());
            s
        }
        None => {
            log::info!("{name}: solving at resolution {}", cfg.resolution);
            let s = solve(cfg, &lap).map_err(|e| CliError::stage("spectrum", e))?;
            write_archive(BufWriter::new(File::create(&archive)?), &s).map_err(|e| CliError::stage("spectrum", e))?;
            s
        }
    };
    let solve_seconds = if reused { 0.0 } else { t.elapsed().as_secs_f64() };
    let t = Instant::now();
    let ensemble = if nodal {
        SpectralEnsemble::build(spec, &spectrum)
    } else {
        SpectralEnsemble::traces_only(spec, &spectrum)
    }
    .map_err(|e| CliError::stage(if nodal { "nodal" } else { "spectrum" }, e))?;
    Ok(SpectralRun {
        name: name.to_string(),
        spectrum,
        ensemble,
        solve_seconds,
        analysis_seconds: t.elapsed().as_secs_f64(),
        reused_archive: reused,
    })
}

/// The one-disk torus the period-2 oracle is stated for.
pub fn is_reference_torus(spec: &SurfaceSpec) -> bool {
    matches!(spec.base, Base::Torus { width, height } if width == 1.0 && height == 1.0)
        && spec.obstacles.len() == 1
        && spec.obstacles[0].center.x == 0.5
        && spec.obstacles[0].center.y == 0.5
        && spec.obstacles[0].radius == 0.2
}

/// Unit square with Dirichlet walls and no obstacles.
pub fn is_unit_square(spec: &SurfaceSpec) -> bool {
    matches!(spec.base, Base::Rectangle { width, height, .. } if width == 1.0 && height == 1.0)
        && spec.obstacles.is_empty()
        && spec.bc == BoundaryCondition::Dirichlet
}

struct Bundle {
    dir: PathBuf,
    report: Report,
    timings: Timings,
}

impl Bundle {
    fn criterion(&mut self, f: impl FnOnce() -> Result<Outcome>) -> Result<()> {
        let (o, secs) = criteria::timed(f)?;
        log::debug!("{}", o.line());
        self.timings.criteria.push(criteria::timing(&o, secs));
        self.report.criteria.push(o);
        Ok(())
    }

    fn write_text(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

/// Execute the enabled stages of `cfg` and write the bundle to `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<Report> {
    let spec = cfg.surface_spec()?;
    let checks = cfg.enabled();
    fs::create_dir_all(out)?;
    let mut bundle = Bundle {
        dir: out.to_path_buf(),
        report: Report {
            schema_version: SCHEMA_VERSION,
            surface: serde_json::to_value(cfg.draft()?)?,
            resolution: cfg.resolution,
            seed: cfg.seed,
            checks: checks.iter().copied().collect(),
            stages: BTreeMap::new(),
            criteria: Vec::new(),
        },
        timings: Timings::default(),
    };

    if checks.contains(&Check::Dynamics) {
        let t = Instant::now();
        dynamics_stage(cfg, &spec, &mut bundle)?;
        bundle
            .timings
            .stages
            .insert("dynamics".into(), t.elapsed().as_secs_f64());
    }

    if checks.contains(&Check::Spectrum) {
        let nodal = checks.contains(&Check::Nodal);
        let run = spectral_run("run", cfg, &spec, out, nodal)?;
        bundle.timings.stages.insert("spectrum".into(), run.solve_seconds);
        bundle.timings.stages.insert("analysis".into(), run.analysis_seconds);
        spectrum_stage(&run, &mut bundle)?;
        let fs = cfg.test_functions(&spec)?;
        if nodal {
            nodal_stage(&run, &mut bundle)?;
        }
        if checks.contains(&Check::Kuznecov) {
            kuznecov_stage(&run, &fs, &mut bundle)?;
        }
        if checks.contains(&Check::Qer) {
            qer_stage(&run, &fs, &mut bundle)?;
        }
        if checks.contains(&Check::Certificates) {
            bundle.criterion(|| Ok(criteria::c10_sign_changes(&[&run.ensemble])))?;
        }
    }

    if checks.contains(&Check::Density) {
        bundle.criterion(|| Ok(criteria::c11_density()))?;
    }

    bundle.write_text(REPORT_FILE, &serde_json::to_string_pretty(&bundle.report)?)?;
    bundle.write_text(TIMINGS_FILE, &serde_json::to_string_pretty(&bundle.timings)?)?;
    bundle.write_text("summary.txt", &render_table(&bundle.report, Some(&bundle.timings)))?;
    Ok(bundle.report)
}

fn dynamics_stage(cfg: &ExperimentConfig, spec: &SurfaceSpec, bundle: &mut Bundle) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = random_phase_point(spec, &mut rng);
    let lyap = lyapunov_estimate(spec, p, LYAPUNOV_BOUNCES).map_err(|e| CliError::stage("dynamics", e))?;
    bundle.report.stages.insert(
        "dynamics".into(),
        json!({
            "lyapunov": { "exponent": lyap.exponent, "std_error": lyap.std_error, "bounces": lyap.bounces, "relaunches": lyap.relaunches },
        }),
    );
    if is_reference_torus(spec) {
        bundle.criterion(|| criteria::c1_monodromy(spec))?;
    }
    bundle.criterion(|| criteria::c2_symplectic(spec, cfg.seed))?;
    let name = cfg
        .surface
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("surface")
        .to_string();
    bundle.criterion(|| criteria::c3_conjugate(&[(name, spec.clone())], cfg.seed))?;
    bundle.criterion(|| criteria::c4_loops(spec, cfg.seed))?;
    Ok(())
}

fn spectrum_stage(run: &SpectralRun, bundle: &mut Bundle) -> Result<()> {
    let ens = &run.ensemble;
    write_eigen_table(
        BufWriter::new(File::create(bundle.dir.join("eigenvalues.csv"))?),
        &run.spectrum,
    )
    .map_err(|e| CliError::stage("spectrum", e))?;
    bundle.report.stages.insert(
        "spectrum".into(),
        json!({
            "modes": run.spectrum.pairs.len(),
            "top_lambda": run.spectrum.pairs.last().map(|p| p.lambda),
            "reliable_cut": ens.reliable_cut,
            "area": ens.area,
            "grid_area": ens.grid_area,
            "skipped": ens.skipped,
        }),
    );
    Ok(())
}

fn nodal_stage(run: &SpectralRun, bundle: &mut Bundle) -> Result<()> {
    let ens = &run.ensemble;
    let mut w = BufWriter::new(File::create(bundle.dir.join("nodal.csv"))?);
    writeln!(
        w,
        "index,lambda,domains,sign_changes,v,e,f,m,defect,euler_lhs,euler_rhs,euler_pass,courant,sup"
    )?;
    for r in ens.modes.iter().filter_map(|m| m.nodal.as_ref()) {
        let g = &r.graph;
        writeln!(
            w,
            "{},{:.10e},{},{},{},{},{},{},{},{},{},{},{},{:.6e}",
            r.index,
            r.lambda,
            r.domains,
            g.n,
            g.v,
            g.e,
            g.f,
            g.m,
            g.defect,
            r.euler.lhs,
            r.euler.rhs,
            r.euler.pass,
            r.courant,
            r.sup
        )?;
    }
    w.flush()?;
    if is_unit_square(&ens.spec) {
        bundle.criterion(|| Ok(criteria::c5_spectrum(&run.spectrum, &[("run", ens)])))?;
    }
    let rows: Vec<_> = ens.modes.iter().filter_map(|m| m.nodal.as_ref()).collect();
    let euler_failures: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| !r.euler.pass)
        .map(|r| (r.index, r.lambda))
        .collect();
    let courant_failures: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| !r.courant)
        .map(|r| (r.index, r.lambda))
        .collect();
    bundle.report.stages.insert(
        "nodal".into(),
        json!({
            "modes": rows.len(),
            "euler_pass": euler_failures.is_empty(),
            "courant_pass": courant_failures.is_empty(),
            "euler_failures": euler_failures,
            "courant_failures": courant_failures,
            "skipped": ens.skipped,
        }),
    );
    // The Euler criterion is stated for long runs only.
    if rows.len() >= criteria::EULER_MIN_MODES || !euler_failures.is_empty() {
        bundle.criterion(|| Ok(criteria::c6_euler(&[("run", ens)], &[])))?;
    }
    let pts: Vec<(f64, f64)> = ens
        .modes
        .iter()
        .filter_map(|m| m.nodal.as_ref().map(|r| (m.lambda, r.graph.n as f64)))
        .collect();
    let domains: Vec<(f64, f64)> = ens
        .modes
        .iter()
        .filter_map(|m| m.nodal.as_ref().map(|r| (m.lambda, r.domains as f64)))
        .collect();
    bundle.write_text(
        "sign_changes.svg",
        &line_chart(
            "Boundary sign changes and nodal domains",
            "lambda",
            "count",
            &[
                Series {
                    label: "n",
                    points: &pts,
                    color: COLORS[0],
                    dashed: false,
                },
                Series {
                    label: "N",
                    points: &domains,
                    color: COLORS[1],
                    dashed: true,
                },
            ],
        ),
    )
}

fn kuznecov_stage(run: &SpectralRun, fs: &[TestFunction], bundle: &mut Bundle) -> Result<()> {
    let ens = &run.ensemble;
    let curves: Vec<Vec<(f64, f64)>> = fs
        .iter()
        .map(|f| {
            let slope = 2.0 / std::f64::consts::PI * ens.f_squared(f);
            kuznecov_curve(ens, f)
                .into_iter()
                .filter(|p| p.0 > 0.0)
                .map(|(l, s)| (l, s / (slope * l)))
                .collect()
        })
        .collect();
    let mut csv = String::from("f,lambda,ratio\n");
    for (k, c) in curves.iter().enumerate() {
        for (l, r) in c {
            csv.push_str(&format!("{k},{l:.10e},{r:.10e}\n"));
        }
    }
    bundle.write_text("kuznecov.csv", &csv)?;
    let labels: Vec<String> = (0..fs.len()).map(|k| format!("f{k}")).collect();
    let series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(k, c)| Series {
            label: &labels[k],
            points: c,
            color: COLORS[k % COLORS.len()],
            dashed: false,
        })
        .collect();
    bundle.write_text(
        "kuznecov.svg",
        &line_chart("Kuznecov ratio", "lambda", "sum / slope lambda", &series),
    )?;
    bundle.criterion(|| criteria::c7_kuznecov(&[ens], fs))?;
    bundle.criterion(|| Ok(criteria::c8_chebyshev(&[ens], fs)))?;
    Ok(())
}

fn qer_stage(run: &SpectralRun, fs: &[TestFunction], bundle: &mut Bundle) -> Result<()> {
    let ens = &run.ensemble;
    let cuts = doubling_cuts(ens.reliable_cut, criteria::QER_DOUBLINGS);
    let mut csv = String::from("f,cut,modes,weyl_mean,omega,variance\n");
    let mut curves = Vec::new();
    for (k, f) in fs.iter().enumerate() {
        let mut pts = Vec::new();
        for &c in &cuts {
            let (Ok(w), Ok(q)) = (weyl_average(ens, f, c), qer_variance(ens, f, c)) else {
                continue;
            };
            csv.push_str(&format!(
                "{k},{c:.10e},{},{:.10e},{:.10e},{:.10e}\n",
                w.modes, w.mean, w.omega, q.variance
            ));
            pts.push((c, q.variance));
        }
        curves.push(pts);
    }
    bundle.write_text("qer.csv", &csv)?;
    let labels: Vec<String> = (0..fs.len()).map(|k| format!("f{k}")).collect();
    let series: Vec<Series> = curves
        .iter()
        .enumerate()
        .map(|(k, c)| Series {
            label: &labels[k],
            points: c,
            color: COLORS[k % COLORS.len()],
            dashed: false,
        })
        .collect();
    bundle.write_text(
        "qer.svg",
        &line_chart("QER variance", "lambda cut", "variance", &series),
    )?;
    bundle.criterion(|| criteria::c9_weyl(&[ens], fs))
}

/// Observed vs expected, one row per criterion.
pub fn render_table(report: &Report, timings: Option<&Timings>) -> String {
    let mut out = String::new();
    for o in &report.criteria {
        let time = timings
            .and_then(|t| t.criteria.iter().find(|c| c.id == o.id))
            .map(|t| format!(" [{:.2} s]", t.seconds))
            .unwrap_or_default();
        out.push_str(&o.line());
        out.push_str(&time);
        out.push('\n');
    }
    out
}

/// Load a bundle written by [`run`].
pub fn load_bundle(dir: &Path) -> Result<(Report, Option<Timings>)> {
    let corrupt = |reason: String| CliError::CorruptBundle {
        path: dir.display().to_string(),
        reason,
    };
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| corrupt(format!("{REPORT_FILE}: {e}")))?;
    if text.trim().is_empty() {
        return Err(corrupt(format!("{REPORT_FILE} is empty")));
    }
    let report: Report = serde_json::from_str(&text).map_err(|e| corrupt(format!("{REPORT_FILE}: {e}")))?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(corrupt(format!(
            "schema version {} (expected {SCHEMA_VERSION})",
            report.schema_version
        )));
    }
    let timings = fs::read_to_string(dir.join(TIMINGS_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok());
    Ok((report, timings))
}

/// Frequencies of modes failing the Euler inequality.
pub fn euler_failure_lambdas(report: &Report) -> Vec<f64> {
    report
        .stages
        .get("nodal")
        .and_then(|n| n["euler_failures"].as_array())
        .map_or_else(Vec::new, |fails| {
            fails.iter().filter_map(|f| f.get(1).and_then(Value::as_f64)).collect()
        })
}
