//! The acceptance criteria, each evaluated on precomputed data.
//!
//! Tolerances and budgets live here as constants so the acceptance suite can
//! pin them.

use std::f64::consts::PI;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sinai_core::billiard::{
    billiard_map, conjugate_point_scan, loop_momenta, loop_return_distances, map_jacobian, orbit_monodromy,
    random_phase_point, summarize_loops, Mat2, PhasePoint,
};
use sinai_core::geometry::{BoundaryCondition, SurfaceSpec};
use sinai_core::nodal::window_medians;
use sinai_core::numeric::median;
use sinai_core::spectral::{
    chebyshev_filter, density_one_extract, doubling_cuts, kuznecov_sum, log_with_square_spikes, omega_b, qer_variance,
    sign_change_certificate, weyl_average, SpectralEnsemble, TestFunction,
};
use sinai_core::Spectrum;

use crate::error::{CliError, Result};

pub const EXPECTED_MONODROMY: Mat2 = Mat2::new(-5.0, -2.4, 40.0, 19.0);
pub const MONODROMY_TOL: f64 = 1e-9;
pub const MONODROMY_BUDGET: f64 = 1.0;

pub const SYMPLECTIC_POINTS: usize = 100;
pub const DET_TOL: f64 = 1e-6;
pub const REVERSAL_TOL: f64 = 1e-9;
pub const SYMPLECTIC_BUDGET: f64 = 10.0;
/// Finite-difference step for the map Jacobian. Truncation error falls as
/// the fourth power of the step; at 1e-5 long flights still miss 1e-6.
pub const JACOBIAN_STEP: f64 = 1e-6;

pub const CONJUGATE_HORIZON: f64 = 1e3;
pub const CONJUGATE_LAUNCHES: usize = 100;
pub const CONJUGATE_BUDGET: f64 = 60.0;

pub const LOOP_EPSILONS: [f64; 3] = [0.1, 0.05, 0.025];
pub const LOOP_POINTS: usize = 5;
pub const LOOP_SAMPLES: usize = 10_000;
/// Trajectory length after which a launch counts as non-returning.
pub const LOOP_LENGTH_CAP: f64 = 10.0;
pub const LOOP_BUDGET: f64 = 120.0;

pub const SQUARE_RESOLUTION: usize = 201;
pub const SQUARE_MODES: usize = 20;
pub const SQUARE_TOL: f64 = 0.01;
pub const SPECTRUM_BUDGET: f64 = 300.0;

pub const EULER_MIN_MODES: usize = 200;
pub const EULER_BUDGET: f64 = 1800.0;

pub const KUZNECOV_RANGE: (f64, f64) = (0.8, 1.2);
pub const KUZNECOV_BUDGET: f64 = 1800.0;

pub const CHEBYSHEV_MS: [f64; 3] = [5.0, 10.0, 20.0];
pub const CHEBYSHEV_BUDGET: f64 = 60.0;

pub const WEYL_TOL: f64 = 0.15;
pub const OMEGA_RATIO_TOL: f64 = 1e-12;
pub const QER_DOUBLINGS: usize = 3;
pub const QER_MIN_DECREASES: usize = 2;
pub const QER_BUDGET: f64 = 600.0;

pub const SIGN_CHANGE_MIN_WINDOWS: usize = 3;
/// Fewest modes a window needs for its median to count.
pub const WINDOW_MIN_MODES: usize = 5;
pub const CERTIFICATE_ARCS: usize = 5;
/// Arc length as a fraction of the circle, leaving gaps between arcs.
pub const CERTIFICATE_ARC_FRACTION: f64 = 0.18;

pub const DENSITY_WINDOW: usize = 100_000;
pub const DENSITY_MIN: f64 = 0.95;
pub const DENSITY_BUDGET: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub id: u8,
    pub title: String,
    pub observed: String,
    pub expected: String,
    pub pass: bool,
    /// Hard invariants decide the exit status; trend checks are reported.
    pub hard: bool,
    pub budget_seconds: f64,
    pub details: serde_json::Value,
}

/// Wall-clock time of a criterion, kept out of the report for
/// reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub id: u8,
    pub seconds: f64,
    pub within_budget: bool,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: observed {} | expected {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.observed,
            self.expected
        )
    }
}

pub fn timing(outcome: &Outcome, seconds: f64) -> Timing {
    Timing {
        id: outcome.id,
        seconds,
        within_budget: seconds <= outcome.budget_seconds,
    }
}

/// The horizontal orbit through the disk center of a one-disk torus.
pub fn period_two_point() -> PhasePoint {
    PhasePoint::new(0, 0.0, 0.0)
}

pub fn c1_monodromy(spec: &SurfaceSpec) -> Result<Outcome> {
    let m = orbit_monodromy(spec, period_two_point(), 2).map_err(|e| CliError::stage("billiard", e))?;
    let diff = m.max_abs_diff(&EXPECTED_MONODROMY);
    Ok(Outcome {
        id: 1,
        title: "period-2 monodromy".into(),
        observed: format!(
            "[[{:.4}, {:.4}], [{:.4}, {:.4}]] trace {:.3} det {:.12}",
            m.a,
            m.b,
            m.c,
            m.d,
            m.trace(),
            m.det()
        ),
        expected: format!("[[-5, -2.4], [40, 19]] trace 14 det 1 to {MONODROMY_TOL:e}"),
        pass: diff <= MONODROMY_TOL && (m.det() - 1.0).abs() <= MONODROMY_TOL,
        hard: true,
        budget_seconds: MONODROMY_BUDGET,
        details: json!({ "monodromy": m, "max_abs_diff": diff, "trace": m.trace(), "det": m.det() }),
    })
}

pub fn c2_symplectic(spec: &SurfaceSpec, seed: u64) -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst_det, mut worst_rev) = (0.0f64, 0.0f64);
    let mut used = 0;
    let mut skipped = 0;
    while used < SYMPLECTIC_POINTS {
        let p = random_phase_point(spec, &mut rng);
        let Ok(Some(jac)) = map_jacobian(spec, p, JACOBIAN_STEP) else {
            skipped += 1;
            if skipped > 100 * SYMPLECTIC_POINTS {
                break;
            }
            continue;
        };
        let (q, _) = billiard_map(spec, p).map_err(|e| CliError::stage("billiard", e))?;
        let (back, _) = billiard_map(spec, PhasePoint::new(q.component, q.s, -q.eta))
            .map_err(|e| CliError::stage("billiard", e))?;
        let len = spec.atlas.components[p.component].length;
        let ds = (back.s - p.s).rem_euclid(len);
        let rev = if back.component == p.component {
            ds.min(len - ds).max((back.eta + p.eta).abs())
        } else {
            f64::INFINITY
        };
        worst_det = worst_det.max((jac.det().abs() - 1.0).abs());
        worst_rev = worst_rev.max(rev);
        used += 1;
    }
    Ok(Outcome {
        id: 2,
        title: "symplecticity and time reversal".into(),
        observed: format!("max ||det|-1| {worst_det:.2e}, max reversal error {worst_rev:.2e} over {used} points"),
        expected: format!("<= {DET_TOL:e} and <= {REVERSAL_TOL:e} over {SYMPLECTIC_POINTS} points"),
        pass: used == SYMPLECTIC_POINTS && worst_det <= DET_TOL && worst_rev <= REVERSAL_TOL,
        hard: true,
        budget_seconds: SYMPLECTIC_BUDGET,
        details: json!({ "points": used, "skipped_discontinuous": skipped, "max_det_error": worst_det, "max_reversal_error": worst_rev }),
    })
}

pub fn c3_conjugate(specs: &[(String, SurfaceSpec)], seed: u64) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut found = 0;
    let mut truncated = 0;
    for (name, spec) in specs {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut zeros = 0;
        for _ in 0..CONJUGATE_LAUNCHES {
            let p = random_phase_point(spec, &mut rng);
            let scan = conjugate_point_scan(spec, p, CONJUGATE_HORIZON).map_err(|e| CliError::stage("billiard", e))?;
            zeros += usize::from(scan.first_zero.is_some());
            truncated += usize::from(scan.truncated);
        }
        found += zeros;
        rows.push(json!({ "config": name, "launches": CONJUGATE_LAUNCHES, "conjugate_points": zeros }));
    }
    Ok(Outcome {
        id: 3,
        title: "no conjugate points".into(),
        observed: format!(
            "{found} conjugate points over {} configs ({truncated} scans truncated)",
            specs.len()
        ),
        expected: format!("none within {CONJUGATE_HORIZON} time units"),
        pass: found == 0 && !specs.is_empty(),
        hard: true,
        budget_seconds: CONJUGATE_BUDGET,
        details: json!({ "configs": rows, "truncated": truncated }),
    })
}

pub fn c4_loops(spec: &SurfaceSpec, seed: u64) -> Result<Outcome> {
    let comp = &spec.atlas.components[0];
    let etas = loop_momenta(LOOP_SAMPLES, seed);
    let mut rows = Vec::new();
    let mut all = true;
    for k in 0..LOOP_POINTS {
        let s = (k as f64 + 0.5) / LOOP_POINTS as f64 * comp.length;
        let d = loop_return_distances(spec, comp.id, s, &etas, LOOP_LENGTH_CAP)
            .map_err(|e| CliError::stage("billiard", e))?;
        let fractions: Vec<f64> = LOOP_EPSILONS.iter().map(|&e| summarize_loops(&d, e).fraction).collect();
        let ok = fractions.windows(2).all(|w| w[1] < w[0]);
        all &= ok;
        rows.push(json!({ "s": s, "fractions": fractions, "decreasing": ok }));
    }
    let summary: Vec<String> = rows
        .iter()
        .map(|r| {
            let f: Vec<String> = r["fractions"]
                .as_array()
                .unwrap()
                .iter()
                .map(|v| format!("{:.3}", v.as_f64().unwrap()))
                .collect();
            f.join(">")
        })
        .collect();
    Ok(Outcome {
        id: 4,
        title: "self-focal proxy".into(),
        observed: summary.join(", "),
        expected: format!("strictly decreasing over eps {LOOP_EPSILONS:?} at {LOOP_POINTS} points"),
        pass: all,
        hard: false,
        budget_seconds: LOOP_BUDGET,
        details: json!({ "length_cap": LOOP_LENGTH_CAP, "samples": LOOP_SAMPLES, "points": rows }),
    })
}

/// Exact unit-square Dirichlet frequencies `pi sqrt(m^2 + n^2)`, ascending.
pub fn square_frequencies(count: usize) -> Vec<f64> {
    let top = (count as f64).sqrt().ceil() as usize + 3;
    let mut f: Vec<f64> = (1..=top)
        .flat_map(|m| (1..=top).map(move |n| PI * ((m * m + n * n) as f64).sqrt()))
        .collect();
    f.sort_by(f64::total_cmp);
    f.truncate(count);
    f
}

/// Square eigenvalues against the closed form, and Courant on every run.
pub fn c5_spectrum(square: &Spectrum, courant_runs: &[(&str, &SpectralEnsemble)]) -> Outcome {
    let exact = square_frequencies(SQUARE_MODES);
    let errors: Vec<f64> = square
        .pairs
        .iter()
        .zip(&exact)
        .map(|(p, l)| (p.eigenvalue() - l * l).abs() / (l * l))
        .collect();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let mut courant_modes = 0;
    let mut courant_failures = Vec::new();
    for (name, ens) in courant_runs {
        for m in &ens.modes {
            if let Some(r) = &m.nodal {
                courant_modes += 1;
                if !r.courant {
                    courant_failures
                        .push(json!({ "run": name, "index": m.index, "lambda": m.lambda, "domains": r.domains }));
                }
            }
        }
    }
    Outcome {
        id: 5,
        title: "square spectrum and Courant".into(),
        observed: format!(
            "max relative eigenvalue error {worst:.2e} over {} modes; {} Courant failures in {courant_modes} modes",
            errors.len(),
            courant_failures.len()
        ),
        expected: format!("< {SQUARE_TOL} over {SQUARE_MODES} modes at nx = {SQUARE_RESOLUTION}; no Courant failures"),
        pass: errors.len() == SQUARE_MODES && worst < SQUARE_TOL && courant_failures.is_empty(),
        hard: true,
        budget_seconds: SPECTRUM_BUDGET,
        details: json!({ "relative_errors": errors, "courant_failures": courant_failures }),
    }
}

/// Euler failures among the first `EULER_MIN_MODES` analyzed modes, as
/// `(index, lambda)`.
pub fn euler_failures(ens: &SpectralEnsemble) -> (usize, Vec<(usize, f64)>) {
    let rows: Vec<_> = ens
        .modes
        .iter()
        .filter_map(|m| m.nodal.as_ref())
        .take(EULER_MIN_MODES)
        .collect();
    let fails = rows
        .iter()
        .filter(|r| !r.euler.pass)
        .map(|r| (r.index, r.lambda))
        .collect();
    (rows.len(), fails)
}

/// Euler inequality on each run. `refined` holds, per run, the failures
/// that remain at twice the resolution (only consulted when a run fails).
pub fn c6_euler(runs: &[(&str, &SpectralEnsemble)], refined: &[Option<Vec<(usize, f64)>>]) -> Outcome {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, (name, ens)) in runs.iter().enumerate() {
        let (count, fails) = euler_failures(ens);
        let remaining = refined.get(k).cloned().flatten();
        let ok = count >= EULER_MIN_MODES
            && ens.skipped.is_empty()
            && (fails.is_empty() || remaining.as_ref().is_some_and(|r| r.is_empty()));
        pass &= ok;
        parts.push(format!("{name}: {}/{count} pass", count - fails.len()));
        rows.push(json!({
            "run": name,
            "modes": count,
            "defect": ens.spec.euler_characteristic(),
            "failures": fails,
            "after_refinement": remaining,
            "skipped": ens.skipped,
        }));
    }
    Outcome {
        id: 6,
        title: "Euler inequality".into(),
        observed: parts.join("; "),
        expected: format!("100% of the first >= {EULER_MIN_MODES} modes, failures vanish under refinement"),
        pass: pass && !runs.is_empty(),
        hard: true,
        budget_seconds: EULER_BUDGET,
        details: json!({ "runs": rows }),
    }
}

fn bc_name(ens: &SpectralEnsemble) -> &'static str {
    match ens.spec.bc {
        BoundaryCondition::Dirichlet => "dirichlet",
        BoundaryCondition::Neumann => "neumann",
    }
}

pub fn c7_kuznecov(ensembles: &[&SpectralEnsemble], fs: &[TestFunction]) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut ratios = Vec::new();
    for ens in ensembles {
        for (k, f) in fs.iter().enumerate() {
            let r = kuznecov_sum(ens, f, ens.reliable_cut).map_err(|e| CliError::stage("spectral", e))?;
            ratios.push(r.ratio);
            rows.push(json!({ "bc": bc_name(ens), "f": k, "result": r }));
        }
    }
    let inside = |r: &f64| (KUZNECOV_RANGE.0..=KUZNECOV_RANGE.1).contains(r);
    Ok(Outcome {
        id: 7,
        title: "Kuznecov constant".into(),
        observed: format!(
            "ratios {}",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ")
        ),
        expected: format!("all in [{}, {}]", KUZNECOV_RANGE.0, KUZNECOV_RANGE.1),
        pass: !ratios.is_empty() && ratios.iter().all(inside),
        hard: false,
        budget_seconds: KUZNECOV_BUDGET,
        details: json!({ "sums": rows }),
    })
}

pub fn c8_chebyshev(ensembles: &[&SpectralEnsemble], fs: &[TestFunction]) -> Outcome {
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst_margin = f64::INFINITY;
    for ens in ensembles {
        for (k, f) in fs.iter().enumerate() {
            let filters: Vec<_> = CHEBYSHEV_MS.iter().map(|&m| chebyshev_filter(ens, f, m)).collect();
            let nested = filters
                .windows(2)
                .all(|w| w[0].selected.iter().all(|i| w[1].selected.contains(i)));
            for c in &filters {
                pass &= c.pass;
                worst_margin = worst_margin.min(c.selected_proportion - (1.0 - c.c_hat / c.big_m));
            }
            pass &= nested;
            rows.push(json!({
                "bc": bc_name(ens),
                "f": k,
                "nested": nested,
                "filters": filters.iter().map(|c| json!({
                    "M": c.big_m, "selected": c.selected_proportion, "c_hat": c.c_hat,
                    "c_predicted": c.c_predicted, "markov_bound": c.markov_bound, "pass": c.pass,
                })).collect::<Vec<_>>(),
            }));
        }
    }
    Outcome {
        id: 8,
        title: "Chebyshev filter".into(),
        observed: format!("smallest margin over 1 - c/M: {worst_margin:.3}"),
        expected: format!("selected >= 1 - c/M for M in {CHEBYSHEV_MS:?}, nesting exact"),
        pass: pass && !rows.is_empty(),
        hard: true,
        budget_seconds: CHEBYSHEV_BUDGET,
        details: json!({ "filters": rows }),
    }
}

pub fn c9_weyl(ensembles: &[&SpectralEnsemble], fs: &[TestFunction]) -> Result<Outcome> {
    let mut rows = Vec::new();
    let mut weyl_ok = true;
    let mut ratio_ok = true;
    let mut decay_ok = true;
    let mut worst_gap = 0.0f64;
    let mut decreases_seen = Vec::new();
    for ens in ensembles {
        for (k, f) in fs.iter().enumerate() {
            let top = ens.reliable_cut;
            let w = weyl_average(ens, f, top).map_err(|e| CliError::stage("spectral", e))?;
            worst_gap = worst_gap.max(w.relative_gap);
            weyl_ok &= w.relative_gap <= WEYL_TOL;
            let n = omega_b(&ens.spec, f, BoundaryCondition::Neumann);
            let d = omega_b(&ens.spec, f, BoundaryCondition::Dirichlet);
            ratio_ok &= (n - 2.0 * d).abs() <= OMEGA_RATIO_TOL * n.abs();
            let variances: Vec<_> = doubling_cuts(top, QER_DOUBLINGS)
                .into_iter()
                .map(|c| qer_variance(ens, f, c))
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| CliError::stage("spectral", e))?;
            let decreases = variances.windows(2).filter(|v| v[1].variance < v[0].variance).count();
            decay_ok &= decreases >= QER_MIN_DECREASES;
            decreases_seen.push(decreases);
            rows.push(json!({
                "bc": bc_name(ens), "f": k, "weyl": w,
                "omega_neumann": n, "omega_dirichlet": d,
                "variances": variances, "decreases": decreases,
            }));
        }
    }
    Ok(Outcome {
        id: 9,
        title: "boundary Weyl and QER".into(),
        observed: format!(
            "worst Cesàro gap {:.1}%, omega ratio {}, variance decreases per f {:?}",
            100.0 * worst_gap,
            if ratio_ok { "exact" } else { "off" },
            decreases_seen
        ),
        expected: format!(
            "gap <= {:.0}%, omega_N = 2 omega_D to {OMEGA_RATIO_TOL:e}, >= {QER_MIN_DECREASES} of {QER_DOUBLINGS} decreases",
            100.0 * WEYL_TOL
        ),
        pass: weyl_ok && ratio_ok && decay_ok && !rows.is_empty(),
        hard: false,
        budget_seconds: QER_BUDGET,
        details: json!({ "weyl_decay": decay_ok, "weyl_ok": weyl_ok, "ratio_ok": ratio_ok, "rows": rows }),
    })
}

/// Five disjoint bumps around the first circle.
pub fn certificate_arcs(spec: &SurfaceSpec) -> Vec<TestFunction> {
    let c = spec
        .atlas
        .components
        .iter()
        .find(|c| c.is_circle())
        .unwrap_or(&spec.atlas.components[0]);
    (0..CERTIFICATE_ARCS)
        .map(|k| {
            TestFunction::bump(
                c.id,
                k as f64 / CERTIFICATE_ARCS as f64 * c.length,
                CERTIFICATE_ARC_FRACTION * c.length,
            )
        })
        .collect()
}

pub fn c10_sign_changes(ensembles: &[&SpectralEnsemble]) -> Outcome {
    let mut rows = Vec::new();
    let mut growth_ok = true;
    let mut bound_ok = true;
    let mut violations = Vec::new();
    let mut summary = Vec::new();
    for ens in ensembles {
        let points: Vec<(f64, f64, f64)> = ens
            .modes
            .iter()
            .filter(|m| m.lambda <= ens.reliable_cut)
            .filter_map(|m| m.nodal.as_ref().map(|r| (m.lambda, r.graph.n as f64, r.domains as f64)))
            .collect();
        let n_pts: Vec<(f64, f64)> = points.iter().map(|p| (p.0, p.1)).collect();
        let windows = window_medians(&n_pts, WINDOW_MIN_MODES);
        let medians: Vec<f64> = windows.iter().map(|w| w.median).collect();
        let increasing = medians.len() >= SIGN_CHANGE_MIN_WINDOWS && medians.windows(2).all(|w| w[1] > w[0]);
        growth_ok &= increasing;
        let chi = ens.spec.euler_characteristic() as f64;
        let mut bounds = Vec::new();
        for w in &windows {
            let domains: Vec<f64> = points
                .iter()
                .filter(|p| p.0 >= w.lo && p.0 < w.hi)
                .map(|p| p.2)
                .collect();
            let med_n = median(&domains);
            let ok = med_n >= w.median / 2.0 + chi;
            bound_ok &= ok;
            bounds.push(json!({ "lo": w.lo, "hi": w.hi, "median_n": w.median, "median_domains": med_n, "bound": w.median / 2.0 + chi, "ok": ok }));
        }
        let arcs = certificate_arcs(&ens.spec);
        let mut certified = 0;
        let mut checked = 0;
        let mut fraction_by_window = Vec::new();
        for w in &windows {
            let mut c_in = 0;
            let mut n_in = 0;
            for m in ens.modes.iter().filter(|m| m.lambda >= w.lo && m.lambda < w.hi) {
                for (a, f) in arcs.iter().enumerate() {
                    let Some(cert) = sign_change_certificate(ens, f, m.index) else {
                        continue;
                    };
                    n_in += 1;
                    if cert.certified {
                        c_in += 1;
                        if cert.arc_sign_changes == 0 {
                            violations.push(json!({ "bc": bc_name(ens), "index": m.index, "arc": a }));
                        }
                    }
                }
            }
            certified += c_in;
            checked += n_in;
            fraction_by_window.push(c_in as f64 / n_in.max(1) as f64);
        }
        summary.push(format!(
            "{} medians {:?}",
            bc_name(ens),
            medians.iter().map(|m| *m as i64).collect::<Vec<_>>()
        ));
        rows.push(json!({
            "bc": bc_name(ens), "windows": windows, "increasing": increasing, "domain_bound": bounds,
            "certified": certified, "checked": checked, "certified_fraction_by_window": fraction_by_window,
        }));
    }
    Outcome {
        id: 10,
        title: "sign-change growth".into(),
        observed: format!("{}; {} certificate violations", summary.join("; "), violations.len()),
        expected: format!(
            "medians strictly increasing over >= {SIGN_CHANGE_MIN_WINDOWS} windows, N bound holds, 0 violations"
        ),
        pass: growth_ok && bound_ok && violations.is_empty() && !rows.is_empty(),
        hard: false,
        budget_seconds: f64::INFINITY,
        details: json!({ "runs": rows, "violations": violations, "growth_ok": growth_ok, "bound_ok": bound_ok }),
    }
}

pub fn c11_density() -> Outcome {
    let a = log_with_square_spikes(DENSITY_WINDOW);
    let sel = density_one_extract(&a);
    let spikes_kept = sel
        .indices
        .iter()
        .filter(|&&j| {
            let r = (j as f64).sqrt().round() as usize;
            r * r == j
        })
        .count();
    let minima = sel.block_minima();
    Outcome {
        id: 11,
        title: "density extraction".into(),
        observed: format!(
            "density {:.4} (lower {:.4}), {} blocks, minima nondecreasing {}, {spikes_kept} spikes kept",
            sel.density,
            sel.lower_density,
            sel.blocks.len(),
            sel.minima_nondecreasing()
        ),
        expected: format!(">= {DENSITY_MIN}, block minima nondecreasing"),
        pass: sel.density >= DENSITY_MIN && sel.minima_nondecreasing() && spikes_kept == 0,
        hard: true,
        budget_seconds: DENSITY_BUDGET,
        details: json!({ "window": DENSITY_WINDOW, "density": sel.density, "lower_density": sel.lower_density, "block_minima": minima, "blocks": sel.blocks, "diverges": sel.diverges }),
    }
}

/// Run `f` and pair its outcome with the elapsed time.
pub fn timed<F: FnOnce() -> Result<Outcome>>(f: F) -> Result<(Outcome, f64)> {
    let t = Instant::now();
    let o = f()?;
    Ok((o, t.elapsed().as_secs_f64()))
}
