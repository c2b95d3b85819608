//! Statistics folded over a computed spectrum: Kuznecov sums, Chebyshev
//! filtering, boundary Weyl and quantum-ergodic averages, sign-change
//! certificates and density-one extraction.
//!
//! All boundary integrals use the periodic trapezoid rule on the trace
//! sampling. The asymptotic statements behind each fold are checked as
//! ratios or trends over finite windows.

mod density;
mod test_function;

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use density::{density_one_extract, log_with_square_spikes, Block, DensitySelection};
pub use test_function::{Piece, Profile, TestFunction};

use crate::eigensolver::{extract_trace, BoundaryTrace, Spectrum};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryCondition, SurfaceSpec};
use crate::nodal::{analyze_mode, resolved_cutoff, NodalRow, ZERO_THRESHOLD};
use crate::numeric::{compensated_sum, gauss_legendre};

/// Fewest modes a Kuznecov, Weyl or variance window may hold.
pub const MIN_WINDOW_MODES: usize = 50;

/// Relative tolerance between the exact area and the grid quadrature area.
pub const AREA_TOLERANCE: f64 = 0.01;

/// Safety factor on the trapezoid error estimate in certificates.
pub const CERTIFICATE_MARGIN_FACTOR: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub index: usize,
    pub lambda: f64,
    pub traces: Vec<BoundaryTrace>,
    pub nodal: Option<NodalRow>,
}

/// Computed modes in ascending `lambda` with their boundary data.
#[derive(Clone, Debug)]
pub struct SpectralEnsemble {
    pub spec: SurfaceSpec,
    /// Exact flat area of the table.
    pub area: f64,
    pub grid_area: Option<f64>,
    /// Largest cut below which the ensemble is complete and resolved.
    pub reliable_cut: f64,
    pub modes: Vec<Mode>,
    /// Modes whose nodal analysis failed, with the reason.
    pub skipped: Vec<(usize, String)>,
}

impl SpectralEnsemble {
    /// Traces and nodal rows for every pair of `spectrum`.
    pub fn build(spec: &SurfaceSpec, spectrum: &Spectrum) -> Result<Self> {
        Self::assemble(spec, spectrum, true)
    }

    /// Traces only, skipping the nodal analysis.
    pub fn traces_only(spec: &SurfaceSpec, spectrum: &Spectrum) -> Result<Self> {
        Self::assemble(spec, spectrum, false)
    }

    fn assemble(spec: &SurfaceSpec, spectrum: &Spectrum, nodal: bool) -> Result<Self> {
        let exact = spec.area();
        let grid_area = spectrum.grid.quadrature_area();
        if (grid_area - exact).abs() > AREA_TOLERANCE * exact {
            return Err(Error::AreaMismatch { exact, grid: grid_area });
        }
        let grid = &spectrum.grid;
        let built: Vec<Result<(Mode, Option<String>)>> = spectrum
            .pairs
            .par_iter()
            .map(|p| {
                let traces = extract_trace(spec, grid, p)?;
                let (row, reason) = if nodal {
                    match analyze_mode(spec, grid, p, &traces) {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    }
                } else {
                    (None, None)
                };
                Ok((
                    Mode {
                        index: p.index,
                        lambda: p.lambda,
                        traces,
                        nodal: row,
                    },
                    reason,
                ))
            })
            .collect();
        let mut modes = Vec::with_capacity(built.len());
        let mut skipped = Vec::new();
        for b in built {
            let (m, reason) = b?;
            if let Some(r) = reason {
                skipped.push((m.index, r));
            }
            modes.push(m);
        }
        let top = modes.iter().map(|m| m.lambda).fold(0.0, f64::max);
        let mut ens = Self::from_modes(spec, modes);
        ens.grid_area = Some(grid_area);
        ens.reliable_cut = top.min(resolved_cutoff(grid));
        ens.skipped = skipped;
        Ok(ens)
    }

    /// Ensemble from precomputed modes, e.g. analytic traces.
    pub fn from_modes(spec: &SurfaceSpec, mut modes: Vec<Mode>) -> Self {
        modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        let top = modes.iter().map(|m| m.lambda).fold(0.0, f64::max);
        Self {
            spec: spec.clone(),
            area: spec.area(),
            grid_area: None,
            reliable_cut: top,
            modes,
            skipped: Vec::new(),
        }
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// Modes with `lambda < cut`.
    pub fn below(&self, cut: f64) -> impl Iterator<Item = &Mode> {
        self.modes.iter().take_while(move |m| m.lambda < cut)
    }

    fn nonzero_below(&self, cut: f64) -> Vec<&Mode> {
        self.below(cut).filter(|m| m.lambda > 0.0).collect()
    }

    pub fn mode(&self, index: usize) -> Option<&Mode> {
        self.modes.iter().find(|m| m.index == index)
    }

    /// Boundary condition of each component, read off the traces.
    pub fn component_bcs(&self) -> Vec<(usize, BoundaryCondition)> {
        match self.modes.first() {
            Some(m) => m.traces.iter().map(|t| (t.component, t.bc)).collect(),
            None => self
                .spec
                .atlas
                .components
                .iter()
                .map(|c| (c.id, self.spec.bc))
                .collect(),
        }
    }

    /// `int f^2 ds` on the trace sampling.
    pub fn f_squared(&self, f: &TestFunction) -> f64 {
        match self.modes.first() {
            Some(m) => f.power_integral_on(&m.traces, 2),
            None => f.power_integral(&self.spec, 2),
        }
    }

    /// The limit state `omega_B(f)`, each component weighted by its own
    /// boundary condition.
    pub fn omega(&self, f: &TestFunction) -> f64 {
        self.component_bcs()
            .into_iter()
            .map(|(c, bc)| {
                let only: TestFunction = TestFunction {
                    pieces: f.pieces.iter().filter(|p| p.component == c).copied().collect(),
                };
                omega_b(&self.spec, &only, bc)
            })
            .sum()
    }

    /// `(lambda, int f phi^b ds, int f |phi^b|^2 ds)` for each mode, in order.
    fn folds(&self, f: &TestFunction, modes: &[&Mode]) -> Vec<(f64, f64, f64)> {
        let Some(first) = modes.first() else {
            return Vec::new();
        };
        let weights: Vec<Vec<f64>> = first.traces.iter().map(|t| f.sample(t)).collect();
        modes
            .par_iter()
            .map(|m| {
                let mut lin = 0.0;
                let mut quad = 0.0;
                for (t, w) in m.traces.iter().zip(&weights) {
                    debug_assert_eq!(t.samples.len(), w.len());
                    let ds = t.spacing();
                    lin += compensated_sum(t.samples.iter().zip(w).map(|(s, w)| w * s.value)) * ds;
                    quad += compensated_sum(t.samples.iter().zip(w).map(|(s, w)| w * s.value * s.value)) * ds;
                }
                (m.lambda, lin, quad)
            })
            .collect()
    }

    /// `int f phi^b ds` for one mode.
    pub fn coefficient(&self, mode: &Mode, f: &TestFunction) -> f64 {
        self.folds(f, &[mode])[0].1
    }

    /// `||phi^b||^2` over the whole boundary.
    pub fn boundary_norm_sq(mode: &Mode) -> f64 {
        mode.traces.iter().map(|t| t.integrate(|_, v| v * v)).sum()
    }
}

fn require(available: usize) -> Result<()> {
    if available < MIN_WINDOW_MODES {
        return Err(Error::WindowTooSmall {
            available,
            required: MIN_WINDOW_MODES,
        });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KuznecovSum {
    pub cut: f64,
    pub modes: usize,
    pub sum: f64,
    /// `(2 / pi) int f^2 ds`.
    pub slope: f64,
    pub ratio: f64,
    pub within_reliable: bool,
}

/// `sum_{lambda_j < cut} |int f phi_j^b ds|^2` against the linear prediction.
pub fn kuznecov_sum(ens: &SpectralEnsemble, f: &TestFunction, cut: f64) -> Result<KuznecovSum> {
    let modes: Vec<&Mode> = ens.below(cut).collect();
    require(modes.len())?;
    let sum = compensated_sum(ens.folds(f, &modes).into_iter().map(|(_, c, _)| c * c));
    let slope = 2.0 / PI * ens.f_squared(f);
    let within_reliable = cut <= ens.reliable_cut * (1.0 + 1e-12);
    if !within_reliable {
        log::warn!(
            "Kuznecov cut {cut:.3} exceeds the reliable window {:.3}",
            ens.reliable_cut
        );
    }
    Ok(KuznecovSum {
        cut,
        modes: modes.len(),
        sum,
        slope,
        ratio: if slope > 0.0 { sum / (slope * cut) } else { f64::NAN },
        within_reliable,
    })
}

/// Cumulative Kuznecov sum at each mode, `(lambda_j, sum_{i <= j})`.
pub fn kuznecov_curve(ens: &SpectralEnsemble, f: &TestFunction) -> Vec<(f64, f64)> {
    let modes: Vec<&Mode> = ens.modes.iter().collect();
    let mut acc = crate::numeric::CompensatedSum::new();
    ens.folds(f, &modes)
        .into_iter()
        .map(|(l, c, _)| {
            acc.add(c * c);
            (l, acc.value())
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevFilter {
    pub big_m: f64,
    pub window: usize,
    /// Mode indices with `|int f phi^b| <= M lambda^{-1/2}`.
    pub selected: Vec<usize>,
    pub selected_proportion: f64,
    pub complement_proportion: f64,
    /// Window mean of `lambda_j |int f phi_j^b|^2`.
    pub c_hat: f64,
    /// The same constant predicted from the Kuznecov slope, `4 int f^2 / area`.
    pub c_predicted: f64,
    /// Markov bound `c_hat / M^2` on the complement.
    pub markov_bound: f64,
    pub pass: bool,
}

/// Filter the nonzero modes of the ensemble by coefficient size.
pub fn chebyshev_filter(ens: &SpectralEnsemble, f: &TestFunction, big_m: f64) -> ChebyshevFilter {
    assert!(big_m > 0.0, "M must be positive");
    let modes = ens.nonzero_below(f64::INFINITY);
    let folds = ens.folds(f, &modes);
    let window = modes.len();
    let scaled: Vec<f64> = folds.iter().map(|&(l, c, _)| l * c * c).collect();
    let c_hat = if window == 0 {
        0.0
    } else {
        compensated_sum(scaled.iter().copied()) / window as f64
    };
    let selected: Vec<usize> = modes
        .iter()
        .zip(&folds)
        .filter(|(_, &(l, c, _))| c.abs() <= big_m / l.sqrt())
        .map(|(m, _)| m.index)
        .collect();
    let selected_proportion = if window == 0 {
        1.0
    } else {
        selected.len() as f64 / window as f64
    };
    ChebyshevFilter {
        big_m,
        window,
        selected,
        selected_proportion,
        complement_proportion: 1.0 - selected_proportion,
        c_hat,
        c_predicted: 4.0 * ens.f_squared(f) / ens.area,
        markov_bound: c_hat / (big_m * big_m),
        pass: selected_proportion >= 1.0 - c_hat / big_m,
    }
}

/// `int_{-1}^{1} (1 - eta^2)^{-1/2} d eta` (Neumann) or
/// `int_{-1}^{1} (1 - eta^2)^{1/2} d eta` (Dirichlet), computed with
/// `eta = sin theta` and checked against `pi` and `pi / 2`.
pub fn fiber_integral(bc: BoundaryCondition) -> f64 {
    static FIBERS: OnceLock<(f64, f64)> = OnceLock::new();
    let &(neumann, dirichlet) = FIBERS.get_or_init(|| {
        let half = PI / 2.0;
        let (mut n, mut d) = (0.0, 0.0);
        let (nodes, weights) = gauss_legendre(24);
        for (x, w) in nodes.into_iter().zip(weights) {
            let theta = half * x;
            let (eta, jacobian) = theta.sin_cos();
            let q = 1.0 - eta * eta;
            n += w * half * jacobian / q.sqrt();
            d += w * half * jacobian * q.sqrt();
        }
        assert!((n - PI).abs() < 1e-12, "Neumann fiber integral {n}");
        assert!((d - half).abs() < 1e-12, "Dirichlet fiber integral {d}");
        (n, d)
    });
    match bc {
        BoundaryCondition::Neumann => neumann,
        BoundaryCondition::Dirichlet => dirichlet,
    }
}

/// `omega_B(f) = 4 / (|S^1| area) * fiber(bc) * int f ds` for a table in the plane.
pub fn omega_b(spec: &SurfaceSpec, f: &TestFunction, bc: BoundaryCondition) -> f64 {
    if f.is_zero() {
        return 0.0;
    }
    4.0 / (2.0 * PI * spec.area()) * fiber_integral(bc) * f.power_integral(spec, 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeylAverage {
    pub cut: f64,
    pub modes: usize,
    pub mean: f64,
    pub omega: f64,
    /// `mean - omega`.
    pub gap: f64,
    /// `|gap| / |omega|`, zero when both vanish.
    pub relative_gap: f64,
}

/// Cesàro mean of `int f |phi_j^b|^2 ds` over the nonzero modes below `cut`.
pub fn weyl_average(ens: &SpectralEnsemble, f: &TestFunction, cut: f64) -> Result<WeylAverage> {
    let modes = ens.nonzero_below(cut);
    require(modes.len())?;
    let values: Vec<f64> = ens.folds(f, &modes).into_iter().map(|(_, _, q)| q).collect();
    let mean = crate::numeric::mean(&values);
    let omega = ens.omega(f);
    let gap = mean - omega;
    Ok(WeylAverage {
        cut,
        modes: modes.len(),
        mean,
        omega,
        gap,
        relative_gap: if omega != 0.0 {
            gap.abs() / omega.abs()
        } else {
            gap.abs()
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QerVariance {
    pub cut: f64,
    pub modes: usize,
    pub omega: f64,
    /// Cesàro mean of `(int f |phi_j^b|^2 - omega)^2`.
    pub variance: f64,
    /// Spread about the window mean instead of `omega`.
    pub sample_variance: f64,
}

/// Quantum-ergodic variance over the nonzero modes below `cut`.
pub fn qer_variance(ens: &SpectralEnsemble, f: &TestFunction, cut: f64) -> Result<QerVariance> {
    let modes = ens.nonzero_below(cut);
    require(modes.len())?;
    let values: Vec<f64> = ens.folds(f, &modes).into_iter().map(|(_, _, q)| q).collect();
    let omega = ens.omega(f);
    let variance = compensated_sum(values.iter().map(|v| (v - omega) * (v - omega))) / values.len() as f64;
    Ok(QerVariance {
        cut,
        modes: modes.len(),
        omega,
        variance,
        sample_variance: crate::numeric::variance(&values),
    })
}

/// `steps + 1` cuts ending at `top`, each doubling the eigenvalue `lambda^2`
/// of the one before, lowest first.
pub fn doubling_cuts(top: f64, steps: usize) -> Vec<f64> {
    (0..=steps).rev().map(|k| top / 2f64.sqrt().powi(k as i32)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub index: usize,
    pub lambda: f64,
    /// `int f |phi^b| ds`.
    pub lhs: f64,
    /// `|int f phi^b ds|`.
    pub rhs: f64,
    pub margin: f64,
    pub certified: bool,
    /// `int f |phi^b|^2 ds`.
    pub energy: f64,
    /// `sup |phi^b|` over the support of `f`.
    pub sup: f64,
    /// Sign changes counted inside the support of `f`.
    pub arc_sign_changes: usize,
}

/// Sum of `|second difference|` of a periodic sequence.
fn second_variation(g: &[f64]) -> f64 {
    let n = g.len();
    if n < 3 {
        return 0.0;
    }
    compensated_sum((0..n).map(|k| (g[(k + n - 1) % n] - 2.0 * g[k] + g[(k + 1) % n]).abs()))
}

/// Sign changes of `trace` inside each maximal run of samples where
/// `weights > 0`, ignoring values at or below `tau`.
pub fn support_sign_changes(trace: &BoundaryTrace, weights: &[f64], tau: f64) -> usize {
    let n = trace.samples.len();
    let inside: Vec<bool> = weights.iter().map(|&w| w > 0.0).collect();
    let Some(gap) = inside.iter().position(|&b| !b) else {
        return crate::nodal::sign_changes_with_threshold(trace, tau);
    };
    let mut count = 0;
    let mut last: Option<bool> = None;
    for step in 1..=n {
        let k = (gap + step) % n;
        if !inside[k] {
            last = None;
            continue;
        }
        let v = trace.samples[k].value;
        if v.abs() <= tau {
            continue;
        }
        let sign = v > 0.0;
        if last.is_some_and(|l| l != sign) {
            count += 1;
        }
        last = Some(sign);
    }
    count
}

/// Strict inequality `int f |phi| > |int f phi|` beyond the quadrature
/// margin certifies a sign change of the trace on the support of `f`.
pub fn sign_change_certificate(ens: &SpectralEnsemble, f: &TestFunction, index: usize) -> Option<Certificate> {
    let mode = ens.mode(index)?;
    let sup_all = mode.traces.iter().map(BoundaryTrace::sup).fold(0.0, f64::max);
    let tau = ZERO_THRESHOLD * sup_all;
    let (mut lhs, mut signed, mut energy, mut sup, mut error, mut mass) = (0.0, 0.0, 0.0, 0.0f64, 0.0, 0.0);
    let mut changes = 0;
    for t in &mode.traces {
        let w = f.sample(t);
        let ds = t.spacing();
        let abs: Vec<f64> = t.samples.iter().zip(&w).map(|(s, w)| w * s.value.abs()).collect();
        let lin: Vec<f64> = t.samples.iter().zip(&w).map(|(s, w)| w * s.value).collect();
        lhs += compensated_sum(abs.iter().copied()) * ds;
        signed += compensated_sum(lin.iter().copied()) * ds;
        energy += compensated_sum(t.samples.iter().zip(&w).map(|(s, w)| w * s.value * s.value)) * ds;
        mass += compensated_sum(w.iter().copied()) * ds;
        error += ds / 12.0 * (second_variation(&abs) + second_variation(&lin));
        for (s, &wk) in t.samples.iter().zip(&w) {
            if wk > 0.0 {
                sup = sup.max(s.value.abs());
            }
        }
        changes += support_sign_changes(t, &w, tau);
    }
    let rhs = signed.abs();
    // Values under the zero threshold are not counted as signs; their
    // contribution to the gap is at most 2 tau int f.
    let margin = CERTIFICATE_MARGIN_FACTOR * error + 2.0 * tau * mass;
    Some(Certificate {
        index,
        lambda: mode.lambda,
        lhs,
        rhs,
        margin,
        certified: lhs > rhs + margin,
        energy,
        sup,
        arc_sign_changes: changes,
    })
}

/// Certificates of every mode below `cut`.
pub fn certificates(ens: &SpectralEnsemble, f: &TestFunction, cut: f64) -> Vec<Certificate> {
    let indices: Vec<usize> = ens.below(cut).map(|m| m.index).collect();
    indices
        .par_iter()
        .filter_map(|&i| sign_change_certificate(ens, f, i))
        .collect()
}
