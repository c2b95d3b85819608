//! Dynamical diagnostics: conjugate points, Lyapunov exponents, Birkhoff
//! averages, loop-set measure and the finite-difference Jacobian of the map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jacobi::{jacobi_propagate, jacobi_reflect, JacobiState, Mat2};
use super::{billiard_map, first_hit, BilliardState, PhasePoint, TANGENTIAL_TOL};
use crate::error::{Error, Result};
use crate::geometry::{min_image, SurfaceSpec, Vec2};
use crate::numeric::{mean, CompensatedSum};

const RELAUNCH_LIMIT: usize = 1000;

/// Uniform sample of `ds deta` on the whole boundary phase space.
pub fn random_phase_point<R: Rng + ?Sized>(spec: &SurfaceSpec, rng: &mut R) -> PhasePoint {
    let total = spec.atlas.total_length();
    let mut u = rng.random::<f64>() * total;
    let mut component = spec.atlas.components.len() - 1;
    for c in &spec.atlas.components {
        if u < c.length {
            component = c.id;
            break;
        }
        u -= c.length;
    }
    let eta = rng.random_range(-1.0..1.0);
    PhasePoint::new(component, u.min(spec.atlas.components[component].length), eta)
}

fn relaunch_rng(p: PhasePoint, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(p.s.to_bits() ^ p.eta.to_bits().rotate_left(17) ^ (p.component as u64) ^ salt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateScan {
    pub first_zero: Option<f64>,
    /// Time actually scanned (shorter than the horizon if truncated).
    pub scanned: f64,
    pub bounces: usize,
    pub truncated: bool,
}

/// Propagate `J(0) = 0, J'(0) = 1` along the orbit of `p` and report the first
/// zero of `J` inside a flight, up to `horizon`.
pub fn conjugate_point_scan(spec: &SurfaceSpec, p: PhasePoint, horizon: f64) -> Result<ConjugateScan> {
    const TOL: f64 = 1e-9;
    let mut state = BilliardState::lift(spec, p)?;
    let mut field = JacobiState::new(0.0, 1.0);
    let mut t = 0.0;
    let mut bounces = 0;
    while t < horizon {
        let impact = match state.bounce(spec) {
            Ok(i) => i,
            Err(Error::TangentialImpact { sin_phi }) => {
                log::warn!("conjugate scan truncated at t = {t:.3}: tangential impact (sin phi = {sin_phi:.2e})");
                return Ok(ConjugateScan {
                    first_zero: None,
                    scanned: t,
                    bounces,
                    truncated: true,
                });
            }
            Err(e) => return Err(e),
        };
        let span = impact.flight.min(horizon - t);
        if field.jp != 0.0 {
            let tau = -field.j / field.jp;
            if tau > 0.0 && tau <= span && t + tau > TOL {
                return Ok(ConjugateScan {
                    first_zero: Some(t + tau),
                    scanned: t + tau,
                    bounces,
                    truncated: false,
                });
            }
        }
        if span < impact.flight {
            break;
        }
        t += impact.flight;
        bounces += 1;
        field = jacobi_propagate(field, impact.flight);
        field = jacobi_reflect(field, impact.frame.signed_curvature, impact.sin_phi)?;
        let scale = field.j.abs().max(field.jp.abs());
        if scale > 1e100 {
            field = JacobiState::new(field.j / scale, field.jp / scale);
        }
    }
    Ok(ConjugateScan {
        first_zero: None,
        scanned: horizon,
        bounces,
        truncated: false,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub exponent: f64,
    pub std_error: f64,
    pub time: f64,
    pub bounces: usize,
    pub relaunches: usize,
}

const RENORMALIZE_EVERY: usize = 32;
const LYAPUNOV_BLOCKS: usize = 16;

/// Largest Lyapunov exponent per unit time from the growth of the Jacobi
/// monodromy along the orbit of `p`.
///
/// The product is renormalized every 32 bounces. The standard error comes
/// from the spread of the growth rate over 16 consecutive orbit blocks. An
/// orbit that hits the boundary tangentially is discarded and replaced by a
/// deterministic fresh launch.
pub fn lyapunov_estimate(spec: &SurfaceSpec, p: PhasePoint, bounces: usize) -> Result<LyapunovEstimate> {
    if bounces < 100 {
        return Err(Error::InvalidSurface(format!(
            "lyapunov estimate needs >= 100 bounces, got {bounces}"
        )));
    }
    let mut rng = relaunch_rng(p, 0x1a9);
    let mut start = p;
    for relaunches in 0..RELAUNCH_LIMIT {
        match lyapunov_orbit(spec, start, bounces) {
            Ok(mut est) => {
                est.relaunches = relaunches;
                return Ok(est);
            }
            Err(Error::TangentialImpact { sin_phi }) => {
                log::info!("lyapunov orbit discarded after tangential impact (sin phi = {sin_phi:.2e})");
                start = random_phase_point(spec, &mut rng);
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::ConvergenceFailure("too many tangential relaunches".into()))
}

fn lyapunov_orbit(spec: &SurfaceSpec, p: PhasePoint, bounces: usize) -> Result<LyapunovEstimate> {
    let mut state = BilliardState::lift(spec, p)?;
    let mut m = Mat2::IDENTITY;
    let mut log_scale = 0.0;
    let mut time = 0.0;
    let block_len = bounces.div_ceil(LYAPUNOV_BLOCKS);
    let mut block_marks = vec![(0.0, 0.0)];
    for k in 1..=bounces {
        let impact = state.bounce(spec)?;
        if impact.sin_phi < TANGENTIAL_TOL {
            return Err(Error::TangentialImpact {
                sin_phi: impact.sin_phi,
            });
        }
        m = Mat2::reflection(impact.frame.signed_curvature, impact.sin_phi) * Mat2::transport(impact.flight) * m;
        time += impact.flight;
        let norm = m.frobenius();
        if k % RENORMALIZE_EVERY == 0 || norm > 1e100 {
            log_scale += norm.ln();
            m = m.scale(1.0 / norm);
        }
        if k % block_len == 0 || k == bounces {
            block_marks.push((time, log_scale + m.frobenius().ln()));
        }
    }
    let total = log_scale + m.frobenius().ln();
    let rates: Vec<f64> = block_marks
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .collect();
    let std_error = if rates.len() > 1 {
        (crate::numeric::variance(&rates) / rates.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(LyapunovEstimate {
        exponent: total / time,
        std_error,
        time,
        bounces,
        relaunches: 0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffAverage {
    pub empirical: f64,
    pub liouville: f64,
    pub gap: f64,
    pub bounces: usize,
    pub relaunches: usize,
}

/// Liouville mean `int a ds deta / (2 |dM|)` by the midpoint rule on a grid
/// of `n_s` points per component and `n_eta` momenta.
pub fn liouville_mean<F>(spec: &SurfaceSpec, observable: F, n_s: usize, n_eta: usize) -> f64
where
    F: Fn(&PhasePoint) -> f64,
{
    let mut acc = CompensatedSum::new();
    for c in &spec.atlas.components {
        let ds = c.length / n_s as f64;
        let de = 2.0 / n_eta as f64;
        for i in 0..n_s {
            let s = (i as f64 + 0.5) * ds;
            for k in 0..n_eta {
                let eta = -1.0 + (k as f64 + 0.5) * de;
                acc.add(observable(&PhasePoint::new(c.id, s, eta)) * ds * de);
            }
        }
    }
    acc.value() / (2.0 * spec.atlas.total_length())
}

/// Time average of `observable` over `bounces` points of the orbit of `p`
/// (starting with `p` itself), compared with the Liouville mean.
pub fn birkhoff_average<F>(spec: &SurfaceSpec, p: PhasePoint, observable: F, bounces: usize) -> Result<BirkhoffAverage>
where
    F: Fn(&PhasePoint) -> f64,
{
    if bounces == 0 {
        return Err(Error::InvalidSurface(
            "birkhoff average needs at least one bounce".into(),
        ));
    }
    let liouville = liouville_mean(spec, &observable, 1024, 256);
    let mut rng = relaunch_rng(p, 0xb1b);
    let mut start = p;
    for relaunches in 0..RELAUNCH_LIMIT {
        match orbit_mean(spec, start, &observable, bounces) {
            Ok(empirical) => {
                return Ok(BirkhoffAverage {
                    empirical,
                    liouville,
                    gap: (empirical - liouville).abs(),
                    bounces,
                    relaunches,
                })
            }
            Err(Error::TangentialImpact { .. }) => start = random_phase_point(spec, &mut rng),
            Err(e) => return Err(e),
        }
    }
    Err(Error::ConvergenceFailure("too many tangential relaunches".into()))
}

fn orbit_mean<F>(spec: &SurfaceSpec, p: PhasePoint, observable: &F, bounces: usize) -> Result<f64>
where
    F: Fn(&PhasePoint) -> f64,
{
    let mut state = BilliardState::lift(spec, p)?;
    let mut acc = CompensatedSum::new();
    acc.add(observable(&p));
    for _ in 1..bounces {
        let q = state.bounce(spec)?.phase_point();
        acc.add(observable(&q));
    }
    Ok(acc.value() / bounces as f64)
}

/// Root-mean-square Birkhoff gap over `orbits` seeded random orbits for
/// bounce counts `base, 2 base, 4 base, ...` (`doublings + 1` entries).
pub fn birkhoff_gap_curve<F>(
    spec: &SurfaceSpec,
    observable: F,
    base: usize,
    doublings: usize,
    orbits: usize,
    seed: u64,
) -> Result<Vec<(usize, f64)>>
where
    F: Fn(&PhasePoint) -> f64 + Sync,
{
    let liouville = liouville_mean(spec, &observable, 1024, 256);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<PhasePoint> = (0..orbits).map(|_| random_phase_point(spec, &mut rng)).collect();
    let longest = base << doublings;
    // Prefix sums at every checkpoint, one row per orbit.
    let rows: Vec<Vec<f64>> = starts
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let mut start = p;
            for _ in 0..RELAUNCH_LIMIT {
                match orbit_checkpoints(spec, start, &observable, base, longest) {
                    Ok(row) => return Ok(row),
                    Err(Error::TangentialImpact { .. }) => start = random_phase_point(spec, &mut rng),
                    Err(e) => return Err(e),
                }
            }
            Err(Error::ConvergenceFailure("too many tangential relaunches".into()))
        })
        .collect::<Result<_>>()?;
    Ok((0..=doublings)
        .map(|d| {
            let n = base << d;
            let sq: Vec<f64> = rows.iter().map(|r| (r[d] - liouville).powi(2)).collect();
            (n, mean(&sq).sqrt())
        })
        .collect())
}

fn orbit_checkpoints<F>(
    spec: &SurfaceSpec,
    p: PhasePoint,
    observable: &F,
    base: usize,
    longest: usize,
) -> Result<Vec<f64>>
where
    F: Fn(&PhasePoint) -> f64,
{
    let mut state = BilliardState::lift(spec, p)?;
    let mut acc = CompensatedSum::new();
    acc.add(observable(&p));
    let mut out = Vec::new();
    let mut next = base;
    for k in 1..=longest {
        if k == next {
            out.push(acc.value() / k as f64);
            next *= 2;
        }
        if k < longest {
            let q = state.bounce(spec)?.phase_point();
            acc.add(observable(&q));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopMeasure {
    pub fraction: f64,
    pub returns: usize,
    pub samples: usize,
    pub tangential: usize,
}

/// Fraction of momenta `eta` (uniform in (-1, 1)) whose trajectory from the
/// boundary point `(component, s)` passes within `epsilon` of the launch
/// point after its first impact and before total length `length_cap`.
pub fn loop_set_measure(
    spec: &SurfaceSpec,
    component: usize,
    s: f64,
    samples: usize,
    length_cap: f64,
    epsilon: f64,
    seed: u64,
) -> Result<LoopMeasure> {
    let etas = loop_momenta(samples, seed);
    let outcomes = loop_return_distances(spec, component, s, &etas, length_cap)?;
    Ok(summarize_loops(&outcomes, epsilon))
}

/// The seeded momenta used by [`loop_set_measure`].
pub fn loop_momenta(samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Closest approach to the launch point after the first impact, per momentum;
/// `None` marks a tangential (discarded, non-returning) sample.
pub fn loop_return_distances(
    spec: &SurfaceSpec,
    component: usize,
    s: f64,
    etas: &[f64],
    length_cap: f64,
) -> Result<Vec<Option<f64>>> {
    let q = spec.component(component)?.frame(s).point;
    Ok(etas
        .par_iter()
        .map(|&eta| closest_return(spec, PhasePoint::new(component, s, eta), q, length_cap).ok())
        .collect())
}

pub fn summarize_loops(distances: &[Option<f64>], epsilon: f64) -> LoopMeasure {
    let tangential = distances.iter().filter(|d| d.is_none()).count();
    let returns = distances
        .iter()
        .filter(|d| matches!(d, Some(x) if *x <= epsilon))
        .count();
    let samples = distances.len();
    if tangential > 0 {
        log::info!("loop measure: {tangential} tangential samples counted as non-returning");
    }
    LoopMeasure {
        fraction: if samples == 0 {
            0.0
        } else {
            returns as f64 / samples as f64
        },
        returns,
        samples,
        tangential,
    }
}

fn closest_return(spec: &SurfaceSpec, p: PhasePoint, q: Vec2, cap: f64) -> Result<f64> {
    let mut state = BilliardState::lift(spec, p)?;
    let mut best = f64::INFINITY;
    let mut t = 0.0;
    let mut first = true;
    while t < cap {
        let remaining = cap - t;
        let hit = first_hit(spec, state.point, state.direction, remaining)?;
        let flight = hit.as_ref().map_or(remaining, |h| h.flight.min(remaining));
        if !first {
            best = best.min(segment_distance(spec, state.point, state.direction, flight, q));
        }
        match hit {
            Some(h) if h.flight <= remaining => {
                state.direction = super::reflect(state.direction, h.normal)?;
                state.point = h.point;
                t += h.flight;
                first = false;
            }
            _ => break,
        }
    }
    Ok(best)
}

/// Distance from `q` to the segment `a + t d`, `t` in `[0, len]`, in the
/// table metric.
fn segment_distance(spec: &SurfaceSpec, a: Vec2, d: Vec2, len: f64, q: Vec2) -> f64 {
    if !spec.is_torus() {
        return point_segment(q - a, d, len);
    }
    let (w, h) = (spec.width(), spec.height());
    let piece = 0.5 * w.min(h);
    let mut best = f64::INFINITY;
    let mut start = 0.0;
    while start < len {
        let l = piece.min(len - start);
        let origin = a + d * start;
        let rel = min_image(q - origin, w, h);
        for i in -1..=1 {
            for j in -1..=1 {
                let image = rel + Vec2::new(i as f64 * w, j as f64 * h);
                best = best.min(point_segment(image, d, l));
            }
        }
        start += piece;
    }
    best
}

fn point_segment(rel: Vec2, d: Vec2, len: f64) -> f64 {
    let t = rel.dot(d).clamp(0.0, len);
    (rel - d * t).norm()
}

/// Jacobian of the billiard map in `(s, eta)` by Richardson-extrapolated
/// central differences. Returns `None` when the stencil straddles a
/// discontinuity (a change of target component or a grazing orbit).
pub fn map_jacobian(spec: &SurfaceSpec, p: PhasePoint, step: f64) -> Result<Option<Mat2>> {
    let (q0, _) = billiard_map(spec, p)?;
    let len = spec.component(q0.component)?.length;
    let central = |h: f64| -> Result<Option<Mat2>> {
        let mut cols = [(0.0, 0.0); 2];
        for (k, col) in cols.iter_mut().enumerate() {
            let (dp, dm) = if k == 0 {
                (
                    PhasePoint::new(p.component, p.s + h, p.eta),
                    PhasePoint::new(p.component, p.s - h, p.eta),
                )
            } else {
                (
                    PhasePoint::new(p.component, p.s, p.eta + h),
                    PhasePoint::new(p.component, p.s, p.eta - h),
                )
            };
            let (Ok((qp, _)), Ok((qm, _))) = (billiard_map(spec, dp), billiard_map(spec, dm)) else {
                return Ok(None);
            };
            if qp.component != q0.component || qm.component != q0.component {
                return Ok(None);
            }
            let mut ds = qp.s - qm.s;
            ds -= len * (ds / len).round();
            *col = (ds / (2.0 * h), (qp.eta - qm.eta) / (2.0 * h));
        }
        Ok(Some(Mat2::new(cols[0].0, cols[1].0, cols[0].1, cols[1].1)))
    };
    let (Some(coarse), Some(fine)) = (central(step)?, central(0.5 * step)?) else {
        return Ok(None);
    };
    let extrapolated = Mat2::new(
        (4.0 * fine.a - coarse.a) / 3.0,
        (4.0 * fine.b - coarse.b) / 3.0,
        (4.0 * fine.c - coarse.c) / 3.0,
        (4.0 * fine.d - coarse.d) / 3.0,
    );
    // Large disagreement between step sizes means a kink inside the stencil.
    if extrapolated.max_abs_diff(&fine) > 1e-3 * (1.0 + extrapolated.frobenius()) {
        return Ok(None);
    }
    Ok(Some(extrapolated))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::billiard::jacobi::{orbit_legs, orbit_monodromy, QrProduct};
    use crate::billiard::{flow, tests::sinai};
    use crate::geometry::{build_surface, BoundaryCondition, SurfaceDraft};
    use approx::assert_abs_diff_eq;

    fn period_two() -> PhasePoint {
        PhasePoint::new(0, 0.0, 0.0)
    }

    #[test]
    fn period_two_monodromy_with_dispersing_curvature() {
        // With K = -1/r each reflection is [[-1, 0], [-10, -1]].
        let m = orbit_monodromy(&sinai(), period_two(), 2).unwrap();
        assert!(m.max_abs_diff(&Mat2::new(7.0, 4.8, 80.0, 55.0)) < 1e-9, "{m:?}");
        assert_abs_diff_eq!(m.det(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn monodromy_trace_matches_linearized_flow() {
        // Perturb a launch from the seam midpoint of the period-two orbit and
        // difference the final transverse offset and angle.
        let spec = sinai();
        let run = |dy: f64, da: f64| {
            let st = flow(&spec, Vec2::new(0.0, 0.5 + dy), Vec2::from_angle(da), 1.2).unwrap();
            let y = min_image(st.point - Vec2::new(0.0, 0.5), 1.0, 1.0).y;
            (y, st.direction.y.atan2(st.direction.x))
        };
        let h = 1e-7;
        let (yp, ap) = run(h, 0.0);
        let (ym, am) = run(-h, 0.0);
        let (yq, aq) = run(0.0, h);
        let (yr, ar) = run(0.0, -h);
        let fd = Mat2::new(
            (yp - ym) / (2.0 * h),
            (yq - yr) / (2.0 * h),
            (ap - am) / (2.0 * h),
            (aq - ar) / (2.0 * h),
        );
        let m = orbit_monodromy(&spec, period_two(), 2).unwrap();
        assert_abs_diff_eq!(fd.trace(), m.trace(), epsilon = 1e-3 * m.trace());
        assert_abs_diff_eq!(fd.det(), 1.0, epsilon = 1e-4);
    }

    #[test]
    fn sinai_orbit_has_no_conjugate_points() {
        let scan = conjugate_point_scan(&sinai(), PhasePoint::new(0, 0.31, 0.4), 1e3).unwrap();
        assert_eq!(scan.first_zero, None);
        assert!(!scan.truncated);
        assert_eq!(scan.scanned, 1e3);
        let none = conjugate_point_scan(&sinai(), PhasePoint::new(0, 0.31, 0.4), 0.0).unwrap();
        assert_eq!(none.first_zero, None);
    }

    #[test]
    fn long_orbit_monodromy_is_symplectic() {
        let legs = orbit_legs(&sinai(), PhasePoint::new(0, 0.2, 0.3), 10_000).unwrap();
        let mut product = QrProduct::default();
        for leg in &legs {
            product.push(Mat2::reflection(leg.curvature, leg.sin_phi) * Mat2::transport(leg.flight));
        }
        assert!(product.log_abs_det().abs() < 1e-9, "{}", product.log_abs_det());
        assert!(product.log_growth() > 0.0);
    }

    #[test]
    fn lyapunov_on_the_period_two_orbit() {
        let est = lyapunov_estimate(&sinai(), period_two(), 256).unwrap();
        let rho = Mat2::new(7.0, 4.8, 80.0, 55.0).spectral_radius();
        assert_abs_diff_eq!(est.exponent, rho.ln() / 1.2, epsilon = 0.02);
    }

    #[test]
    fn lyapunov_positive_on_a_generic_orbit() {
        let est = lyapunov_estimate(&sinai(), PhasePoint::new(0, 0.17, -0.23), 4000).unwrap();
        assert!(est.exponent > 0.0);
        assert!(est.exponent > 5.0 * est.std_error);
    }

    #[test]
    fn lyapunov_vanishes_on_an_empty_rectangle() {
        let spec = build_surface(&SurfaceDraft::rectangle(1.0, 0.7, BoundaryCondition::Dirichlet)).unwrap();
        let est = lyapunov_estimate(&spec, PhasePoint::new(0, 0.3, 0.41), 10_000).unwrap();
        assert!(est.exponent.abs() < 0.01, "{est:?}");
        assert!(lyapunov_estimate(&spec, PhasePoint::new(0, 0.3, 0.41), 10).is_err());
    }

    #[test]
    fn birkhoff_of_constants_and_odd_observables() {
        let spec = sinai();
        let one = birkhoff_average(&spec, PhasePoint::new(0, 0.3, 0.1), |_| 1.0, 50).unwrap();
        assert_abs_diff_eq!(one.empirical, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(one.liouville, 1.0, epsilon = 1e-12);
        assert!(one.gap < 1e-12);
        assert_abs_diff_eq!(liouville_mean(&spec, |p| p.eta, 64, 64), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn arc_indicator_equidistributes() {
        let spec = sinai();
        let len = spec.atlas.components[0].length;
        let arc = move |p: &PhasePoint| if p.s < 0.25 * len { 1.0 } else { 0.0 };
        assert_abs_diff_eq!(liouville_mean(&spec, arc, 1024, 16), 0.25, epsilon = 1e-3);
        let avg = birkhoff_average(&spec, PhasePoint::new(0, 0.123, 0.321), arc, 200_000).unwrap();
        assert!(avg.gap < 0.01, "{avg:?}");
    }

    #[test]
    fn loop_measure_edge_cases() {
        let spec = sinai();
        let zero = loop_set_measure(&spec, 0, 0.5, 200, 0.0, 0.1, 7).unwrap();
        assert_eq!(zero.fraction, 0.0);
        let all = loop_set_measure(&spec, 0, 0.5, 200, 100.0, spec.diameter(), 7).unwrap();
        assert_eq!(all.fraction, 1.0);
    }

    #[test]
    fn loop_measure_shrinks_with_epsilon() {
        let spec = sinai();
        let etas = loop_momenta(2000, 3);
        let d = loop_return_distances(&spec, 0, 0.9, &etas, 5.0).unwrap();
        let f: Vec<f64> = [0.1, 0.05, 0.025]
            .iter()
            .map(|&e| summarize_loops(&d, e).fraction)
            .collect();
        assert!(f[0] > f[1] && f[1] > f[2], "{f:?}");
    }

    #[test]
    fn map_preserves_area() {
        let spec = sinai();
        let j = map_jacobian(&spec, PhasePoint::new(0, 0.4, 0.2), 1e-5)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(j.det().abs(), 1.0, epsilon = 1e-6);
        let head_on = map_jacobian(&spec, PhasePoint::new(0, 0.0, 0.0), 1e-5)
            .unwrap()
            .unwrap();
        assert_abs_diff_eq!(head_on.det().abs(), 1.0, epsilon = 1e-6);
    }
}
