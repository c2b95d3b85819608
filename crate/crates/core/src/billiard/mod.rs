//! Broken geodesic flow, the boundary billiard map and elastic reflection on
//! flat tables.
//!
//! Flat geodesics are straight lines, so the only numerical work is exact
//! ray/circle and ray/wall intersection. On a torus the ray is followed
//! through the lattice of fundamental cells; since every obstacle lies
//! strictly inside the fundamental domain, only the obstacles translated into
//! the cell currently traversed can be hit.

mod diagnostics;
mod jacobi;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Base, BoundaryFrame, SurfaceSpec, Vec2};

pub use diagnostics::{
    birkhoff_average, birkhoff_gap_curve, conjugate_point_scan, liouville_mean, loop_momenta, loop_return_distances,
    loop_set_measure, lyapunov_estimate, map_jacobian, random_phase_point, summarize_loops, BirkhoffAverage,
    ConjugateScan, LoopMeasure, LyapunovEstimate,
};
pub use jacobi::{
    jacobi_propagate, jacobi_reflect, legs_monodromy, orbit_legs, orbit_monodromy, scan_legs, JacobiState, Leg, Mat2,
    QrProduct,
};

/// Impacts with `sin phi` (normal component of the unit direction) below this
/// are rejected as tangential.
pub const TANGENTIAL_TOL: f64 = 1e-8;

/// Flights longer than this without an impact signal a geometry bug (or an
/// exactly periodic corridor orbit).
pub const LENGTH_CAP: f64 = 1e4;

const MIN_FLIGHT: f64 = 1e-12;

/// A point of the open unit ball bundle of the boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub component: usize,
    /// Arclength along the component.
    pub s: f64,
    /// Tangential component of the unit direction, in [-1, 1].
    pub eta: f64,
}

impl PhasePoint {
    pub fn new(component: usize, s: f64, eta: f64) -> Self {
        Self { component, s, eta }
    }
}

/// Elastic reflection of `direction` in a boundary with unit inward normal
/// `normal`: the tangential part is kept and the normal part negated.
pub fn reflect(direction: Vec2, normal: Vec2) -> Result<Vec2> {
    let dn = direction.dot(normal);
    if dn.abs() < TANGENTIAL_TOL {
        return Err(Error::TangentialImpact { sin_phi: dn.abs() });
    }
    let out = direction - normal * (2.0 * dn);
    Ok(out * (1.0 / out.norm()))
}

/// One boundary impact of the flow.
#[derive(Clone, Copy, Debug)]
pub struct Impact {
    pub flight: f64,
    pub component: usize,
    pub s: f64,
    /// Impact point in fundamental-domain coordinates.
    pub point: Vec2,
    pub frame: BoundaryFrame,
    pub incoming: Vec2,
    pub outgoing: Vec2,
    /// Normal component of the outgoing direction.
    pub sin_phi: f64,
}

impl Impact {
    pub fn phase_point(&self) -> PhasePoint {
        PhasePoint::new(self.component, self.s, self.outgoing.dot(self.frame.tangent))
    }
}

struct Hit {
    flight: f64,
    component: usize,
    point: Vec2,
    normal: Vec2,
}

/// Position and direction of a billiard particle, advanced impact by impact.
///
/// Keeping the Cartesian state (rather than re-lifting from `(s, eta)` after
/// every bounce) keeps exactly representable orbits exact.
#[derive(Clone, Copy, Debug)]
pub struct BilliardState {
    pub point: Vec2,
    pub direction: Vec2,
}

impl BilliardState {
    /// Inward unit vector over a boundary phase point.
    pub fn lift(spec: &SurfaceSpec, p: PhasePoint) -> Result<Self> {
        let sin_phi = (1.0 - p.eta * p.eta).max(0.0).sqrt();
        if p.eta.abs() > 1.0 || sin_phi < TANGENTIAL_TOL {
            return Err(Error::TangentialImpact { sin_phi });
        }
        let frame = spec.component(p.component)?.frame(p.s);
        Ok(Self {
            point: frame.point,
            direction: frame.tangent * p.eta + frame.normal * sin_phi,
        })
    }

    /// Fly to the next impact and reflect.
    pub fn bounce(&mut self, spec: &SurfaceSpec) -> Result<Impact> {
        let hit = first_hit(spec, self.point, self.direction, LENGTH_CAP)?
            .ok_or(Error::MaxWrapExceeded { length: LENGTH_CAP })?;
        let outgoing = reflect(self.direction, hit.normal)?;
        let comp = &spec.atlas.components[hit.component];
        let s = comp.locate(hit.point);
        let mut frame = comp.frame(s);
        frame.point = hit.point;
        if comp.is_circle() {
            frame.normal = hit.normal;
            frame.tangent = hit.normal.perp();
        }
        let impact = Impact {
            flight: hit.flight,
            component: hit.component,
            s,
            point: hit.point,
            frame,
            incoming: self.direction,
            outgoing,
            sin_phi: outgoing.dot(hit.normal),
        };
        self.point = hit.point;
        self.direction = outgoing;
        Ok(impact)
    }
}

/// First boundary intersection of the ray `origin + t dir`, `t` in
/// `(0, cap]`, or `None` if there is none.
fn first_hit(spec: &SurfaceSpec, origin: Vec2, dir: Vec2, cap: f64) -> Result<Option<Hit>> {
    match spec.base {
        Base::Torus { width, height } => Ok(torus_hit(spec, spec.wrap(origin), dir, cap, width, height)),
        Base::Rectangle { width, height, .. } => Ok(rectangle_hit(spec, origin, dir, cap, width, height)),
    }
}

/// Entry time of the ray into the disk, using the cancellation-free root.
fn circle_entry(origin: Vec2, dir: Vec2, center: Vec2, radius: f64) -> Option<(f64, Vec2)> {
    let rel = origin - center;
    let b = dir.dot(rel);
    if b >= 0.0 {
        return None;
    }
    let c = rel.norm_sq() - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = c / (-b + disc.sqrt());
    if t <= MIN_FLIGHT {
        return None;
    }
    let at = rel + dir * t;
    Some((t, at.normalized()))
}

fn torus_hit(spec: &SurfaceSpec, origin: Vec2, dir: Vec2, cap: f64, w: f64, h: f64) -> Option<Hit> {
    let (mut cx, mut cy) = (0i64, 0i64);
    let step_x = if dir.x > 0.0 { 1 } else { -1 };
    let step_y = if dir.y > 0.0 { 1 } else { -1 };
    let mut next_x = if dir.x > 0.0 {
        (w - origin.x) / dir.x
    } else if dir.x < 0.0 {
        -origin.x / dir.x
    } else {
        f64::INFINITY
    };
    let mut next_y = if dir.y > 0.0 {
        (h - origin.y) / dir.y
    } else if dir.y < 0.0 {
        -origin.y / dir.y
    } else {
        f64::INFINITY
    };
    let delta_x = if dir.x != 0.0 { w / dir.x.abs() } else { f64::INFINITY };
    let delta_y = if dir.y != 0.0 { h / dir.y.abs() } else { f64::INFINITY };
    let mut entered = 0.0;
    while entered <= cap {
        let shift = Vec2::new(cx as f64 * w, cy as f64 * h);
        let best = spec
            .obstacles
            .iter()
            .enumerate()
            .filter_map(|(i, o)| circle_entry(origin, dir, o.center + shift, o.radius).map(|(t, n)| (t, n, i)))
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((t, normal, i)) = best {
            if t > cap {
                return None;
            }
            let o = &spec.obstacles[i];
            return Some(Hit {
                flight: t,
                component: i,
                point: o.center + normal * o.radius,
                normal,
            });
        }
        if next_x < next_y {
            entered = next_x;
            next_x += delta_x;
            cx += step_x;
        } else {
            entered = next_y;
            next_y += delta_y;
            cy += step_y;
        }
    }
    None
}

fn rectangle_hit(spec: &SurfaceSpec, origin: Vec2, dir: Vec2, cap: f64, w: f64, h: f64) -> Option<Hit> {
    let obstacle = spec
        .obstacles
        .iter()
        .enumerate()
        .filter_map(|(i, o)| circle_entry(origin, dir, o.center, o.radius).map(|(t, n)| (t, n, i)))
        .min_by(|a, b| a.0.total_cmp(&b.0));

    let tx = if dir.x > 0.0 {
        (w - origin.x) / dir.x
    } else if dir.x < 0.0 {
        -origin.x / dir.x
    } else {
        f64::INFINITY
    };
    let ty = if dir.y > 0.0 {
        (h - origin.y) / dir.y
    } else if dir.y < 0.0 {
        -origin.y / dir.y
    } else {
        f64::INFINITY
    };
    let (t_wall, wall_normal, mut wall_point) = if tx < ty {
        let x = if dir.x > 0.0 { w } else { 0.0 };
        let n = Vec2::new(if dir.x > 0.0 { -1.0 } else { 1.0 }, 0.0);
        (tx, n, Vec2::new(x, (origin.y + dir.y * tx).clamp(0.0, h)))
    } else {
        let y = if dir.y > 0.0 { h } else { 0.0 };
        let n = Vec2::new(0.0, if dir.y > 0.0 { -1.0 } else { 1.0 });
        (ty, n, Vec2::new((origin.x + dir.x * ty).clamp(0.0, w), y))
    };

    match obstacle {
        Some((t, normal, i)) if t < t_wall => {
            if t > cap {
                return None;
            }
            let o = &spec.obstacles[i];
            Some(Hit {
                flight: t,
                component: i,
                point: o.center + normal * o.radius,
                normal,
            })
        }
        _ => {
            if t_wall > cap || !t_wall.is_finite() {
                return None;
            }
            if t_wall <= MIN_FLIGHT {
                wall_point = origin;
            }
            Some(Hit {
                flight: t_wall,
                component: spec.obstacles.len(),
                point: wall_point,
                normal: wall_normal,
            })
        }
    }
}

/// The billiard map: lift `(s, eta)` to the inward unit vector, fly to the
/// next impact, reflect and project back. Also returns the flight length.
pub fn billiard_map(spec: &SurfaceSpec, p: PhasePoint) -> Result<(PhasePoint, f64)> {
    let mut state = BilliardState::lift(spec, p)?;
    let impact = state.bounce(spec)?;
    Ok((impact.phase_point(), impact.flight))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImpactRecord {
    pub time: f64,
    pub point: Vec2,
    pub component: usize,
    pub s: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub point: Vec2,
    pub direction: Vec2,
    pub impacts: Vec<ImpactRecord>,
}

/// Unit-speed broken geodesic flow for time `t` from an interior or boundary
/// point.
pub fn flow(spec: &SurfaceSpec, start: Vec2, direction: Vec2, t: f64) -> Result<FlowState> {
    if !spec.contains(start) {
        return Err(Error::InvalidSurface(format!(
            "flow start {start:?} is not in the table"
        )));
    }
    let mut point = spec.wrap(start);
    let mut dir = direction.normalized();
    let mut elapsed = 0.0;
    let mut impacts = Vec::new();
    loop {
        let remaining = t - elapsed;
        match first_hit(spec, point, dir, remaining)? {
            Some(hit) if hit.flight <= remaining => {
                dir = reflect(dir, hit.normal)?;
                elapsed += hit.flight;
                point = hit.point;
                let comp = &spec.atlas.components[hit.component];
                let s = comp.locate(point);
                let tangent = if comp.is_circle() {
                    hit.normal.perp()
                } else {
                    comp.frame(s).tangent
                };
                impacts.push(ImpactRecord {
                    time: elapsed,
                    point,
                    component: hit.component,
                    s,
                    eta: dir.dot(tangent),
                });
            }
            _ => {
                let end = spec.wrap(point + dir * remaining.max(0.0));
                return Ok(FlowState {
                    point: end,
                    direction: dir,
                    impacts,
                });
            }
        }
    }
}

/// Follow the billiard map for `bounces` impacts from `p`, recording each
/// impact as `(t, x, y, component, s, eta)`.
pub fn orbit(spec: &SurfaceSpec, p: PhasePoint, bounces: usize) -> Result<Vec<ImpactRecord>> {
    let mut state = BilliardState::lift(spec, p)?;
    let mut time = 0.0;
    let mut out = Vec::with_capacity(bounces);
    for _ in 0..bounces {
        let impact = state.bounce(spec)?;
        time += impact.flight;
        let pp = impact.phase_point();
        out.push(ImpactRecord {
            time,
            point: impact.point,
            component: impact.component,
            s: pp.s,
            eta: pp.eta,
        });
    }
    Ok(out)
}

pub fn write_orbit_csv<W: Write>(mut out: W, records: &[ImpactRecord]) -> std::io::Result<()> {
    writeln!(out, "t,x,y,component,s,eta")?;
    for r in records {
        writeln!(
            out,
            "{:.15e},{:.15e},{:.15e},{},{:.15e},{:.15e}",
            r.time, r.point.x, r.point.y, r.component, r.s, r.eta
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, BoundaryCondition, SurfaceDraft};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    pub(crate) fn sinai() -> SurfaceSpec {
        build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Dirichlet).with_obstacle(0.5, 0.5, 0.2))
            .unwrap()
    }

    #[test]
    fn normal_incidence_reverses_direction() {
        let out = reflect(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(out, Vec2::new(1.0, 0.0));
    }

    #[test]
    fn mirror_law() {
        let out = reflect(Vec2::new(-FRAC_1_SQRT_2, FRAC_1_SQRT_2), Vec2::new(1.0, 0.0)).unwrap();
        assert_abs_diff_eq!(out.x, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.y, FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn grazing_reflection_is_rejected() {
        assert!(matches!(
            reflect(Vec2::new(0.0, 1.0), Vec2::new(1.0, 0.0)),
            Err(Error::TangentialImpact { .. })
        ));
    }

    #[test]
    fn head_on_shot_through_the_torus_seam() {
        let spec = sinai();
        let (q, flight) = billiard_map(&spec, PhasePoint::new(0, 0.0, 0.0)).unwrap();
        assert_abs_diff_eq!(flight, 0.6, epsilon = 1e-12);
        assert_eq!(q.component, 0);
        assert_abs_diff_eq!(q.s, PI * 0.2, epsilon = 1e-12);
        assert_eq!(q.eta, 0.0);
    }

    #[test]
    fn tangential_launch_is_rejected() {
        let spec = sinai();
        assert!(matches!(
            billiard_map(&spec, PhasePoint::new(0, 0.3, 1.0)),
            Err(Error::TangentialImpact { .. })
        ));
    }

    #[test]
    fn flow_for_zero_time_is_identity() {
        let spec = sinai();
        let state = flow(&spec, Vec2::new(0.1, 0.2), Vec2::new(0.6, 0.8), 0.0).unwrap();
        assert_eq!(state.point, Vec2::new(0.1, 0.2));
        assert!(state.impacts.is_empty());
    }

    #[test]
    fn period_two_orbit_closes_after_two_impacts() {
        let spec = sinai();
        let state = flow(&spec, Vec2::new(0.7, 0.5), Vec2::new(1.0, 0.0), 1.2).unwrap();
        assert_eq!(state.impacts.len(), 2);
        assert_abs_diff_eq!(state.point.x, 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(state.point.y, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(state.direction.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.impacts[0].time, 0.6, epsilon = 1e-12);
    }

    #[test]
    fn rectangle_walls_reflect() {
        let spec = build_surface(&SurfaceDraft::rectangle(2.0, 1.0, BoundaryCondition::Neumann)).unwrap();
        let state = flow(&spec, Vec2::new(1.0, 0.5), Vec2::new(1.0, 0.0), 4.0).unwrap();
        assert_eq!(state.impacts.len(), 2);
        assert_abs_diff_eq!(state.point.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(state.direction.x, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orbit_csv_has_header_and_rows() {
        let spec = sinai();
        let records = orbit(&spec, PhasePoint::new(0, 0.3, 0.2), 5).unwrap();
        let mut buf = Vec::new();
        write_orbit_csv(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("t,x,y,component,s,eta"));
    }

    fn two_disk_rect() -> SurfaceSpec {
        build_surface(
            &SurfaceDraft::rectangle(1.6, 1.0, BoundaryCondition::Dirichlet)
                .with_obstacle(0.45, 0.4, 0.2)
                .with_obstacle(1.15, 0.6, 0.15),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn reflection_preserves_length_and_is_undone(theta in 0.01f64..3.13, alpha in 0.0f64..std::f64::consts::TAU) {
            let n = Vec2::from_angle(alpha);
            // incoming with negative normal component
            let tangent = n.perp();
            let d = tangent * theta.cos() - n * theta.sin();
            let r = reflect(d, n).unwrap();
            prop_assert!((r.norm() - 1.0).abs() < 1e-12);
            prop_assert!((r.dot(tangent) - d.dot(tangent)).abs() < 1e-12);
            prop_assert!((r.dot(n) + d.dot(n)).abs() < 1e-12);
            let back = reflect(r, -n).unwrap();
            prop_assert!((back - d).norm() < 1e-12);
        }

        #[test]
        fn flow_group_property(t1 in 0.05f64..1.5, t2 in 0.05f64..1.5, angle in 0.0f64..std::f64::consts::TAU) {
            let spec = two_disk_rect();
            let start = Vec2::new(0.8, 0.05);
            let dir = Vec2::from_angle(angle);
            let whole = flow(&spec, start, dir, t1 + t2);
            let first = flow(&spec, start, dir, t1);
            if let (Ok(whole), Ok(first)) = (whole, first) {
                if let Ok(second) = flow(&spec, first.point, first.direction, t2) {
                    prop_assert!((whole.point - second.point).norm() < 1e-10);
                    prop_assert!((whole.direction - second.direction).norm() < 1e-10);
                }
            }
        }

        #[test]
        fn time_reversal(s in 0.0f64..1.25, eta in -0.95f64..0.95) {
            let spec = sinai();
            let p = PhasePoint::new(0, s, eta);
            let (q, _) = billiard_map(&spec, p).unwrap();
            let (back, _) = billiard_map(&spec, PhasePoint::new(q.component, q.s, -q.eta)).unwrap();
            prop_assert_eq!(back.component, p.component);
            let len = spec.atlas.components[0].length;
            let ds = (back.s - p.s).rem_euclid(len);
            prop_assert!(ds.min(len - ds) < 1e-9);
            prop_assert!((back.eta + p.eta).abs() < 1e-9);
        }
    }
}
