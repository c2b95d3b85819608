//! Nonnegative boundary test functions built from arc pieces.

use serde::{Deserialize, Serialize};

use crate::eigensolver::BoundaryTrace;
use crate::geometry::SurfaceSpec;
use crate::numeric::compensated_sum;

/// Samples per component used when a test function is integrated on its
/// own, away from any trace.
const FINE_SAMPLES: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `exp(1 - 1/(1 - t^2))` with `t` running over `(-1, 1)` along the arc.
    Bump,
    Flat,
}

/// One arc `[start, start + length)` of a boundary component, taken modulo
/// the component length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub component: usize,
    pub start: f64,
    pub length: f64,
    pub profile: Profile,
    pub amplitude: f64,
}

impl Piece {
    /// Offset of `s` into the arc, if it lies inside.
    fn offset(&self, s: f64, period: f64) -> Option<f64> {
        let u = (s - self.start).rem_euclid(period);
        (u < self.length || self.length >= period).then_some(u)
    }

    fn eval(&self, s: f64, period: f64) -> f64 {
        let Some(u) = self.offset(s, period) else {
            return 0.0;
        };
        let shape = match self.profile {
            Profile::Flat => 1.0,
            Profile::Bump => {
                let t = 2.0 * u / self.length - 1.0;
                let q = 1.0 - t * t;
                if q <= 0.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / q).exp()
                }
            }
        };
        self.amplitude * shape
    }
}

/// A sum of arc pieces. Pieces on the same component should not overlap if
/// `sup f = 1` is wanted.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub pieces: Vec<Piece>,
}

impl TestFunction {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Smooth bump on one arc, peaking at 1 in its middle.
    pub fn bump(component: usize, start: f64, length: f64) -> Self {
        Self {
            pieces: vec![Piece {
                component,
                start,
                length,
                profile: Profile::Bump,
                amplitude: 1.0,
            }],
        }
    }

    /// `c` on one arc.
    pub fn arc_constant(component: usize, start: f64, length: f64, c: f64) -> Self {
        Self {
            pieces: vec![Piece {
                component,
                start,
                length,
                profile: Profile::Flat,
                amplitude: c,
            }],
        }
    }

    /// `c` on every boundary component of `spec`.
    pub fn constant(spec: &SurfaceSpec, c: f64) -> Self {
        Self {
            pieces: spec
                .atlas
                .components
                .iter()
                .map(|comp| Piece {
                    component: comp.id,
                    start: 0.0,
                    length: comp.length,
                    profile: Profile::Flat,
                    amplitude: c,
                })
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            pieces: self
                .pieces
                .iter()
                .map(|p| Piece {
                    amplitude: a * p.amplitude,
                    ..*p
                })
                .collect(),
        }
    }

    /// Pointwise sum.
    pub fn sum(&self, other: &TestFunction) -> Self {
        Self {
            pieces: self.pieces.iter().chain(&other.pieces).copied().collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.length <= 0.0 || p.amplitude == 0.0)
    }

    pub fn eval(&self, component: usize, s: f64, period: f64) -> f64 {
        self.pieces
            .iter()
            .filter(|p| p.component == component)
            .map(|p| p.eval(s, period))
            .sum()
    }

    /// Values at the samples of `trace`.
    pub fn sample(&self, trace: &BoundaryTrace) -> Vec<f64> {
        trace
            .samples
            .iter()
            .map(|x| self.eval(trace.component, x.s, trace.length))
            .collect()
    }

    /// `int f^p ds` by the trapezoid rule on the sampling of `traces`.
    pub fn power_integral_on(&self, traces: &[BoundaryTrace], p: i32) -> f64 {
        traces
            .iter()
            .map(|t| compensated_sum(self.sample(t).into_iter().map(|v| v.powi(p))) * t.spacing())
            .sum()
    }

    /// `int f^p ds` by a fine trapezoid rule over the atlas of `spec`.
    pub fn power_integral(&self, spec: &SurfaceSpec, p: i32) -> f64 {
        spec.atlas
            .components
            .iter()
            .map(|c| {
                let ds = c.length / FINE_SAMPLES as f64;
                compensated_sum((0..FINE_SAMPLES).map(|k| self.eval(c.id, k as f64 * ds, c.length).powi(p))) * ds
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_surface, BoundaryCondition, SurfaceDraft};
    use proptest::prelude::*;

    fn torus() -> SurfaceSpec {
        build_surface(&SurfaceDraft::torus(1.0, 1.0, BoundaryCondition::Neumann).with_obstacle(0.5, 0.5, 0.2)).unwrap()
    }

    #[test]
    fn bump_peaks_at_one_and_vanishes_outside() {
        let f = TestFunction::bump(0, 0.2, 0.4);
        assert!((f.eval(0, 0.4, 1.0) - 1.0).abs() < 1e-15);
        assert_eq!(f.eval(0, 0.2, 1.0), 0.0);
        assert_eq!(f.eval(0, 0.61, 1.0), 0.0);
        assert_eq!(f.eval(1, 0.4, 1.0), 0.0);
        assert!(f.eval(0, 0.25, 1.0) > 0.0);
    }

    #[test]
    fn arcs_wrap_around_the_component() {
        let f = TestFunction::arc_constant(0, 0.9, 0.3, 1.0);
        assert_eq!(f.eval(0, 0.05, 1.0), 1.0);
        assert_eq!(f.eval(0, 0.5, 1.0), 0.0);
    }

    #[test]
    fn constant_integrates_to_perimeter() {
        let spec = torus();
        let f = TestFunction::constant(&spec, 1.0);
        assert!((f.power_integral(&spec, 1) - spec.perimeter()).abs() < 1e-12);
    }

    #[test]
    fn bump_integral_is_resolution_independent() {
        let spec = torus();
        let f = TestFunction::bump(0, 0.1, 0.5);
        let fine = f.power_integral(&spec, 2);
        let trace = BoundaryTrace {
            component: 0,
            bc: BoundaryCondition::Neumann,
            length: spec.atlas.components[0].length,
            samples: (0..800)
                .map(|k| crate::eigensolver::TraceSample {
                    s: k as f64 * spec.atlas.components[0].length / 800.0,
                    value: 0.0,
                })
                .collect(),
        };
        assert!((f.power_integral_on(&[trace], 2) - fine).abs() < 1e-9 * fine);
    }

    proptest! {
        #[test]
        fn values_lie_in_unit_interval(start in 0.0..1.2f64, len in 0.01..1.0f64, s in -2.0..4.0f64) {
            let v = TestFunction::bump(0, start, len).eval(0, s, 1.2566);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
