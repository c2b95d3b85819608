//! Jacobi fields along billiard trajectories.
//!
//! With zero Gauss curvature the Jacobi equation is `J'' = 0`, so a flight of
//! length `L` acts by the shear `[[1, L], [0, 1]]`. At a reflection the field
//! jumps by `[[-1, 0], [2K / sin phi, -1]]`; the sign flip of `J` records the
//! reversal of the transverse orientation, not a zero of the field.

use std::ops::Mul;

use serde::{Deserialize, Serialize};

use super::{BilliardState, PhasePoint, TANGENTIAL_TOL};
use crate::error::{Error, Result};
use crate::geometry::SurfaceSpec;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobiState {
    pub j: f64,
    pub jp: f64,
}

impl JacobiState {
    pub const fn new(j: f64, jp: f64) -> Self {
        Self { j, jp }
    }
}

/// Row-major 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn transport(flight: f64) -> Self {
        Mat2::new(1.0, flight, 0.0, 1.0)
    }

    pub fn reflection(curvature: f64, sin_phi: f64) -> Self {
        Mat2::new(-1.0, 0.0, 2.0 * curvature / sin_phi, -1.0)
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn frobenius(&self) -> f64 {
        (self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d).sqrt()
    }

    pub fn scale(&self, k: f64) -> Mat2 {
        Mat2::new(self.a * k, self.b * k, self.c * k, self.d * k)
    }

    pub fn apply(&self, v: JacobiState) -> JacobiState {
        JacobiState::new(self.a * v.j + self.b * v.jp, self.c * v.j + self.d * v.jp)
    }

    /// Largest eigenvalue modulus, assuming real eigenvalues (hyperbolic or
    /// parabolic case); for elliptic matrices returns the modulus 1 when
    /// `det = 1`.
    pub fn spectral_radius(&self) -> f64 {
        let tr = self.trace();
        let disc = tr * tr - 4.0 * self.det();
        if disc >= 0.0 {
            let r = disc.sqrt();
            // Larger root first, smaller via det to avoid cancellation.
            let big = 0.5 * (tr.abs() + r);
            big.max((self.det() / big).abs())
        } else {
            self.det().abs().sqrt()
        }
    }

    pub fn max_abs_diff(&self, other: &Mat2) -> f64 {
        (self.a - other.a)
            .abs()
            .max((self.b - other.b).abs())
            .max((self.c - other.c).abs())
            .max((self.d - other.d).abs())
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, r: Mat2) -> Mat2 {
        Mat2::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

pub fn jacobi_propagate(state: JacobiState, flight: f64) -> JacobiState {
    JacobiState::new(state.j + flight * state.jp, state.jp)
}

/// `(J, J') -> (-J, (2 K / sin phi) J - J')`.
pub fn jacobi_reflect(state: JacobiState, curvature: f64, sin_phi: f64) -> Result<JacobiState> {
    if sin_phi.is_nan() || sin_phi <= TANGENTIAL_TOL {
        return Err(Error::TangentialImpact { sin_phi });
    }
    Ok(JacobiState::new(
        -state.j,
        2.0 * curvature / sin_phi * state.j - state.jp,
    ))
}

/// One flight followed by a reflection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Leg {
    pub flight: f64,
    /// Curvature fed to the reflection law at the end of the leg.
    pub curvature: f64,
    pub sin_phi: f64,
}

/// Legs of the orbit of `p`, with the reflection-law curvature taken against
/// the inward normal (negative on obstacle circles).
pub fn orbit_legs(spec: &SurfaceSpec, p: PhasePoint, bounces: usize) -> Result<Vec<Leg>> {
    let mut state = BilliardState::lift(spec, p)?;
    (0..bounces)
        .map(|_| {
            let impact = state.bounce(spec)?;
            Ok(Leg {
                flight: impact.flight,
                curvature: impact.frame.signed_curvature,
                sin_phi: impact.sin_phi,
            })
        })
        .collect()
}

/// Product of the transport and reflection matrices over `bounces` legs,
/// latest leg leftmost.
pub fn orbit_monodromy(spec: &SurfaceSpec, p: PhasePoint, bounces: usize) -> Result<Mat2> {
    legs_monodromy(&orbit_legs(spec, p, bounces)?)
}

pub fn legs_monodromy(legs: &[Leg]) -> Result<Mat2> {
    let mut m = Mat2::IDENTITY;
    for leg in legs {
        if leg.sin_phi.is_nan() || leg.sin_phi <= TANGENTIAL_TOL {
            return Err(Error::TangentialImpact { sin_phi: leg.sin_phi });
        }
        m = Mat2::reflection(leg.curvature, leg.sin_phi) * Mat2::transport(leg.flight) * m;
    }
    Ok(m)
}

/// Running product of det-one matrices kept as `Q R` with `Q` orthogonal and
/// `R` upper triangular, so that the determinant stays accurate even when the
/// product itself overflows.
#[derive(Clone, Copy, Debug)]
pub struct QrProduct {
    q: Mat2,
    log_r11: f64,
    log_r22: f64,
    negative: bool,
}

impl Default for QrProduct {
    fn default() -> Self {
        Self {
            q: Mat2::IDENTITY,
            log_r11: 0.0,
            log_r22: 0.0,
            negative: false,
        }
    }
}

impl QrProduct {
    pub fn push(&mut self, m: Mat2) {
        let a = m * self.q;
        let r11 = a.a.hypot(a.c);
        let (q1x, q1y) = (a.a / r11, a.c / r11);
        let r22 = q1x * a.d - q1y * a.b;
        self.q = Mat2::new(q1x, -q1y, q1y, q1x);
        self.log_r11 += r11.ln();
        self.log_r22 += r22.abs().ln();
        if r22 < 0.0 {
            self.negative = !self.negative;
        }
    }

    /// `log |det|` of the accumulated product.
    pub fn log_abs_det(&self) -> f64 {
        self.log_r11 + self.log_r22
    }

    pub fn det_sign(&self) -> f64 {
        if self.negative {
            -1.0
        } else {
            1.0
        }
    }

    /// Log of the growth of the first column.
    pub fn log_growth(&self) -> f64 {
        self.log_r11
    }
}

/// Earliest time in `(tol, horizon]` at which the field started with
/// `J(0) = 0, J'(0) = 1` vanishes inside a flight, scanning the given legs.
///
/// Returns `(first zero, time scanned)`.
pub fn scan_legs(legs: &[Leg], horizon: f64) -> (Option<f64>, f64) {
    const TOL: f64 = 1e-9;
    let mut state = JacobiState::new(0.0, 1.0);
    let mut t = 0.0;
    for leg in legs {
        if t >= horizon {
            break;
        }
        let span = leg.flight.min(horizon - t);
        if state.jp != 0.0 {
            let tau = -state.j / state.jp;
            if tau > 0.0 && tau <= span && t + tau > TOL {
                return (Some(t + tau), t + tau);
            }
        } else if state.j == 0.0 && t > TOL {
            return (Some(t), t);
        }
        if span < leg.flight {
            return (None, horizon);
        }
        t += leg.flight;
        state = jacobi_propagate(state, leg.flight);
        match jacobi_reflect(state, leg.curvature, leg.sin_phi) {
            Ok(next) => state = next,
            Err(_) => return (None, t),
        }
        // Rescale to keep long scans finite; zeros are scale invariant.
        let scale = state.j.abs().max(state.jp.abs());
        if scale > 1e100 {
            state = JacobiState::new(state.j / scale, state.jp / scale);
        }
    }
    (None, t.min(horizon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn free_spreading() {
        assert_eq!(
            jacobi_propagate(JacobiState::new(0.0, 1.0), 0.6),
            JacobiState::new(0.6, 1.0)
        );
        assert_eq!(
            jacobi_propagate(JacobiState::new(1.0, 0.0), 3.7),
            JacobiState::new(1.0, 0.0)
        );
        assert_eq!(Mat2::transport(0.6).det(), 1.0);
    }

    #[test]
    fn reflection_plug_in() {
        let out = jacobi_reflect(JacobiState::new(1.0, 0.0), 5.0, 1.0).unwrap();
        assert_eq!(out, JacobiState::new(-1.0, 10.0));
        assert_eq!(
            jacobi_reflect(JacobiState::new(0.0, 0.0), 5.0, 1.0).unwrap(),
            JacobiState::new(0.0, 0.0)
        );
        assert!(jacobi_reflect(JacobiState::new(1.0, 0.0), 5.0, 1e-9).is_err());
    }

    #[test]
    fn hand_product_with_literal_matrices() {
        let t = Mat2::transport(0.6);
        let r = Mat2::reflection(5.0, 1.0);
        let rt = r * t;
        let m = rt * rt;
        assert!(m.max_abs_diff(&Mat2::new(-5.0, -2.4, 40.0, 19.0)) < 1e-12);
        assert_abs_diff_eq!(m.trace(), 14.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.det(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_radius_of_hyperbolic_matrix() {
        let m = Mat2::new(-5.0, -2.4, 40.0, 19.0);
        // x^2 - 14 x + 1 = 0
        assert_abs_diff_eq!(m.spectral_radius(), 7.0 + 48f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn focusing_mirror_produces_a_conjugate_point() {
        // Object at distance L in front of a mirror with focal length f has
        // its image at L f / (L - f).
        let (l, k, sin_phi) = (0.6, 5.0, 0.8);
        let f = sin_phi / (2.0 * k);
        let legs = [
            Leg {
                flight: l,
                curvature: k,
                sin_phi,
            },
            Leg {
                flight: 10.0,
                curvature: k,
                sin_phi,
            },
        ];
        let (zero, _) = scan_legs(&legs, 100.0);
        assert_abs_diff_eq!(zero.unwrap(), l + l * f / (l - f), epsilon = 1e-12);
    }

    #[test]
    fn dispersing_legs_never_refocus() {
        let legs: Vec<Leg> = (0..200)
            .map(|i| Leg {
                flight: 0.3 + 0.1 * (i % 5) as f64,
                curvature: -5.0,
                sin_phi: 0.2 + 0.15 * (i % 4) as f64,
            })
            .collect();
        assert_eq!(scan_legs(&legs, 1e3).0, None);
        assert_eq!(scan_legs(&legs, 0.0).0, None);
    }

    proptest! {
        #[test]
        fn composed_determinant_stays_one(
            flights in proptest::collection::vec(0.05f64..2.0, 1..200),
            sins in proptest::collection::vec(0.05f64..1.0, 200),
        ) {
            let mut product = QrProduct::default();
            for (&flight, &sin_phi) in flights.iter().zip(&sins) {
                let r = Mat2::reflection(-5.0, sin_phi);
                let t = Mat2::transport(flight);
                prop_assert!((r.det() - 1.0).abs() < 1e-15);
                prop_assert_eq!(t.det(), 1.0);
                product.push(r * t);
            }
            prop_assert!(product.log_abs_det().abs() < 1e-9);
            prop_assert_eq!(product.det_sign(), 1.0);
        }
    }
}
