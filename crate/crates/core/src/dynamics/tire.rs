use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::params::{CurveAnchors, TireParams};
use super::DynamicsError;

/// Slip denominator floor, m/s.
pub const SLIP_EPS: f64 = 0.1;

/// Two-piece cubic friction curve: `f0` on `[S0, Se)` rising to the extremum,
/// `f1` on `[Se, Sa)` falling to the asymptote. Beyond `Sa` the curve holds `Fa`.
///
/// Coefficients are stored highest power first: `f(S) = a·S³ + b·S² + c·S + d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionSpline {
    pub anchors: CurveAnchors,
    pub rising: [f64; 4],
    pub falling: [f64; 4],
}

impl FrictionSpline {
    /// Solves both cubic segments from the anchor points.
    ///
    /// `initial_slope_factor` sets `f0'(S0)` as a multiple of the secant slope
    /// between the zero and extremum anchors; it must lie in `(0, 3]` so the
    /// rising segment stays monotone.
    pub fn build(anchors: CurveAnchors, initial_slope_factor: f64) -> Result<Self, DynamicsError> {
        let CurveAnchors {
            zero: [s0, f0],
            extremum: [se, fe],
            asymptote: [sa, fa],
        } = anchors;
        let values = [s0, f0, se, fe, sa, fa];
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DynamicsError::invalid("tire.anchors", "anchors must be finite"));
        }
        if !(s0 < se && se < sa) {
            return Err(DynamicsError::invalid(
                "tire.anchors",
                format!("slip anchors must satisfy S0 < Se < Sa, got {s0}, {se}, {sa}"),
            ));
        }
        if !(fe >= fa && fa > 0.0) {
            return Err(DynamicsError::invalid(
                "tire.anchors",
                format!("force anchors must satisfy Fe >= Fa > 0, got Fe={fe}, Fa={fa}"),
            ));
        }
        if !(initial_slope_factor > 0.0 && initial_slope_factor <= 3.0) {
            return Err(DynamicsError::invalid(
                "tire.initial_slope_factor",
                format!("must lie in (0, 3], got {initial_slope_factor}"),
            ));
        }
        let initial_slope = initial_slope_factor * (fe - f0) / (se - s0);
        let rising = solve_cubic([(s0, f0), (se, fe)], [(s0, initial_slope), (se, 0.0)])?;
        let falling = solve_cubic([(se, fe), (sa, fa)], [(se, 0.0), (sa, 0.0)])?;
        Ok(Self {
            anchors,
            rising,
            falling,
        })
    }

    /// Evaluates the curve at a non-negative slip magnitude.
    pub fn eval(&self, s: f64) -> f64 {
        let [s0, f0] = self.anchors.zero;
        let [se, _] = self.anchors.extremum;
        let [sa, fa] = self.anchors.asymptote;
        if s < s0 {
            f0
        } else if s < se {
            horner(&self.rising, s)
        } else if s < sa {
            horner(&self.falling, s)
        } else {
            fa
        }
    }

    /// Derivative of the curve at a non-negative slip magnitude.
    pub fn slope(&self, s: f64) -> f64 {
        let [s0, _] = self.anchors.zero;
        let [se, _] = self.anchors.extremum;
        let [sa, _] = self.anchors.asymptote;
        let d = |c: &[f64; 4]| 3.0 * c[0] * s * s + 2.0 * c[1] * s + c[2];
        if s < s0 || s >= sa {
            0.0
        } else if s < se {
            d(&self.rising)
        } else {
            d(&self.falling)
        }
    }

    /// Odd extension: sign of the slip is restored on the magnitude curve.
    pub fn eval_signed(&self, s: f64) -> f64 {
        if s < 0.0 {
            -self.eval(-s)
        } else {
            self.eval(s)
        }
    }
}

fn horner(c: &[f64; 4], s: f64) -> f64 {
    ((c[0] * s + c[1]) * s + c[2]) * s + c[3]
}

/// Solves for cubic coefficients given two value and two slope constraints.
fn solve_cubic(values: [(f64, f64); 2], slopes: [(f64, f64); 2]) -> Result<[f64; 4], DynamicsError> {
    let mut a = Matrix4::zeros();
    let mut b = Vector4::zeros();
    for (row, &(s, f)) in values.iter().enumerate() {
        a.set_row(row, &nalgebra::RowVector4::new(s * s * s, s * s, s, 1.0));
        b[row] = f;
    }
    for (k, &(s, df)) in slopes.iter().enumerate() {
        a.set_row(2 + k, &nalgebra::RowVector4::new(3.0 * s * s, 2.0 * s, 1.0, 0.0));
        b[2 + k] = df;
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| DynamicsError::invalid("tire.anchors", "degenerate spline constraints"))?;
    Ok([x[0], x[1], x[2], x[3]])
}

/// Longitudinal and lateral slip of one tire from its contact-patch velocity
/// expressed in the wheel frame.
///
/// `Sx = (r·ω − vx) / max(|vx|, ε)` and `Sy = vy / max(|vx|, ε)`. The
/// denominator is always positive so the slip sign follows the velocity
/// mismatch in both driving directions.
pub fn tire_slip(radius: f64, wheel_speed: f64, vx: f64, vy: f64) -> (f64, f64) {
    let denom = vx.abs().max(SLIP_EPS);
    ((radius * wheel_speed - vx) / denom, vy / denom)
}

/// Curve forces `(F(Sx), F(Sy))` for one corner, scaled by
/// `normal_load / reference_load`.
///
/// Both forces carry the sign of their slip; the caller orients the lateral
/// force against the side-slip velocity.
pub fn tire_forces(sx: f64, sy: f64, normal_load: f64, corner: usize, tire: &TireParams) -> (f64, f64) {
    let ratio = (normal_load / tire.reference_load[corner]).max(0.0);
    (
        tire.longitudinal.eval_signed(sx) * ratio,
        tire.lateral.eval_signed(sy) * ratio,
    )
}
