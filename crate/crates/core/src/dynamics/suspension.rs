use super::params::{CornerSuspension, VehicleParams};
use super::state::{SuspensionCorner, SuspensionState};

/// Spring-damper output of one corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuspensionForce {
    /// Dynamic force on the sprung mass, `−[B(Ż−ż) + K(Z−z)]`, N.
    pub sprung: f64,
    /// Mirrored force on the unsprung mass, `−[B(ż−Ż) + K(z−Z)]`, N.
    pub unsprung: f64,
    /// Depth of the force application point below the COM, `Z_F`, m.
    pub application_depth: f64,
    /// Travel ratio `Zs` under the static corner load.
    pub travel_ratio: f64,
}

/// Spring-damper force about the static equilibrium. The static preload
/// `K·sag` that carries the corner weight is added by the integrator.
/// An airborne corner transmits nothing.
pub fn suspension_forces(corner: &SuspensionCorner, susp: &CornerSuspension, params: &VehicleParams) -> SuspensionForce {
    let travel_ratio =
        susp.sprung_mass * crate::GRAVITY / (params.suspension.equilibrium * susp.stiffness);
    let application_depth = params.force_application_depth();
    if !corner.grounded {
        return SuspensionForce {
            sprung: 0.0,
            unsprung: 0.0,
            application_depth,
            travel_ratio,
        };
    }
    let rel = susp.damping * (corner.sprung_rate - corner.unsprung_rate)
        + susp.stiffness * (corner.sprung - corner.unsprung);
    SuspensionForce {
        sprung: -rel,
        unsprung: rel,
        application_depth,
        travel_ratio,
    }
}

/// Anti-roll bar forces on one axle, `(F_L, F_R)` with
/// `F_L = K_r·(Z_R − Z_L)` and `F_R = K_r·(Z_L − Z_R)` where `Z` is the
/// suspension extension. Zero unless both wheels are grounded.
pub fn antiroll_forces(left_extension: f64, right_extension: f64, both_grounded: bool, stiffness: f64) -> (f64, f64) {
    if !both_grounded || stiffness == 0.0 {
        return (0.0, 0.0);
    }
    let f = stiffness * (right_extension - left_extension);
    (f, -f)
}

/// Anti-roll forces for every corner from the current suspension state.
pub fn antiroll_state_forces(state: &SuspensionState, stiffness: f64) -> [f64; 4] {
    let c = &state.corners;
    // extension is the negative of the relative compression z − Z
    let ext = |i: usize| -(c[i].unsprung - c[i].sprung);
    let (fl, fr) = antiroll_forces(ext(0), ext(1), c[0].grounded && c[1].grounded, stiffness);
    let (rl, rr) = antiroll_forces(ext(2), ext(3), c[2].grounded && c[3].grounded, stiffness);
    [fl, fr, rl, rr]
}
