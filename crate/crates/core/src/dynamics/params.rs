use std::path::Path;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::body::{derive_body, MassProperties, SprungMass};
use super::tire::FrictionSpline;
use super::DynamicsError;
use crate::GRAVITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScaleClass {
    Small,
    Mid,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DriveConfig {
    Fwd,
    Rwd,
    Awd,
}

impl DriveConfig {
    pub fn driven(&self) -> [bool; 4] {
        match self {
            DriveConfig::Fwd => [true, true, false, false],
            DriveConfig::Rwd => [false, false, true, true],
            DriveConfig::Awd => [true; 4],
        }
    }

    pub fn driven_count(&self) -> usize {
        self.driven().iter().filter(|d| **d).count()
    }
}

// ---------------------------------------------------------------------------
// File schema
// ---------------------------------------------------------------------------

/// Declarative vehicle description as stored in a parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub name: String,
    pub scale: ScaleClass,
    /// Human-readable scale ratio, e.g. "1:10".
    #[serde(default)]
    pub ratio: Option<String>,
    /// Whether values come from measurements of a physical vehicle.
    #[serde(default)]
    pub calibrated: bool,
    pub body: BodySpec,
    pub wheels: WheelParams,
    pub powertrain: PowertrainParams,
    pub brakes: BrakeParams,
    pub steering: SteeringParams,
    pub suspension: SuspensionSpec,
    pub tires: TireSpec,
    pub aero: AeroParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    /// Sprung mass carried at each corner (FL, FR, RL, RR), kg.
    pub corner_masses: [f64; 4],
    pub wheelbase: f64,
    pub track: f64,
    pub com_height: f64,
    /// Overall footprint (length, width), m. Used for collision checks.
    pub footprint: [f64; 2],
    /// Overall body height, m.
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WheelParams {
    pub mass: f64,
    pub radius: f64,
    /// Wheel-centre height in the vehicle frame at design ride height.
    /// Defaults to the wheel radius.
    #[serde(default)]
    pub mount_offset: Option<f64>,
}

impl WheelParams {
    pub fn inertia(&self) -> f64 {
        0.5 * self.mass * self.radius * self.radius
    }

    pub fn mount_height(&self) -> f64 {
        self.mount_offset.unwrap_or(self.radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowertrainParams {
    pub drive: DriveConfig,
    /// Differential torque drop per radian of steering.
    #[serde(default)]
    pub torque_drop: f64,
    /// Tire radius used by the transmission, m. Defaults to the wheel radius.
    #[serde(default)]
    pub tire_radius: Option<f64>,
    pub motor: MotorParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotorParams {
    Electric {
        /// Cap on per-wheel torque, N·m.
        max_torque: f64,
        /// Per-wheel (wheel speed rad/s, torque N·m) breakpoints.
        torque_segments: Vec<[f64; 2]>,
    },
    Engine(EngineParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineParams {
    /// (RPM, N·m) samples.
    pub torque_curve: Vec<[f64; 2]>,
    pub idle_rpm: f64,
    /// Forward gear ratios, first gear first.
    pub gear_ratios: Vec<f64>,
    /// Reverse gear ratio; must be negative.
    pub reverse_ratio: f64,
    pub final_drive: f64,
    /// Gain of the throttle smoothing operator `1 + gain·T²`.
    #[serde(default)]
    pub smoothing_gain: f64,
    /// Upshift thresholds; gear `g` engages once speed reaches its entry.
    pub shift_map: Vec<ShiftPoint>,
}

impl EngineParams {
    pub fn max_rpm(&self) -> f64 {
        self.torque_curve.last().map(|p| p[0]).unwrap_or(self.idle_rpm)
    }

    /// Ratio for a gear index: −1 reverse, 0 neutral, ≥1 forward.
    pub fn ratio(&self, gear: i32) -> f64 {
        match gear {
            g if g < 0 => self.reverse_ratio,
            0 => 0.0,
            g => self
                .gear_ratios
                .get(g as usize - 1)
                .copied()
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftPoint {
    pub speed: f64,
    pub gear: i32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BrakeParams {
    IdleHold {
        hold_torque: f64,
    },
    Disc {
        disk_radius: f64,
        braking_distance_60mph: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteeringParams {
    /// Steering limit, rad.
    pub limit: f64,
    /// Base steering rate, rad/s.
    pub sensitivity: f64,
    /// Additional rate at top speed, rad/s.
    pub speed_factor: f64,
    /// Speed normalising the rate law, m/s.
    pub vmax: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionSpec {
    #[serde(flatten)]
    pub rate: SuspensionRate,
    /// Equilibrium travel Z0 used to report the travel ratio, m.
    pub equilibrium: f64,
    /// Force-application offset Zf, m.
    #[serde(default)]
    pub force_offset: f64,
    /// Anti-roll bar stiffness, N/m; 0 disables.
    #[serde(default)]
    pub antiroll_stiffness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SuspensionRate {
    Direct { stiffness: f64, damping: f64 },
    Modal { natural_frequency: f64, damping_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveAnchors {
    /// (S0, F0)
    pub zero: [f64; 2],
    /// (Se, Fe)
    pub extremum: [f64; 2],
    /// (Sa, Fa)
    pub asymptote: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TireSpec {
    pub longitudinal: CurveAnchors,
    pub lateral: CurveAnchors,
    /// Normal load at which the curve forces apply, N. Defaults to each
    /// corner's static load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_load: Option<f64>,
    /// Cornering stiffness, N/rad. Informational only.
    #[serde(default)]
    pub cornering_stiffness: f64,
    /// f0'(S0) as a multiple of the zero-to-extremum secant slope.
    #[serde(default = "default_slope_factor")]
    pub initial_slope_factor: f64,
}

fn default_slope_factor() -> f64 {
    1.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AeroParams {
    Constant {
        /// N·s/m
        linear_drag: f64,
        /// N·m·s/rad
        angular_drag: f64,
    },
    Cased {
        drag_max: f64,
        drag_idle: f64,
        drag_reverse: f64,
        v_max: f64,
        v_reverse: f64,
        downforce_coeff: f64,
    },
}

// ---------------------------------------------------------------------------
// Resolved parameters
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyParams {
    pub sprung_masses: Vec<SprungMass>,
    pub mass: MassProperties,
    pub wheelbase: f64,
    pub track: f64,
    pub com_height: f64,
    /// Wheel contact positions in the body frame (origin at the COM
    /// projection on the ground), FL, FR, RL, RR.
    pub wheel_positions: [Vector2<f64>; 4],
    /// Distance from the rear axle forward to the COM.
    pub rear_to_com: f64,
    pub footprint: [f64; 2],
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerSuspension {
    pub sprung_mass: f64,
    pub stiffness: f64,
    pub damping: f64,
    /// Static compression under the corner's weight, m.
    pub static_sag: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuspensionParams {
    pub corners: [CornerSuspension; 4],
    pub equilibrium: f64,
    pub force_offset: f64,
    pub antiroll_stiffness: f64,
}

impl SuspensionParams {
    /// Stiffness and damping from natural frequency and damping ratio.
    pub fn modal(sprung_mass: f64, natural_frequency: f64, damping_ratio: f64) -> (f64, f64) {
        let k = sprung_mass * natural_frequency * natural_frequency;
        let b = 2.0 * damping_ratio * (k * sprung_mass).sqrt();
        (k, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TireParams {
    pub longitudinal: FrictionSpline,
    pub lateral: FrictionSpline,
    /// Per-corner reference load, N.
    pub reference_load: [f64; 4],
    pub cornering_stiffness: f64,
}

/// Complete, validated parameter set for one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub spec: VehicleSpec,
    pub scale: ScaleClass,
    pub body: BodyParams,
    pub wheels: WheelParams,
    pub powertrain: PowertrainParams,
    pub brakes: BrakeParams,
    pub steering: SteeringParams,
    pub suspension: SuspensionParams,
    pub tires: TireParams,
    pub aero: AeroParams,
}

fn positive(field: &str, v: f64) -> Result<(), DynamicsError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::invalid(field, format!("must be positive, got {v}")))
    }
}

fn non_negative(field: &str, v: f64) -> Result<(), DynamicsError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::invalid(field, format!("must be non-negative, got {v}")))
    }
}

impl VehicleParams {
    pub fn from_toml_str(text: &str) -> Result<Self, DynamicsError> {
        let spec: VehicleSpec = toml::from_str(text).map_err(|e| DynamicsError::Parse(e.to_string()))?;
        Self::from_spec(spec)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, DynamicsError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| DynamicsError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(&self.spec).expect("vehicle spec serializes")
    }

    pub fn from_spec(spec: VehicleSpec) -> Result<Self, DynamicsError> {
        let b = &spec.body;
        positive("body.wheelbase", b.wheelbase)?;
        positive("body.track", b.track)?;
        positive("body.com_height", b.com_height)?;
        positive("body.height", b.height)?;
        positive("body.footprint[0]", b.footprint[0])?;
        positive("body.footprint[1]", b.footprint[1])?;
        positive("wheels.radius", spec.wheels.radius)?;
        positive("wheels.mass", spec.wheels.mass)?;

        // Design frame: origin at the rear-axle centre on the ground.
        let (l, w, h) = (b.wheelbase, b.track, b.com_height);
        let corners = [
            Vector3::new(l, w / 2.0, h),
            Vector3::new(l, -w / 2.0, h),
            Vector3::new(0.0, w / 2.0, h),
            Vector3::new(0.0, -w / 2.0, h),
        ];
        let sprung_masses: Vec<SprungMass> = b
            .corner_masses
            .iter()
            .zip(corners.iter())
            .map(|(&m, &p)| SprungMass::new(m, p))
            .collect();
        let mass = derive_body(&sprung_masses)?;
        let wheel_positions =
            corners.map(|c| Vector2::new(c.x - mass.com.x, c.y - mass.com.y));
        let body = BodyParams {
            sprung_masses,
            mass,
            wheelbase: l,
            track: w,
            com_height: h,
            wheel_positions,
            rear_to_com: mass.com.x,
            footprint: b.footprint,
            height: b.height,
        };

        let full = spec.scale == ScaleClass::Full;
        let consistent = matches!(spec.powertrain.motor, MotorParams::Engine(_)) == full
            && matches!(spec.brakes, BrakeParams::Disc { .. }) == full
            && matches!(spec.aero, AeroParams::Cased { .. }) == full;
        if !consistent {
            return Err(DynamicsError::invalid(
                "scale",
                "Full scale needs engine, disc brakes and cased drag; Small and Mid need electric, idle_hold and constant",
            ));
        }

        let pt = &spec.powertrain;
        non_negative("powertrain.torque_drop", pt.torque_drop)?;
        if let Some(r) = pt.tire_radius {
            positive("powertrain.tire_radius", r)?;
        }
        match &pt.motor {
            MotorParams::Electric {
                max_torque,
                torque_segments,
            } => {
                positive("powertrain.motor.max_torque", *max_torque)?;
                if torque_segments.is_empty() {
                    return Err(DynamicsError::invalid(
                        "powertrain.motor.torque_segments",
                        "at least one breakpoint required",
                    ));
                }
                if torque_segments.windows(2).any(|p| p[1][0] <= p[0][0]) {
                    return Err(DynamicsError::invalid(
                        "powertrain.motor.torque_segments",
                        "speeds must be strictly increasing",
                    ));
                }
            }
            MotorParams::Engine(e) => {
                positive("powertrain.motor.final_drive", e.final_drive)?;
                positive("powertrain.motor.idle_rpm", e.idle_rpm)?;
                non_negative("powertrain.motor.smoothing_gain", e.smoothing_gain)?;
                if e.torque_curve.len() < 2 || e.torque_curve.windows(2).any(|p| p[1][0] <= p[0][0]) {
                    return Err(DynamicsError::invalid(
                        "powertrain.motor.torque_curve",
                        "needs at least two samples with strictly increasing RPM",
                    ));
                }
                if e.gear_ratios.is_empty() || e.gear_ratios.iter().any(|g| !(*g > 0.0)) {
                    return Err(DynamicsError::invalid(
                        "powertrain.motor.gear_ratios",
                        "forward ratios must be positive",
                    ));
                }
                if !(e.reverse_ratio < 0.0) {
                    return Err(DynamicsError::invalid(
                        "powertrain.motor.reverse_ratio",
                        "reverse ratio must be negative",
                    ));
                }
                if e.shift_map.is_empty()
                    || e.shift_map.windows(2).any(|p| p[1].speed <= p[0].speed || p[1].gear != p[0].gear + 1)
                    || e.shift_map[0].gear != 1
                    || e.shift_map.last().unwrap().gear as usize > e.gear_ratios.len()
                {
                    return Err(DynamicsError::invalid(
                        "powertrain.motor.shift_map",
                        "must list consecutive gears from 1 with increasing speeds",
                    ));
                }
            }
        }
        match spec.brakes {
            BrakeParams::IdleHold { hold_torque } => positive("brakes.hold_torque", hold_torque)?,
            BrakeParams::Disc {
                disk_radius,
                braking_distance_60mph,
            } => {
                positive("brakes.disk_radius", disk_radius)?;
                positive("brakes.braking_distance_60mph", braking_distance_60mph)?;
            }
        }
        positive("steering.limit", spec.steering.limit)?;
        if spec.steering.limit >= std::f64::consts::FRAC_PI_2 {
            return Err(DynamicsError::invalid("steering.limit", "must be below π/2"));
        }
        positive("steering.vmax", spec.steering.vmax)?;
        non_negative("steering.sensitivity", spec.steering.sensitivity)?;

        let s = &spec.suspension;
        positive("suspension.equilibrium", s.equilibrium)?;
        non_negative("suspension.antiroll_stiffness", s.antiroll_stiffness)?;
        let mut corners_susp = [CornerSuspension {
            sprung_mass: 0.0,
            stiffness: 0.0,
            damping: 0.0,
            static_sag: 0.0,
        }; 4];
        for (i, c) in corners_susp.iter_mut().enumerate() {
            let m = b.corner_masses[i];
            let (k, d) = match s.rate {
                SuspensionRate::Direct { stiffness, damping } => (stiffness, damping),
                SuspensionRate::Modal {
                    natural_frequency,
                    damping_ratio,
                } => SuspensionParams::modal(m, natural_frequency, damping_ratio),
            };
            positive("suspension.stiffness", k)?;
            positive("suspension.damping", d)?;
            *c = CornerSuspension {
                sprung_mass: m,
                stiffness: k,
                damping: d,
                static_sag: m * GRAVITY / k,
            };
        }
        let suspension = SuspensionParams {
            corners: corners_susp,
            equilibrium: s.equilibrium,
            force_offset: s.force_offset,
            antiroll_stiffness: s.antiroll_stiffness,
        };

        let t = &spec.tires;
        if let Some(r) = t.reference_load {
            positive("tires.reference_load", r)?;
        }
        let tires = TireParams {
            longitudinal: FrictionSpline::build(t.longitudinal, t.initial_slope_factor)?,
            lateral: FrictionSpline::build(t.lateral, t.initial_slope_factor)?,
            reference_load: b.corner_masses.map(|m| t.reference_load.unwrap_or(m * GRAVITY)),
            cornering_stiffness: t.cornering_stiffness,
        };

        match spec.aero {
            AeroParams::Constant {
                linear_drag,
                angular_drag,
            } => {
                non_negative("aero.linear_drag", linear_drag)?;
                non_negative("aero.angular_drag", angular_drag)?;
            }
            AeroParams::Cased {
                drag_max,
                drag_idle,
                drag_reverse,
                v_max,
                v_reverse,
                downforce_coeff,
            } => {
                for (f, v) in [
                    ("aero.drag_max", drag_max),
                    ("aero.drag_idle", drag_idle),
                    ("aero.drag_reverse", drag_reverse),
                    ("aero.v_max", v_max),
                    ("aero.v_reverse", v_reverse),
                    ("aero.downforce_coeff", downforce_coeff),
                ] {
                    non_negative(f, v)?;
                }
            }
        }

        Ok(Self {
            scale: spec.scale,
            body,
            wheels: spec.wheels,
            powertrain: spec.powertrain.clone(),
            brakes: spec.brakes,
            steering: spec.steering,
            suspension,
            tires,
            aero: spec.aero,
            spec,
        })
    }

    pub fn total_mass(&self) -> f64 {
        self.body.mass.total_mass
    }

    pub fn tire_radius(&self) -> f64 {
        self.powertrain.tire_radius.unwrap_or(self.wheels.radius)
    }

    /// Force-application point below the COM, `Z_F = Z_COM − Z_w + r_w − Z_f`.
    pub fn force_application_depth(&self) -> f64 {
        self.body.com_height - self.wheels.mount_height() + self.wheels.radius
            - self.suspension.force_offset
    }
}
