use crate::dynamics::VehicleState;

/// Applied actuation as reported by the actuator feedback loop.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ActuatorFeedback {
    pub throttle: f64,
    /// Road-wheel angle, rad.
    pub steering: f64,
}

/// Reads back the post-slew, post-clamp actuation, not the command.
pub fn actuator_feedback(state: &VehicleState) -> ActuatorFeedback {
    ActuatorFeedback {
        throttle: state.throttle,
        steering: state.steering,
    }
}
