use super::params::SteeringParams;
use super::DynamicsError;

/// Slews the road-wheel angle toward `command · δ_lim` at
/// `δ̇ = κ_δ + κ_v·|v|/v_max`, without overshooting the target and never
/// beyond `±δ_lim`.
pub fn steering_step(current: f64, command: f64, speed: f64, dt: f64, params: &SteeringParams) -> f64 {
    let limit = params.limit;
    let target = (command.clamp(-1.0, 1.0) * limit).clamp(-limit, limit);
    let rate = (params.sensitivity + params.speed_factor * speed.abs() / params.vmax).max(0.0);
    let max_step = rate * dt;
    let delta = (target - current).clamp(-max_step, max_step);
    (current + delta).clamp(-limit, limit)
}

/// Left and right road-wheel angles from the Ackermann geometry.
pub fn ackermann_angles(delta: f64, wheelbase: f64, track: f64) -> Result<(f64, f64), DynamicsError> {
    if !(delta.abs() < std::f64::consts::FRAC_PI_2) {
        return Err(DynamicsError::InvalidGeometry(format!(
            "steering angle {delta} outside (−π/2, π/2)"
        )));
    }
    let t = delta.tan();
    let num = 2.0 * wheelbase * t;
    let left = 2.0 * wheelbase + track * t;
    let right = 2.0 * wheelbase - track * t;
    const EPS: f64 = 1e-9;
    if left.abs() < EPS || right.abs() < EPS {
        return Err(DynamicsError::InvalidGeometry(format!(
            "degenerate Ackermann denominator at δ = {delta}"
        )));
    }
    Ok(((num / left).atan(), (num / right).atan()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SteeringParams {
        SteeringParams {
            limit: 0.5,
            sensitivity: 1.0,
            speed_factor: 0.0,
            vmax: 10.0,
        }
    }

    #[test]
    fn slew_examples() {
        let p = SteeringParams { limit: 1.0, ..params() };
        assert!((steering_step(0.0, 1.0, 0.0, 0.1, &p) - 0.1).abs() < 1e-12);
        assert_eq!(steering_step(0.3, 0.3, 0.0, 0.1, &p), 0.3);
        let mut d = 0.0;
        for _ in 0..100 {
            d = steering_step(d, 1.0, 0.0, 0.1, &params());
        }
        assert_eq!(d, 0.5);
    }

    #[test]
    fn speed_raises_rate() {
        let p = SteeringParams {
            speed_factor: 1.0,
            ..params()
        };
        let slow = steering_step(0.0, 1.0, 0.0, 0.01, &p);
        let fast = steering_step(0.0, 1.0, 10.0, 0.01, &p);
        assert!((fast - 2.0 * slow).abs() < 1e-12);
    }

    #[test]
    fn ackermann_example() {
        let (l, r) = ackermann_angles(20f64.to_radians(), 0.3, 0.2).unwrap();
        assert!((l.to_degrees() - 17.97).abs() < 0.02, "{}", l.to_degrees());
        assert!((r.to_degrees() - 22.50).abs() < 0.02, "{}", r.to_degrees());
        assert_eq!(ackermann_angles(0.0, 0.3, 0.2).unwrap(), (0.0, 0.0));
        assert!(ackermann_angles(2.0, 0.3, 0.2).is_err());
    }
}
