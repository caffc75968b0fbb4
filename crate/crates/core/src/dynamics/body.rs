use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// A point mass carried by the suspension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprungMass {
    pub mass: f64,
    pub position: Vector3<f64>,
}

impl SprungMass {
    pub fn new(mass: f64, position: Vector3<f64>) -> Self {
        Self { mass, position }
    }
}

/// Lumped rigid-body properties derived from the sprung masses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassProperties {
    pub total_mass: f64,
    pub com: Vector3<f64>,
    /// Principal moments of inertia about the COM (xx, yy, zz). Products of
    /// inertia are neglected.
    pub inertia: Vector3<f64>,
}

/// Total mass, centre of mass and point-mass inertia of a set of sprung masses.
pub fn derive_body(sprung_masses: &[SprungMass]) -> Result<MassProperties, DynamicsError> {
    if sprung_masses.is_empty() {
        return Err(DynamicsError::invalid("sprung_masses", "at least one sprung mass is required"));
    }
    for (i, m) in sprung_masses.iter().enumerate() {
        if !(m.mass > 0.0) || !m.mass.is_finite() {
            return Err(DynamicsError::invalid(
                format!("sprung_masses[{i}].mass"),
                format!("must be positive, got {}", m.mass),
            ));
        }
    }
    let total_mass: f64 = sprung_masses.iter().map(|m| m.mass).sum();
    let com = sprung_masses
        .iter()
        .fold(Vector3::zeros(), |acc, m| acc + m.position * m.mass)
        / total_mass;
    let inertia = sprung_masses.iter().fold(Vector3::zeros(), |acc, m| {
        let d = m.position - com;
        acc + Vector3::new(
            m.mass * (d.y * d.y + d.z * d.z),
            m.mass * (d.x * d.x + d.z * d.z),
            m.mass * (d.x * d.x + d.y * d.y),
        )
    });
    Ok(MassProperties {
        total_mass,
        com,
        inertia,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_centres_at_origin() {
        let props = derive_body(&[
            SprungMass::new(1.0, Vector3::new(1.0, 0.0, 0.0)),
            SprungMass::new(1.0, Vector3::new(-1.0, 0.0, 0.0)),
        ])
        .unwrap();
        assert_eq!(props.total_mass, 2.0);
        assert_eq!(props.com, Vector3::zeros());
        // each unit mass sits 1 m from the COM along x
        assert_eq!(props.inertia, Vector3::new(0.0, 2.0, 2.0));
    }

    #[test]
    fn weighted_com() {
        let props = derive_body(&[
            SprungMass::new(2.0, Vector3::zeros()),
            SprungMass::new(1.0, Vector3::new(3.0, 0.0, 0.0)),
        ])
        .unwrap();
        assert!((props.com.x - 1.0).abs() < 1e-15);
        assert_eq!(props.total_mass, 3.0);
    }

    #[test]
    fn point_mass_has_no_inertia() {
        let props = derive_body(&[SprungMass::new(5.0, Vector3::zeros())]).unwrap();
        assert_eq!(props.inertia, Vector3::zeros());
    }

    #[test]
    fn rejects_empty_and_non_positive() {
        assert!(matches!(
            derive_body(&[]),
            Err(DynamicsError::InvalidParameter { .. })
        ));
        let err = derive_body(&[SprungMass::new(0.0, Vector3::zeros())]).unwrap_err();
        assert!(err.to_string().contains("sprung_masses[0].mass"));
        assert!(derive_body(&[SprungMass::new(-1.0, Vector3::zeros())]).is_err());
    }
}
