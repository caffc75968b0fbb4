//! Shipped vehicle parameter files.
//!
//! | id         | scale | class |
//! |------------|-------|-------|
//! | `scale14`  | 1:14  | Small |
//! | `scale10`  | 1:10  | Small |
//! | `scale5`   | 1:5   | Mid   |
//! | `fullsize` | 1:1   | Full  |
//!
//! Values are plausible for the class but not calibrated against hardware.

use std::path::Path;

use super::{DynamicsError, VehicleParams};

const PRESETS: &[(&str, &str)] = &[
    ("scale14", include_str!("../../presets/scale14.toml")),
    ("scale10", include_str!("../../presets/scale10.toml")),
    ("scale5", include_str!("../../presets/scale5.toml")),
    ("fullsize", include_str!("../../presets/fullsize.toml")),
];

pub fn ids() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(id, _)| *id)
}

pub fn source(id: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(k, _)| *k == id).map(|(_, s)| *s)
}

pub fn load(id: &str) -> Result<VehicleParams, DynamicsError> {
    let text = source(id).ok_or_else(|| DynamicsError::UnknownPreset(id.to_string()))?;
    VehicleParams::from_toml_str(text)
}

/// Resolves a preset id or a path to a parameter file.
pub fn resolve(id_or_path: &str) -> Result<VehicleParams, DynamicsError> {
    if source(id_or_path).is_some() {
        return load(id_or_path);
    }
    let path = Path::new(id_or_path);
    if path.exists() {
        VehicleParams::from_file(path)
    } else {
        Err(DynamicsError::UnknownPreset(id_or_path.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ScaleClass;

    #[test]
    fn all_presets_load() {
        for id in ids() {
            let p = load(id).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert_eq!(p.spec.name, id);
            assert!(!p.spec.calibrated);
        }
        assert_eq!(load("fullsize").unwrap().scale, ScaleClass::Full);
        assert_eq!(load("scale5").unwrap().scale, ScaleClass::Mid);
    }

    #[test]
    fn round_trips_through_toml() {
        let p = load("fullsize").unwrap();
        let again = VehicleParams::from_toml_str(&p.to_toml_string()).unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn unknown_preset() {
        assert!(matches!(load("nope"), Err(DynamicsError::UnknownPreset(_))));
        assert!(resolve("/definitely/missing.toml").is_err());
    }

    #[test]
    fn bad_field_named_in_error() {
        let text = source("scale10").unwrap().replace("wheelbase = 0.324", "wheelbase = -1.0");
        let err = VehicleParams::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("body.wheelbase"), "{err}");
    }
}
