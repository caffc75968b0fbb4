//! Static worlds: occupancy grids with extruded walls, heightmaps and box
//! obstacles, with ray and ground queries.

mod grid;
mod heightmap;
mod mapio;
mod raycast;
pub mod scenarios;
mod scene;

pub use grid::{Cell, OccupancyGrid};
pub use heightmap::Heightmap;
pub use mapio::{
    load_heightmap, load_map, load_map_from_memory, parse_map_metadata, save_heightmap, save_map, MapMetadata, DEFAULT_FREE_THRESH,
    DEFAULT_OCCUPIED_THRESH,
};
pub use raycast::{RayHit, HEIGHTMAP_BISECTIONS};
pub use scenarios::Scenario;
pub use scene::{Aabb, Cylinder, GroundSample, Scene};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("map format error in `{field}`: {reason}")]
    Format { field: String, reason: String },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

impl EnvironmentError {
    pub(crate) fn format(field: impl Into<String>, reason: impl Into<String>) -> Self {
        EnvironmentError::Format {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
