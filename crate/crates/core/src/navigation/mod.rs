//! Map-based navigation pipeline: odometry fusion, log-odds mapping,
//! waypoint recording, and pure-pursuit plus PID tracking.

mod mapping;
mod odometry;
mod tracking;
mod trajectory;

pub use mapping::{boundary_recall, log_odds, update_occupancy, LogOddsMap, LogOddsParams};
pub use odometry::{fuse_odometry, OdometryConfig, OdometryEstimate};
pub use tracking::{pid_speed, pure_pursuit_steer, PidConfig, PidState, PursuitOutput, TrackerConfig};
pub use trajectory::{
    lint_trajectory, menger_curvature, project_on_segment, record_waypoints, LintReport, Trajectory, Waypoint, WaypointRecorder,
};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NavigationError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("no path to track")]
    NoPath,
    #[error("trajectory format error: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl NavigationError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        NavigationError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        NavigationError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
