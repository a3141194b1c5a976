//! Roads: a reference path plus the lateral extent of the drivable area.

use serde::{Deserialize, Serialize};

use crate::control::LaneWidths;
use crate::path::{PathError, ReferencePath};

/// How a reference path is described in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSource {
    Straight {
        length: f64,
        #[serde(default)]
        start: [f64; 2],
        #[serde(default)]
        heading: f64,
    },
    /// Counter-clockwise circle, starting at polar angle `start_angle`.
    Circle {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
        #[serde(default)]
        start_angle: f64,
    },
    Waypoints {
        points: Vec<[f64; 2]>,
        #[serde(default)]
        closed: bool,
    },
}

impl PathSource {
    pub fn build(&self) -> Result<ReferencePath, PathError> {
        match self {
            Self::Straight {
                length,
                start,
                heading,
            } => ReferencePath::straight(*start, *heading, *length),
            Self::Circle {
                radius,
                center,
                start_angle,
            } => ReferencePath::circle(*center, *radius, *start_angle),
            Self::Waypoints { points, closed } => ReferencePath::from_waypoints(points, *closed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoadError {
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("{0}")]
    Invalid(String),
}

/// A reference path with road edges `w_left` / `w_right` away from it.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadSpec {
    pub source: PathSource,
    pub path: ReferencePath,
    pub widths: LaneWidths,
}

impl RoadSpec {
    pub fn new(source: PathSource, widths: LaneWidths) -> Result<Self, RoadError> {
        let LaneWidths {
            w_left,
            w_right,
            eps_w,
        } = widths;
        if !(eps_w > 0.0 && w_left > eps_w && w_right > eps_w) {
            return Err(RoadError::Invalid(format!(
                "need w_left > eps_w > 0 and w_right > eps_w, got w_left={w_left}, w_right={w_right}, eps_w={eps_w}"
            )));
        }
        let path = source.build()?;
        let chi_max = path.max_abs_curvature();
        if chi_max > 0.0 && w_left.min(w_right) >= 1.0 / chi_max {
            return Err(RoadError::Invalid(format!(
                "road half-width {} is not below the smallest turning radius {}",
                w_left.min(w_right),
                1.0 / chi_max
            )));
        }
        Ok(Self {
            source,
            path,
            widths,
        })
    }

    /// Symmetric road of half-width `w`.
    pub fn symmetric(source: PathSource, w: f64, eps_w: f64) -> Result<Self, RoadError> {
        Self::new(
            source,
            LaneWidths {
                w_left: w,
                w_right: w,
                eps_w,
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_widths() {
        let straight = PathSource::Straight {
            length: 100.0,
            start: [0.0, 0.0],
            heading: 0.0,
        };
        assert!(RoadSpec::symmetric(straight.clone(), 10.0, 1.2).is_ok());
        assert!(RoadSpec::symmetric(straight.clone(), 1.0, 1.2).is_err());
        assert!(RoadSpec::symmetric(straight, 10.0, 0.0).is_err());
    }

    #[test]
    fn rejects_roads_wider_than_turning_radius() {
        let tight = PathSource::Circle {
            radius: 5.0,
            center: [0.0, 0.0],
            start_angle: 0.0,
        };
        assert!(RoadSpec::symmetric(tight.clone(), 6.0, 1.0).is_err());
        assert!(RoadSpec::symmetric(tight, 4.0, 1.0).is_ok());
    }
}
