use serde::{Deserialize, Serialize};

use super::VehicleError;

/// One piece of a road: a straight (`curvature == 0`) or a constant-radius arc.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadSegment {
    /// Arc length (m).
    pub length: f64,
    /// Signed curvature (1/m); positive bends left.
    pub curvature: f64,
}

/// Piecewise-constant-curvature centreline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadProfile {
    pub segments: Vec<RoadSegment>,
    /// Half-width drawn around the centreline in plots (m). Not used by the dynamics.
    #[serde(default = "default_e_bound")]
    pub e_bound: f64,
}

fn default_e_bound() -> f64 {
    3.0
}

impl Default for RoadProfile {
    /// 60 m straight, a 120 m left-hand arc of radius 50 m, then 20 m straight.
    fn default() -> Self {
        Self {
            segments: vec![
                RoadSegment { length: 60.0, curvature: 0.0 },
                RoadSegment { length: 120.0, curvature: 1.0 / 50.0 },
                RoadSegment { length: 20.0, curvature: 0.0 },
            ],
            e_bound: default_e_bound(),
        }
    }
}

/// Position and heading of a point in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl RoadProfile {
    pub fn straight(length: f64) -> Self {
        Self { segments: vec![RoadSegment { length, curvature: 0.0 }], e_bound: default_e_bound() }
    }

    pub fn validate(&self) -> Result<(), VehicleError> {
        if self.segments.is_empty() {
            return Err(VehicleError::InvalidRoad("road has no segments".into()));
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.length.is_finite() && seg.length > 0.0) {
                return Err(VehicleError::InvalidRoad(format!("segment {i} has non-positive length {}", seg.length)));
            }
            if !seg.curvature.is_finite() {
                return Err(VehicleError::InvalidRoad(format!("segment {i} has non-finite curvature")));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    /// Curvature at arc length `s`.
    ///
    /// Outside `[0, length]` the first or last segment is extended, so rollouts
    /// that run past the end of the road keep a well-defined disturbance.
    pub fn curvature_at(&self, s: f64) -> f64 {
        let mut start = 0.0;
        for seg in &self.segments {
            let end = start + seg.length;
            if s < end {
                return seg.curvature;
            }
            start = end;
        }
        self.segments.last().map_or(0.0, |seg| seg.curvature)
    }

    /// World pose of the centreline at arc length `s`, starting at the
    /// origin heading along +x. Past the end the last segment is extended.
    pub fn centerline_pose(&self, s: f64) -> WorldPose {
        let mut pose = WorldPose { x: 0.0, y: 0.0, heading: 0.0 };
        let mut remaining = s.max(0.0);
        let last = self.segments.len().saturating_sub(1);
        for (i, seg) in self.segments.iter().enumerate() {
            let run = if i == last { remaining } else { remaining.min(seg.length) };
            advance(&mut pose, run, seg.curvature);
            remaining -= run;
            if remaining <= 0.0 {
                break;
            }
        }
        pose
    }

    /// World position of a point at arc length `s` and signed lateral offset
    /// `e` (positive to the left of the centreline).
    pub fn to_world(&self, s: f64, e: f64) -> (f64, f64) {
        let p = self.centerline_pose(s);
        (p.x - e * p.heading.sin(), p.y + e * p.heading.cos())
    }
}

fn advance(pose: &mut WorldPose, length: f64, curvature: f64) {
    if curvature.abs() < 1e-12 {
        pose.x += length * pose.heading.cos();
        pose.y += length * pose.heading.sin();
    } else {
        let h1 = pose.heading + curvature * length;
        pose.x += (h1.sin() - pose.heading.sin()) / curvature;
        pose.y += (pose.heading.cos() - h1.cos()) / curvature;
        pose.heading = h1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_lookup_is_total() {
        let road = RoadProfile::default();
        assert_eq!(road.length(), 200.0);
        assert_eq!(road.curvature_at(-5.0), 0.0);
        assert_eq!(road.curvature_at(59.9), 0.0);
        assert_eq!(road.curvature_at(60.0), 0.02);
        assert_eq!(road.curvature_at(179.9), 0.02);
        assert_eq!(road.curvature_at(180.0), 0.0);
        assert_eq!(road.curvature_at(1e6), 0.0);
    }

    #[test]
    fn quarter_circle_geometry() {
        let road = RoadProfile {
            segments: vec![RoadSegment { length: 50.0 * std::f64::consts::FRAC_PI_2, curvature: 0.02 }],
            e_bound: 3.0,
        };
        let p = road.centerline_pose(road.length());
        assert!((p.x - 50.0).abs() < 1e-9 && (p.y - 50.0).abs() < 1e-9);
        // a point 2 m to the left sits closer to the centre of the turn
        let (x, y) = road.to_world(road.length(), 2.0);
        assert!((x - 48.0).abs() < 1e-9 && (y - 50.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_segments() {
        let road = RoadProfile { segments: vec![RoadSegment { length: 0.0, curvature: 0.0 }], e_bound: 3.0 };
        assert!(road.validate().is_err());
        assert!(RoadProfile { segments: vec![], e_bound: 3.0 }.validate().is_err());
    }
}
