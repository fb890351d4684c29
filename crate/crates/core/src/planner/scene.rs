use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{Point2, RobotModel};
use crate::robot_sdf::sdf_distance;

pub const SCENE_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Obstacle {
    Circle { center: [f64; 2], radius: f64 },
}

impl Obstacle {
    pub fn circle(x: f64, y: f64, radius: f64) -> Self {
        Obstacle::Circle { center: [x, y], radius }
    }

    /// Task-space clearance between the robot surface and the obstacle.
    pub fn clearance(&self, robot: &RobotModel, q: &[f64]) -> f64 {
        match self {
            Obstacle::Circle { center, radius } => {
                sdf_distance(robot, q, &Point2::new(center[0], center[1])) - radius
            }
        }
    }

    /// Evenly spaced boundary samples.
    pub fn boundary(&self, count: usize) -> Vec<Point2> {
        match self {
            Obstacle::Circle { center, radius } => (0..count)
                .map(|i| {
                    let t = TAU * i as f64 / count as f64;
                    Point2::new(center[0] + radius * t.cos(), center[1] + radius * t.sin())
                })
                .collect(),
        }
    }
}

/// Static obstacles; the distance backends see them as boundary point clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub version: u64,
    pub obstacles: Vec<Obstacle>,
    pub points_per_obstacle: usize,
}

impl Scene {
    pub fn new(obstacles: Vec<Obstacle>, points_per_obstacle: usize) -> Self {
        Scene {
            version: SCENE_FORMAT_VERSION,
            obstacles,
            points_per_obstacle,
        }
    }

    /// Two circles of radius 0.3 at (2.3, -2.3) and (0.0, 2.45), the planar
    /// planning benchmark for the two-link arm.
    pub fn planar_benchmark() -> Self {
        Scene::new(vec![Obstacle::circle(2.3, -2.3, 0.3), Obstacle::circle(0.0, 2.45, 0.3)], 64)
    }

    pub fn points(&self) -> Vec<Point2> {
        self.obstacles
            .iter()
            .flat_map(|o| o.boundary(self.points_per_obstacle))
            .collect()
    }

    /// Minimum task-space clearance over all obstacles (infinite when empty).
    pub fn clearance(&self, robot: &RobotModel, q: &[f64]) -> f64 {
        self.obstacles
            .iter()
            .map(|o| o.clearance(robot, q))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn collision_free(&self, robot: &RobotModel, q: &[f64]) -> bool {
        self.clearance(robot, q) > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENE_FORMAT_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: SCENE_FORMAT_VERSION,
            });
        }
        if self.points_per_obstacle == 0 && !self.obstacles.is_empty() {
            return Err(Error::Input("points_per_obstacle must be positive".into()));
        }
        for o in &self.obstacles {
            let Obstacle::Circle { radius, .. } = o;
            if !(*radius > 0.0) {
                return Err(Error::Input(format!("obstacle radius {radius} must be positive")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let scene: Scene = serde_json::from_str(text).map_err(|e| Error::parse(text, e))?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&io::read_to_string(path.as_ref())?)
    }
}
