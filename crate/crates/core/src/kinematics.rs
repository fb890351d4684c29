//! Planar revolute serial chains: forward kinematics to capsule segments and
//! point Jacobians.
//!
//! The base sits at the origin with zero rotation. Joint angles are relative,
//! so link `i` points along the cumulative angle `q_1 + ... + q_i`. Link
//! indices in the public API are 1-based.

use std::ops::{Deref, DerefMut};
use std::path::Path;

use nalgebra::{Matrix2xX, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub type Point2 = Vector2<f64>;

pub const ROBOT_FORMAT_VERSION: u64 = 1;

/// Joint angles in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointConfig(pub Vec<f64>);

impl JointConfig {
    pub fn zeros(n: usize) -> Self {
        JointConfig(vec![0.0; n])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Euclidean distance over the first `k` joints.
    pub fn prefix_distance(&self, other: &[f64], k: usize) -> f64 {
        self.0[..k]
            .iter()
            .zip(&other[..k])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance(&self, other: &[f64]) -> f64 {
        self.prefix_distance(other, self.dim())
    }
}

impl Deref for JointConfig {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for JointConfig {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for JointConfig {
    fn from(v: Vec<f64>) -> Self {
        JointConfig(v)
    }
}

impl<const N: usize> From<[f64; N]> for JointConfig {
    fn from(v: [f64; N]) -> Self {
        JointConfig(v.to_vec())
    }
}

/// One link of the arm, a capsule around the segment `start..end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSegment {
    pub start: Point2,
    pub end: Point2,
    pub radius: f64,
    /// 1-based.
    pub link_index: usize,
}

impl LinkSegment {
    pub fn point_at(&self, s: f64) -> Point2 {
        self.start + (self.end - self.start) * s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel {
    link_lengths: Vec<f64>,
    link_radii: Vec<f64>,
    joint_limits: Vec<(f64, f64)>,
}

#[derive(Serialize, Deserialize)]
struct RobotFile {
    version: u64,
    link_lengths: Vec<f64>,
    #[serde(default)]
    link_radii: Option<Vec<f64>>,
    joint_limits: Vec<[f64; 2]>,
}

impl RobotModel {
    pub fn new(
        link_lengths: Vec<f64>,
        link_radii: Vec<f64>,
        joint_limits: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let n = link_lengths.len();
        if n == 0 {
            return Err(Error::Input("robot needs at least one link".into()));
        }
        if link_radii.len() != n || joint_limits.len() != n {
            return Err(Error::Input(format!(
                "link_lengths ({n}), link_radii ({}) and joint_limits ({}) must have equal length",
                link_radii.len(),
                joint_limits.len()
            )));
        }
        if let Some(l) = link_lengths.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Input(format!("link length {l} must be positive")));
        }
        if let Some(r) = link_radii.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::Input(format!("link radius {r} must be non-negative")));
        }
        if let Some((lo, hi)) = joint_limits.iter().find(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Input(format!("joint limit [{lo}, {hi}] must satisfy lo < hi")));
        }
        Ok(RobotModel {
            link_lengths,
            link_radii,
            joint_limits,
        })
    }

    /// Zero-radius arm with every joint limited to `[-pi, pi]`.
    pub fn planar(link_lengths: &[f64]) -> Result<Self> {
        let n = link_lengths.len();
        Self::new(
            link_lengths.to_vec(),
            vec![0.0; n],
            vec![(-std::f64::consts::PI, std::f64::consts::PI); n],
        )
    }

    /// The two-link arm with `l1 = l2 = 2` used throughout the planar experiments.
    pub fn two_link() -> Self {
        Self::planar(&[2.0, 2.0]).expect("valid constant robot")
    }

    pub fn dof(&self) -> usize {
        self.link_lengths.len()
    }

    pub fn link_lengths(&self) -> &[f64] {
        &self.link_lengths
    }

    pub fn link_radii(&self) -> &[f64] {
        &self.link_radii
    }

    pub fn joint_limits(&self) -> &[(f64, f64)] {
        &self.joint_limits
    }

    pub fn max_radius(&self) -> f64 {
        self.link_radii.iter().copied().fold(0.0, f64::max)
    }

    /// Farthest workspace distance any surface point can reach.
    pub fn reach(&self) -> f64 {
        self.link_lengths.iter().sum::<f64>() + self.max_radius()
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::Dimension {
                expected: self.dof(),
                found: q.len(),
            });
        }
        Ok(())
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && q
                .iter()
                .zip(&self.joint_limits)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (v, (lo, hi)) in q.iter_mut().zip(&self.joint_limits) {
            *v = v.clamp(*lo, *hi);
        }
    }

    pub fn sample_config<R: Rng + ?Sized>(&self, rng: &mut R) -> JointConfig {
        JointConfig(
            self.joint_limits
                .iter()
                .map(|(lo, hi)| rng.random_range(*lo..*hi))
                .collect(),
        )
    }

    /// Hex SHA-256 of the canonical robot file contents.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.to_file()).expect("robot serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn to_file(&self) -> RobotFile {
        RobotFile {
            version: ROBOT_FORMAT_VERSION,
            link_lengths: self.link_lengths.clone(),
            link_radii: Some(self.link_radii.clone()),
            joint_limits: self.joint_limits.iter().map(|(lo, hi)| [*lo, *hi]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("robot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: RobotFile = serde_json::from_str(text).map_err(|e| Error::parse(text, e))?;
        if file.version != ROBOT_FORMAT_VERSION {
            return Err(Error::Version {
                found: file.version,
                expected: ROBOT_FORMAT_VERSION,
            });
        }
        let n = file.link_lengths.len();
        Self::new(
            file.link_lengths,
            file.link_radii.unwrap_or_else(|| vec![0.0; n]),
            file.joint_limits.into_iter().map(|[lo, hi]| (lo, hi)).collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&io::read_to_string(path.as_ref())?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }
}

/// Positions of joints `1..=n+1` (the last entry is the tip).
pub fn joint_positions(robot: &RobotModel, q: &[f64]) -> Vec<Point2> {
    let mut points = Vec::with_capacity(q.len() + 1);
    let mut angle = 0.0;
    let mut p = Point2::zeros();
    points.push(p);
    for (qi, l) in q.iter().zip(robot.link_lengths()) {
        angle += qi;
        p += Point2::new(angle.cos(), angle.sin()) * *l;
        points.push(p);
    }
    points
}

pub fn forward_kinematics(robot: &RobotModel, q: &[f64]) -> Result<Vec<LinkSegment>> {
    robot.check_dim(q)?;
    Ok(segments_unchecked(robot, q))
}

pub(crate) fn segments_unchecked(robot: &RobotModel, q: &[f64]) -> Vec<LinkSegment> {
    let joints = joint_positions(robot, q);
    joints
        .windows(2)
        .enumerate()
        .map(|(i, w)| LinkSegment {
            start: w[0],
            end: w[1],
            radius: robot.link_radii()[i],
            link_index: i + 1,
        })
        .collect()
}

/// Jacobian of the point at fraction `s` along `link` with respect to the
/// joint angles. Columns past `link` are zero.
pub fn point_jacobian(robot: &RobotModel, q: &[f64], link: usize, s: f64) -> Result<Matrix2xX<f64>> {
    robot.check_dim(q)?;
    if link == 0 || link > robot.dof() {
        return Err(Error::Input(format!(
            "link {link} out of range 1..={}",
            robot.dof()
        )));
    }
    let joints = joint_positions(robot, q);
    let x = joints[link - 1] + (joints[link] - joints[link - 1]) * s;
    Ok(jacobian_at(&joints, robot.dof(), link, &x))
}

pub(crate) fn jacobian_at(joints: &[Point2], n: usize, link: usize, x: &Point2) -> Matrix2xX<f64> {
    let mut jac = Matrix2xX::zeros(n);
    for j in 0..link {
        let r = x - joints[j];
        jac[(0, j)] = -r.y;
        jac[(1, j)] = r.x;
    }
    jac
}
