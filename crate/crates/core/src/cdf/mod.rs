//! Configuration-space distance field.
//!
//! For a workspace point `p` with contact samples `q'` (each tagged with the
//! link `k` that touches `p`), the field value at `q` is
//! `min ‖q[..k] - q'[..k]‖`, i.e. only the joints before the contact link
//! count. The gradient is the unit vector from the nearest sample to `q` over
//! those joints, zero-padded, and projecting `q` along it lands on the
//! sample. Multiple points fuse by taking the minimum.

mod format;
mod grid;

use nalgebra::DVector;

pub use format::{load_grid, save_grid};
pub use grid::{build_grid, BuildReport, CdfGrid, CellStatus, FusedCdf, GridBounds, GridCell, GridField};

use crate::error::{Error, Result};
use crate::kinematics::{JointConfig, Point2, RobotModel};
use crate::zero_level_set::{find_zero_configs, lex_cmp, ContactSamples, SolverParams, ZeroSet};

pub const GRID_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CdfQuery {
    /// Joint-space distance in radians.
    pub value: f64,
    /// Unit-norm over the first `contact_link` joints, zero elsewhere; the
    /// zero vector when `value == 0`.
    pub gradient: DVector<f64>,
    pub nearest_config: JointConfig,
    pub contact_link: usize,
}

impl CdfQuery {
    /// Configuration reached by one projection step, `q - value * gradient`.
    pub fn projected(&self, q: &[f64]) -> JointConfig {
        JointConfig(
            q.iter()
                .zip(self.gradient.iter())
                .map(|(v, g)| v - self.value * g)
                .collect(),
        )
    }
}

/// Nearest sample under prefix truncation. Ties go to the lower contact
/// link, then to the lexicographically smaller config.
pub fn cdf_eval(q: &[f64], samples: &(impl ContactSamples + ?Sized)) -> Result<CdfQuery> {
    let configs = samples.configs();
    if configs.is_empty() {
        return Err(Error::NoZeroSetData);
    }
    let links = samples.contact_links();
    let mut best = 0;
    let mut best_sq = f64::INFINITY;
    for (i, (qp, &k)) in configs.iter().zip(links).enumerate() {
        let d2 = prefix_sq(q, qp, k);
        if d2 < best_sq || (d2 == best_sq && tie_wins(qp, k, &configs[best], links[best])) {
            best = i;
            best_sq = d2;
        }
    }
    Ok(query_from(q, &configs[best], links[best], best_sq))
}

fn tie_wins(candidate: &[f64], link: usize, incumbent: &[f64], incumbent_link: usize) -> bool {
    link < incumbent_link || (link == incumbent_link && lex_cmp(candidate, incumbent).is_lt())
}

#[inline]
pub(crate) fn prefix_sq(q: &[f64], qp: &[f64], k: usize) -> f64 {
    let mut acc = 0.0;
    for j in 0..k {
        let d = q[j] - qp[j];
        acc += d * d;
    }
    acc
}

pub(crate) fn query_from(q: &[f64], nearest: &JointConfig, link: usize, dist_sq: f64) -> CdfQuery {
    let value = dist_sq.sqrt();
    let mut gradient = DVector::zeros(q.len());
    if value > 0.0 {
        let diff: Vec<f64> = (0..link).map(|j| q[j] - nearest[j]).collect();
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        for (j, d) in diff.into_iter().enumerate() {
            gradient[j] = d / norm;
        }
    }
    CdfQuery {
        value,
        gradient,
        nearest_config: nearest.clone(),
        contact_link: link,
    }
}

/// Applies `q <- q - f_c * grad f_c` `iters` times, clamping to joint limits
/// after each step. The step is written as a copy of the nearest sample's
/// leading joints, which is the same update without rounding.
pub fn cdf_project(
    robot: &RobotModel,
    q: &[f64],
    samples: &(impl ContactSamples + ?Sized),
    iters: usize,
) -> Result<JointConfig> {
    if iters == 0 {
        return Err(Error::Input("projection needs at least one iteration".into()));
    }
    robot.check_dim(q)?;
    let mut current = JointConfig(q.to_vec());
    for _ in 0..iters {
        let query = cdf_eval(&current, samples)?;
        if query.value == 0.0 {
            break;
        }
        current[..query.contact_link].copy_from_slice(&query.nearest_config[..query.contact_link]);
        robot.clamp(&mut current);
    }
    Ok(current)
}

/// Source of projections onto the contact set of a workspace point: a
/// precomputed grid, an on-demand zero-set search, or a learned field.
pub trait Projector: Sync {
    fn target<'a>(&'a self, p: &Point2) -> Result<Box<dyn TargetProjector + 'a>>;
}

pub trait TargetProjector {
    fn project(&self, q: &JointConfig, iters: usize) -> Result<JointConfig>;
}

/// Runs the zero-set search for every requested point.
pub struct ExactField<'r> {
    pub robot: &'r RobotModel,
    pub solver: SolverParams,
    pub rng_seed: u64,
}

struct ExactTarget<'r> {
    robot: &'r RobotModel,
    zero_set: ZeroSet,
}

impl Projector for ExactField<'_> {
    fn target<'a>(&'a self, p: &Point2) -> Result<Box<dyn TargetProjector + 'a>> {
        let zero_set = find_zero_configs(self.robot, p, &self.solver, self.rng_seed);
        if zero_set.is_empty() {
            return Err(Error::NoZeroSetData);
        }
        Ok(Box::new(ExactTarget {
            robot: self.robot,
            zero_set,
        }))
    }
}

impl TargetProjector for ExactTarget<'_> {
    fn project(&self, q: &JointConfig, iters: usize) -> Result<JointConfig> {
        cdf_project(self.robot, q, &self.zero_set, iters)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::zero_level_set::ZeroSetStatus;

    fn set(configs: Vec<Vec<f64>>, links: Vec<usize>) -> ZeroSet {
        let n = configs.len();
        ZeroSet {
            point: Point2::zeros(),
            configs: configs.into_iter().map(JointConfig).collect(),
            contact_links: links,
            residuals: vec![0.0; n],
            status: ZeroSetStatus::Converged,
        }
    }

    #[test]
    fn one_link_closed_form() {
        let zs = set(vec![vec![FRAC_PI_2]], vec![1]);
        let res = cdf_eval(&[0.0], &zs).unwrap();
        assert!((res.value - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(res.gradient[0], -1.0);
        assert_eq!(res.nearest_config[0], FRAC_PI_2);

        let robot = RobotModel::planar(&[2.0]).unwrap();
        let out = cdf_project(&robot, &[0.0], &zs, 1).unwrap();
        assert_eq!(out[0], FRAC_PI_2);
    }

    #[test]
    fn distance_to_self_is_zero() {
        let zs = set(vec![vec![0.3, -1.0], vec![1.0, 2.0]], vec![2, 2]);
        let res = cdf_eval(&[1.0, 2.0], &zs).unwrap();
        assert_eq!(res.value, 0.0);
        assert!(res.gradient.iter().all(|g| *g == 0.0));
        let robot = RobotModel::two_link();
        assert_eq!(cdf_project(&robot, &[1.0, 2.0], &zs, 3).unwrap().0, vec![1.0, 2.0]);
    }

    #[test]
    fn truncation_ignores_trailing_joints() {
        // Contact on link 1 only constrains q1.
        let zs = set(vec![vec![0.5, 3.0], vec![0.0, 0.0]], vec![1, 2]);
        let res = cdf_eval(&[0.4, -2.0], &zs).unwrap();
        assert!((res.value - 0.1).abs() < 1e-12);
        assert_eq!(res.contact_link, 1);
        assert_eq!(res.gradient[1], 0.0);
    }

    #[test]
    fn ties_prefer_lower_link_then_lex_order() {
        let zs = set(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![1.0, 5.0]], vec![2, 2, 1]);
        let res = cdf_eval(&[0.0, 0.0], &zs).unwrap();
        assert_eq!(res.contact_link, 1);
        let zs = set(vec![vec![1.0, 0.0], vec![-1.0, 0.0]], vec![2, 2]);
        let res = cdf_eval(&[0.0, 0.0], &zs).unwrap();
        assert_eq!(res.nearest_config.0, vec![-1.0, 0.0]);
    }

    #[test]
    fn empty_set_is_an_error() {
        let zs = set(vec![], vec![]);
        assert!(matches!(cdf_eval(&[0.0], &zs), Err(Error::NoZeroSetData)));
        let robot = RobotModel::planar(&[1.0]).unwrap();
        assert!(cdf_project(&robot, &[0.0], &zs, 1).is_err());
        let zs = set(vec![vec![0.0]], vec![1]);
        assert!(cdf_project(&robot, &[0.0], &zs, 0).is_err());
    }

    fn arb_samples() -> impl Strategy<Value = (Vec<f64>, ZeroSet)> {
        let n = 4;
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec((prop::collection::vec(-3.0f64..3.0, n), 1usize..=n), 1..40),
        )
            .prop_map(|(q, samples)| {
                let (configs, links) = samples.into_iter().unzip();
                (q, set(configs, links))
            })
    }

    proptest! {
        #[test]
        fn gradient_is_unit_and_causal((q, zs) in arb_samples()) {
            let res = cdf_eval(&q, &zs).unwrap();
            prop_assert!(res.value >= 0.0);
            if res.value > 0.0 {
                prop_assert!((res.gradient.norm() - 1.0).abs() < 1e-9);
            }
            for j in res.contact_link..q.len() {
                prop_assert_eq!(res.gradient[j], 0.0);
            }
            let back = res.projected(&q);
            for j in 0..res.contact_link {
                prop_assert!((back[j] - res.nearest_config[j]).abs() < 1e-12);
            }
        }

        #[test]
        fn truncated_value_never_exceeds_full_norm((q, zs) in arb_samples()) {
            let res = cdf_eval(&q, &zs).unwrap();
            let naive = zs.configs.iter().map(|c| c.distance(&q)).fold(f64::INFINITY, f64::min);
            prop_assert!(res.value <= naive + 1e-12);
        }
    }

    #[test]
    fn one_sided_directional_derivatives_are_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let configs: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let links = (0..60).map(|_| rng.random_range(1..=3)).collect();
        let zs = set(configs, links);
        let h = 1e-7;
        for _ in 0..200 {
            let q0: Vec<f64> = (0..3).map(|_| rng.random_range(-3.0..3.0)).collect();
            let dir: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
            let along = |t: f64| -> Vec<f64> { q0.iter().zip(&dir).map(|(a, d)| a + t * d / norm).collect() };
            for step in 0..100 {
                let t = step as f64 * 0.05;
                let f0 = cdf_eval(&along(t), &zs).unwrap().value;
                let fwd = (cdf_eval(&along(t + h), &zs).unwrap().value - f0) / h;
                let bwd = (f0 - cdf_eval(&along(t - h), &zs).unwrap().value) / h;
                assert!(fwd.abs() <= 1.0 + 1e-6 && bwd.abs() <= 1.0 + 1e-6, "{fwd} {bwd}");
            }
        }
    }
}
