//! Settings file read by the command line tool. Any field may be omitted;
//! command-line flags and `CDFKIT_*` environment variables take precedence
//! over it.
//!
//! ```json
//! {"threads": 4, "rng_seed": 7, "fps_k": 32,
//!  "solver": {"seeds": 512}, "planner": {"gamma": 0.5}}
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::io;
use crate::planner::PlannerConfig;
use crate::zero_level_set::SolverParams;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub rng_seed: Option<u64>,
    pub robot: Option<PathBuf>,
    pub fps_k: Option<usize>,
    pub solver: SolverParams,
    pub planner: PlannerConfig,
}

impl FileConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::parse(text, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&io::read_to_string(path.as_ref())?)
    }
}

/// First of flag-or-environment, file, default.
pub fn resolve<T>(cli: Option<T>, file: Option<T>, default: T) -> T {
    cli.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = FileConfig::from_json(r#"{"threads":2,"solver":{"seeds":16},"planner":{"gamma":0.5}}"#).unwrap();
        assert_eq!(c.threads, Some(2));
        assert_eq!(c.solver.seeds, 16);
        assert_eq!(c.solver.epsilon, SolverParams::default().epsilon);
        assert_eq!(c.planner.gamma, 0.5);
        assert_eq!(c.planner.dt, PlannerConfig::default().dt);
        assert!(FileConfig::from_json(r#"{"thread":2}"#).is_err());
    }

    #[test]
    fn precedence() {
        assert_eq!(resolve(Some(1), Some(2), 3), 1);
        assert_eq!(resolve(None, Some(2), 3), 2);
        assert_eq!(resolve(None, None, 3), 3);
    }
}
