//! Training pairs for the learned field, one JSON object per line:
//!
//! ```text
//! {"p":[x,y],"q":[...],"fc":0.42,"grad":[...],"contact_link":2}
//! ```
//!
//! Rows come in batches: one occupied cell centre paired with `b2` joint
//! configurations drawn uniformly within the limits.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cdf::{cdf_eval, GridField};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRow {
    pub p: [f64; 2],
    pub q: Vec<f64>,
    pub fc: f64,
    pub grad: Vec<f64>,
    pub contact_link: usize,
}

impl DatasetRow {
    /// Checks `fc >= 0` and a gradient norm of 0 or 1 within 1e-9.
    pub fn validate(&self) -> Result<()> {
        if self.q.len() != self.grad.len() {
            return Err(Error::Dimension {
                expected: self.q.len(),
                found: self.grad.len(),
            });
        }
        if !(self.fc >= 0.0) {
            return Err(Error::Input(format!("negative distance {}", self.fc)));
        }
        let norm = self.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if norm > 1e-9 && (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Input(format!("gradient norm {norm} is neither 0 nor 1")));
        }
        Ok(())
    }
}

/// Streams `rows` rows to `out`, never holding more than one row. Returns
/// the number written.
pub fn export_dataset(field: &GridField, rows: usize, b2: usize, rng_seed: u64, out: &mut dyn Write) -> Result<usize> {
    if b2 == 0 {
        return Err(Error::Input("b2 must be at least 1".into()));
    }
    let cells: Vec<_> = field.grid.occupied().collect();
    if cells.is_empty() {
        return Err(Error::NoZeroSetData);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let io_err = |e| Error::io("<dataset>", e);
    let mut written = 0;
    while written < rows {
        let cell = cells[rng.random_range(0..cells.len())];
        for _ in 0..b2.min(rows - written) {
            let q = field.robot.sample_config(&mut rng);
            let query = cdf_eval(&q, cell)?;
            let row = DatasetRow {
                p: [cell.point.x, cell.point.y],
                q: q.0,
                fc: query.value,
                grad: query.gradient.iter().copied().collect(),
                contact_link: query.contact_link,
            };
            serde_json::to_writer(&mut *out, &row).map_err(|e| io_err(e.into()))?;
            out.write_all(b"\n").map_err(io_err)?;
            written += 1;
        }
    }
    Ok(written)
}

/// Lazily parses a JSONL dataset; blank lines are skipped.
pub fn read_dataset(input: impl BufRead) -> impl Iterator<Item = Result<DatasetRow>> {
    input.lines().filter_map(|line| match line {
        Err(e) => Some(Err(Error::io("<dataset>", e))),
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(serde_json::from_str(&l).map_err(|e| Error::parse(&l, e))),
    })
}
