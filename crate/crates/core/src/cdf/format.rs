//! JSON grid files.
//!
//! ```text
//! {"version":1,"robot_hash":"<hex>","bounds":[[x0,y0],[x1,y1]],"resolution":[tx,ty],
//!  "cells":[{"index":[i,j],"point":[x,y],"configs":[[...]],"contact_links":[...]}]}
//! ```
//!
//! Cells are listed in row-major order of `[i, j]`; empty cells are omitted.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CdfGrid, GridBounds, GridCell, GRID_FORMAT_VERSION};
use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{JointConfig, Point2};

#[derive(Serialize, Deserialize)]
struct GridFile {
    version: u64,
    robot_hash: String,
    bounds: [[f64; 2]; 2],
    resolution: [usize; 2],
    cells: Vec<CellFile>,
}

#[derive(Serialize, Deserialize)]
struct CellFile {
    index: [usize; 2],
    point: [f64; 2],
    configs: Vec<Vec<f64>>,
    contact_links: Vec<usize>,
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

impl CdfGrid {
    pub fn to_json(&self) -> String {
        let file = GridFile {
            version: GRID_FORMAT_VERSION,
            robot_hash: self.robot_hash.clone(),
            bounds: [
                [self.bounds.min.x, self.bounds.min.y],
                [self.bounds.max.x, self.bounds.max.y],
            ],
            resolution: self.resolution,
            cells: self
                .cells
                .values()
                .filter(|c| !c.configs.is_empty())
                .map(|c| CellFile {
                    index: c.index,
                    point: [c.point.x, c.point.y],
                    configs: c.configs.iter().map(|q| q.0.clone()).collect(),
                    contact_links: c.contact_links.clone(),
                })
                .collect(),
        };
        serde_json::to_string(&file).expect("grid serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text).map_err(|e| Error::parse(text, e))?;
        if probe.version != GRID_FORMAT_VERSION {
            return Err(Error::Version {
                found: probe.version,
                expected: GRID_FORMAT_VERSION,
            });
        }
        let file: GridFile = serde_json::from_str(text).map_err(|e| Error::parse(text, e))?;
        let [[x0, y0], [x1, y1]] = file.bounds;
        let bounds = GridBounds::new(x0, y0, x1, y1)?;
        if file.resolution[0] < 2 || file.resolution[1] < 2 {
            return Err(Error::Input("grid resolution must be at least 2 per axis".into()));
        }
        let mut cells = BTreeMap::new();
        for c in file.cells {
            if c.index[0] >= file.resolution[0] || c.index[1] >= file.resolution[1] {
                return Err(Error::Input(format!("cell index {:?} outside resolution", c.index)));
            }
            if c.configs.len() != c.contact_links.len() {
                return Err(Error::Input(format!("cell {:?}: configs and contact_links differ in length", c.index)));
            }
            let cell = GridCell {
                index: c.index,
                point: Point2::new(c.point[0], c.point[1]),
                configs: c.configs.into_iter().map(JointConfig).collect(),
                contact_links: c.contact_links,
            };
            cells.insert(c.index, cell);
        }
        Ok(CdfGrid {
            bounds,
            resolution: file.resolution,
            robot_hash: file.robot_hash,
            cells,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        io::write_atomic(path.as_ref(), self.to_json().as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&io::read_to_string(path.as_ref())?)
    }
}

pub fn save_grid(grid: &CdfGrid, path: impl AsRef<Path>) -> Result<()> {
    grid.save(path)
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<CdfGrid> {
    CdfGrid::load(path)
}
