//! Synthetic attention maps. Columns follow horizontal bearing (left edge of
//! the FOV is column 0), rows follow distance (row 0 is at the drone).

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::fact::{Fact, Polarity};
use crate::geometry::Pose;
use crate::scene::Scene;
use crate::visibility::{relative_bearing, visible_objects};

pub const DEFAULT_GRID: GridDims = GridDims { width: 17, height: 9 };

/// Blob radius in cells.
const BLOB_SIGMA: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SalienceGrid {
    pub width: usize,
    pub height: usize,
    /// Row-major, each in `[0, 1]`.
    pub values: Vec<f64>,
}

impl SalienceGrid {
    pub fn zeros(dims: GridDims) -> Self {
        let width = dims.width.max(1);
        let height = dims.height.max(1);
        Self {
            width,
            height,
            values: vec![0.0; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Structural check used on values received over the wire.
    pub fn is_well_formed(&self) -> bool {
        self.width >= 1
            && self.height >= 1
            && self.values.len() == self.width * self.height
            && self.values.iter().all(|v| (0.0..=1.0).contains(v))
    }

    /// Column-wise maximum, handy for locating blobs.
    pub fn column_profile(&self) -> Vec<f64> {
        (0..self.width)
            .map(|c| (0..self.height).map(|r| self.get(r, c)).fold(0.0, f64::max))
            .collect()
    }

    /// Plain-text PGM (P2) with 8-bit levels.
    pub fn write_pgm<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "P2")?;
        writeln!(out, "{} {}", self.width, self.height)?;
        writeln!(out, "255")?;
        for row in self.values.chunks(self.width) {
            let line: Vec<String> = row.iter().map(|v| ((v * 255.0).round() as u8).to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Continuous `(column, row)` of a point in grid coordinates.
pub fn project(scene: &Scene, bearing: f64, distance: f64, dims: GridDims) -> (f64, f64) {
    let half = scene.camera.half_fov_rad();
    let col = (half - bearing) / (2.0 * half) * (dims.width.max(1) - 1) as f64;
    let row = (distance / scene.camera.max_range).min(1.0) * (dims.height.max(1) - 1) as f64;
    (col, row)
}

pub fn render_salience(scene: &Scene, pose: &Pose, target_facts: &[Fact], dims: GridDims) -> SalienceGrid {
    let mut grid = SalienceGrid::zeros(dims);
    let targets: Vec<&Fact> = target_facts
        .iter()
        .filter(|f| f.polarity == Polarity::Present)
        .collect();
    if targets.is_empty() {
        return grid;
    }
    for vis in visible_objects(scene, pose) {
        if vis.fraction <= 0.0 {
            continue;
        }
        let Some(obj) = scene.object(&vis.object_id) else {
            continue;
        };
        if !targets.iter().any(|f| f.describes(&obj.label, &obj.attributes)) {
            continue;
        }
        let bearing = relative_bearing(pose, obj.center);
        let (cx, cy) = project(
            scene,
            bearing,
            vis.distance,
            GridDims {
                width: grid.width,
                height: grid.height,
            },
        );
        for r in 0..grid.height {
            for c in 0..grid.width {
                let d2 = (c as f64 - cx).powi(2) + (r as f64 - cy).powi(2);
                let cell = &mut grid.values[r * grid.width + c];
                *cell = (*cell + vis.fraction * (-d2 / (2.0 * BLOB_SIGMA * BLOB_SIGMA)).exp()).min(1.0);
            }
        }
    }
    grid
}
