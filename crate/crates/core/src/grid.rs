//! Fixed-radius neighbor queries over the torus using a uniform cell grid.
//!
//! The square is tiled by `m = floor(L / r)` cells per side, so each cell is
//! at least `r` wide and every neighbor of a node lies in the 3x3 block of
//! cells around it. With fewer than three cells per side the block would
//! alias onto itself, so the index falls back to a linear scan.

use crate::error::{Error, Result};
use crate::world::{toroidal_distance, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct GridIndex {
    cells_per_side: usize,
    cell_side: f64,
    radius: f64,
    area_side: f64,
    /// CSR layout: ids of cell `c` are `entries[starts[c]..starts[c + 1]]`.
    starts: Vec<u32>,
    entries: Vec<u32>,
    /// Positions in `entries` order, for contiguous scans.
    entry_pos: Vec<Point>,
    cell_of: Vec<u32>,
    snapshot_step: u64,
}

impl GridIndex {
    pub fn rebuild(positions: &[Point], area_side: f64, radius: f64, snapshot_step: u64) -> Self {
        let m = (area_side / radius).floor();
        let cells_per_side = if m >= 3.0 { m as usize } else { 1 };
        let cell_side = area_side / cells_per_side as f64;
        let n_cells = cells_per_side * cells_per_side;

        let cell_of: Vec<u32> = positions
            .iter()
            .map(|p| {
                let cx = ((p.x / cell_side) as usize).min(cells_per_side - 1);
                let cy = ((p.y / cell_side) as usize).min(cells_per_side - 1);
                (cy * cells_per_side + cx) as u32
            })
            .collect();

        // Counting sort keeps ids ascending within each cell.
        let mut starts = vec![0u32; n_cells + 1];
        for &c in &cell_of {
            starts[c as usize + 1] += 1;
        }
        for c in 0..n_cells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut entries = vec![0u32; positions.len()];
        let mut entry_pos = vec![Point::new(0.0, 0.0); positions.len()];
        for (id, &c) in cell_of.iter().enumerate() {
            let slot = fill[c as usize] as usize;
            entries[slot] = id as u32;
            entry_pos[slot] = positions[id];
            fill[c as usize] += 1;
        }

        Self {
            cells_per_side,
            cell_side,
            radius,
            area_side,
            starts,
            entries,
            entry_pos,
            cell_of,
            snapshot_step,
        }
    }

    pub fn from_config(positions: &[Point], config: &crate::SimConfig, snapshot_step: u64) -> Self {
        Self::rebuild(positions, config.area_side, config.comm_radius, snapshot_step)
    }

    pub fn len(&self) -> usize {
        self.cell_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cell_of.is_empty()
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn snapshot_step(&self) -> u64 {
        self.snapshot_step
    }

    /// True when the grid is too coarse and queries scan every node.
    pub fn is_brute_force(&self) -> bool {
        self.cells_per_side < 3
    }

    pub fn bucket_sizes(&self) -> impl Iterator<Item = usize> + '_ {
        self.starts.windows(2).map(|w| (w[1] - w[0]) as usize)
    }

    /// All `j != node` within distance `radius` (inclusive), ascending.
    pub fn neighbors_of(&self, node: usize, positions: &[Point]) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        self.neighbors_into(node, positions, &mut out)?;
        out.sort_unstable();
        Ok(out)
    }

    /// The same set as [`GridIndex::neighbors_of`] written into `out`, in
    /// cell-scan order rather than sorted.
    pub fn neighbors_into(&self, node: usize, positions: &[Point], out: &mut Vec<usize>) -> Result<()> {
        if node >= self.cell_of.len() || node >= positions.len() {
            return Err(Error::UnknownNode {
                id: node,
                n_nodes: self.cell_of.len(),
            });
        }
        out.clear();
        let p = positions[node];
        let side = self.area_side;
        let radius = self.radius;
        // Loose squared prefilter; membership is decided by the exact
        // distance test below.
        let r2 = radius * radius * (1.0 + 1e-9);
        let mut scan = |ids: &[u32], pts: &[Point]| {
            for (&j, &q) in ids.iter().zip(pts) {
                let dx = (p.x - q.x).abs();
                let dy = (p.y - q.y).abs();
                let dx = dx.min(side - dx);
                let dy = dy.min(side - dy);
                if dx * dx + dy * dy <= r2 && j as usize != node && toroidal_distance(p, q, side) <= radius {
                    out.push(j as usize);
                }
            }
        };
        if self.is_brute_force() {
            scan(&self.entries, &self.entry_pos);
            return Ok(());
        }
        let m = self.cells_per_side;
        let c = self.cell_of[node] as usize;
        let (cx, cy) = (c % m, c / m);
        // Gaps from p to the near edge of the previous / next cell per axis;
        // a cell whose nearest point is farther than r is skipped.
        let cs = self.cell_side;
        let gap_x = [
            (p.x - cx as f64 * cs).max(0.0),
            0.0,
            ((cx + 1) as f64 * cs - p.x).max(0.0),
        ];
        let gap_y = [
            (p.y - cy as f64 * cs).max(0.0),
            0.0,
            ((cy + 1) as f64 * cs - p.y).max(0.0),
        ];
        for (oy, dy) in [m - 1, 0, 1].into_iter().enumerate() {
            let y = (cy + dy) % m;
            for (ox, dx) in [m - 1, 0, 1].into_iter().enumerate() {
                if gap_x[ox] * gap_x[ox] + gap_y[oy] * gap_y[oy] > r2 {
                    continue;
                }
                let x = (cx + dx) % m;
                let cell = y * m + x;
                let (lo, hi) = (self.starts[cell] as usize, self.starts[cell + 1] as usize);
                scan(&self.entries[lo..hi], &self.entry_pos[lo..hi]);
            }
        }
        Ok(())
    }
}

/// O(N) reference scan used to check the grid.
pub fn brute_force_neighbors(node: usize, positions: &[Point], area_side: f64, radius: f64) -> Vec<usize> {
    let p = positions[node];
    (0..positions.len())
        .filter(|&j| j != node && toroidal_distance(p, positions[j], area_side) <= radius)
        .collect()
}
