//! Uniform time grids and driving Brownian ensembles.
//!
//! Path generation is counter based: path `m` draws its increments from a
//! dedicated ChaCha8 stream selected by `m`, keyed by the ensemble seed, with
//! one Box-Muller normal consuming a fixed number of words per step. The value
//! at `(path, step)` therefore never depends on how many other paths exist or
//! in which order rows are filled, which is what makes runs bit-for-bit
//! reproducible under any thread count and lets a larger ensemble extend a
//! smaller one with the same seed.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Uniform partition of `[0, T]` into `steps` intervals.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
    nodes: Vec<f64>,
}

impl PartialEq for TimeGrid {
    fn eq(&self, other: &Self) -> bool {
        self.horizon.to_bits() == other.horizon.to_bits() && self.steps == other.steps
    }
}

impl TimeGrid {
    /// Build the grid `t_j = (j/steps) * horizon`, `j = 0..=steps`.
    ///
    /// The mesh `horizon / steps` must not exceed 1; a coarser grid makes the
    /// implicit step degenerate and is rejected with [`Error::MeshTooLarge`].
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "horizon must be finite and positive, got {horizon}"
            )));
        }
        if steps == 0 {
            return Err(Error::InvalidArgument("grid needs at least one step".into()));
        }
        let mesh = horizon / steps as f64;
        if mesh > 1.0 {
            return Err(Error::MeshTooLarge(format!(
                "time step {mesh} exceeds 1 (horizon {horizon}, {steps} steps)"
            )));
        }
        let nodes = (0..=steps)
            .map(|j| horizon * (j as f64 / steps as f64))
            .collect();
        Ok(TimeGrid {
            horizon,
            steps,
            nodes,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn mesh(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// All `steps + 1` nodes, starting at 0 and ending at the horizon.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
}

/// Brownian motion sampled on a [`TimeGrid`], one row per path.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    grid: TimeGrid,
    seed: u64,
    /// `paths x (steps + 1)`, `values[[m, j]] = W_m(t_j)`, first column zero.
    values: Array2<f64>,
}

fn seed_key(seed: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key
}

/// One standard normal from two ChaCha words via Box-Muller. Consumption is
/// fixed (exactly two `u64` draws), keeping the stream position a pure
/// function of the step index.
fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    const TWO_POW_53: f64 = 9007199254740992.0;
    let a = rng.next_u64();
    let b = rng.next_u64();
    let u1 = ((a >> 11) as f64 + 1.0) / TWO_POW_53; // in (0, 1]
    let u2 = (b >> 11) as f64 / TWO_POW_53; // in [0, 1)
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

impl PathEnsemble {
    /// Sample `paths` independent Brownian paths on `grid`.
    pub fn sample(grid: TimeGrid, paths: usize, seed: u64) -> Result<Self> {
        if paths == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one path".into(),
            ));
        }
        let steps = grid.steps();
        let sqrt_mesh = grid.mesh().sqrt();
        let key = seed_key(seed);
        let mut values = Array2::zeros((paths, steps + 1));
        values
            .outer_iter_mut()
            .into_par_iter()
            .enumerate()
            .for_each(|(m, mut row)| {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(m as u64);
                let mut w = 0.0;
                row[0] = 0.0;
                for j in 0..steps {
                    w += sqrt_mesh * standard_normal(&mut rng);
                    row[j + 1] = w;
                }
            });
        Ok(PathEnsemble { grid, seed, values })
    }

    /// Wrap externally produced values (a file load, or a test fixture).
    ///
    /// The shape must match the grid and the first column must be zero;
    /// everything else is taken at face value.
    pub fn from_values(grid: TimeGrid, seed: u64, values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "ensemble needs at least one path".into(),
            ));
        }
        if values.ncols() != grid.steps() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} columns for {} steps, got {}",
                grid.steps() + 1,
                grid.steps(),
                values.ncols()
            )));
        }
        if values.column(0).iter().any(|&v| v != 0.0) {
            return Err(Error::InvalidArgument(
                "paths must start at zero".into(),
            ));
        }
        Ok(PathEnsemble { grid, seed, values })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_paths(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// `W_m(t_j)`.
    pub fn value(&self, path: usize, node: usize) -> f64 {
        self.values[[path, node]]
    }

    /// Increments `W(t_{j+1}) - W(t_j)` across all paths.
    pub fn increments(&self, j: usize) -> Result<Vec<f64>> {
        if j >= self.grid.steps() {
            return Err(Error::InvalidArgument(format!(
                "increment index {j} out of range for {} steps",
                self.grid.steps()
            )));
        }
        Ok((0..self.num_paths())
            .map(|m| self.values[[m, j + 1]] - self.values[[m, j]])
            .collect())
    }

    /// Serialize to a flat binary file: `horizon: f64`, `steps: u64`,
    /// `paths: u64`, `seed: u64`, then row-major path values, all
    /// little-endian.
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(&self.grid.horizon().to_le_bytes())?;
        file.write_all(&(self.grid.steps() as u64).to_le_bytes())?;
        file.write_all(&(self.num_paths() as u64).to_le_bytes())?;
        file.write_all(&self.seed.to_le_bytes())?;
        for &v in self.values.iter() {
            file.write_all(&v.to_le_bytes())?;
        }
        file.flush()?;
        Ok(())
    }

    /// Inverse of [`PathEnsemble::write_to`].
    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut buf8 = [0u8; 8];

        file.read_exact(&mut buf8)
            .map_err(|_| Error::MalformedFile("truncated header".into()))?;
        let horizon = f64::from_le_bytes(buf8);
        file.read_exact(&mut buf8)
            .map_err(|_| Error::MalformedFile("truncated header".into()))?;
        let steps = u64::from_le_bytes(buf8) as usize;
        file.read_exact(&mut buf8)
            .map_err(|_| Error::MalformedFile("truncated header".into()))?;
        let paths = u64::from_le_bytes(buf8) as usize;
        file.read_exact(&mut buf8)
            .map_err(|_| Error::MalformedFile("truncated header".into()))?;
        let seed = u64::from_le_bytes(buf8);

        let grid = TimeGrid::new(horizon, steps)?;
        let count = paths
            .checked_mul(steps + 1)
            .ok_or_else(|| Error::MalformedFile("path count overflow".into()))?;
        let mut flat = Vec::with_capacity(count);
        for _ in 0..count {
            file.read_exact(&mut buf8)
                .map_err(|_| Error::MalformedFile("truncated value section".into()))?;
            flat.push(f64::from_le_bytes(buf8));
        }
        if file.read(&mut [0u8; 1])? != 0 {
            return Err(Error::MalformedFile("trailing bytes".into()));
        }
        let values = Array2::from_shape_vec((paths, steps + 1), flat)
            .map_err(|e| Error::MalformedFile(e.to_string()))?;
        Self::from_values(grid, seed, values)
    }
}
