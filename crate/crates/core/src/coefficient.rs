//! Scalar diffusion coefficients that are constant on the cells of a
//! `raster_m x raster_m` Cartesian grid over the unit square.
//!
//! # Raster text format
//!
//! ```text
//! rows cols
//! v(0,0) v(0,1) ... v(0,cols-1)
//! ...
//! ```
//!
//! Values are whitespace separated, row-major, and row 0 is the bottom row of
//! the unit square (`y` in `[0, 1/rows)`). Only square rasters are accepted.
//! Values are written with Rust's shortest round-trip float formatting, so
//! save followed by load is exact.

use std::fmt::Write as _;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{LodError, Result};
use crate::mesh::Level;

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    raster_m: usize,
    values: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl CoefficientField {
    /// Field from row-major cell values (row 0 at the bottom).
    pub fn from_values(raster_m: usize, values: Vec<f64>) -> Result<Self> {
        if raster_m == 0 || values.len() != raster_m * raster_m {
            return Err(LodError::InvalidCoefficient(format!(
                "{} values for a {raster_m}x{raster_m} raster",
                values.len()
            )));
        }
        if let Some((idx, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
        {
            return Err(LodError::Ellipticity(format!(
                "cell {idx} has value {v}; all values must be positive and finite"
            )));
        }
        let alpha = values.iter().copied().fold(f64::INFINITY, f64::min);
        let beta = values.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            raster_m,
            values,
            alpha,
            beta,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::from_values(1, vec![value])
    }

    /// I.i.d. cell values, uniform on `[lo, hi)`.
    ///
    /// The generator is ChaCha20 seeded with `seed` through
    /// `SeedableRng::seed_from_u64`; cells are filled in row-major order with
    /// `lo + (hi - lo) * u`, where `u = (next_u64 >> 11) * 2^-53`.
    pub fn random_cellwise(raster_m: usize, lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if raster_m == 0 {
            return Err(LodError::InvalidCoefficient("raster_m must be >= 1".into()));
        }
        if !(lo > 0.0) {
            return Err(LodError::Ellipticity(format!("lower bound {lo} is not positive")));
        }
        if !(hi > lo) || !hi.is_finite() {
            return Err(LodError::InvalidCoefficient(format!(
                "empty range [{lo}, {hi}]"
            )));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let values = (0..raster_m * raster_m)
            .map(|_| {
                let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                lo + (hi - lo) * u
            })
            .collect();
        Self::from_values(raster_m, values)
    }

    pub fn parse_raster(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l))
            .filter(|(_, l)| !l.trim().is_empty());
        let (header_line, header) = lines.next().ok_or(LodError::Parse {
            line: 1,
            msg: "empty raster file".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(LodError::Parse {
                line: header_line,
                msg: format!("expected `rows cols`, found `{}`", header.trim()),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| LodError::Parse {
                line: header_line,
                msg: format!("bad dimension `{s}`: {e}"),
            })
        };
        let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
        if rows != cols || rows == 0 {
            return Err(LodError::InvalidCoefficient(format!(
                "raster must be square and nonempty, got {rows}x{cols}"
            )));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for (line, l) in lines {
            for tok in l.split_whitespace() {
                let v = tok.parse::<f64>().map_err(|e| LodError::Parse {
                    line,
                    msg: format!("bad value `{tok}`: {e}"),
                })?;
                values.push(v);
            }
        }
        if values.len() != rows * cols {
            return Err(LodError::Parse {
                line: text.lines().count(),
                msg: format!("expected {} values, found {}", rows * cols, values.len()),
            });
        }
        Self::from_values(rows, values)
    }

    pub fn load_raster(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse_raster(&std::fs::read_to_string(path)?)
    }

    pub fn to_raster_string(&self) -> String {
        let m = self.raster_m;
        let mut out = format!("{m} {m}\n");
        for row in self.values.chunks(m) {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(' ');
                }
                first = false;
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn save_raster(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_raster_string())?;
        Ok(())
    }

    pub fn raster_m(&self) -> usize {
        self.raster_m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn contrast(&self) -> f64 {
        self.beta / self.alpha
    }

    /// Value of the raster cell containing `p` (cells are half-open, the top
    /// and right edges belong to the last cell).
    pub fn value_at(&self, p: [f64; 2]) -> f64 {
        let m = self.raster_m;
        let cell = |t: f64| ((t * m as f64).floor().max(0.0) as usize).min(m - 1);
        self.values[cell(p[1]) * m + cell(p[0])]
    }

    /// Coefficient value for every triangle of `level`, read at barycenters.
    ///
    /// Requires `raster_m` to divide the level's `m`, so each triangle lies in
    /// a single raster cell and the sampling is exact.
    pub fn sample_on_elements(&self, level: &Level) -> Result<Vec<f64>> {
        if !level.m().is_multiple_of(self.raster_m) {
            return Err(LodError::Misaligned {
                raster_m: self.raster_m,
                mesh_m: level.m(),
            });
        }
        Ok((0..level.triangle_count())
            .map(|t| self.value_at(level.barycenter(t)))
            .collect())
    }
}
