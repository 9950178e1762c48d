//! Per-height stacks of horizontal 2D maps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A stack of `levels` horizontal grids of `nx × ny` cells.
///
/// Storage is level-major with x fastest: the value of cell `(x, y)` on level
/// `l` lives at `l * nx * ny + y * nx + x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stack {
    pub nx: usize,
    pub ny: usize,
    /// Receiver height of each level, meters.
    pub heights_m: Vec<f64>,
    pub values: Vec<f64>,
}

impl Stack {
    pub fn new(nx: usize, ny: usize, heights_m: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny * heights_m.len() {
            return Err(Error::Argument(format!(
                "stack of {} levels × {nx} × {ny} needs {} values, got {}",
                heights_m.len(),
                nx * ny * heights_m.len(),
                values.len()
            )));
        }
        Ok(Stack {
            nx,
            ny,
            heights_m,
            values,
        })
    }

    pub fn filled(nx: usize, ny: usize, heights_m: Vec<f64>, value: f64) -> Self {
        let n = nx * ny * heights_m.len();
        Stack {
            nx,
            ny,
            heights_m,
            values: vec![value; n],
        }
    }

    pub fn levels(&self) -> usize {
        self.heights_m.len()
    }

    pub fn cells_per_level(&self) -> usize {
        self.nx * self.ny
    }

    pub fn level(&self, l: usize) -> &[f64] {
        let n = self.cells_per_level();
        &self.values[l * n..(l + 1) * n]
    }

    pub fn level_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.cells_per_level();
        &mut self.values[l * n..(l + 1) * n]
    }

    pub fn get(&self, l: usize, x: usize, y: usize) -> f64 {
        self.values[l * self.cells_per_level() + y * self.nx + x]
    }

    pub fn same_shape(&self, other: &Stack) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.levels() == other.levels()
    }

    pub(crate) fn check_same_shape(&self, other: &Stack, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "{what}: shape {}×{}×{} does not match {}×{}×{}",
                self.levels(),
                self.nx,
                self.ny,
                other.levels(),
                other.nx,
                other.ny
            )))
        }
    }

    /// Element-wise combination of two equally shaped stacks.
    pub fn zip_with(&self, other: &Stack, f: impl Fn(f64, f64) -> f64) -> Result<Stack> {
        self.check_same_shape(other, "zip_with")?;
        Ok(Stack {
            nx: self.nx,
            ny: self.ny,
            heights_m: self.heights_m.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }
}

/// One horizontal map with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl Heatmap {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        if values.len() != nx * ny || valid.len() != nx * ny {
            return Err(Error::Argument(format!(
                "heatmap {nx}×{ny} needs {} values and mask entries",
                nx * ny
            )));
        }
        Ok(Heatmap {
            nx,
            ny,
            values,
            valid,
        })
    }

    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }
}
