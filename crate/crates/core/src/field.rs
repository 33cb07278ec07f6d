use crate::error::{Error, Result};
use crate::geometry::{Grid, Point2};

/// Values of a scalar field at the interior nodes of one [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid_id: u64,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(GridFunction {
            grid_id: grid.id(),
            values,
        })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        GridFunction {
            grid_id: grid.id(),
            values: vec![c; grid.len()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(Point2) -> f64) -> Self {
        GridFunction {
            grid_id: grid.id(),
            values: grid.nodes().iter().map(|&p| f(p)).collect(),
        }
    }

    pub(crate) fn from_parts(grid_id: u64, values: Vec<f64>) -> Self {
        GridFunction { grid_id, values }
    }

    pub fn grid_id(&self) -> u64 {
        self.grid_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.grid_id != grid.id() || self.values.len() != grid.len() {
            return Err(Error::GridMismatch {
                expected: grid.len(),
                found: self.values.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.grid_id != other.grid_id || self.values.len() != other.values.len() {
            return Err(Error::GridMismatch {
                expected: self.values.len(),
                found: other.values.len(),
            });
        }
        Ok(())
    }

    /// Sup-norm over the nodes.
    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn scaled(&self, a: f64) -> GridFunction {
        GridFunction {
            grid_id: self.grid_id,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &GridFunction) -> Result<()> {
        self.same_grid(x)?;
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
        Ok(())
    }

    /// Sup-norm of `self - other`.
    pub fn distance(&self, other: &GridFunction) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

/// Product-space norm: the largest component sup-norm.
pub fn product_norm(u: &[GridFunction]) -> f64 {
    u.iter().map(GridFunction::sup_norm).fold(0.0, f64::max)
}

/// Product-space distance between two tuples of fields.
pub fn product_distance(u: &[GridFunction], v: &[GridFunction]) -> Result<f64> {
    let mut d = 0.0f64;
    for (a, b) in u.iter().zip(v) {
        d = d.max(a.distance(b)?);
    }
    Ok(d)
}
