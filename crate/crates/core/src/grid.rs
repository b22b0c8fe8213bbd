//! Uniform raster grids and the scalar fields sampled on them.
//!
//! Nodes are stored row-major: node `(i, j)` lives at index `j * nx + i` and
//! sits at `origin + (i * hx, j * hy)`. Quadrature everywhere in the crate is
//! the masked midpoint rule: each masked-in node contributes its value times
//! the cell area.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Point,
    pub spacing: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub mask: Vec<bool>,
}

impl Grid {
    /// Builds a fully masked-in grid.
    pub fn new(origin: Point, spacing: [f64; 2], nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::InvalidGrid(format!("node counts must be positive, got {nx}x{ny}")));
        }
        if !(spacing[0] > 0.0 && spacing[1] > 0.0) || !spacing.iter().all(|h| h.is_finite()) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing:?}")));
        }
        if !origin.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        Ok(Self { origin, spacing, nx, ny, mask: vec![true; nx * ny] })
    }

    /// Grid with `nx` by `ny` nodes spanning the closed box `[min, max]`.
    pub fn over_box(min: Point, max: Point, nx: usize, ny: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid("a box grid needs at least 2 nodes per axis".into()));
        }
        let hx = (max[0] - min[0]) / (nx - 1) as f64;
        let hy = (max[1] - min[1]) / (ny - 1) as f64;
        Self::new(min, [hx, hy], nx, ny)
    }

    /// Replaces the mask; at least one node must remain masked in.
    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::SizeMismatch(format!(
                "mask has {} entries, grid has {} nodes",
                mask.len(),
                self.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::InvalidGrid("mask excludes every node".into()));
        }
        self.mask = mask;
        Ok(self)
    }

    /// Same geometry with every node masked in.
    pub fn unmasked(&self) -> Self {
        Self { mask: vec![true; self.len()], ..self.clone() }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing[0] * self.spacing[1]
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Area of the masked region under the midpoint rule.
    pub fn masked_area(&self) -> f64 {
        self.masked_count() as f64 * self.cell_area()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> Point {
        [
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
        ]
    }

    #[inline]
    pub fn position(&self, idx: usize) -> Point {
        self.node(idx % self.nx, idx / self.nx)
    }

    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.origin[0] + i as f64 * self.spacing[0]).collect()
    }

    pub fn y_coords(&self) -> Vec<f64> {
        (0..self.ny).map(|j| self.origin[1] + j as f64 * self.spacing[1]).collect()
    }

    /// Upper corner of the node lattice.
    pub fn max_corner(&self) -> Point {
        self.node(self.nx - 1, self.ny - 1)
    }

    pub fn contains(&self, p: Point) -> bool {
        let hi = self.max_corner();
        let tol = 1e-12 * (1.0 + hi[0].abs().max(hi[1].abs()));
        p[0] >= self.origin[0] - tol
            && p[0] <= hi[0] + tol
            && p[1] >= self.origin[1] - tol
            && p[1] <= hi[1] + tol
    }

    /// Whether two grids share node positions (masks are not compared).
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.origin == other.origin
            && self.spacing == other.spacing
    }

    /// Bilinear interpolation of node values at `p`; `None` outside the box.
    pub fn bilinear(&self, values: &[f64], p: Point) -> Option<f64> {
        if !self.contains(p) || self.nx < 2 || self.ny < 2 {
            return None;
        }
        let fx = ((p[0] - self.origin[0]) / self.spacing[0]).clamp(0.0, (self.nx - 1) as f64);
        let fy = ((p[1] - self.origin[1]) / self.spacing[1]).clamp(0.0, (self.ny - 1) as f64);
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        let tx = fx - i as f64;
        let ty = fy - j as f64;
        let v00 = values[self.index(i, j)];
        let v10 = values[self.index(i + 1, j)];
        let v01 = values[self.index(i, j + 1)];
        let v11 = values[self.index(i + 1, j + 1)];
        Some((1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11))
    }
}

/// A scalar field sampled at the nodes of a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub grid: Grid,
    pub values: Vec<f64>,
    /// Integral of the raw field, recorded by normalization.
    pub integral: Option<f64>,
}

impl FieldSample {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::SizeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, integral: None })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, values: vec![0.0; n], integral: None }
    }

    /// Masked midpoint-rule integral of the values.
    pub fn quadrature(&self) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .zip(&self.grid.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v)
            .sum();
        sum * self.grid.cell_area()
    }

    /// Masked midpoint-rule integral of the squared values.
    pub fn quadrature_sq(&self) -> f64 {
        let sum: f64 = self
            .values
            .iter()
            .zip(&self.grid.mask)
            .filter(|(_, &m)| m)
            .map(|(v, _)| v * v)
            .sum();
        sum * self.grid.cell_area()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Sets every masked-out value to zero.
    pub fn zero_outside_mask(&mut self) {
        for (v, &m) in self.values.iter_mut().zip(&self.grid.mask) {
            if !m {
                *v = 0.0;
            }
        }
    }

    /// Copy of this field carrying a different mask on the same lattice.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        let grid = self.grid.clone().with_mask(mask)?;
        Ok(Self { grid, values: self.values.clone(), integral: self.integral })
    }

    pub fn at(&self, p: Point) -> Option<f64> {
        self.grid.bilinear(&self.values, p)
    }

    pub fn masked_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().zip(&self.grid.mask).filter(|(_, &m)| m).map(|(&v, _)| v)
    }

    pub fn max_masked(&self) -> f64 {
        self.masked_values().fold(f64::NEG_INFINITY, f64::max)
    }
}
