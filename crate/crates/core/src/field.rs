//! Moment-space and angular-space field containers.
//!
//! Canonical ordering is group-major, then cell (row-major from the bottom
//! row), then local basis function. Angular fields insert the direction index
//! between group and cell.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldLayout {
    pub n_groups: usize,
    pub n_cells: usize,
    pub n_local: usize,
}

impl FieldLayout {
    pub fn len(&self) -> usize {
        self.n_groups * self.n_cells * self.n_local
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entries per group block.
    pub fn group_len(&self) -> usize {
        self.n_cells * self.n_local
    }

    #[inline]
    pub fn index(&self, g: usize, c: usize, k: usize) -> usize {
        (g * self.n_cells + c) * self.n_local + k
    }
}

/// Scalar flux degrees of freedom, the unknown of the GMRES system.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentField {
    layout: FieldLayout,
    values: Vec<f64>,
}

impl MomentField {
    pub fn zeros(layout: FieldLayout) -> Self {
        Self {
            layout,
            values: vec![0.0; layout.len()],
        }
    }

    pub fn from_vec(layout: FieldLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Dimension {
                expected: layout.len(),
                got: values.len(),
            });
        }
        Ok(Self { layout, values })
    }

    pub fn layout(&self) -> FieldLayout {
        self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn group(&self, g: usize) -> &[f64] {
        let n = self.layout.group_len();
        &self.values[g * n..(g + 1) * n]
    }

    pub fn norm(&self) -> f64 {
        norm2(&self.values)
    }
}

/// Angular flux over every direction. Only test and oracle paths build one of these;
/// production sweeps keep a single direction's slice at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularFlux {
    layout: FieldLayout,
    n_directions: usize,
    values: Vec<f64>,
}

impl AngularFlux {
    pub fn zeros(layout: FieldLayout, n_directions: usize) -> Self {
        Self {
            layout,
            n_directions,
            values: vec![0.0; layout.len() * n_directions],
        }
    }

    pub fn from_vec(layout: FieldLayout, n_directions: usize, values: Vec<f64>) -> Result<Self> {
        let expected = layout.len() * n_directions;
        if values.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            layout,
            n_directions,
            values,
        })
    }

    pub fn layout(&self) -> FieldLayout {
        self.layout
    }

    pub fn n_directions(&self) -> usize {
        self.n_directions
    }

    #[inline]
    pub fn index(&self, g: usize, a: usize, c: usize, k: usize) -> usize {
        ((g * self.n_directions + a) * self.layout.n_cells + c) * self.layout.n_local + k
    }

    /// Contiguous slice for one (group, direction) pair.
    pub fn slice(&self, g: usize, a: usize) -> &[f64] {
        let n = self.layout.group_len();
        let start = (g * self.n_directions + a) * n;
        &self.values[start..start + n]
    }

    pub fn slice_mut(&mut self, g: usize, a: usize) -> &mut [f64] {
        let n = self.layout.group_len();
        let start = (g * self.n_directions + a) * n;
        &mut self.values[start..start + n]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||a - b||_2 / ||b||_2`, or the absolute difference norm when `b` is zero.
pub fn relative_l2_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let nb = norm2(b);
    if nb == 0.0 {
        diff
    } else {
        diff / nb
    }
}
