//! Uniform rectangular mesh with a per-cell material map.

use crate::config::ProblemConfig;
use crate::error::{Error, Result};
use crate::xs::MATERIAL_COUNT;

/// Cells are numbered row-major from the bottom-left corner: `c = j * nx + i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub cell_width: f64,
    pub cell_height: f64,
    block_map: Vec<usize>,
}

impl Mesh {
    pub fn new(
        nx: usize,
        ny: usize,
        cell_width: f64,
        cell_height: f64,
        block_map: Vec<usize>,
        n_materials: usize,
    ) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Mesh(format!("cell counts must be positive, got {nx}x{ny}")));
        }
        if !(cell_width > 0.0 && cell_height > 0.0) || !cell_width.is_finite() || !cell_height.is_finite() {
            return Err(Error::Mesh("cell dimensions must be positive".into()));
        }
        if block_map.len() != nx * ny {
            return Err(Error::Mesh(format!(
                "material map has {} entries for {} cells",
                block_map.len(),
                nx * ny
            )));
        }
        if let Some(c) = block_map.iter().position(|&m| m >= n_materials) {
            return Err(Error::Mesh(format!(
                "cell {c} references undefined material {}",
                block_map[c]
            )));
        }
        Ok(Self {
            nx,
            ny,
            cell_width,
            cell_height,
            block_map,
        })
    }

    /// Homogeneous mesh, mostly for tests.
    pub fn uniform(nx: usize, ny: usize, cell_width: f64, cell_height: f64, material: usize) -> Result<Self> {
        Self::new(nx, ny, cell_width, cell_height, vec![material; nx * ny], MATERIAL_COUNT)
    }

    /// Subdivide a block layout (rows listed top to bottom) into square cells.
    pub fn from_layout(layout: &[Vec<usize>], block_size: f64, cells_per_block: usize) -> Result<Self> {
        if cells_per_block == 0 {
            return Err(Error::Mesh("cells_per_block must be positive".into()));
        }
        if !(block_size > 0.0) {
            return Err(Error::Mesh("block size must be positive".into()));
        }
        let by = layout.len();
        let bx = layout.first().map_or(0, |r| r.len());
        if bx == 0 || layout.iter().any(|r| r.len() != bx) {
            return Err(Error::Mesh("layout must be a non-empty rectangle".into()));
        }
        let (nx, ny) = (bx * cells_per_block, by * cells_per_block);
        let mut map = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let row = &layout[by - 1 - j / cells_per_block];
            for i in 0..nx {
                map.push(row[i / cells_per_block]);
            }
        }
        let h = block_size / cells_per_block as f64;
        Self::new(nx, ny, h, h, map, MATERIAL_COUNT)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn material(&self, c: usize) -> usize {
        self.block_map[c]
    }

    pub fn block_map(&self) -> &[usize] {
        &self.block_map
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width * self.cell_height
    }

    /// Domain extent `(width, height)` in cm.
    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.cell_width, self.ny as f64 * self.cell_height)
    }

    /// Lower-left corner of cell `(i, j)`.
    pub fn origin(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.cell_width, j as f64 * self.cell_height)
    }
}

pub fn build_mesh(config: &ProblemConfig) -> Result<Mesh> {
    Mesh::from_layout(&config.layout, config.block_size, config.cells_per_block)
}
