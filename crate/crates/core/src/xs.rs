//! Multigroup cross sections for the checkerboard materials.

use crate::config::ProblemConfig;
use crate::error::{Error, Result};

pub const SCATTERER: usize = 0;
pub const ABSORBER: usize = 1;
pub const SOURCE: usize = 2;
pub const MATERIAL_COUNT: usize = 3;

/// Cross sections of one material. `sigma_s[from][to]` is isotropic group-to-group scattering.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialXs {
    pub sigma_t: Vec<f64>,
    pub sigma_s: Vec<Vec<f64>>,
    pub q_ext: Vec<f64>,
}

impl MaterialXs {
    /// Total removal minus out-scatter, i.e. the absorption cross section of group `g`.
    pub fn sigma_a(&self, g: usize) -> f64 {
        self.sigma_t[g] - self.sigma_s[g].iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossSections {
    pub n_groups: usize,
    pub materials: Vec<MaterialXs>,
}

impl CrossSections {
    pub fn new(materials: Vec<MaterialXs>) -> Result<Self> {
        let n_groups = materials
            .first()
            .map(|m| m.sigma_t.len())
            .ok_or_else(|| Error::CrossSections("empty material table".into()))?;
        for (i, m) in materials.iter().enumerate() {
            let ok = m.sigma_t.len() == n_groups
                && m.q_ext.len() == n_groups
                && m.sigma_s.len() == n_groups
                && m.sigma_s.iter().all(|row| row.len() == n_groups);
            if !ok {
                return Err(Error::CrossSections(format!("material {i} has inconsistent group count")));
            }
            let finite = m
                .sigma_t
                .iter()
                .chain(m.q_ext.iter())
                .chain(m.sigma_s.iter().flatten())
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::CrossSections(format!("material {i} has non-finite data")));
            }
        }
        Ok(Self { n_groups, materials })
    }

    /// Two-group checkerboard data with a unit group-0 source.
    pub fn checkerboard(theta1: f64, theta2: f64) -> Result<Self> {
        Self::build(theta1, theta2, 2, 1.0, 0)
    }

    pub fn from_config(config: &ProblemConfig) -> Result<Self> {
        Self::build(
            config.theta1,
            config.theta2,
            config.n_groups,
            config.source_strength,
            config.source_group,
        )
    }

    /// Checkerboard materials for the given parameters.
    ///
    /// With `n_groups == 1` the group-0 slice is kept: the scatterer retains only its
    /// within-group scattering `1 - theta2`, so down-scatter acts as removal.
    pub fn build(
        theta1: f64,
        theta2: f64,
        n_groups: usize,
        source_strength: f64,
        source_group: usize,
    ) -> Result<Self> {
        if !(theta1 > 0.0) || !theta1.is_finite() {
            return Err(Error::CrossSections(format!("theta1 must be positive, got {theta1}")));
        }
        if !(0.0..=1.0).contains(&theta2) {
            return Err(Error::CrossSections(format!("theta2 must lie in [0, 1], got {theta2}")));
        }
        if source_group >= n_groups {
            return Err(Error::CrossSections("source group out of range".into()));
        }
        let (sigma_t, sigma_s) = match n_groups {
            1 => (vec![1.0], vec![vec![1.0 - theta2]]),
            2 => (vec![1.0, 1.0], vec![vec![1.0 - theta2, theta2], vec![0.0, 1.0]]),
            _ => return Err(Error::CrossSections(format!("unsupported group count {n_groups}"))),
        };
        let scatterer = MaterialXs {
            sigma_t,
            sigma_s,
            q_ext: vec![0.0; n_groups],
        };
        let absorber = MaterialXs {
            sigma_t: vec![theta1; n_groups],
            sigma_s: vec![vec![0.0; n_groups]; n_groups],
            q_ext: vec![0.0; n_groups],
        };
        let mut source = scatterer.clone();
        source.q_ext[source_group] = source_strength;
        Self::new(vec![scatterer, absorber, source])
    }

    pub fn material(&self, m: usize) -> &MaterialXs {
        &self.materials[m]
    }

    pub fn n_materials(&self) -> usize {
        self.materials.len()
    }

    /// True when no material scatters from a group into a lower-indexed one.
    pub fn downscatter_only(&self) -> bool {
        self.materials.iter().all(|m| {
            (0..self.n_groups).all(|from| (0..from).all(|to| m.sigma_s[from][to] == 0.0))
        })
    }
}
