//! Product Gauss-Legendre (polar) x Chebyshev (azimuthal) angular quadrature.
//!
//! In 2-D the lower hemisphere mirrors the upper one, so only upward polar
//! levels are kept and their weights doubled. Weights sum to 4 pi.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub mu: f64,
    pub eta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    directions: Vec<Direction>,
}

impl Quadrature {
    /// Arbitrary direction set; checks positivity and the no-grazing rule only.
    pub fn from_directions(directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::Quadrature("no directions".into()));
        }
        for (a, d) in directions.iter().enumerate() {
            if d.mu == 0.0 || d.eta == 0.0 {
                return Err(Error::Quadrature(format!("direction {a} is grazing (mu or eta is zero)")));
            }
            if !(d.weight > 0.0) || d.mu * d.mu + d.eta * d.eta > 1.0 + 1e-14 {
                return Err(Error::Quadrature(format!("direction {a} is not a weighted unit projection")));
            }
        }
        Ok(Self { directions })
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.directions.iter().map(|d| d.weight).sum()
    }
}

/// `n_polar` levels per hemisphere and `n_azimuthal` azimuths (multiple of 4).
pub fn build_quadrature(n_polar: usize, n_azimuthal: usize) -> Result<Quadrature> {
    if n_polar == 0 {
        return Err(Error::Quadrature("n_polar must be at least 1".into()));
    }
    // A multiple of 4 keeps every midpoint azimuth off the coordinate axes.
    if n_azimuthal == 0 || n_azimuthal % 4 != 0 {
        return Err(Error::Quadrature(format!(
            "n_azimuthal must be a positive multiple of 4, got {n_azimuthal}"
        )));
    }
    let (nodes, weights) = gauss_legendre(2 * n_polar);
    let dphi = 2.0 * PI / n_azimuthal as f64;
    let mut directions = Vec::with_capacity(n_polar * n_azimuthal);
    for (xi, w) in nodes.iter().zip(&weights).filter(|(x, _)| **x > 0.0) {
        let sin_theta = (1.0 - xi * xi).sqrt();
        for k in 0..n_azimuthal {
            let phi = (k as f64 + 0.5) * dphi;
            directions.push(Direction {
                mu: sin_theta * phi.cos(),
                eta: sin_theta * phi.sin(),
                weight: 2.0 * w * dphi,
            });
        }
    }
    Quadrature::from_directions(directions)
}

/// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// P_n(x) and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
