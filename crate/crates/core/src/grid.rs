use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid covering an integer number of lattice periods.
///
/// Site `n` of the lattice is the period starting at z = nπ; the box covers
/// sites `-n_sites/2 .. n_sites/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    pub n_points: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub dz: f64,
    pub points_per_site: usize,
}

impl SpatialGrid {
    pub fn new(n_sites: usize, points_per_site: usize) -> Result<Self> {
        if n_sites < 2 || n_sites % 2 != 0 {
            return Err(Error::param("box_sites", "must be an even number of at least 2"));
        }
        if points_per_site < 16 {
            return Err(Error::param(
                "points_per_site",
                format!("at least 16 points per lattice period are needed, got {points_per_site}"),
            ));
        }
        let n_points = n_sites * points_per_site;
        if !n_points.is_power_of_two() {
            return Err(Error::param(
                "box_sites",
                format!("grid size {n_points} is not a power of two"),
            ));
        }
        let dz = PI / points_per_site as f64;
        let z_min = -((n_sites / 2) as f64) * PI;
        Ok(Self {
            n_points,
            z_min,
            z_max: z_min + n_points as f64 * dz,
            dz,
            points_per_site,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_points / self.points_per_site
    }

    pub fn z(&self, j: usize) -> f64 {
        self.z_min + j as f64 * self.dz
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.z(j)).collect()
    }

    /// Lowest and highest site index inside the box.
    pub fn site_range(&self) -> (i64, i64) {
        let half = (self.n_sites() / 2) as i64;
        (-half, half - 1)
    }

    /// Grid index of z = nπ.
    pub fn site_origin(&self, n: i64) -> Option<usize> {
        let (lo, hi) = self.site_range();
        (lo..=hi)
            .contains(&n)
            .then(|| ((n - lo) as usize) * self.points_per_site)
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let n = self.n_points;
        let dk = 2.0 * PI / (n as f64 * self.dz);
        (0..n)
            .map(|m| {
                let m = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
                m as f64 * dk
            })
            .collect()
    }
}
