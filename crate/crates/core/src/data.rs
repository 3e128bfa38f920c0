//! Spatial datasets and the distance matrices that drive partition similarity.

use crate::error::{Error, Result};

/// Observations of a spatial process at fixed sites, on the unit Frechet
/// scale. Rows of `observations` are independent replicates; columns line up
/// with `sites`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialDataset {
    sites: Vec<[f64; 2]>,
    observations: Vec<Vec<f64>>,
}

impl SpatialDataset {
    /// Validates shapes and values: at least one site, every replicate of
    /// length `D`, all values finite and strictly positive (the unit Frechet
    /// support).
    pub fn new(sites: Vec<[f64; 2]>, observations: Vec<Vec<f64>>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidData("no sites".into()));
        }
        for (k, s) in sites.iter().enumerate() {
            if !(s[0].is_finite() && s[1].is_finite()) {
                return Err(Error::InvalidData(format!(
                    "site {} has non-finite coordinates ({}, {})",
                    k + 1,
                    s[0],
                    s[1]
                )));
            }
        }
        let d = sites.len();
        for (r, z) in observations.iter().enumerate() {
            if z.len() != d {
                return Err(Error::InvalidData(format!(
                    "replicate {} has {} values, expected {}",
                    r + 1,
                    z.len(),
                    d
                )));
            }
            for (k, &v) in z.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::InvalidData(format!(
                        "replicate {}, site {}: value {} is not a positive real",
                        r + 1,
                        k + 1,
                        v
                    )));
                }
            }
        }
        Ok(SpatialDataset {
            sites,
            observations,
        })
    }

    /// Number of sites `D`.
    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    /// Number of replicates `n`.
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn sites(&self) -> &[[f64; 2]] {
        &self.sites
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.observations
    }

    pub fn observation(&self, r: usize) -> &[f64] {
        &self.observations[r]
    }
}

/// Which pairwise distance feeds the EPA similarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DistanceKind {
    /// `d_ij = |z_i - z_j|` per observation; the guide then adapts to each
    /// replicate.
    #[default]
    Observation,
    /// Euclidean distance between site coordinates, shared by all replicates.
    Euclidean,
}

/// Dense symmetric matrix of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    dim: usize,
    // row-major, dim*dim; kept dense because D stays small
    vals: Vec<f64>,
}

impl DistanceMatrix {
    /// Distances `|z_i - z_j|` between the components of one observation.
    pub fn from_observation(z: &[f64]) -> Result<Self> {
        for (k, &v) in z.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidData(format!(
                    "observation component {} is {}",
                    k + 1,
                    v
                )));
            }
        }
        let d = z.len();
        let mut vals = vec![0.0; d * d];
        for i in 0..d {
            for j in (i + 1)..d {
                let v = (z[i] - z[j]).abs();
                vals[i * d + j] = v;
                vals[j * d + i] = v;
            }
        }
        Ok(DistanceMatrix { dim: d, vals })
    }

    /// Euclidean distances between site coordinates.
    pub fn from_sites(sites: &[[f64; 2]]) -> Result<Self> {
        let d = sites.len();
        let mut vals = vec![0.0; d * d];
        for i in 0..d {
            for j in (i + 1)..d {
                let dx = sites[i][0] - sites[j][0];
                let dy = sites[i][1] - sites[j][1];
                let v = (dx * dx + dy * dy).sqrt();
                if !v.is_finite() {
                    return Err(Error::InvalidData(format!(
                        "distance between sites {} and {} is not finite",
                        i + 1,
                        j + 1
                    )));
                }
                vals[i * d + j] = v;
                vals[j * d + i] = v;
            }
        }
        Ok(DistanceMatrix { dim: d, vals })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.vals[i * self.dim + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dataset_rejects_bad_values() {
        let sites = vec![[0.0, 0.0], [1.0, 0.0]];
        assert!(SpatialDataset::new(sites.clone(), vec![vec![1.0, -2.0]]).is_err());
        assert!(SpatialDataset::new(sites.clone(), vec![vec![1.0, f64::NAN]]).is_err());
        assert!(SpatialDataset::new(sites.clone(), vec![vec![1.0]]).is_err());
        assert!(SpatialDataset::new(sites, vec![vec![1.0, 2.0]]).is_ok());
    }

    #[test]
    fn observation_distance_example() {
        let d = DistanceMatrix::from_observation(&[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(d.get(0, 1), 2.0);
        assert_eq!(d.get(0, 2), 1.0);
        assert_eq!(d.get(1, 2), 1.0);
        assert_eq!(d.get(2, 2), 0.0);
    }

    proptest! {
        #[test]
        fn observation_distance_symmetric_zero_diag(z in proptest::collection::vec(-1e6f64..1e6, 1..12)) {
            let m = DistanceMatrix::from_observation(&z).unwrap();
            for i in 0..m.dim() {
                prop_assert_eq!(m.get(i, i), 0.0);
                for j in 0..m.dim() {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    prop_assert!(m.get(i, j) >= 0.0);
                }
            }
        }

        #[test]
        fn observation_distance_translation_invariant(
            z in proptest::collection::vec(-1e3f64..1e3, 2..10),
            c in -1e3f64..1e3,
        ) {
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let a = DistanceMatrix::from_observation(&z).unwrap();
            let b = DistanceMatrix::from_observation(&shifted).unwrap();
            for i in 0..a.dim() {
                for j in 0..a.dim() {
                    // |(zi+c)-(zj+c)| carries rounding from the shift
                    prop_assert!((a.get(i, j) - b.get(i, j)).abs() <= 1e-9 * (1.0 + a.get(i, j)));
                }
            }
        }
    }
}
