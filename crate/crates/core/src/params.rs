//! Registration parameters. Everything derives from the voxel size.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::SuppressionSettings;
use crate::solver::GncSettings;

pub const NORMAL_RADIUS_MULT: f64 = 3.5;
pub const FPFH_RADIUS_MULT: f64 = 5.0;
pub const NOISE_BOUND_MULT: f64 = 1.5;
pub const DEFAULT_MIN_NEIGHBORS: usize = 3;
pub const DEFAULT_MAX_LINEARITY: f64 = 0.99;
pub const DEFAULT_MAX_CORRESPONDENCES: usize = 3000;
pub const DEFAULT_HISTOGRAM_BINS: usize = 11;
pub const DEFAULT_MIN_INLIERS: usize = 5;

/// Sign convention for PCA normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormalOrientation {
    /// `n · z >= 0`, ties toward +x then +y.
    Up,
    /// Toward the centroid of the described cloud; falls back to `Up` when
    /// the normal is perpendicular to that direction.
    Centroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub voxel_size: f64,
    /// Radius of the PCA neighborhood; a subset of the feature neighborhood.
    pub normal_radius: f64,
    /// Radius of the single neighbor search per point.
    pub fpfh_radius: f64,
    /// Minimum neighborhood cardinality for a point to count as reliable.
    pub min_neighbors: usize,
    /// Points with linearity at or above this are dropped.
    pub max_linearity: f64,
    /// Pairwise-consistency bound used by the compatibility graph.
    pub noise_bound: f64,
    /// Cap on correspondences entering the graph stage.
    pub max_correspondences: usize,
    /// Bins per angular feature; descriptors have `3 * histogram_bins` entries.
    pub histogram_bins: usize,
    pub normal_orientation: NormalOrientation,
    pub gnc: GncSettings,
    /// Minimum final inlier count for a registration to be reported valid.
    pub min_inliers: usize,
    pub suppression: SuppressionSettings,
    /// Worker threads for data-parallel stages; `None` uses all cores.
    pub workers: Option<usize>,
}

impl Params {
    pub fn new(voxel_size: f64) -> Result<Self> {
        if !(voxel_size.is_finite() && voxel_size > 0.0) {
            return Err(Error::InvalidParams(format!("voxel size must be > 0, got {voxel_size}")));
        }
        let noise_bound = NOISE_BOUND_MULT * voxel_size;
        Ok(Self {
            voxel_size,
            normal_radius: NORMAL_RADIUS_MULT * voxel_size,
            fpfh_radius: FPFH_RADIUS_MULT * voxel_size,
            min_neighbors: DEFAULT_MIN_NEIGHBORS,
            max_linearity: DEFAULT_MAX_LINEARITY,
            noise_bound,
            max_correspondences: DEFAULT_MAX_CORRESPONDENCES,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
            normal_orientation: NormalOrientation::Centroid,
            gnc: GncSettings::with_noise_bound(noise_bound),
            min_inliers: DEFAULT_MIN_INLIERS,
            suppression: SuppressionSettings::for_voxel(voxel_size),
            workers: None,
        })
    }

    /// Sets the pairwise bound (and the GNC bound with it) as a multiple of the voxel size.
    pub fn with_noise_bound_mult(mut self, mult: f64) -> Self {
        self.noise_bound = mult * self.voxel_size;
        self.gnc.noise_bound = self.noise_bound;
        self
    }

    pub fn descriptor_dim(&self) -> usize {
        3 * self.histogram_bins
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return bad(format!("voxel_size = {}", self.voxel_size));
        }
        if !(self.normal_radius > 0.0 && self.normal_radius <= self.fpfh_radius && self.fpfh_radius.is_finite()) {
            return bad(format!(
                "need 0 < normal_radius <= fpfh_radius, got {} / {}",
                self.normal_radius, self.fpfh_radius
            ));
        }
        if !(self.max_linearity > 0.0 && self.max_linearity <= 1.0) {
            return bad(format!("max_linearity = {}", self.max_linearity));
        }
        if self.min_neighbors < 3 {
            return bad(format!("min_neighbors = {} < 3", self.min_neighbors));
        }
        if self.max_correspondences < 1 {
            return bad("max_correspondences must be >= 1".into());
        }
        if self.histogram_bins < 2 {
            return bad(format!("histogram_bins = {} < 2", self.histogram_bins));
        }
        if !(self.noise_bound.is_finite() && self.noise_bound > 0.0) {
            return bad(format!("noise_bound = {}", self.noise_bound));
        }
        if self.workers == Some(0) {
            return bad("workers must be >= 1".into());
        }
        self.gnc.validate()
    }
}
