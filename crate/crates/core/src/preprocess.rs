//! Voxel downsampling and ground-plane suppression.

use std::collections::HashSet;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Point3, PointCloud};

/// Keeps the first point (in input order) of every occupied voxel of side `voxel_size`.
///
/// Voxel keys are `floor(c / v)` per axis, so cells are half-open and
/// uniform across the origin. Returns an empty cloud for empty input or a
/// non-positive voxel size.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> PointCloud {
    if cloud.is_empty() || !(voxel_size > 0.0 && voxel_size.is_finite()) {
        return PointCloud::default();
    }
    let kept = voxel_representatives(cloud.points(), voxel_size);
    cloud.select(&kept)
}

/// Indices of the first point per voxel, ascending.
pub fn voxel_representatives(points: &[Point3], voxel_size: f64) -> Vec<usize> {
    let mut seen: HashSet<[i64; 3]> = HashSet::with_capacity(points.len());
    points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| seen.insert(voxel_key(p, voxel_size)).then_some(i))
        .collect()
}

pub fn voxel_key(p: &Point3, voxel_size: f64) -> [i64; 3] {
    [
        (p.x / voxel_size).floor() as i64,
        (p.y / voxel_size).floor() as i64,
        (p.z / voxel_size).floor() as i64,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionSettings {
    pub enabled: bool,
    /// Points closer than this to the fitted plane are plane inliers.
    pub distance_threshold: f64,
    /// Minimum inlier fraction for the plane to be removed.
    pub min_plane_fraction: f64,
    /// Maximum angle between the plane normal and +z, degrees.
    pub max_tilt_deg: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl SuppressionSettings {
    pub fn for_voxel(voxel_size: f64) -> Self {
        Self {
            enabled: false,
            distance_threshold: voxel_size,
            min_plane_fraction: 0.2,
            max_tilt_deg: 30.0,
            iterations: 200,
            seed: 0x6a09_e667,
        }
    }
}

/// A plane `normal · p + offset = 0` with unit `normal`, `normal.z >= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub normal: Vector3<f64>,
    pub offset: f64,
}

impl Plane {
    fn through(a: &Point3, b: &Point3, c: &Point3) -> Option<Self> {
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if !(len > 1e-12) {
            return None;
        }
        let mut normal = n / len;
        if normal.z < 0.0 {
            normal = -normal;
        }
        Some(Self { normal, offset: -normal.dot(&a.coords) })
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        (self.normal.dot(&p.coords) + self.offset).abs()
    }
}

/// Dominant plane by seeded random consensus; returns the plane and its inlier count.
pub fn fit_dominant_plane(points: &[Point3], settings: &SuppressionSettings) -> Option<(Plane, usize)> {
    if points.len() < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut best: Option<(Plane, usize)> = None;
    for _ in 0..settings.iterations {
        let idx = rand::seq::index::sample(&mut rng, points.len(), 3);
        let Some(plane) = Plane::through(&points[idx.index(0)], &points[idx.index(1)], &points[idx.index(2)])
        else {
            continue;
        };
        let count = points
            .iter()
            .filter(|p| plane.distance(p) <= settings.distance_threshold)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((plane, count));
        }
    }
    best
}

/// Removes the dominant plane when it is large enough and roughly horizontal.
///
/// Identity when disabled, when the cloud has fewer than three points, or
/// when no plane passes both gates.
pub fn geometric_suppression(cloud: &PointCloud, settings: &SuppressionSettings) -> PointCloud {
    if !settings.enabled || cloud.len() < 3 {
        return cloud.clone();
    }
    let Some((plane, count)) = fit_dominant_plane(cloud.points(), settings) else {
        return cloud.clone();
    };
    let fraction = count as f64 / cloud.len() as f64;
    let tilt = plane.normal.z.clamp(-1.0, 1.0).acos().to_degrees();
    if fraction < settings.min_plane_fraction || tilt > settings.max_tilt_deg {
        return cloud.clone();
    }
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| plane.distance(cloud.point(i)) > settings.distance_threshold)
        .collect();
    cloud.select(&keep)
}
