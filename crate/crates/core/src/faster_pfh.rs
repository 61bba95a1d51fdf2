//! Faster-PFH descriptors.
//!
//! One radius search per point (with the feature radius) serves both the
//! normal estimation, which subsamples the result down to the normal radius,
//! and the histogram stage. Points whose neighborhood is too small or too
//! line-like get no normal, and are then also removed from every other
//! point's neighbor list. Only the surviving points receive a descriptor.

use std::f64::consts::PI;
use std::io::{self, Write};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud};
use crate::neighbor_search::SpatialIndex;
use crate::params::{NormalOrientation, Params};

/// PCA normal with its linearity score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalEstimate {
    pub normal: Vector3<f64>,
    /// (λ1 − λ2) / λ1, in [0, 1].
    pub linearity: f64,
    /// λ1 ≥ λ2 ≥ λ3 ≥ 0
    pub eigenvalues: [f64; 3],
}

/// Normal of `points` by PCA: eigenvector of the smallest covariance
/// eigenvalue, oriented so that `n · z >= 0` (ties toward +x, then +y).
pub fn estimate_normal_pca(points: &[Point3]) -> Result<NormalEstimate> {
    if points.len() < 3 || points.iter().all(|p| *p == points[0]) {
        return Err(Error::DegenerateNeighborhood);
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p.coords - mean;
        acc + d * d.transpose()
    }) / n;
    let eig = cov.symmetric_eigen();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda = order.map(|i| eig.eigenvalues[i].max(0.0));
    if !(lambda[0] > 0.0) {
        return Err(Error::DegenerateNeighborhood);
    }
    let normal = orient_normal(eig.eigenvectors.column(order[2]).normalize());
    Ok(NormalEstimate {
        normal,
        linearity: ((lambda[0] - lambda[1]) / lambda[0]).clamp(0.0, 1.0),
        eigenvalues: lambda,
    })
}

fn orient_normal(n: Vector3<f64>) -> Vector3<f64> {
    const TIE: f64 = 1e-12;
    let sign_source = if n.z.abs() > TIE {
        n.z
    } else if n.x.abs() > TIE {
        n.x
    } else {
        n.y
    };
    if sign_source < 0.0 {
        -n
    } else {
        n
    }
}

/// Flips `n` to face along `dir`; perpendicular cases keep `n` as is.
pub fn orient_toward(n: Vector3<f64>, dir: &Vector3<f64>) -> Vector3<f64> {
    if n.dot(dir) < -1e-12 * dir.norm() {
        -n
    } else {
        n
    }
}

/// The three angular features of a point pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    /// atan2(w·n_b, u·n_b), in (−π, π]
    Theta,
    /// v·n_b, in [−1, 1]
    Alpha,
    /// u·d, in [−1, 1]
    Phi,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Theta, Feature::Alpha, Feature::Phi];

    pub fn range(self) -> (f64, f64) {
        match self {
            Feature::Theta => (-PI, PI),
            Feature::Alpha | Feature::Phi => (-1.0, 1.0),
        }
    }
}

/// Darboux-frame features `[theta, alpha, phi]` of the pair (q, k).
///
/// The endpoint whose normal makes the smaller angle with the segment
/// pointing away from it is the frame origin `a`; on a tie it is `q`.
pub fn angular_features(
    p_q: &Point3,
    n_q: &Vector3<f64>,
    p_k: &Point3,
    n_k: &Vector3<f64>,
) -> Result<[f64; 3]> {
    let qk = p_k - p_q;
    let len = qk.norm();
    if !(len > 0.0) {
        return Err(Error::CoincidentPair);
    }
    // cosines of the angle at each endpoint; larger cosine = smaller angle
    let cos_q = n_q.dot(&qk);
    let cos_k = n_k.dot(&(p_q - p_k));
    let (p_a, n_a, p_b, n_b) = if cos_q >= cos_k { (p_q, n_q, p_k, n_k) } else { (p_k, n_k, p_q, n_q) };
    let d = (p_b - p_a) / len;
    let u = *n_a;
    let v = d.cross(&u);
    let w = u.cross(&v);
    let (y, x) = (w.dot(n_b), u.dot(n_b));
    let theta = if y == 0.0 && x == 0.0 {
        0.0
    } else {
        let t = y.atan2(x);
        if t == -PI {
            PI
        } else {
            t
        }
    };
    Ok([theta, v.dot(n_b), u.dot(&d)])
}

/// 1-based histogram bin of `value` for `feature`, in `1..=bins`.
/// Values outside the feature range are clamped.
pub fn bin_index(value: f64, feature: Feature, bins: usize) -> usize {
    let (lo, hi) = feature.range();
    let eps = 1e-9 * (hi - lo);
    let f = if value.is_nan() { lo } else { value.clamp(lo, hi) };
    let bin = (bins as f64 * (f - lo) / (hi + eps - lo)).floor() as usize + 1;
    bin.clamp(1, bins)
}

/// Per-point reliability state after normal estimation and filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTables {
    /// Valid query indices, ascending.
    pub valid_queries: Vec<usize>,
    /// `is_valid[q]` iff `q` is in `valid_queries`.
    pub is_valid: Vec<bool>,
    /// Normals of every point that passed the first pass.
    pub normals: Vec<Option<Vector3<f64>>>,
    /// Neighbor lists (self included), restricted to valid points.
    pub neighbors: Vec<Vec<usize>>,
    /// Points that passed the first pass (before neighbor filtering).
    pub first_pass: Vec<usize>,
}

impl ReliabilityTables {
    /// Neighbors of `q` other than `q` itself.
    pub fn others(&self, q: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[q].iter().copied().filter(move |&k| k != q)
    }

    pub fn normal(&self, q: usize) -> Option<&Vector3<f64>> {
        self.normals[q].as_ref()
    }
}

/// First pass: one radius search per point, cardinality gate, normal
/// subsampling, PCA and the linearity gate. Returns the tables before
/// neighbor filtering (`neighbors` hold the raw search results).
pub fn first_pass(cloud: &PointCloud, index: &SpatialIndex, params: &Params) -> ReliabilityTables {
    let n = cloud.len();
    let r_normal2 = params.normal_radius * params.normal_radius;
    let centroid = cloud.points().iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n.max(1) as f64;
    let per_point: Vec<Option<(Vector3<f64>, Vec<usize>)>> = (0..n)
        .into_par_iter()
        .map(|q| {
            let p_q = cloud.point(q);
            let found = index.radius_search(p_q, params.fpfh_radius);
            if found.len() < params.min_neighbors {
                return None;
            }
            let normal_set: Vec<Point3> = found
                .iter()
                .map(|&s| *cloud.point(s))
                .filter(|p| (p - p_q).norm_squared() < r_normal2)
                .collect();
            if normal_set.len() < params.min_neighbors {
                return None;
            }
            let est = estimate_normal_pca(&normal_set).ok()?;
            let normal = match params.normal_orientation {
                NormalOrientation::Up => est.normal,
                NormalOrientation::Centroid => orient_toward(est.normal, &(centroid - p_q.coords)),
            };
            (est.linearity < params.max_linearity).then_some((normal, found))
        })
        .collect();

    let mut tables = ReliabilityTables {
        valid_queries: Vec::new(),
        is_valid: vec![false; n],
        normals: vec![None; n],
        neighbors: vec![Vec::new(); n],
        first_pass: Vec::new(),
    };
    for (q, item) in per_point.into_iter().enumerate() {
        if let Some((normal, found)) = item {
            tables.valid_queries.push(q);
            tables.is_valid[q] = true;
            tables.normals[q] = Some(normal);
            tables.neighbors[q] = found;
        }
    }
    tables.first_pass = tables.valid_queries.clone();
    tables
}

/// Second pass: drop neighbors without a normal, then drop queries left
/// with fewer than `min_neighbors` entries. Repeats until no query is
/// dropped so that every remaining neighbor is itself a valid query.
pub fn second_pass(tables: &mut ReliabilityTables, min_neighbors: usize) {
    loop {
        for &q in &tables.valid_queries {
            let is_valid = &tables.is_valid;
            tables.neighbors[q].retain(|&i| is_valid[i]);
        }
        let mut dropped = false;
        for &q in &tables.valid_queries {
            if tables.neighbors[q].len() < min_neighbors {
                tables.is_valid[q] = false;
                dropped = true;
            }
        }
        if !dropped {
            break;
        }
        let is_valid = &tables.is_valid;
        let removed: Vec<usize> = tables.valid_queries.iter().copied().filter(|&q| !is_valid[q]).collect();
        for q in removed {
            tables.neighbors[q].clear();
        }
        tables.valid_queries.retain(|&q| is_valid[q]);
    }
}

/// Both passes.
pub fn estimate_reliable_normals(cloud: &PointCloud, index: &SpatialIndex, params: &Params) -> ReliabilityTables {
    let mut tables = first_pass(cloud, index, params);
    second_pass(&mut tables, params.min_neighbors);
    tables
}

/// SPFH of valid query `q`: `3 * bins` entries, each feature block sums to 100.
pub fn compute_spfh(q: usize, tables: &ReliabilityTables, cloud: &PointCloud, bins: usize) -> Result<Vec<f64>> {
    let n_q = tables.normal(q).ok_or(Error::NoReliablePoints)?;
    let p_q = cloud.point(q);
    let mut counts = vec![0u32; 3 * bins];
    let mut m = 0usize;
    for k in tables.others(q) {
        let n_k = tables.normal(k).ok_or(Error::NoReliablePoints)?;
        let f = angular_features(p_q, n_q, cloud.point(k), n_k).map_err(|_| Error::CoincidentPoints(q, k))?;
        for (l, feature) in Feature::ALL.into_iter().enumerate() {
            counts[l * bins + bin_index(f[l], feature, bins) - 1] += 1;
        }
        m += 1;
    }
    if m == 0 {
        return Ok(vec![0.0; 3 * bins]);
    }
    let scale = 100.0 / m as f64;
    Ok(counts.into_iter().map(|c| c as f64 * scale).collect())
}

/// SPFH rows indexed by cloud index; `None` for points without one.
pub type SpfhTable = Vec<Option<Vec<f64>>>;

/// FPFH(q) = SPFH(q) + (1/m) Σ_k SPFH(k) / ‖p_q − p_k‖ over the m valid neighbors k ≠ q.
pub fn compute_fpfh(q: usize, spfh: &SpfhTable, tables: &ReliabilityTables, cloud: &PointCloud) -> Result<FpfhDescriptor> {
    let own = spfh[q].as_ref().ok_or(Error::NoReliablePoints)?;
    let p_q = cloud.point(q);
    let mut acc = vec![0.0; own.len()];
    let mut m = 0usize;
    for k in tables.others(q) {
        let row = spfh[k].as_ref().ok_or(Error::NoReliablePoints)?;
        let dist = (p_q - cloud.point(k)).norm();
        if !(dist > 0.0) {
            return Err(Error::CoincidentPoints(q, k));
        }
        let w = 1.0 / dist;
        for (a, s) in acc.iter_mut().zip(row) {
            *a += w * s;
        }
        m += 1;
    }
    let signature = if m == 0 {
        own.clone()
    } else {
        let inv_m = 1.0 / m as f64;
        own.iter().zip(&acc).map(|(s, a)| s + inv_m * a).collect()
    };
    Ok(FpfhDescriptor { owner: q, signature })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FpfhDescriptor {
    /// Index of the described point in its cloud.
    pub owner: usize,
    pub signature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractionStats {
    pub points: usize,
    pub radius_queries: usize,
    pub first_pass_valid: usize,
    pub valid: usize,
}

/// Descriptors of one cloud, ordered by owner index.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    dim: usize,
    descriptors: Vec<FpfhDescriptor>,
    pub stats: ExtractionStats,
}

impl DescriptorSet {
    pub fn new(dim: usize, descriptors: Vec<FpfhDescriptor>) -> Result<Self> {
        if let Some(d) = descriptors.iter().find(|d| d.signature.len() != dim) {
            return Err(Error::DimensionMismatch(dim, d.signature.len()));
        }
        Ok(Self { dim, descriptors, stats: ExtractionStats::default() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn descriptors(&self) -> &[FpfhDescriptor] {
        &self.descriptors
    }

    pub fn get(&self, i: usize) -> &FpfhDescriptor {
        &self.descriptors[i]
    }

    /// Row-major copy of all signatures.
    pub fn flat(&self) -> Vec<f64> {
        self.descriptors.iter().flat_map(|d| d.signature.iter().copied()).collect()
    }

    /// One line per descriptor: owner index, then the values with 9 significant digits.
    pub fn write_text<W: Write>(&self, mut out: W) -> io::Result<()> {
        for d in &self.descriptors {
            write!(out, "{}", d.owner)?;
            for v in &d.signature {
                write!(out, " {}", crate::io::format_significant(*v, 9))?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Full extraction: index, both reliability passes, SPFH and FPFH for
/// every valid point. Issues exactly one radius query per input point.
pub fn extract(cloud: &PointCloud, params: &Params) -> Result<DescriptorSet> {
    params.validate()?;
    let index = SpatialIndex::build(cloud)?;
    let tables = estimate_reliable_normals(cloud, &index, params);
    if tables.valid_queries.is_empty() {
        return Err(Error::NoReliablePoints);
    }
    let bins = params.histogram_bins;

    let rows: Vec<(usize, Vec<f64>)> = tables
        .valid_queries
        .par_iter()
        .map(|&q| compute_spfh(q, &tables, cloud, bins).map(|h| (q, h)))
        .collect::<Result<_>>()?;
    let mut spfh: SpfhTable = vec![None; cloud.len()];
    for (q, h) in rows {
        spfh[q] = Some(h);
    }

    let descriptors: Vec<FpfhDescriptor> = tables
        .valid_queries
        .par_iter()
        .map(|&q| compute_fpfh(q, &spfh, &tables, cloud))
        .collect::<Result<_>>()?;

    let mut set = DescriptorSet::new(3 * bins, descriptors)?;
    set.stats = ExtractionStats {
        points: cloud.len(),
        radius_queries: index.query_count(),
        first_pass_valid: tables.first_pass.len(),
        valid: tables.valid_queries.len(),
    };
    Ok(set)
}
