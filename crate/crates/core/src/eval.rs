//! Error metrics, seeded synthetic scenes with ground truth, and the
//! benchmark harness.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, Pose};
use crate::params::Params;
use crate::pipeline::register;

/// ‖t_est − t_gt‖.
pub fn rte(t_est: &Vector3<f64>, t_gt: &Vector3<f64>) -> f64 {
    (t_est - t_gt).norm()
}

/// Geodesic rotation distance in degrees, in [0, 180].
pub fn rre(r_est: &Matrix3<f64>, r_gt: &Matrix3<f64>) -> f64 {
    let c = (((r_est.transpose() * r_gt).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees().abs()
}

/// A sampled primitive of the synthetic room.
#[derive(Debug, Clone, Copy)]
enum Surface {
    /// `origin + s·e1 + t·e2`, `s, t ∈ [0, 1]`.
    Patch { origin: Vector3<f64>, e1: Vector3<f64>, e2: Vector3<f64> },
    /// Vertical cylinder mantle standing on z = 0.
    Cylinder { center: Vector3<f64>, radius: f64, height: f64 },
    Sphere { center: Vector3<f64>, radius: f64 },
}

impl Surface {
    fn area(&self) -> f64 {
        match *self {
            Surface::Patch { e1, e2, .. } => e1.cross(&e2).norm(),
            Surface::Cylinder { radius, height, .. } => 2.0 * PI * radius * height,
            Surface::Sphere { radius, .. } => 4.0 * PI * radius * radius,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> Point3 {
        match *self {
            Surface::Patch { origin, e1, e2 } => Point3::from(origin + rng.random::<f64>() * e1 + rng.random::<f64>() * e2),
            Surface::Cylinder { center, radius, height } => {
                let a = rng.random_range(0.0..2.0 * PI);
                Point3::from(center + Vector3::new(radius * a.cos(), radius * a.sin(), rng.random_range(0.0..height)))
            }
            Surface::Sphere { center, radius } => Point3::from(center + radius * Vector3::from(UnitSphere.sample(rng))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    /// Surface samples per cloud, before clutter.
    pub n_points: usize,
    /// Room length along x; the room is 0.7 × extent deep and 0.3 × extent tall.
    pub extent: f64,
    pub noise_sigma: f64,
    /// Extra uniformly scattered points per cloud, as a fraction of `n_points`.
    pub clutter_ratio: f64,
    /// Boxes standing on the floor, each at a random yaw.
    pub boxes: usize,
    /// Vertical pillars.
    pub cylinders: usize,
    pub spheres: usize,
}

impl SceneConfig {
    pub fn new(seed: u64) -> Self {
        Self { seed, n_points: 20_000, extent: 10.0, noise_sigma: 0.01, clutter_ratio: 0.2, boxes: 10, cylinders: 6, spheres: 4 }
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub source: PointCloud,
    pub target: PointCloud,
    /// Maps source coordinates into the target frame.
    pub pose_gt: Pose,
}

fn room_surfaces(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Surface> {
    let (lx, ly, lz) = (cfg.extent, 0.7 * cfg.extent, 0.3 * cfg.extent);
    let v = Vector3::new;
    let patch = |origin, e1, e2| Surface::Patch { origin, e1, e2 };
    let mut out = vec![
        patch(v(0.0, 0.0, 0.0), v(lx, 0.0, 0.0), v(0.0, ly, 0.0)),
        patch(v(0.0, 0.0, 0.0), v(lx, 0.0, 0.0), v(0.0, 0.0, lz)),
        patch(v(0.0, 0.0, 0.0), v(0.0, ly, 0.0), v(0.0, 0.0, lz)),
        patch(v(lx, 0.0, 0.0), v(0.0, ly, 0.0), v(0.0, 0.0, lz)),
        patch(v(0.0, ly, 0.0), v(lx, 0.0, 0.0), v(0.0, 0.0, lz)),
    ];
    let inside = |rng: &mut ChaCha8Rng, margin: f64| {
        v(rng.random_range(margin..lx - margin), rng.random_range(margin..ly - margin), 0.0)
    };
    for _ in 0..cfg.boxes {
        let (sx, sy, sz) = (
            rng.random_range(0.04..0.15) * cfg.extent,
            rng.random_range(0.04..0.15) * cfg.extent,
            rng.random_range(0.03..0.2) * cfg.extent,
        );
        let yaw: f64 = rng.random_range(0.0..PI);
        let ex = v(yaw.cos(), yaw.sin(), 0.0) * sx;
        let ey = v(-yaw.sin(), yaw.cos(), 0.0) * sy;
        let ez = v(0.0, 0.0, sz);
        let o = inside(rng, 0.12 * cfg.extent) - 0.5 * (ex + ey);
        out.extend([patch(o + ez, ex, ey), patch(o, ex, ez), patch(o + ey, ex, ez), patch(o, ey, ez), patch(o + ex, ey, ez)]);
    }
    for _ in 0..cfg.cylinders {
        let radius = rng.random_range(0.01..0.05) * cfg.extent;
        let height = rng.random_range(0.1..1.0) * lz;
        out.push(Surface::Cylinder { center: inside(rng, 0.06 * cfg.extent), radius, height });
    }
    for _ in 0..cfg.spheres {
        let radius = rng.random_range(0.02..0.06) * cfg.extent;
        let mut center = inside(rng, 0.08 * cfg.extent);
        center.z = rng.random_range(radius..lz - radius);
        out.push(Surface::Sphere { center, radius });
    }
    out
}

fn sample_surfaces(surfaces: &[Surface], n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let cumulative: Vec<f64> = surfaces
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p.area();
            Some(*acc)
        })
        .collect();
    let total = *cumulative.last().expect("at least one surface");
    (0..n)
        .map(|_| {
            let x = rng.random::<f64>() * total;
            let k = cumulative.partition_point(|&c| c <= x).min(surfaces.len() - 1);
            surfaces[k].sample(rng)
        })
        .collect()
}

fn clutter(cfg: &SceneConfig, rng: &mut ChaCha8Rng) -> Vec<Point3> {
    let count = (cfg.clutter_ratio * cfg.n_points as f64).round() as usize;
    let (lx, ly, lz) = (cfg.extent, 0.7 * cfg.extent, 0.3 * cfg.extent);
    (0..count)
        .map(|_| Point3::new(rng.random_range(0.0..lx), rng.random_range(0.0..ly), rng.random_range(0.0..lz)))
        .collect()
}

/// A furnished room sampled twice: `target = pose_gt(source surface) + noise`,
/// each cloud with its own independent clutter.
pub fn generate_scene(cfg: &SceneConfig, pose_gt: &Pose) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let surfaces = room_surfaces(cfg, &mut rng);
    let surface = sample_surfaces(&surfaces, cfg.n_points, &mut rng);
    let noise = Normal::new(0.0, cfg.noise_sigma.max(0.0)).expect("finite sigma");
    let mut target: Vec<Point3> = surface
        .iter()
        .map(|p| {
            let q = pose_gt.apply(p);
            if cfg.noise_sigma > 0.0 {
                q + Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                q
            }
        })
        .collect();
    let mut source = surface;
    source.extend(clutter(cfg, &mut rng));
    target.extend(clutter(cfg, &mut rng).iter().map(|p| pose_gt.apply(p)));
    Scene {
        source: PointCloud::new(source).expect("finite scene"),
        target: PointCloud::new(target).expect("finite scene"),
        pose_gt: *pose_gt,
    }
}

/// Uniformly random rotation axis and angle in `[0, max_angle_deg]`;
/// translation direction uniform, length uniform in `[0, max_translation]`.
pub fn random_pose(rng: &mut ChaCha8Rng, max_angle_deg: f64, max_translation: f64) -> Pose {
    let axis = Vector3::from(UnitSphere.sample(rng));
    let angle = rng.random_range(0.0..=max_angle_deg).to_radians();
    let dir = Vector3::from(UnitSphere.sample(rng));
    let t = dir * rng.random_range(0.0..=max_translation);
    Pose::from_axis_angle(&axis, angle, t)
}

/// Point pairs with ground-truth labels (`true` = inlier).
#[derive(Debug, Clone)]
pub struct LabeledPairs {
    pub source: Vec<Point3>,
    pub target: Vec<Point3>,
    pub inlier: Vec<bool>,
    pub pose_gt: Pose,
}

impl LabeledPairs {
    pub fn outlier_count(&self) -> usize {
        self.inlier.iter().filter(|&&i| !i).count()
    }

    pub fn clouds(&self) -> (PointCloud, PointCloud) {
        (
            PointCloud::new(self.source.clone()).expect("finite"),
            PointCloud::new(self.target.clone()).expect("finite"),
        )
    }
}

/// `n` pairs inside a cube of side `extent`, exactly
/// `round(outlier_ratio · n)` of them outliers (random target points),
/// shuffled. Inlier targets carry Gaussian noise of `noise_sigma`.
pub fn generate_correspondences(
    seed: u64,
    n: usize,
    outlier_ratio: f64,
    extent: f64,
    pose_gt: &Pose,
    noise_sigma: f64,
) -> LabeledPairs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outliers = (outlier_ratio.clamp(0.0, 1.0) * n as f64).round() as usize;
    let mut labels: Vec<bool> = (0..n).map(|k| k >= outliers).collect();
    // Fisher-Yates with our own rng keeps the stream explicit
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    let cube = |rng: &mut ChaCha8Rng| {
        Point3::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent), rng.random_range(0.0..extent))
    };
    let mut source = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for &is_inlier in &labels {
        let a = cube(&mut rng);
        let b = if is_inlier {
            let mut b = pose_gt.apply(&a);
            if noise_sigma > 0.0 {
                b += Vector3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            b
        } else {
            pose_gt.apply(&cube(&mut rng))
        };
        source.push(a);
        target.push(b);
    }
    LabeledPairs { source, target, inlier: labels, pose_gt: *pose_gt }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    pub clutter_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub scenes_per_regime: usize,
    pub regimes: Vec<Regime>,
    pub voxel_size: f64,
    pub n_points: usize,
    pub extent: f64,
    pub noise_sigma: f64,
    pub boxes: usize,
    pub cylinders: usize,
    pub spheres: usize,
    pub max_rotation_deg: f64,
    /// Maximum translation as a multiple of `extent`.
    pub max_translation_extents: f64,
    pub rte_threshold: f64,
    pub rre_threshold_deg: f64,
    pub suppress_ground: bool,
    /// Worker threads; `None` uses all cores. Results do not depend on it,
    /// so it is left out of the serialized report.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            scenes_per_regime: 50,
            regimes: vec![
                Regime { name: "clean".into(), clutter_ratio: 0.0 },
                Regime { name: "clutter-20".into(), clutter_ratio: 0.2 },
                Regime { name: "clutter-50".into(), clutter_ratio: 0.5 },
            ],
            voxel_size: 0.25,
            n_points: 20_000,
            extent: 10.0,
            noise_sigma: 0.01,
            boxes: 10,
            cylinders: 6,
            spheres: 4,
            max_rotation_deg: 180.0,
            max_translation_extents: 10.0,
            rte_threshold: 2.0,
            rre_threshold_deg: 5.0,
            suppress_ground: false,
            workers: None,
        }
    }
}

impl BenchmarkConfig {
    /// Seed of scene `index` in regime `regime`.
    pub fn scene_seed(&self, regime: usize, index: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add((regime as u64) << 32)
            .wrapping_add(index as u64)
    }

    pub fn scene(&self, regime: usize, index: usize) -> Scene {
        let seed = self.scene_seed(regime, index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let pose = random_pose(&mut rng, self.max_rotation_deg, self.max_translation_extents * self.extent);
        let cfg = SceneConfig {
            seed,
            n_points: self.n_points,
            extent: self.extent,
            noise_sigma: self.noise_sigma,
            clutter_ratio: self.regimes[regime].clutter_ratio,
            boxes: self.boxes,
            cylinders: self.cylinders,
            spheres: self.spheres,
        };
        generate_scene(&cfg, &pose)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneResult {
    pub regime: String,
    pub index: usize,
    pub seed: u64,
    pub valid: bool,
    pub success: bool,
    pub rte: f64,
    pub rre: f64,
    pub num_inliers: usize,
    pub failure: Option<String>,
    pub stage_counts: Vec<(String, usize)>,
    #[serde(skip)]
    pub stage_ms: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSummary {
    pub name: String,
    pub scenes: usize,
    pub valid: usize,
    pub successes: usize,
    pub success_rate: f64,
    /// Means over successful scenes only; `None` without successes.
    pub mean_rte: Option<f64>,
    pub mean_rre: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub config: BenchmarkConfig,
    pub scenes: Vec<SceneResult>,
    pub summaries: Vec<RegimeSummary>,
    pub overall: RegimeSummary,
}

pub fn classify(valid: bool, rte: f64, rre: f64, rte_threshold: f64, rre_threshold: f64) -> bool {
    valid && rte < rte_threshold && rre < rre_threshold
}

fn summarize(name: &str, scenes: &[&SceneResult]) -> RegimeSummary {
    let ok: Vec<&&SceneResult> = scenes.iter().filter(|s| s.success).collect();
    let mean = |f: fn(&SceneResult) -> f64| (!ok.is_empty()).then(|| ok.iter().map(|s| f(s)).sum::<f64>() / ok.len() as f64);
    RegimeSummary {
        name: name.to_string(),
        scenes: scenes.len(),
        valid: scenes.iter().filter(|s| s.valid).count(),
        successes: ok.len(),
        success_rate: if scenes.is_empty() { 0.0 } else { ok.len() as f64 / scenes.len() as f64 },
        mean_rte: mean(|s| s.rte),
        mean_rre: mean(|s| s.rre),
    }
}

fn run_scene(config: &BenchmarkConfig, params: &Params, regime: usize, index: usize) -> Result<SceneResult> {
    let scene = config.scene(regime, index);
    let result = register(&scene.source, &scene.target, params)?;
    let e_t = rte(result.pose.translation(), scene.pose_gt.translation());
    let e_r = rre(result.pose.rotation(), scene.pose_gt.rotation());
    Ok(SceneResult {
        regime: config.regimes[regime].name.clone(),
        index,
        seed: config.scene_seed(regime, index),
        valid: result.valid,
        success: classify(result.valid, e_t, e_r, config.rte_threshold, config.rre_threshold_deg),
        rte: e_t,
        rre: e_r,
        num_inliers: result.inliers.len(),
        failure: result.failure.clone(),
        stage_counts: result.stage_trace.iter().map(|s| (s.stage.clone(), s.count)).collect(),
        stage_ms: result.stage_trace.iter().map(|s| (s.stage.clone(), s.ms)).collect(),
    })
}

/// Registers every scene of every regime (in parallel) and aggregates.
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    let mut params = Params::new(config.voxel_size)?;
    params.suppression.enabled = config.suppress_ground;
    params.validate()?;
    if config.workers == Some(0) {
        return Err(Error::InvalidParams("workers must be >= 1".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..config.regimes.len())
        .flat_map(|r| (0..config.scenes_per_regime).map(move |i| (r, i)))
        .collect();
    let run = || jobs.par_iter().map(|&(r, i)| run_scene(config, &params, r, i)).collect::<Result<Vec<_>>>();
    let scenes = match config.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let summaries = config
        .regimes
        .iter()
        .map(|reg| summarize(&reg.name, &scenes.iter().filter(|s| s.regime == reg.name).collect::<Vec<_>>()))
        .collect();
    let overall = summarize("overall", &scenes.iter().collect::<Vec<_>>());
    Ok(BenchmarkReport { config: config.clone(), scenes, summaries, overall })
}

/// Nearest-rank percentile of an ascending slice.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

impl BenchmarkReport {
    /// Per-stage wall-time percentiles (p50, p90, max) in milliseconds.
    pub fn timing_percentiles(&self) -> BTreeMap<String, [f64; 3]> {
        let mut per_stage: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for s in &self.scenes {
            for (stage, ms) in &s.stage_ms {
                per_stage.entry(stage.clone()).or_default().push(*ms);
            }
        }
        per_stage
            .into_iter()
            .map(|(k, mut v)| {
                v.sort_by(f64::total_cmp);
                let max = *v.last().unwrap_or(&f64::NAN);
                (k, [percentile(&v, 50.0), percentile(&v, 90.0), max])
            })
            .collect()
    }

    /// Report as JSON. Without timings the value is a pure function of the config.
    pub fn to_json(&self, include_timings: bool) -> Value {
        let mut v = json!({
            "config": self.config,
            "summaries": self.summaries,
            "overall": self.overall,
            "scenes": self.scenes,
        });
        if include_timings {
            let t: BTreeMap<String, Value> = self
                .timing_percentiles()
                .into_iter()
                .map(|(k, [p50, p90, max])| (k, json!({"p50_ms": p50, "p90_ms": p90, "max_ms": max})))
                .collect();
            v["timings"] = json!(t);
        }
        v
    }

    /// Aligned plain-text summary table.
    pub fn to_table(&self) -> String {
        let fmt = |x: Option<f64>, prec: usize| x.map_or("-".to_string(), |v| format!("{v:.prec$}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:>6} {:>6} {:>9} {:>9} {:>10} {:>10}", "regime", "scenes", "valid", "success", "rate", "mean_rte", "mean_rre");
        for s in self.summaries.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(
                out,
                "{:<14} {:>6} {:>6} {:>9} {:>8.1}% {:>10} {:>10}",
                s.name,
                s.scenes,
                s.valid,
                s.successes,
                100.0 * s.success_rate,
                fmt(s.mean_rte, 4),
                fmt(s.mean_rre, 4),
            );
        }
        let timings = self.timing_percentiles();
        if !timings.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "{:<14} {:>10} {:>10} {:>10}", "stage", "p50_ms", "p90_ms", "max_ms");
            for stage in crate::pipeline::STAGES {
                if let Some([p50, p90, max]) = timings.get(stage) {
                    let _ = writeln!(out, "{stage:<14} {p50:>10.2} {p90:>10.2} {max:>10.2}");
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rte_examples() {
        assert_eq!(rte(&Vector3::new(1.0, 2.0, 3.0), &Vector3::new(1.0, 2.0, 3.0)), 0.0);
        assert_eq!(rte(&Vector3::zeros(), &Vector3::new(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn rre_examples() {
        let id = Matrix3::identity();
        assert_eq!(rre(&id, &id), 0.0);
        let r5 = *Pose::from_axis_angle(&Vector3::z(), 5f64.to_radians(), Vector3::zeros()).rotation();
        assert_relative_eq!(rre(&r5, &id), 5.0, epsilon = 1e-9);
        let r180 = *Pose::from_axis_angle(&Vector3::x(), std::f64::consts::PI, Vector3::zeros()).rotation();
        assert_relative_eq!(rre(&r180, &id), 180.0, epsilon = 1e-6);
    }

    #[test]
    fn identity_noiseless_scene_is_a_copy() {
        let cfg = SceneConfig { clutter_ratio: 0.0, noise_sigma: 0.0, n_points: 500, ..SceneConfig::new(1) };
        let s = generate_scene(&cfg, &Pose::identity());
        assert_eq!(s.source, s.target);
    }

    #[test]
    fn scene_is_seeded() {
        let cfg = SceneConfig { n_points: 800, ..SceneConfig::new(9) };
        let pose = Pose::from_axis_angle(&Vector3::y(), 0.3, Vector3::new(1.0, 0.0, 0.0));
        let (a, b) = (generate_scene(&cfg, &pose), generate_scene(&cfg, &pose));
        assert_eq!(a.source, b.source);
        assert_eq!(a.target, b.target);
        assert_eq!(a.source.len(), 960);
    }

    #[test]
    fn labeled_outlier_count_is_exact() {
        let pairs = generate_correspondences(3, 200, 0.7, 10.0, &Pose::identity(), 0.01);
        assert_eq!(pairs.outlier_count(), 140);
        assert_eq!(pairs.source.len(), 200);
    }

    #[test]
    fn success_needs_validity_and_strict_thresholds() {
        assert!(classify(true, 1.9, 4.9, 2.0, 5.0));
        assert!(!classify(false, 0.0, 0.0, 2.0, 5.0));
        assert!(!classify(true, 2.0, 0.0, 2.0, 5.0));
        assert!(!classify(true, 0.0, 5.0, 2.0, 5.0));
    }

    #[test]
    fn means_use_successes_only() {
        let mk = |success: bool, rte: f64| SceneResult {
            regime: "r".into(),
            index: 0,
            seed: 0,
            valid: success,
            success,
            rte,
            rre: rte,
            num_inliers: 0,
            failure: None,
            stage_counts: vec![],
            stage_ms: vec![],
        };
        let scenes = [mk(true, 1.0), mk(true, 3.0), mk(false, 100.0)];
        let s = summarize("r", &scenes.iter().collect::<Vec<_>>());
        assert_eq!(s.successes, 2);
        assert_eq!(s.mean_rte, Some(2.0));
        assert_relative_eq!(s.success_rate, 2.0 / 3.0);
    }

    #[test]
    fn identity_battery_succeeds() {
        let config = BenchmarkConfig {
            scenes_per_regime: 2,
            regimes: vec![Regime { name: "clean".into(), clutter_ratio: 0.0 }],
            n_points: 6000,
            max_rotation_deg: 0.0,
            max_translation_extents: 0.0,
            ..BenchmarkConfig::default()
        };
        let report = run_benchmark(&config).unwrap();
        assert_eq!(report.overall.success_rate, 1.0);
        assert!(report.to_table().contains("overall"));
    }

    #[test]
    fn percentile_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 50.0), 2.0);
        assert_eq!(percentile(&v, 90.0), 4.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (prop::array::uniform3(-1.0f64..1.0), -3.1f64..3.1, prop::array::uniform3(-10.0f64..10.0))
            .prop_map(|(a, ang, t)| Pose::from_axis_angle(&Vector3::from(a), ang, Vector3::from(t)))
    }

    proptest! {
        #[test]
        fn rre_symmetric_and_bounded(a in arb_pose(), b in arb_pose()) {
            let x = rre(a.rotation(), b.rotation());
            prop_assert!((x - rre(b.rotation(), a.rotation())).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&x));
        }

        #[test]
        fn rte_triangle(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            let (ta, tb, tc) = (a.translation(), b.translation(), c.translation());
            prop_assert!(rte(ta, tc) <= rte(ta, tb) + rte(tb, tc) + 1e-12);
        }
    }
}
