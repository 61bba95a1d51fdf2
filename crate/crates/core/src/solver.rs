//! Robust pose estimation: graduated non-convexity over a truncated
//! least-squares cost, with weighted closed-form SE(3) fits.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Pose};

pub const DEFAULT_GNC_FACTOR: f64 = 1.4;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_WEIGHT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_COST_TOLERANCE: f64 = 1e-6;
/// Weights strictly above this mark a final inlier.
pub const INLIER_WEIGHT: f64 = 0.5;
const MIN_MU: f64 = 1e-6;
const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GncSettings {
    /// Residual bound β̄ of the truncated loss.
    pub noise_bound: f64,
    /// μ multiplier per outer iteration.
    pub gnc_factor: f64,
    pub max_iterations: usize,
    pub weight_tolerance: f64,
    pub cost_tolerance: f64,
}

impl GncSettings {
    pub fn with_noise_bound(noise_bound: f64) -> Self {
        Self {
            noise_bound,
            gnc_factor: DEFAULT_GNC_FACTOR,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            weight_tolerance: DEFAULT_WEIGHT_TOLERANCE,
            cost_tolerance: DEFAULT_COST_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_bound.is_finite() && self.noise_bound > 0.0) {
            return Err(Error::InvalidParams(format!("gnc noise bound = {}", self.noise_bound)));
        }
        if !(self.gnc_factor > 1.0 && self.gnc_factor.is_finite()) {
            return Err(Error::InvalidParams(format!("gnc factor = {} must be > 1", self.gnc_factor)));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParams("gnc max_iterations must be >= 1".into()));
        }
        if !(self.weight_tolerance > 0.0 && self.cost_tolerance > 0.0) {
            return Err(Error::InvalidParams("gnc tolerances must be > 0".into()));
        }
        Ok(())
    }
}

/// One pipeline stage: output cardinality and wall time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub count: usize,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    pub pose: Pose,
    /// Indices (into the solver input) whose final weight exceeds 0.5.
    pub inliers: Vec<usize>,
    pub weights: Vec<f64>,
    /// Cloud indices `(source, target)` of the inliers; filled by the pipeline.
    pub inlier_pairs: Vec<(usize, usize)>,
    pub valid: bool,
    /// Outer GNC iterations performed.
    pub iterations: usize,
    pub stage_trace: Vec<StageRecord>,
    /// `stage: reason` when some stage failed.
    pub failure: Option<String>,
}

impl RegistrationResult {
    /// Invalid result carrying a stage-tagged reason.
    pub fn failed(stage: &str, reason: impl std::fmt::Display, stage_trace: Vec<StageRecord>) -> Self {
        Self {
            pose: Pose::identity(),
            inliers: Vec::new(),
            weights: Vec::new(),
            inlier_pairs: Vec::new(),
            valid: false,
            iterations: 0,
            stage_trace,
            failure: Some(format!("{stage}: {reason}")),
        }
    }

    pub fn num_inliers(&self) -> usize {
        self.inliers.len()
    }
}

/// |ℐ_final| ≥ τ_valid.
pub fn validate(result: &RegistrationResult, min_inliers: usize) -> bool {
    result.inliers.len() >= min_inliers
}

/// Minimizer of Σ w ‖b − R a − t‖² over SE(3).
pub fn weighted_procrustes(src: &[Point3], tgt: &[Point3], weights: &[f64]) -> Result<Pose> {
    assert_eq!(src.len(), tgt.len(), "source/target length mismatch");
    assert_eq!(src.len(), weights.len(), "weights length mismatch");
    let support = weights.iter().filter(|&&w| w > 0.0).count();
    if support < 3 {
        return Err(Error::InsufficientSupport(support));
    }
    let total: f64 = weights.iter().filter(|&&w| w > 0.0).sum();
    let mut ca = Vector3::zeros();
    let mut cb = Vector3::zeros();
    for ((a, b), &w) in src.iter().zip(tgt).zip(weights) {
        if w > 0.0 {
            ca += w * a.coords;
            cb += w * b.coords;
        }
    }
    ca /= total;
    cb /= total;
    let mut h = Matrix3::zeros();
    for ((a, b), &w) in src.iter().zip(tgt).zip(weights) {
        if w > 0.0 {
            h += w * (a.coords - ca) * (b.coords - cb).transpose();
        }
    }
    let svd = h.svd(true, true);
    let u = svd.u.ok_or(Error::RankDeficient)?;
    let v = svd.v_t.ok_or(Error::RankDeficient)?.transpose();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s = order.map(|i| svd.singular_values[i]);
    if !(s[0] > 0.0) || s[1] <= RANK_TOLERANCE * s[0] {
        return Err(Error::RankDeficient);
    }
    let u = Matrix3::from_columns(&order.map(|i| u.column(i).into_owned()));
    let v = Matrix3::from_columns(&order.map(|i| v.column(i).into_owned()));
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let t = cb - r * ca;
    Ok(Pose::from_rotation_matrix(r, t))
}

/// Closed-form TLS-GNC weight for squared residual `r2`.
pub fn tls_weight(r2: f64, mu: f64, bound2: f64) -> f64 {
    let lower = mu / (mu + 1.0) * bound2;
    let upper = (mu + 1.0) / mu * bound2;
    if r2 <= lower {
        1.0
    } else if r2 >= upper {
        0.0
    } else {
        (bound2.sqrt() * (mu * (mu + 1.0)).sqrt() / r2.sqrt() - mu).clamp(0.0, 1.0)
    }
}

/// The GNC surrogate of the truncated quadratic at control parameter `mu`.
pub fn tls_surrogate(r: f64, mu: f64, bound: f64) -> f64 {
    let (r2, c2) = (r * r, bound * bound);
    if r2 <= mu / (mu + 1.0) * c2 {
        r2
    } else if r2 >= (mu + 1.0) / mu * c2 {
        c2
    } else {
        2.0 * bound * (mu * (mu + 1.0)).sqrt() * r.abs() - mu * (c2 + r2)
    }
}

pub fn squared_residuals(pose: &Pose, src: &[Point3], tgt: &[Point3]) -> Vec<f64> {
    src.iter().zip(tgt).map(|(a, b)| (b - pose.apply(a)).norm_squared()).collect()
}

fn refit(src: &[Point3], tgt: &[Point3], weights: &[f64]) -> Result<Pose> {
    weighted_procrustes(src, tgt, weights).map_err(|e| Error::SolverDegenerate(e.to_string()))
}

/// GNC-TLS over pairs `(src[k], tgt[k])`. The result is valid iff more than
/// `min_inliers - 1` weights end above 0.5.
pub fn gnc_solve(src: &[Point3], tgt: &[Point3], settings: &GncSettings, min_inliers: usize) -> Result<RegistrationResult> {
    settings.validate()?;
    if src.len() != tgt.len() {
        return Err(Error::InvalidParams(format!("{} source vs {} target points", src.len(), tgt.len())));
    }
    if src.len() < 3 {
        return Err(Error::SolverDegenerate(format!("{} pairs, need at least 3", src.len())));
    }
    let bound2 = settings.noise_bound * settings.noise_bound;
    let mut weights = vec![1.0; src.len()];
    let mut pose = refit(src, tgt, &weights)?;
    let mut r2 = squared_residuals(&pose, src, tgt);
    let r2_max = r2.iter().copied().fold(0.0, f64::max);
    let mut iterations = 0;
    // Every residual already sits inside the convex region: nothing to reject.
    if 2.0 * r2_max > bound2 {
        let mut mu = (bound2 / (2.0 * r2_max - bound2)).max(MIN_MU);
        let mut prev_cost = r2.iter().sum::<f64>();
        while iterations < settings.max_iterations {
            iterations += 1;
            let next: Vec<f64> = r2.iter().map(|&x| tls_weight(x, mu, bound2)).collect();
            let support = next.iter().filter(|&&w| w > 0.0).count();
            if support < 3 {
                return Err(Error::SolverDegenerate(format!("{support} pairs with positive weight")));
            }
            let delta = weights.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            weights = next;
            pose = refit(src, tgt, &weights)?;
            r2 = squared_residuals(&pose, src, tgt);
            let cost: f64 = weights.iter().zip(&r2).map(|(w, x)| w * x).sum();
            if delta < settings.weight_tolerance || (cost - prev_cost).abs() < settings.cost_tolerance {
                break;
            }
            prev_cost = cost;
            mu *= settings.gnc_factor;
        }
    }
    let inliers: Vec<usize> = (0..weights.len()).filter(|&k| weights[k] > INLIER_WEIGHT).collect();
    let valid = inliers.len() >= min_inliers;
    Ok(RegistrationResult { pose, inliers, weights, inlier_pairs: Vec::new(), valid, iterations, stage_trace: Vec::new(), failure: None })
}
