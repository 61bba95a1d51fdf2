//! End-to-end registration: voxelize, suppress, describe, match, filter,
//! prune, solve.

use std::time::Instant;

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::faster_pfh::extract;
use crate::geometry::{Point3, PointCloud};
use crate::matching::{mutual_match, ratio_filter};
use crate::params::Params;
use crate::preprocess::{geometric_suppression, voxel_downsample};
use crate::pruning::prune;
use crate::solver::{gnc_solve, RegistrationResult, StageRecord};

pub const STAGES: [&str; 7] = ["voxelize", "suppress", "extract", "match", "ratio_filter", "prune", "solve"];

/// Registers `src` onto `tgt`: the returned pose maps source points into the
/// target frame. Stage failures come back as `valid = false` with a
/// stage-tagged reason; only invalid parameters are an `Err`.
pub fn register(src: &PointCloud, tgt: &PointCloud, params: &Params) -> Result<RegistrationResult> {
    params.validate()?;
    match params.workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
            Ok(pool.install(|| register_inner(src, tgt, params)))
        }
        None => Ok(register_inner(src, tgt, params)),
    }
}

struct Trace {
    records: Vec<StageRecord>,
    clock: Instant,
}

impl Trace {
    fn new() -> Self {
        Self { records: Vec::new(), clock: Instant::now() }
    }

    fn record(&mut self, stage: &str, count: usize) {
        let ms = self.clock.elapsed().as_secs_f64() * 1e3;
        self.records.push(StageRecord { stage: stage.to_string(), count, ms });
        self.clock = Instant::now();
    }

    fn fail(self, stage: &str, reason: impl std::fmt::Display) -> RegistrationResult {
        RegistrationResult::failed(stage, reason, self.records)
    }
}

fn register_inner(src: &PointCloud, tgt: &PointCloud, params: &Params) -> RegistrationResult {
    let mut trace = Trace::new();
    let v = params.voxel_size;

    let (src_v, tgt_v) = (voxel_downsample(src, v), voxel_downsample(tgt, v));
    trace.record("voxelize", src_v.len() + tgt_v.len());

    let (src_s, tgt_s) = (
        geometric_suppression(&src_v, &params.suppression),
        geometric_suppression(&tgt_v, &params.suppression),
    );
    trace.record("suppress", src_s.len() + tgt_s.len());
    for (name, cloud) in [("source", &src_s), ("target", &tgt_s)] {
        if cloud.len() < params.min_neighbors {
            return trace.fail("voxelize", format!("{name} has {} points, need at least {}", cloud.len(), params.min_neighbors));
        }
    }

    let descriptors = extract(&src_s, params).and_then(|a| Ok((a, extract(&tgt_s, params)?)));
    let (src_d, tgt_d) = match descriptors {
        Ok(d) => d,
        Err(e) => return trace.fail("extract", e),
    };
    trace.record("extract", src_d.len() + tgt_d.len());

    let matches = match mutual_match(&src_d, &tgt_d) {
        Ok(m) => m,
        Err(e) => return trace.fail("match", e),
    };
    trace.record("match", matches.len());

    let filtered = ratio_filter(&matches, params.max_correspondences);
    trace.record("ratio_filter", filtered.len());

    let pruned = match prune(&filtered, &src_s, &tgt_s, params.noise_bound) {
        Ok(p) => p,
        Err(e) => return trace.fail("prune", e),
    };
    trace.record("prune", pruned.len());

    let a: Vec<Point3> = pruned.iter().map(|c| *src_s.point(c.src)).collect();
    let b: Vec<Point3> = pruned.iter().map(|c| *tgt_s.point(c.tgt)).collect();
    let mut result = match gnc_solve(&a, &b, &params.gnc, params.min_inliers) {
        Ok(r) => r,
        Err(e) => return trace.fail("solve", e),
    };
    trace.record("solve", result.inliers.len());
    result.inlier_pairs = result.inliers.iter().map(|&k| (pruned[k].src, pruned[k].tgt)).collect();
    if !result.valid {
        result.failure = Some(format!(
            "solve: {} inliers, need at least {}",
            result.inliers.len(),
            params.min_inliers
        ));
    }
    result.stage_trace = trace.records;
    result
}

/// JSON form of a result. Without timings the output depends only on the
/// inputs and parameters, so it can be compared byte for byte.
pub fn result_to_json(result: &RegistrationResult, include_timings: bool) -> Value {
    let trace: Vec<Value> = result
        .stage_trace
        .iter()
        .map(|s| {
            if include_timings {
                json!({"stage": s.stage, "count": s.count, "ms": s.ms})
            } else {
                json!({"stage": s.stage, "count": s.count})
            }
        })
        .collect();
    json!({
        "pose": result.pose.to_rows(),
        "num_inliers": result.inliers.len(),
        "valid": result.valid,
        "iterations": result.iterations,
        "inliers": result.inlier_pairs,
        "failure": result.failure,
        "stage_trace": trace,
    })
}
