//! Initial correspondences: mutual nearest neighbors in descriptor space,
//! then ratio-based top-N selection.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faster_pfh::DescriptorSet;
use crate::neighbor_search::{insert_bounded, squared_distance_within, KdTree};

/// Above this many descriptors on either side matching goes through a k-d tree.
pub const INDEXED_MATCH_THRESHOLD: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    /// Source cloud index.
    pub src: usize,
    /// Target cloud index.
    pub tgt: usize,
    /// Descriptor distance to the matched target.
    pub distance: f64,
    /// Distance to the second-nearest target descriptor (∞ if none).
    pub second_distance: f64,
    /// `distance / second_distance`; 0 when `distance` is 0 or there is no second.
    pub ratio: f64,
}

impl Correspondence {
    pub fn new(src: usize, tgt: usize, distance: f64, second_distance: f64) -> Self {
        let ratio = if distance == 0.0 || !second_distance.is_finite() {
            0.0
        } else {
            distance / second_distance
        };
        Self { src, tgt, distance, second_distance, ratio }
    }
}

/// Writes `i j d1 d2 ratio` lines.
pub fn write_correspondences<W: Write>(corrs: &[Correspondence], mut out: W) -> io::Result<()> {
    for c in corrs {
        writeln!(out, "{} {} {} {} {}", c.src, c.tgt, c.distance, c.second_distance, c.ratio)?;
    }
    Ok(())
}

/// Which nearest-neighbor routine to use. Both are exact and agree bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborStrategy {
    Auto,
    BruteForce,
    Indexed,
}

/// The two nearest rows of `base` for every row of `queries`, as
/// `(squared distance, row)` sorted by distance then row.
pub fn two_nearest(queries: &[f64], base: &[f64], dim: usize, strategy: NeighborStrategy) -> Vec<Vec<(f64, usize)>> {
    let n_base = base.len() / dim;
    let n_query = queries.len() / dim;
    let use_index = match strategy {
        NeighborStrategy::BruteForce => false,
        NeighborStrategy::Indexed => true,
        NeighborStrategy::Auto => n_base.max(n_query) > INDEXED_MATCH_THRESHOLD,
    };
    if use_index {
        let tree = KdTree::build(dim, base.to_vec());
        queries.par_chunks(dim).map(|q| tree.nearest(q, 2)).collect()
    } else {
        queries
            .par_chunks(dim)
            .map(|q| {
                let mut best: Vec<(f64, usize)> = Vec::with_capacity(3);
                for (j, row) in base.chunks(dim).enumerate() {
                    let bound = if best.len() == 2 { best[1].0 } else { f64::INFINITY };
                    if let Some(d) = squared_distance_within(q, row, bound) {
                        insert_bounded(&mut best, 2, (d, j));
                    }
                }
                best
            })
            .collect()
    }
}

/// Pairs (i, j) where j is i's nearest target descriptor and i is j's
/// nearest source descriptor (L2, ties to the smaller index).
pub fn mutual_match(src: &DescriptorSet, tgt: &DescriptorSet) -> Result<Vec<Correspondence>> {
    mutual_match_with(src, tgt, NeighborStrategy::Auto)
}

pub fn mutual_match_with(src: &DescriptorSet, tgt: &DescriptorSet, strategy: NeighborStrategy) -> Result<Vec<Correspondence>> {
    if src.is_empty() || tgt.is_empty() {
        return Err(Error::EmptyDescriptors);
    }
    if src.dim() != tgt.dim() {
        return Err(Error::DimensionMismatch(src.dim(), tgt.dim()));
    }
    let dim = src.dim();
    let (src_flat, tgt_flat) = (src.flat(), tgt.flat());
    let forward = two_nearest(&src_flat, &tgt_flat, dim, strategy);
    let backward = two_nearest(&tgt_flat, &src_flat, dim, strategy);
    let mut out = Vec::new();
    for (i, nn) in forward.iter().enumerate() {
        let (d1, j) = nn[0];
        if backward[j][0].1 != i {
            continue;
        }
        let d2 = nn.get(1).map_or(f64::INFINITY, |x| x.0.sqrt());
        out.push(Correspondence::new(src.get(i).owner, tgt.get(j).owner, d1.sqrt(), d2));
    }
    Ok(out)
}

/// Keeps the `max_count` entries with the smallest ratio (ties by
/// (src, tgt)), preserving input order. Unchanged when already small enough.
pub fn ratio_filter(corrs: &[Correspondence], max_count: usize) -> Vec<Correspondence> {
    if corrs.len() <= max_count {
        return corrs.to_vec();
    }
    let mut order: Vec<usize> = (0..corrs.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (&corrs[a], &corrs[b]);
        x.ratio.total_cmp(&y.ratio).then(x.src.cmp(&y.src)).then(x.tgt.cmp(&y.tgt))
    });
    order.truncate(max_count);
    order.sort_unstable();
    order.into_iter().map(|i| corrs[i]).collect()
}
