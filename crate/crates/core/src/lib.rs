//! Correspondence-based global registration of 3-D point clouds.
//!
//! Pipeline: voxel downsampling, optional ground suppression, Faster-PFH
//! descriptors, mutual matching with a ratio cap, maximum k-core pruning of
//! the pairwise compatibility graph, and a GNC-TLS pose solver.
//!
//! ```no_run
//! use globreg_core::{register, Params, PointCloud};
//! # let (src, tgt) = (PointCloud::default(), PointCloud::default());
//! let result = register(&src, &tgt, &Params::new(0.25)?)?;
//! if result.valid {
//!     println!("{:?}", result.pose.to_rows());
//! }
//! # Ok::<(), globreg_core::Error>(())
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod faster_pfh;
pub mod geometry;
pub mod io;
pub mod matching;
pub mod neighbor_search;
pub mod params;
pub mod pipeline;
pub mod preprocess;
pub mod pruning;
pub mod solver;

pub use error::{Error, Result};
pub use faster_pfh::{extract, DescriptorSet, FpfhDescriptor};
pub use geometry::{Point3, PointCloud, Pose};
pub use matching::{mutual_match, ratio_filter, Correspondence};
pub use neighbor_search::SpatialIndex;
pub use params::Params;
pub use pipeline::{register, result_to_json};
pub use pruning::{build_compat_graph, core_numbers, max_kcore, prune, CompatGraph};
pub use solver::{gnc_solve, weighted_procrustes, GncSettings, RegistrationResult, StageRecord};

pub use nalgebra::{Matrix3, Vector3};
