//! Wasserstein isometric mapping (Wassmap).
//!
//! Images are turned into discrete probability measures, pairwise quadratic
//! Wasserstein distances are computed exactly with a transportation network
//! simplex, and the resulting squared-distance matrix is embedded with
//! classical multidimensional scaling. Generators for translation, dilation,
//! rotation and deformation image manifolds, an ISOMAP baseline and
//! Procrustes-based recovery metrics support verification of the embeddings.

pub mod embedding;
pub mod error;
pub mod evalign;
pub mod ingest;
pub mod isomap;
pub mod measure;
pub mod synth;
pub mod transport;

pub use embedding::{classical_mds, double_center, wassmap, Embedding};
pub use error::{Error, Result};
pub use evalign::{align_to_truth, knn_separation, points_matrix, procrustes, recovery_error, AlignmentReport, RigidAlignment};
pub use ingest::{load_idx, subsample, to_measures, write_idx, LabeledImageSet};
pub use isomap::{build_graph, isomap, isomap_largest_component, GraphRule, NeighborGraph};
pub use measure::{image_to_measure, AffineMap, DiscreteMeasure, GridImage};
pub use synth::{Family, Frame, GeneratedFamily, ManifoldSpec, Mode, ShapeSpec};
pub use transport::{pairwise_w2_squared, solve_w2, w2, SquaredDistanceMatrix, TransportPlan};
