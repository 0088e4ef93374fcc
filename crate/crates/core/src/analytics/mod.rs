//! Post-hoc failure analytics: de-duplication by descriptive vectors and
//! failure-mode clustering over semantic event sequences.

mod cluster;
mod descriptive;
mod events;
mod graph;
mod leiden;
mod levenshtein;

pub use cluster::{
    adjusted_rand_index, cluster_events, cluster_failures, medoid, ClusterConfig, ClusterReport, ClusterSummary,
};
pub use descriptive::{
    calibrate_threshold, dedup_indices, descriptive_vector, is_duplicate, DescriptiveConfig, LabeledPair,
};
pub use events::{extract_events, step_events, Event, COLLISION};
pub use graph::{
    distance_matrix, euclidean_distances, knn_graph, levenshtein_distances, modularity, modularity_with_resolution,
    Metric, SimilarityGraph,
};
pub use leiden::{leiden_cluster, ClusterPartition};
pub use levenshtein::levenshtein;
