//! Heterogeneous populations reduced to weighted homogeneous clusters.
//!
//! Parameters are sampled from a compact product distribution, clustered with
//! k-means on standardized coordinates, and each cluster is then simulated as
//! one homogeneous population. Cluster results are recombined by weight.

mod distribution;
mod kmeans;
mod mixture;
mod population;

pub use distribution::{sample_parameters, CoordinateSpec, ParameterDistribution};
pub use kmeans::{kmeans, ClusterSet, MAX_ITERATIONS};
pub use mixture::{mixture_density, mixture_power};
pub use population::{cluster_hvac, cluster_representatives, HvacPopulation};
