//! Differential spectral clustering of features.
//!
//! Given two or more datasets over the same features, DiSC builds a kernel
//! graph on the feature columns of each dataset, projects away the leading
//! diffusion subspace of the other datasets, and returns the feature loadings
//! that remain strongly active. Alongside the pipeline this crate ships a
//! stochastic-block-model lab for checking the recovery guarantees, and the
//! synthetic generators used by the examples and tests.
//!
//! ```no_run
//! use disc_core::{disc_pair, synth, KernelSpec};
//!
//! let toy = synth::generate(&synth::ToySpec::new(synth::Problem::NewlyConnected)).unwrap();
//! let (va, vb) = disc_pair(&toy.datasets[0], &toy.datasets[1], 20, 20, 10, &KernelSpec::default()).unwrap();
//! println!("sigma_a = {:?}", va.significance());
//! println!("sigma_b = {:?}", vb.significance());
//! ```

pub mod data_io;
pub mod downstream;
pub mod error;
pub mod feature_graph;
pub mod linalg;
pub mod rng;
pub mod sbm;
pub mod spectral;
pub mod synth;

pub use faer::Mat;

pub use data_io::{align, load_csv, save_csv, save_result, DataMatrix, FeatureAlignment, RunSummary};
pub use downstream::{
    cluster_features, cluster_mean_features, logistic_eval, meta_features, significance_elbow,
    FeatureClustering, LogisticConfig,
};
pub use error::{DiscError, Result};
pub use feature_graph::{build_graph, self_tuning_sigmas, FeatureGraph, KernelSpec};
pub use sbm::{SbmInstance, SbmSpec};
pub use spectral::{
    complement_projector, differential_vectors, disc_multi, disc_pair, generalized_cut_vectors,
    leading_eigenvectors, DifferentialResult, Projector, SpectralBasis,
};
