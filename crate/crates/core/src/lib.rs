//! Tree-structured Ising models under mean parameterization.
//!
//! A model on a tree is given by marginal means `q` and edge correlations
//! `alpha`. With those parameters the joint pmf, the joint pgf and a direct
//! sampler are all explicit:
//!
//! - [`model`]: admissibility, conditional/pair/joint probabilities, path
//!   correlations and `2^d` enumeration oracles.
//! - [`pgf`]: the joint pgf by a leaf-to-root recursion.
//! - [`sum`]: pmf of the sum `K` and expected allocations by FFT inversion.
//! - [`sampler`]: direct and symmetric-flip samplers, Monte-Carlo intervals.
//! - [`poisson`]: the Poisson-marginal tree MRF used as an approximation,
//!   total variation and convex-order checks.
//! - [`params`]: natural, canonical and centered parameterizations.
//! - [`model_file`]: the TOML model file shared by the CLI.

pub mod model;
pub mod model_file;
pub mod params;
pub mod pgf;
pub mod poisson;
pub mod sampler;
pub mod sum;
pub mod tree;

pub use model::{alpha_bounds, sigma, validate, MeanParamIsing, ModelError, Pmf, PmfError};
pub use model_file::{
    load_model, parse_model, ModelFile, ModelFileError, ModelSpec, Parameterization,
};
pub use params::{
    CanonicalParamIsing, CenteredParamIsing, JointTable, NaturalParamIsing, ParamError,
};
pub use pgf::{joint_pgf, ogfea_pgf, sum_pgf, ComplexScalar, PgfMode, PgfRequest};
pub use poisson::{
    build_approx, check_convex_order, mpmrf_sum_pgf, mpmrf_sum_pmf, tv_bound, MpmrfModel,
    PoissonError,
};
pub use sampler::{
    mc_confidence_intervals, monte_carlo_sum_pmf, sample_ising, sample_symmetric_flip, RngStream,
    SampleBatch, SamplerError,
};
pub use sum::{expected_allocations, stop_loss, sum_pmf, tv_distance, AllocationVector};
pub use tree::{build_tree, Edge, RootedTree, TreeError, TreeTopology, Vertex};
