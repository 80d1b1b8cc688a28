//! Fluctuations of diagonal entries φ(M)_jj of functions of Wigner matrices:
//! limit laws, the Volterra equations behind them, and Monte Carlo checks.

pub mod config;
pub mod cumulants;
pub mod digest;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod io;
pub mod limits;
pub mod quadrature;
pub mod rng;
pub mod semicircle;
pub mod spectral;
pub mod stats;
pub mod testfn;
pub mod volterra;

pub use config::{parse_config, parse_config_str, Config};
pub use cumulants::{sample_cumulants, Estimate, SampleCumulants};
pub use ensemble::{sample_matrix, Convention, DistKind, EnsembleSpec, EntryDistribution, SymmetricMatrix};
pub use error::{Error, Result};
pub use harness::{
    compare_with_prediction, lemma_decay_experiment, run_entry_experiment, DecayReport, ExperimentConfig,
    ExperimentResult, JPolicy, LemmaConfig,
};
pub use io::RunManifest;
pub use limits::{predict, var_limit, LimitPrediction};
pub use rng::{derive_seed, CounterRng};
pub use spectral::{eigh, SpectralDecomposition};
pub use testfn::TestFunction;
pub use volterra::{volterra_suite, ResidualRow};
