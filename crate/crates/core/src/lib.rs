//! Hidden Markov model toolkit: parameter types with validation and seeded
//! initialization, scaled forward-backward inference, Viterbi decoding,
//! sampling, Baum-Welch training over multiple independent sequences, exact
//! brute-force reference implementations, and stable text formats for models
//! and data.
//!
//! All types are immutable values after construction and every operation is
//! a pure function of its inputs, so models and sequences can be shared
//! across threads without coordination.
//!
//! ```
//! use hmmkit::{fit, random_init, sample, EmissionSpec, FitConfig};
//!
//! let truth = random_init(2, EmissionSpec::Categorical { n_symbols: 3 }, 1).unwrap();
//! let data: Vec<_> = (0..4).map(|k| sample(&truth, 50, k).unwrap().1).collect();
//! let init = random_init(2, EmissionSpec::Categorical { n_symbols: 3 }, 7).unwrap();
//! let result = fit(&init, &data, &FitConfig::default()).unwrap();
//! assert!(result.log_likelihood_trace.windows(2).all(|w| w[1] >= w[0] - 1e-9));
//! ```

pub mod error;
pub mod inference;
pub mod io;
pub mod model;
pub mod oracle;
pub mod training;

pub use error::{Error, Result};
pub use inference::{
    backward, forward, posteriors, sample, sample_many, viterbi, ForwardPass,
    ObservationSequence, PosteriorStats, ScaledTrellis,
};
pub use model::{
    random_init, EmissionModel, EmissionSpec, HmmParameters, InitialDistribution, StateSpace,
    TransitionMatrix,
};
pub use oracle::{enumerate_likelihood, enumerate_posteriors, enumerate_q, ExactPosteriors};
pub use training::{
    accumulate, baum_welch_step, fit, update_emissions, update_initial, update_transitions,
    FitConfig, FitError, FitResult, SufficientStats,
};
