//! Baum-Welch expectation-maximization over one or more independent
//! observation sequences.
//!
//! Each iteration accumulates posterior statistics with the forward-backward
//! recursions, then maximizes the expected complete-data log-likelihood one
//! parameter group at a time: the initial distribution, the transition
//! matrix, and the emission model each have a closed-form update that depends
//! only on its own statistics, so the three are computed independently.
//! Statistics from multiple sequences are pooled by plain summation before
//! normalizing, in ascending input order.

use ndarray::{Array1, Array2, ArrayViewMut1};
use thiserror::Error;

use crate::error::{Error, Result};
use crate::inference::{self, ObservationSequence};
use crate::model::{
    EmissionModel, HmmParameters, InitialDistribution, TransitionMatrix, VARIANCE_FLOOR,
};

/// Pooled emission statistics, by emission kind.
#[derive(Debug, Clone, PartialEq)]
pub enum EmissionStats {
    /// Expected count of each symbol in each state.
    Categorical { counts: Array2<f64> },
    /// Per-state posterior weight, weighted sum, and weighted square sum of
    /// the observations.
    Gaussian {
        weight: Array1<f64>,
        weighted_sum: Array1<f64>,
        weighted_sq_sum: Array1<f64>,
    },
}

impl EmissionStats {
    fn zeros_like(emit: &EmissionModel) -> Self {
        match emit {
            EmissionModel::Categorical { emit } => EmissionStats::Categorical {
                counts: Array2::zeros((emit.nrows(), emit.ncols())),
            },
            EmissionModel::Gaussian { means, .. } => EmissionStats::Gaussian {
                weight: Array1::zeros(means.len()),
                weighted_sum: Array1::zeros(means.len()),
                weighted_sq_sum: Array1::zeros(means.len()),
            },
        }
    }
}

/// Pooled expectation-step statistics over `n_sequences` sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    /// `initial_post[i] = sum_k p(q_1 = i | O_k)`; sums to the number of
    /// sequences.
    pub initial_post: Array1<f64>,
    /// `trans_counts[[i, j]] = sum_k sum_t xi_k[[t, i, j]]`: expected
    /// transition counts.
    pub trans_counts: Array2<f64>,
    pub emit_stats: EmissionStats,
    pub n_sequences: usize,
    /// Total log-likelihood of all sequences under the parameters the
    /// statistics were computed with.
    pub total_log_likelihood: f64,
}

/// Knobs for [`fit`]. Defaults: 100 iterations, relative tolerance `1e-6`,
/// no probability floors, variance floor [`VARIANCE_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iterations: usize,
    /// Stop when `|l_n - l_{n-1}| / (1 + |l_{n-1}|)` falls below this.
    pub rel_tolerance: f64,
    /// Lower bound applied to transition probabilities before
    /// renormalization; 0 reproduces the plain update.
    pub transition_floor: f64,
    /// Lower bound applied to categorical emission probabilities before
    /// renormalization; 0 reproduces the plain update.
    pub emission_floor: f64,
    /// Lower bound on updated Gaussian variances. Values below the
    /// model-level [`VARIANCE_FLOOR`] are clamped up to it so every update
    /// stays valid.
    pub variance_floor: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            rel_tolerance: 1e-6,
            transition_floor: 0.0,
            emission_floor: 0.0,
            variance_floor: VARIANCE_FLOOR,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig {
                message: "max_iterations must be at least 1".into(),
            });
        }
        if self.rel_tolerance <= 0.0 || !self.rel_tolerance.is_finite() {
            return Err(Error::InvalidConfig {
                message: format!("rel_tolerance must be positive, got {}", self.rel_tolerance),
            });
        }
        for (name, value) in [
            ("transition_floor", self.transition_floor),
            ("emission_floor", self.emission_floor),
        ] {
            if value < 0.0 || !value.is_finite() {
                return Err(Error::InvalidConfig {
                    message: format!("{name} must be non-negative, got {value}"),
                });
            }
        }
        if self.variance_floor <= 0.0 || !self.variance_floor.is_finite() {
            return Err(Error::InvalidConfig {
                message: format!(
                    "variance_floor must be positive, got {}",
                    self.variance_floor
                ),
            });
        }
        Ok(())
    }
}

/// Outcome of [`fit`]: final parameters, the log-likelihood measured at the
/// start of each completed iteration, and whether the stopping criterion was
/// met before the iteration cap.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: HmmParameters,
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Error from [`fit`], carrying the log-likelihood trace of the iterations
/// that completed before the failure.
#[derive(Debug, Error)]
#[error("training failed after {} completed iterations: {source}", partial_trace.len())]
pub struct FitError {
    pub source: Error,
    pub partial_trace: Vec<f64>,
}

/// One expectation step: per-sequence posteriors, summed in ascending input
/// order.
pub fn accumulate(
    params_prev: &HmmParameters,
    sequences: &[ObservationSequence],
) -> Result<SufficientStats> {
    if sequences.is_empty() {
        return Err(Error::NoSequences);
    }
    let n = params_prev.n_states();
    let mut initial_post = Array1::zeros(n);
    let mut trans_counts = Array2::zeros((n, n));
    let mut emit_stats = EmissionStats::zeros_like(&params_prev.emit);
    let mut total_log_likelihood = 0.0;

    for (index, obs) in sequences.iter().enumerate() {
        let annotate = |e: Error| Error::InSequence {
            index,
            source: Box::new(e),
        };
        let trellis = inference::trellis(params_prev, obs).map_err(annotate)?;
        let post = inference::posteriors_from_trellis(params_prev, obs, &trellis)
            .map_err(annotate)?;
        total_log_likelihood += trellis.log_likelihood;

        for i in 0..n {
            initial_post[i] += post.gamma[[0, i]];
        }
        for t in 0..obs.len().saturating_sub(1) {
            for i in 0..n {
                for j in 0..n {
                    trans_counts[[i, j]] += post.xi[[t, i, j]];
                }
            }
        }
        match (&mut emit_stats, obs) {
            (EmissionStats::Categorical { counts }, ObservationSequence::Categorical(symbols)) => {
                for (t, &symbol) in symbols.iter().enumerate() {
                    for i in 0..n {
                        counts[[i, symbol]] += post.gamma[[t, i]];
                    }
                }
            }
            (
                EmissionStats::Gaussian {
                    weight,
                    weighted_sum,
                    weighted_sq_sum,
                },
                ObservationSequence::Gaussian(values),
            ) => {
                for (t, &x) in values.iter().enumerate() {
                    for i in 0..n {
                        let g = post.gamma[[t, i]];
                        weight[i] += g;
                        weighted_sum[i] += g * x;
                        weighted_sq_sum[i] += g * x * x;
                    }
                }
            }
            _ => unreachable!("kind mismatch is rejected by the forward pass"),
        }
    }
    Ok(SufficientStats {
        initial_post,
        trans_counts,
        emit_stats,
        n_sequences: sequences.len(),
        total_log_likelihood,
    })
}

/// New initial distribution: the pooled first-step posterior, normalized.
pub fn update_initial(stats: &SufficientStats) -> Result<InitialDistribution> {
    let sum = stats.initial_post.sum();
    if sum <= 0.0 || !sum.is_finite() {
        return Err(Error::DegenerateInitialStats);
    }
    Ok(InitialDistribution {
        probs: stats.initial_post.mapv(|v| v / sum),
    })
}

/// New transition matrix: expected counts normalized per row, with optional
/// flooring then renormalization. A row with no posterior mass (the state is
/// never occupied before the final step) keeps its previous values.
pub fn update_transitions(
    stats: &SufficientStats,
    params_prev: &HmmParameters,
    floor: f64,
) -> TransitionMatrix {
    let n = stats.trans_counts.nrows();
    let mut rows = Array2::zeros((n, n));
    for i in 0..n {
        let row_sum = stats.trans_counts.row(i).sum();
        if row_sum > 0.0 {
            for j in 0..n {
                rows[[i, j]] = stats.trans_counts[[i, j]] / row_sum;
            }
            floor_and_renormalize(rows.row_mut(i), floor);
        } else {
            rows.row_mut(i).assign(&params_prev.trans.rows.row(i));
        }
    }
    TransitionMatrix { rows }
}

/// New emission model. Categorical rows are expected symbol counts
/// normalized per state (floored like transitions); Gaussian states get the
/// posterior-weighted mean and biased variance, clamped at the variance
/// floor. A state with zero posterior weight keeps its previous parameters.
///
/// Panics if the statistics' emission kind does not match `params_prev`.
pub fn update_emissions(
    stats: &SufficientStats,
    params_prev: &HmmParameters,
    config: &FitConfig,
) -> EmissionModel {
    match (&stats.emit_stats, &params_prev.emit) {
        (EmissionStats::Categorical { counts }, EmissionModel::Categorical { emit: prev }) => {
            let (n, m) = (counts.nrows(), counts.ncols());
            let mut emit = Array2::zeros((n, m));
            for i in 0..n {
                let total = counts.row(i).sum();
                if total > 0.0 {
                    for s in 0..m {
                        emit[[i, s]] = counts[[i, s]] / total;
                    }
                    floor_and_renormalize(emit.row_mut(i), config.emission_floor);
                } else {
                    emit.row_mut(i).assign(&prev.row(i));
                }
            }
            EmissionModel::Categorical { emit }
        }
        (
            EmissionStats::Gaussian {
                weight,
                weighted_sum,
                weighted_sq_sum,
            },
            EmissionModel::Gaussian {
                means: prev_means,
                variances: prev_vars,
            },
        ) => {
            let n = weight.len();
            let floor = config.variance_floor.max(VARIANCE_FLOOR);
            let mut means = Array1::zeros(n);
            let mut variances = Array1::zeros(n);
            for i in 0..n {
                if weight[i] > 0.0 {
                    let mean = weighted_sum[i] / weight[i];
                    let var = weighted_sq_sum[i] / weight[i] - mean * mean;
                    means[i] = mean;
                    variances[i] = var.max(floor);
                } else {
                    means[i] = prev_means[i];
                    variances[i] = prev_vars[i];
                }
            }
            EmissionModel::Gaussian { means, variances }
        }
        _ => panic!("emission statistics kind does not match the previous parameters"),
    }
}

fn floor_and_renormalize(mut row: ArrayViewMut1<'_, f64>, floor: f64) {
    if floor <= 0.0 {
        return;
    }
    row.mapv_inplace(|v| v.max(floor));
    let sum = row.sum();
    row.mapv_inplace(|v| v / sum);
}

/// One full EM iteration: accumulate statistics under `params_prev`, apply
/// the three updates, and return the new parameters together with the total
/// log-likelihood of the data under `params_prev`.
pub fn baum_welch_step(
    params_prev: &HmmParameters,
    sequences: &[ObservationSequence],
    config: &FitConfig,
) -> Result<(HmmParameters, f64)> {
    config.validate()?;
    let stats = accumulate(params_prev, sequences)?;
    let pi = update_initial(&stats)?;
    let trans = update_transitions(&stats, params_prev, config.transition_floor);
    let emit = update_emissions(&stats, params_prev, config);
    let params = HmmParameters {
        states: params_prev.states,
        pi,
        trans,
        emit,
    }
    .validated()?;
    Ok((params, stats.total_log_likelihood))
}

/// Iterate [`baum_welch_step`] until the relative log-likelihood improvement
/// falls below `config.rel_tolerance` or `config.max_iterations` is reached.
/// The trace holds the log-likelihood under the parameters at the start of
/// each completed iteration.
pub fn fit(
    params_init: &HmmParameters,
    sequences: &[ObservationSequence],
    config: &FitConfig,
) -> std::result::Result<FitResult, FitError> {
    let mut trace: Vec<f64> = Vec::new();
    if let Err(source) = config.validate() {
        return Err(FitError {
            source,
            partial_trace: trace,
        });
    }
    let mut params = params_init.clone();
    let mut converged = false;
    for _ in 0..config.max_iterations {
        match baum_welch_step(&params, sequences, config) {
            Ok((next, log_likelihood)) => {
                trace.push(log_likelihood);
                params = next;
                if trace.len() >= 2 {
                    let prev = trace[trace.len() - 2];
                    let cur = trace[trace.len() - 1];
                    if (cur - prev).abs() / (1.0 + prev.abs()) < config.rel_tolerance {
                        converged = true;
                        break;
                    }
                }
            }
            Err(source) => {
                return Err(FitError {
                    source,
                    partial_trace: trace,
                })
            }
        }
    }
    Ok(FitResult {
        params,
        iterations: trace.len(),
        log_likelihood_trace: trace,
        converged,
    })
}
