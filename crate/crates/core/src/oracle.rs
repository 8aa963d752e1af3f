//! Exact reference answers by brute-force enumeration over all `N^T` hidden
//! state paths. Slow by design; guarded to desk-scale instances and meant as
//! the independent ground truth for the recursive implementations.
//!
//! With Gaussian emissions the per-path weight is a density, so `likelihood`
//! is a density value and need not be bounded by 1.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::inference::{check_compatible, emission_log_prob, emission_prob, ObservationSequence};
use crate::model::HmmParameters;

/// Upper bound on `N^T` accepted by the enumeration routines.
pub const MAX_ENUMERATED_PATHS: u64 = 1_000_000;

/// Exact per-time posteriors and likelihood for one sequence.
#[derive(Debug, Clone)]
pub struct ExactPosteriors {
    pub likelihood: f64,
    pub gamma: Array2<f64>,
    pub xi: Array3<f64>,
}

/// Compensated (Kahan) accumulator: many tiny path terms add up with less
/// rounding error than plain summation.
#[derive(Debug, Clone, Copy, Default)]
struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.compensation;
        let t = self.sum + y;
        self.compensation = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum
    }
}

fn guard_instance(params: &HmmParameters, obs: &ObservationSequence) -> Result<()> {
    check_compatible(params, obs)?;
    let n = params.n_states();
    let t_len = obs.len();
    let too_large = u32::try_from(t_len)
        .ok()
        .and_then(|t| (n as u64).checked_pow(t))
        .map(|paths| paths > MAX_ENUMERATED_PATHS)
        .unwrap_or(true);
    if too_large {
        return Err(Error::EnumerationTooLarge {
            n_states: n,
            len: t_len,
            limit: MAX_ENUMERATED_PATHS,
        });
    }
    Ok(())
}

/// Visit every state path of length `t_len` over `n` states in
/// lexicographic order.
fn for_each_path(n: usize, t_len: usize, mut visit: impl FnMut(&[usize])) {
    let mut path = vec![0usize; t_len];
    loop {
        visit(&path);
        let mut pos = t_len;
        while pos > 0 {
            path[pos - 1] += 1;
            if path[pos - 1] < n {
                break;
            }
            path[pos - 1] = 0;
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
    }
}

fn path_probability(params: &HmmParameters, obs: &ObservationSequence, path: &[usize]) -> f64 {
    let mut p = params.pi.probs[path[0]] * emission_prob(params, obs, 0, path[0]);
    for t in 1..path.len() {
        p *= params.trans.rows[[path[t - 1], path[t]]] * emission_prob(params, obs, t, path[t]);
    }
    p
}

fn path_log_probability(params: &HmmParameters, obs: &ObservationSequence, path: &[usize]) -> f64 {
    let mut lp = params.pi.probs[path[0]].ln() + emission_log_prob(params, obs, 0, path[0]);
    for t in 1..path.len() {
        lp += params.trans.rows[[path[t - 1], path[t]]].ln()
            + emission_log_prob(params, obs, t, path[t]);
    }
    lp
}

/// `p(O)` as the direct sum of the joint over all state paths.
pub fn enumerate_likelihood(params: &HmmParameters, obs: &ObservationSequence) -> Result<f64> {
    guard_instance(params, obs)?;
    let mut total = KahanSum::default();
    for_each_path(params.n_states(), obs.len(), |path| {
        total.add(path_probability(params, obs, path));
    });
    Ok(total.value())
}

/// Exact `gamma` and `xi` as ratios of path sums.
pub fn enumerate_posteriors(
    params: &HmmParameters,
    obs: &ObservationSequence,
) -> Result<ExactPosteriors> {
    guard_instance(params, obs)?;
    let n = params.n_states();
    let t_len = obs.len();
    let mut total = KahanSum::default();
    let mut gamma = vec![KahanSum::default(); t_len * n];
    let mut xi = vec![KahanSum::default(); t_len.saturating_sub(1) * n * n];
    for_each_path(n, t_len, |path| {
        let p = path_probability(params, obs, path);
        total.add(p);
        for (t, &state) in path.iter().enumerate() {
            gamma[t * n + state].add(p);
        }
        for t in 0..t_len - 1 {
            xi[(t * n + path[t]) * n + path[t + 1]].add(p);
        }
    });
    let likelihood = total.value();
    if likelihood <= 0.0 || !likelihood.is_finite() {
        return Err(Error::ZeroLikelihood);
    }
    let gamma = Array2::from_shape_fn((t_len, n), |(t, i)| gamma[t * n + i].value() / likelihood);
    let xi = Array3::from_shape_fn((t_len - 1, n, n), |(t, i, j)| {
        xi[(t * n + i) * n + j].value() / likelihood
    });
    Ok(ExactPosteriors {
        likelihood,
        gamma,
        xi,
    })
}

/// Expected complete-data log-likelihood of `params_new` under the path
/// posterior induced by `params_prev`, summed over all sequences:
/// `sum_k sum_paths p(path | O_k, prev) * log p(O_k, path | new)`.
///
/// Paths with zero posterior contribute nothing even where the log factor is
/// `-inf`; a path with positive posterior but zero probability under
/// `params_new` makes the result `-inf`.
pub fn enumerate_q(
    params_new: &HmmParameters,
    params_prev: &HmmParameters,
    sequences: &[ObservationSequence],
) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::NoSequences);
    }
    let mut total = KahanSum::default();
    let mut hit_neg_inf = false;
    for obs in sequences {
        let likelihood_prev = enumerate_likelihood(params_prev, obs)?;
        if likelihood_prev <= 0.0 || !likelihood_prev.is_finite() {
            return Err(Error::ZeroLikelihood);
        }
        for_each_path(params_prev.n_states(), obs.len(), |path| {
            let p = path_probability(params_prev, obs, path);
            if p == 0.0 {
                return;
            }
            let posterior = p / likelihood_prev;
            let log_joint_new = path_log_probability(params_new, obs, path);
            if log_joint_new == f64::NEG_INFINITY {
                hit_neg_inf = true;
            } else {
                total.add(posterior * log_joint_new);
            }
        });
    }
    if hit_neg_inf {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(total.value())
}

/// Entropy of the joint path posterior over all sequences,
/// `-sum_k sum_paths p(path | O_k) ln p(path | O_k)`. Together with
/// [`enumerate_q`] this gives the identity
/// `Q(prev, prev) + entropy = total log-likelihood`.
pub fn path_posterior_entropy(
    params: &HmmParameters,
    sequences: &[ObservationSequence],
) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::NoSequences);
    }
    let mut total = KahanSum::default();
    for obs in sequences {
        let likelihood = enumerate_likelihood(params, obs)?;
        if likelihood <= 0.0 || !likelihood.is_finite() {
            return Err(Error::ZeroLikelihood);
        }
        for_each_path(params.n_states(), obs.len(), |path| {
            let p = path_probability(params, obs, path);
            if p > 0.0 {
                let posterior = p / likelihood;
                total.add(-posterior * posterior.ln());
            }
        });
    }
    Ok(total.value())
}
