//! Scaled forward-backward recursions, log-likelihood evaluation, posterior
//! statistics, Viterbi decoding, and seeded sampling for a single sequence.
//!
//! Underflow is handled by per-step scaling: each forward row is normalized
//! to sum to 1 and the scale factor `c_t` (the reciprocal of the unnormalized
//! row sum) is recorded, so the log-likelihood is `-sum(log c_t)`. Gaussian
//! emission densities are evaluated in log space and shifted by the per-step
//! maximum log density before exponentiation, which keeps the row computation
//! conditioned even for observations far from every state's mean; the stored
//! scale is then the reciprocal of the shift-adjusted row sum (so it stays
//! finite no matter how unlikely the observation) and the shift itself is
//! folded into the log-likelihood. Categorical emissions have shift 0, so
//! there the stored scales are exactly the reciprocal row sums.

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{EmissionModel, HmmParameters};

/// One observation sequence; symbols for categorical models, scalars for
/// Gaussian models.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationSequence {
    Categorical(Vec<usize>),
    Gaussian(Vec<f64>),
}

impl ObservationSequence {
    pub fn len(&self) -> usize {
        match self {
            ObservationSequence::Categorical(s) => s.len(),
            ObservationSequence::Gaussian(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ObservationSequence::Categorical(_) => "categorical",
            ObservationSequence::Gaussian(_) => "gaussian",
        }
    }
}

/// Scaled forward pass: `alpha_hat` rows sum to 1 and `scales[t]` is the
/// reciprocal of the (shift-adjusted) unnormalized row sum at step `t`.
/// With categorical emissions the shift is zero, so
/// `log_likelihood = -sum(log scales[t])` exactly; with Gaussian emissions
/// the per-step log-density shifts are folded into `log_likelihood`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub alpha_hat: Array2<f64>,
    pub scales: Array1<f64>,
    pub log_likelihood: f64,
}

/// Scaled forward and backward variables for one sequence, with the shared
/// per-step scale factors and the sequence log-likelihood.
#[derive(Debug, Clone)]
pub struct ScaledTrellis {
    pub alpha_hat: Array2<f64>,
    pub beta_hat: Array2<f64>,
    pub scales: Array1<f64>,
    pub log_likelihood: f64,
}

/// Per-time posterior statistics given a parameter set:
/// `gamma[[t, i]] = p(q_t = i | O)` and
/// `xi[[t, i, j]] = p(q_t = i, q_{t+1} = j | O)` for `t < T-1`.
#[derive(Debug, Clone)]
pub struct PosteriorStats {
    pub gamma: Array2<f64>,
    pub xi: Array3<f64>,
}

pub(crate) fn check_compatible(params: &HmmParameters, obs: &ObservationSequence) -> Result<()> {
    if obs.is_empty() {
        return Err(Error::EmptySequence);
    }
    match (&params.emit, obs) {
        (EmissionModel::Categorical { emit }, ObservationSequence::Categorical(symbols)) => {
            let n_symbols = emit.ncols();
            for (position, &symbol) in symbols.iter().enumerate() {
                if symbol >= n_symbols {
                    return Err(Error::SymbolOutOfRange {
                        position,
                        symbol,
                        n_symbols,
                    });
                }
            }
            Ok(())
        }
        (EmissionModel::Gaussian { .. }, ObservationSequence::Gaussian(values)) => {
            for (index, &v) in values.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite {
                        context: "observation".into(),
                        index,
                    });
                }
            }
            Ok(())
        }
        (emit, obs) => Err(Error::EmissionKindMismatch {
            expected: emit.kind(),
            observed: obs.kind(),
        }),
    }
}

pub(crate) fn gaussian_log_density(mean: f64, variance: f64, x: f64) -> f64 {
    let ln_two_pi = (2.0 * std::f64::consts::PI).ln();
    -0.5 * (ln_two_pi + variance.ln()) - (x - mean) * (x - mean) / (2.0 * variance)
}

/// Emission probability (categorical) or density (Gaussian) of observation
/// `t` in `state`.
pub(crate) fn emission_prob(
    params: &HmmParameters,
    obs: &ObservationSequence,
    t: usize,
    state: usize,
) -> f64 {
    match (&params.emit, obs) {
        (EmissionModel::Categorical { emit }, ObservationSequence::Categorical(symbols)) => {
            emit[[state, symbols[t]]]
        }
        (EmissionModel::Gaussian { means, variances }, ObservationSequence::Gaussian(values)) => {
            gaussian_log_density(means[state], variances[state], values[t]).exp()
        }
        _ => unreachable!("kind mismatch must be rejected before evaluation"),
    }
}

pub(crate) fn emission_log_prob(
    params: &HmmParameters,
    obs: &ObservationSequence,
    t: usize,
    state: usize,
) -> f64 {
    match (&params.emit, obs) {
        (EmissionModel::Categorical { emit }, ObservationSequence::Categorical(symbols)) => {
            emit[[state, symbols[t]]].ln()
        }
        (EmissionModel::Gaussian { means, variances }, ObservationSequence::Gaussian(values)) => {
            gaussian_log_density(means[state], variances[state], values[t])
        }
        _ => unreachable!("kind mismatch must be rejected before evaluation"),
    }
}

/// Fills `buf[i]` with a rescaled emission weight for observation `t` and
/// returns the log shift that was removed, so the true weight is
/// `buf[i] * exp(shift)`. Categorical emissions are used as-is (shift 0);
/// Gaussian densities are shifted by their per-step maximum log density.
fn emission_weights(
    params: &HmmParameters,
    obs: &ObservationSequence,
    t: usize,
    buf: &mut [f64],
) -> f64 {
    match (&params.emit, obs) {
        (EmissionModel::Categorical { emit }, ObservationSequence::Categorical(symbols)) => {
            let symbol = symbols[t];
            for (i, b) in buf.iter_mut().enumerate() {
                *b = emit[[i, symbol]];
            }
            0.0
        }
        (EmissionModel::Gaussian { means, variances }, ObservationSequence::Gaussian(values)) => {
            let x = values[t];
            let mut shift = f64::NEG_INFINITY;
            for (i, b) in buf.iter_mut().enumerate() {
                *b = gaussian_log_density(means[i], variances[i], x);
                shift = shift.max(*b);
            }
            for b in buf.iter_mut() {
                *b = (*b - shift).exp();
            }
            shift
        }
        _ => unreachable!("kind mismatch must be rejected before evaluation"),
    }
}

/// Scaled forward recursion. `alpha_hat[[t, i]]` is proportional to
/// `p(o_1..o_t, q_t = i)` with each row normalized to 1.
pub fn forward(params: &HmmParameters, obs: &ObservationSequence) -> Result<ForwardPass> {
    check_compatible(params, obs)?;
    let n = params.n_states();
    let t_len = obs.len();
    let mut alpha = Array2::zeros((t_len, n));
    let mut scales = Array1::zeros(t_len);
    let mut weights = vec![0.0; n];
    let mut log_likelihood = 0.0;

    for t in 0..t_len {
        let shift = emission_weights(params, obs, t, &mut weights);
        let mut row_sum = 0.0;
        if t == 0 {
            for i in 0..n {
                let v = params.pi.probs[i] * weights[i];
                alpha[[0, i]] = v;
                row_sum += v;
            }
        } else {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += alpha[[t - 1, i]] * params.trans.rows[[i, j]];
                }
                let v = acc * weights[j];
                alpha[[t, j]] = v;
                row_sum += v;
            }
        }
        if row_sum <= 0.0 || !row_sum.is_finite() {
            return Err(Error::ZeroProbability { step: t });
        }
        let scale = row_sum.recip();
        if !scale.is_finite() {
            return Err(Error::ZeroProbability { step: t });
        }
        // The true unnormalized row sum is row_sum * exp(shift).
        log_likelihood += row_sum.ln() + shift;
        scales[t] = scale;
        for i in 0..n {
            alpha[[t, i]] /= row_sum;
        }
    }
    Ok(ForwardPass {
        alpha_hat: alpha,
        scales,
        log_likelihood,
    })
}

/// Scaled backward recursion using the scale factors produced by [`forward`]
/// on the same `(params, obs)`. The last row equals `scales[T-1]`, and
/// `alpha_hat * beta_hat` normalized per row gives the state posteriors.
pub fn backward(
    params: &HmmParameters,
    obs: &ObservationSequence,
    scales: &Array1<f64>,
) -> Result<Array2<f64>> {
    check_compatible(params, obs)?;
    let n = params.n_states();
    let t_len = obs.len();
    if scales.len() != t_len {
        return Err(Error::Dimension {
            context: "scales".into(),
            expected: t_len,
            actual: scales.len(),
        });
    }
    let mut beta = Array2::zeros((t_len, n));
    for i in 0..n {
        beta[[t_len - 1, i]] = scales[t_len - 1];
    }
    let mut weights = vec![0.0; n];
    for t in (0..t_len - 1).rev() {
        // The emission shift at t+1 cancels against the shift carried by the
        // next row, so the recursion only needs the stored scale.
        let _ = emission_weights(params, obs, t + 1, &mut weights);
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += params.trans.rows[[i, j]] * weights[j] * beta[[t + 1, j]];
            }
            beta[[t, i]] = acc * scales[t];
        }
    }
    Ok(beta)
}

/// Run both recursions and package the result.
pub fn trellis(params: &HmmParameters, obs: &ObservationSequence) -> Result<ScaledTrellis> {
    let fwd = forward(params, obs)?;
    let beta_hat = backward(params, obs, &fwd.scales)?;
    Ok(ScaledTrellis {
        alpha_hat: fwd.alpha_hat,
        beta_hat,
        scales: fwd.scales,
        log_likelihood: fwd.log_likelihood,
    })
}

/// Posterior state and transition statistics for one sequence.
pub fn posteriors(params: &HmmParameters, obs: &ObservationSequence) -> Result<PosteriorStats> {
    let tr = trellis(params, obs)?;
    posteriors_from_trellis(params, obs, &tr)
}

/// Posterior statistics from an already-computed trellis; useful when the
/// caller also needs the trellis log-likelihood.
pub fn posteriors_from_trellis(
    params: &HmmParameters,
    obs: &ObservationSequence,
    trellis: &ScaledTrellis,
) -> Result<PosteriorStats> {
    let n = params.n_states();
    let t_len = obs.len();
    let mut gamma = Array2::zeros((t_len, n));
    for t in 0..t_len {
        let mut sum = 0.0;
        for i in 0..n {
            let v = trellis.alpha_hat[[t, i]] * trellis.beta_hat[[t, i]];
            gamma[[t, i]] = v;
            sum += v;
        }
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroProbability { step: t });
        }
        for i in 0..n {
            gamma[[t, i]] /= sum;
        }
    }

    let mut xi = Array3::zeros((t_len - 1, n, n));
    let mut weights = vec![0.0; n];
    for t in 0..t_len - 1 {
        // The shift cancels in the normalization below.
        let _ = emission_weights(params, obs, t + 1, &mut weights);
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = trellis.alpha_hat[[t, i]]
                    * params.trans.rows[[i, j]]
                    * weights[j]
                    * trellis.beta_hat[[t + 1, j]];
                xi[[t, i, j]] = v;
                sum += v;
            }
        }
        if sum <= 0.0 || !sum.is_finite() {
            return Err(Error::ZeroProbability { step: t });
        }
        for i in 0..n {
            for j in 0..n {
                xi[[t, i, j]] /= sum;
            }
        }
    }
    Ok(PosteriorStats { gamma, xi })
}

/// Most likely state path and its log joint probability `log p(O, Q)`.
/// Ties are broken toward the lower state index.
pub fn viterbi(params: &HmmParameters, obs: &ObservationSequence) -> Result<(Vec<usize>, f64)> {
    check_compatible(params, obs)?;
    let n = params.n_states();
    let t_len = obs.len();
    let mut score = Array2::from_elem((t_len, n), f64::NEG_INFINITY);
    let mut backpointer = Array2::<usize>::zeros((t_len, n));

    for i in 0..n {
        score[[0, i]] = params.pi.probs[i].ln() + emission_log_prob(params, obs, 0, i);
    }
    for t in 1..t_len {
        for j in 0..n {
            let mut best = f64::NEG_INFINITY;
            let mut arg = 0;
            for i in 0..n {
                let cand = score[[t - 1, i]] + params.trans.rows[[i, j]].ln();
                if cand > best {
                    best = cand;
                    arg = i;
                }
            }
            score[[t, j]] = best + emission_log_prob(params, obs, t, j);
            backpointer[[t, j]] = arg;
        }
    }

    let mut best = f64::NEG_INFINITY;
    let mut last = 0;
    for j in 0..n {
        if score[[t_len - 1, j]] > best {
            best = score[[t_len - 1, j]];
            last = j;
        }
    }
    if best == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation);
    }
    let mut path = vec![0; t_len];
    path[t_len - 1] = last;
    for t in (0..t_len - 1).rev() {
        path[t] = backpointer[[t + 1, path[t + 1]]];
    }
    Ok((path, best))
}

/// Draw a state path and observation sequence of the given length, using a
/// ChaCha8 stream seeded with `seed`; deterministic in
/// `(params, length, seed)` across platforms.
pub fn sample(
    params: &HmmParameters,
    length: usize,
    seed: u64,
) -> Result<(Vec<usize>, ObservationSequence)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_with_rng(params, length, &mut rng)
}

/// Draw `count` sequences of the given length from a single seeded ChaCha8
/// stream. Deterministic in `(params, count, length, seed)`.
pub fn sample_many(
    params: &HmmParameters,
    count: usize,
    length: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, ObservationSequence)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| sample_with_rng(params, length, &mut rng))
        .collect()
}

/// Like [`sample`], drawing from a caller-supplied generator so several
/// sequences can share one seeded stream. States and observations are drawn
/// in chronological order, one state draw then one emission draw per step.
pub fn sample_with_rng<R: Rng>(
    params: &HmmParameters,
    length: usize,
    rng: &mut R,
) -> Result<(Vec<usize>, ObservationSequence)> {
    params.validate()?;
    if length == 0 {
        return Err(Error::EmptySequence);
    }
    let mut states = Vec::with_capacity(length);
    let mut symbols = Vec::new();
    let mut values = Vec::new();
    let mut state = draw_categorical(rng, params.pi.probs.iter().copied());
    for t in 0..length {
        if t > 0 {
            state = draw_categorical(rng, params.trans.rows.row(state).iter().copied());
        }
        states.push(state);
        match &params.emit {
            EmissionModel::Categorical { emit } => {
                symbols.push(draw_categorical(rng, emit.row(state).iter().copied()));
            }
            EmissionModel::Gaussian { means, variances } => {
                let z: f64 = rng.sample(StandardNormal);
                values.push(means[state] + variances[state].sqrt() * z);
            }
        }
    }
    let obs = match &params.emit {
        EmissionModel::Categorical { .. } => ObservationSequence::Categorical(symbols),
        EmissionModel::Gaussian { .. } => ObservationSequence::Gaussian(values),
    };
    Ok((states, obs))
}

fn draw_categorical<R: Rng>(rng: &mut R, weights: impl Iterator<Item = f64>) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Row sums can fall a hair short of 1; attribute the remainder to the
    // last state with any mass.
    last_positive
}
