//! Model parameter types, their invariants, and seeded random initialization.
//!
//! A model is the triple (initial distribution, transition matrix, emission
//! model). All probability vectors and matrix rows must sum to 1 within
//! [`PROB_SUM_TOLERANCE`]; Gaussian variances must stay at or above
//! [`VARIANCE_FLOOR`]. State and symbol indices are 0-based everywhere.

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Absolute tolerance on probability sums: strict enough to catch
/// construction bugs, loose enough for float error after normalization.
pub const PROB_SUM_TOLERANCE: f64 = 1e-9;

/// Smallest admissible Gaussian variance, in squared observation units.
/// Keeps EM from collapsing a state onto a single point.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Number of hidden states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateSpace {
    pub n_states: usize,
}

impl StateSpace {
    pub fn new(n_states: usize) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::EmptyStateSpace);
        }
        Ok(Self { n_states })
    }
}

/// Distribution over the state occupied at the first time step.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialDistribution {
    pub probs: Array1<f64>,
}

/// Row-stochastic matrix; `rows[[i, j]]` is the probability of moving from
/// state `i` to state `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub rows: Array2<f64>,
}

/// State-conditional observation distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum EmissionModel {
    /// Finite alphabet of `emit.ncols()` symbols; row `i` is the symbol
    /// distribution for state `i`.
    Categorical { emit: Array2<f64> },
    /// One scalar Gaussian per state.
    Gaussian {
        means: Array1<f64>,
        variances: Array1<f64>,
    },
}

impl EmissionModel {
    pub fn kind(&self) -> &'static str {
        match self {
            EmissionModel::Categorical { .. } => "categorical",
            EmissionModel::Gaussian { .. } => "gaussian",
        }
    }

    /// Number of states this emission model is sized for.
    pub fn n_states(&self) -> usize {
        match self {
            EmissionModel::Categorical { emit } => emit.nrows(),
            EmissionModel::Gaussian { means, .. } => means.len(),
        }
    }

    /// Alphabet size for categorical emissions, `None` for Gaussian.
    pub fn n_symbols(&self) -> Option<usize> {
        match self {
            EmissionModel::Categorical { emit } => Some(emit.ncols()),
            EmissionModel::Gaussian { .. } => None,
        }
    }
}

/// Complete parameter set of a hidden Markov model.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmParameters {
    pub states: StateSpace,
    pub pi: InitialDistribution,
    pub trans: TransitionMatrix,
    pub emit: EmissionModel,
}

impl HmmParameters {
    pub fn n_states(&self) -> usize {
        self.states.n_states
    }

    /// Check every invariant: mutually consistent dimensions, entries in
    /// [0, 1], rows summing to 1 within [`PROB_SUM_TOLERANCE`], variances at
    /// or above [`VARIANCE_FLOOR`], and finite Gaussian parameters.
    pub fn validate(&self) -> Result<()> {
        let n = self.states.n_states;
        if n == 0 {
            return Err(Error::EmptyStateSpace);
        }
        if self.pi.probs.len() != n {
            return Err(Error::Dimension {
                context: "initial distribution".into(),
                expected: n,
                actual: self.pi.probs.len(),
            });
        }
        if self.trans.rows.nrows() != n {
            return Err(Error::Dimension {
                context: "transition matrix rows".into(),
                expected: n,
                actual: self.trans.rows.nrows(),
            });
        }
        if self.trans.rows.ncols() != n {
            return Err(Error::Dimension {
                context: "transition matrix columns".into(),
                expected: n,
                actual: self.trans.rows.ncols(),
            });
        }
        check_probability_row(self.pi.probs.view(), "initial distribution".into())?;
        for (i, row) in self.trans.rows.rows().into_iter().enumerate() {
            check_probability_row(row, format!("transition row {i}"))?;
        }
        match &self.emit {
            EmissionModel::Categorical { emit } => {
                if emit.nrows() != n {
                    return Err(Error::Dimension {
                        context: "emission matrix rows".into(),
                        expected: n,
                        actual: emit.nrows(),
                    });
                }
                if emit.ncols() == 0 {
                    return Err(Error::EmptyAlphabet);
                }
                for (i, row) in emit.rows().into_iter().enumerate() {
                    check_probability_row(row, format!("emission row {i}"))?;
                }
            }
            EmissionModel::Gaussian { means, variances } => {
                if means.len() != n {
                    return Err(Error::Dimension {
                        context: "emission means".into(),
                        expected: n,
                        actual: means.len(),
                    });
                }
                if variances.len() != n {
                    return Err(Error::Dimension {
                        context: "emission variances".into(),
                        expected: n,
                        actual: variances.len(),
                    });
                }
                for (index, &m) in means.iter().enumerate() {
                    if !m.is_finite() {
                        return Err(Error::NonFinite {
                            context: "emission means".into(),
                            index,
                        });
                    }
                }
                for (index, &v) in variances.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::NonFinite {
                            context: "emission variances".into(),
                            index,
                        });
                    }
                    if v < VARIANCE_FLOOR {
                        return Err(Error::VarianceBelowFloor {
                            index,
                            value: v,
                            floor: VARIANCE_FLOOR,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Consuming variant of [`validate`](Self::validate).
    pub fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

fn check_probability_row(row: ArrayView1<'_, f64>, context: String) -> Result<()> {
    for (index, &value) in row.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::ProbabilityOutOfRange {
                context,
                index,
                value,
            });
        }
    }
    let sum = row.sum();
    if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
        return Err(Error::SumNotOne {
            context,
            sum,
            tolerance: PROB_SUM_TOLERANCE,
        });
    }
    Ok(())
}

/// What kind of emission model [`random_init`] should build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionSpec {
    Categorical { n_symbols: usize },
    Gaussian,
}

/// Seeded random parameter set: every probability row is drawn flat over the
/// simplex (independent exponential draws, normalized), so all entries are
/// strictly positive; Gaussian means are standard-normal draws and variances
/// start at 1. All draws come from a ChaCha8 stream seeded with `seed`, so
/// the result is bitwise deterministic in `(n_states, spec, seed)` across
/// platforms.
pub fn random_init(n_states: usize, spec: EmissionSpec, seed: u64) -> Result<HmmParameters> {
    let states = StateSpace::new(n_states)?;
    if let EmissionSpec::Categorical { n_symbols: 0 } = spec {
        return Err(Error::EmptyAlphabet);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = InitialDistribution {
        probs: random_simplex(&mut rng, n_states),
    };
    let mut trans = Array2::zeros((n_states, n_states));
    for i in 0..n_states {
        trans.row_mut(i).assign(&random_simplex(&mut rng, n_states));
    }
    let emit = match spec {
        EmissionSpec::Categorical { n_symbols } => {
            let mut emit = Array2::zeros((n_states, n_symbols));
            for i in 0..n_states {
                emit.row_mut(i).assign(&random_simplex(&mut rng, n_symbols));
            }
            EmissionModel::Categorical { emit }
        }
        EmissionSpec::Gaussian => {
            let means = (0..n_states)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect::<Array1<f64>>();
            EmissionModel::Gaussian {
                means,
                variances: Array1::ones(n_states),
            }
        }
    };
    Ok(HmmParameters {
        states,
        pi,
        trans: TransitionMatrix { rows: trans },
        emit,
    })
}

fn random_simplex(rng: &mut ChaCha8Rng, len: usize) -> Array1<f64> {
    let mut draws = Array1::zeros(len);
    for v in draws.iter_mut() {
        *v = exponential_draw(rng);
    }
    let sum = draws.sum();
    draws.mapv_inplace(|v| v / sum);
    draws
}

fn exponential_draw(rng: &mut ChaCha8Rng) -> f64 {
    // -ln(u) with u in (0, 1); rejects the (measure-zero) draw u = 0.
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -u.ln();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_state_categorical() -> HmmParameters {
        HmmParameters {
            states: StateSpace { n_states: 2 },
            pi: InitialDistribution {
                probs: array![0.6, 0.4],
            },
            trans: TransitionMatrix {
                rows: array![[0.7, 0.3], [0.4, 0.6]],
            },
            emit: EmissionModel::Categorical {
                emit: array![[0.9, 0.1], [0.2, 0.8]],
            },
        }
    }

    #[test]
    fn degenerate_one_state_model_is_valid() {
        let params = HmmParameters {
            states: StateSpace { n_states: 1 },
            pi: InitialDistribution {
                probs: array![1.0],
            },
            trans: TransitionMatrix {
                rows: array![[1.0]],
            },
            emit: EmissionModel::Categorical {
                emit: array![[0.5, 0.5]],
            },
        };
        params.validate().unwrap();
    }

    #[test]
    fn two_state_example_is_valid() {
        two_state_categorical().validate().unwrap();
    }

    #[test]
    fn initial_distribution_sum_violation_is_reported() {
        let mut params = two_state_categorical();
        params.pi.probs = array![0.6, 0.5];
        let err = params.validate().unwrap_err();
        assert!(
            err.to_string().contains("initial distribution sum"),
            "unexpected message: {err}"
        );
    }

    #[test]
    fn transition_row_sum_violation_names_the_row() {
        let mut params = two_state_categorical();
        params.trans.rows = array![[0.7, 0.3], [0.4, 0.5]];
        let err = params.validate().unwrap_err();
        assert!(err.to_string().contains("transition row 1"), "{err}");
    }

    #[test]
    fn negative_entry_is_rejected_with_index() {
        let mut params = two_state_categorical();
        params.pi.probs = array![1.2, -0.2];
        match params.validate().unwrap_err() {
            Error::ProbabilityOutOfRange { index, .. } => assert_eq!(index, 0),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let mut params = two_state_categorical();
        params.pi.probs = array![0.6, 0.3, 0.1];
        match params.validate().unwrap_err() {
            Error::Dimension {
                expected, actual, ..
            } => {
                assert_eq!((expected, actual), (2, 3));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn variance_below_floor_is_rejected() {
        let params = HmmParameters {
            states: StateSpace { n_states: 1 },
            pi: InitialDistribution {
                probs: array![1.0],
            },
            trans: TransitionMatrix {
                rows: array![[1.0]],
            },
            emit: EmissionModel::Gaussian {
                means: array![0.0],
                variances: array![VARIANCE_FLOOR / 2.0],
            },
        };
        match params.validate().unwrap_err() {
            Error::VarianceBelowFloor { index, .. } => assert_eq!(index, 0),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn random_init_single_cell_is_fully_determined() {
        let params = random_init(1, EmissionSpec::Categorical { n_symbols: 1 }, 0).unwrap();
        assert_eq!(params.pi.probs, array![1.0]);
        assert_eq!(params.trans.rows, array![[1.0]]);
        match params.emit {
            EmissionModel::Categorical { emit } => assert_eq!(emit, array![[1.0]]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn random_init_is_deterministic() {
        let a = random_init(2, EmissionSpec::Categorical { n_symbols: 2 }, 42).unwrap();
        let b = random_init(2, EmissionSpec::Categorical { n_symbols: 2 }, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn random_init_gaussian_validates() {
        let params = random_init(3, EmissionSpec::Gaussian, 7).unwrap();
        params.validate().unwrap();
        match &params.emit {
            EmissionModel::Gaussian { variances, .. } => {
                assert!(variances.iter().all(|&v| v >= VARIANCE_FLOOR));
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn random_init_rejects_empty_dimensions() {
        assert!(matches!(
            random_init(0, EmissionSpec::Gaussian, 1),
            Err(Error::EmptyStateSpace)
        ));
        assert!(matches!(
            random_init(2, EmissionSpec::Categorical { n_symbols: 0 }, 1),
            Err(Error::EmptyAlphabet)
        ));
    }

    #[test]
    fn random_init_entries_are_strictly_positive() {
        for seed in 0..20 {
            let params = random_init(3, EmissionSpec::Categorical { n_symbols: 3 }, seed).unwrap();
            params.validate().unwrap();
            assert!(params.pi.probs.iter().all(|&p| p > 0.0));
            assert!(params.trans.rows.iter().all(|&p| p > 0.0));
            if let EmissionModel::Categorical { emit } = &params.emit {
                assert!(emit.iter().all(|&p| p > 0.0));
            }
        }
    }
}
