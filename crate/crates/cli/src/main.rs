//! Command-line driver: train / loglik / decode / sample / init / oracle.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or validation error,
//! 3 training stopped at the iteration cap without converging. Errors go to
//! standard error on a line starting with `error:`.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hmmkit::io::{self, SequenceKind};
use hmmkit::model::VARIANCE_FLOOR;
use hmmkit::oracle;
use hmmkit::training::{fit, FitConfig};
use hmmkit::{forward, random_init, sample_many, viterbi, EmissionSpec, Error};

#[derive(Parser)]
#[command(
    name = "hmmkit",
    version,
    about = "Train, score, decode, and sample hidden Markov models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random model
    Init {
        /// Number of hidden states
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        states: u64,
        /// Emission kind: 'categorical:<n_symbols>' or 'gaussian'
        #[arg(long, value_parser = parse_emission_spec)]
        emission: EmissionSpec,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the model file
        #[arg(long)]
        output: PathBuf,
    },
    /// Run EM on a data file, print the fit report, write the trained model
    Train {
        /// Input model file
        #[arg(long)]
        model: PathBuf,
        /// Sequence file; the model's emission kind decides how it is read
        #[arg(long)]
        data: PathBuf,
        /// Where to write the trained model
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
        max_iterations: u64,
        /// Relative log-likelihood change that counts as converged
        #[arg(long, default_value_t = 1e-6, value_parser = parse_positive_real)]
        tolerance: f64,
        /// Lower bound on transition probabilities (0 disables)
        #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative_real)]
        transition_floor: f64,
        /// Lower bound on categorical emission probabilities (0 disables)
        #[arg(long, default_value_t = 0.0, value_parser = parse_non_negative_real)]
        emission_floor: f64,
        /// Lower bound on Gaussian variances
        #[arg(long, default_value_t = VARIANCE_FLOOR, value_parser = parse_positive_real)]
        variance_floor: f64,
    },
    /// Print total and per-sequence log-likelihoods, one per line
    Loglik {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Print the Viterbi state path per sequence, log joint as a comment line
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Write a sequence file sampled from a model
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// Number of sequences
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        /// Length of each sequence
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        length: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Where to write the sequence file
        #[arg(long)]
        output: PathBuf,
    },
    /// Exact enumeration diagnostics for the first sequence in the data file
    Oracle {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

fn parse_emission_spec(s: &str) -> Result<EmissionSpec, String> {
    if s == "gaussian" {
        return Ok(EmissionSpec::Gaussian);
    }
    if let Some(m) = s.strip_prefix("categorical:") {
        let n_symbols: usize = m
            .parse()
            .map_err(|_| format!("invalid symbol count '{m}'"))?;
        if n_symbols == 0 {
            return Err("symbol count must be at least 1".into());
        }
        return Ok(EmissionSpec::Categorical { n_symbols });
    }
    Err(format!(
        "expected 'categorical:<n_symbols>' or 'gaussian', got '{s}'"
    ))
}

fn parse_positive_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a positive finite number, got '{s}'"))
    }
}

fn parse_non_negative_real(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("must be a non-negative finite number, got '{s}'"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            // clap's rendering already starts with "error: ".
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Init {
            states,
            emission,
            seed,
            output,
        } => {
            let params = random_init(states as usize, emission, seed)?;
            io::save_model(&params, &output)?;
            Ok(0)
        }
        Command::Train {
            model,
            data,
            output,
            max_iterations,
            tolerance,
            transition_floor,
            emission_floor,
            variance_floor,
        } => {
            let params = io::load_model(&model)?;
            let sequences = io::load_sequences(&data, SequenceKind::for_model(&params.emit))?;
            let config = FitConfig {
                max_iterations: max_iterations as usize,
                rel_tolerance: tolerance,
                transition_floor,
                emission_floor,
                variance_floor,
            };
            match fit(&params, &sequences, &config) {
                Ok(result) => {
                    io::save_model(&result.params, &output)?;
                    let stdout = std::io::stdout();
                    io::write_fit_report(&mut stdout.lock(), &result)?;
                    Ok(if result.converged { 0 } else { 3 })
                }
                Err(err) => {
                    // Completed iterations are still reported for diagnosis.
                    let stdout = std::io::stdout();
                    io::write_fit_trace(&mut stdout.lock(), &err.partial_trace)?;
                    Err(err.into())
                }
            }
        }
        Command::Loglik { model, data } => {
            let params = io::load_model(&model)?;
            let sequences = io::load_sequences(&data, SequenceKind::for_model(&params.emit))?;
            let mut per_sequence = Vec::with_capacity(sequences.len());
            for (index, obs) in sequences.iter().enumerate() {
                let pass = forward(&params, obs).map_err(|e| Error::InSequence {
                    index,
                    source: Box::new(e),
                })?;
                per_sequence.push(pass.log_likelihood);
            }
            let total: f64 = per_sequence.iter().sum();
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "total {total}")?;
            for (index, ll) in per_sequence.iter().enumerate() {
                writeln!(out, "{index} {ll}")?;
            }
            Ok(0)
        }
        Command::Decode { model, data } => {
            let params = io::load_model(&model)?;
            let sequences = io::load_sequences(&data, SequenceKind::for_model(&params.emit))?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            for (index, obs) in sequences.iter().enumerate() {
                let (path, log_joint) = viterbi(&params, obs).map_err(|e| Error::InSequence {
                    index,
                    source: Box::new(e),
                })?;
                let rendered: Vec<String> = path.iter().map(|s| s.to_string()).collect();
                writeln!(out, "{}", rendered.join(" "))?;
                writeln!(out, "# sequence {index} log_joint {log_joint}")?;
            }
            Ok(0)
        }
        Command::Sample {
            model,
            count,
            length,
            seed,
            output,
        } => {
            let params = io::load_model(&model)?;
            let draws = sample_many(&params, count as usize, length as usize, seed)?;
            let sequences: Vec<_> = draws.into_iter().map(|(_, obs)| obs).collect();
            io::save_sequences(&sequences, &output)?;
            Ok(0)
        }
        Command::Oracle { model, data } => {
            let params = io::load_model(&model)?;
            let sequences = io::load_sequences(&data, SequenceKind::for_model(&params.emit))?;
            let obs = &sequences[0];
            let likelihood = oracle::enumerate_likelihood(&params, obs)?;
            let exact = oracle::enumerate_posteriors(&params, obs)?;
            let stdout = std::io::stdout();
            let mut out = stdout.lock();
            writeln!(out, "likelihood {likelihood}")?;
            writeln!(out, "log_likelihood {}", likelihood.ln())?;
            for (t, row) in exact.gamma.rows().into_iter().enumerate() {
                let rendered: Vec<String> = row.iter().map(|g| g.to_string()).collect();
                writeln!(out, "gamma {t} {}", rendered.join(" "))?;
            }
            Ok(0)
        }
    }
}
