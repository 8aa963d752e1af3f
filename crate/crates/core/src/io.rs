//! Serialization in stable, human-readable text formats.
//!
//! Model files are JSON documents with top-level fields
//! `{schema_version, n_states, emission: {kind, ...}, pi, trans}`. Reals are
//! written with 17 significant digits, the shortest width that survives a
//! decimal round trip for doubles, so `load(save(m)) == m` bit for bit.
//!
//! Sequence files are line-oriented: one observation sequence per non-empty
//! line, values separated by commas or whitespace, `#` starting a comment
//! that runs to the end of the line. The observation kind (categorical
//! symbols vs. Gaussian reals) is always declared by the caller, never
//! inferred from the data.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::inference::ObservationSequence;
use crate::model::{
    EmissionModel, HmmParameters, InitialDistribution, StateSpace, TransitionMatrix,
};
use crate::training::FitResult;

/// Version written into and accepted from model documents.
pub const SCHEMA_VERSION: u64 = 1;

/// Observation kind declared when loading a sequence file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Categorical,
    Gaussian,
}

impl SequenceKind {
    /// The kind of sequence a model emits.
    pub fn for_model(emit: &EmissionModel) -> Self {
        match emit {
            EmissionModel::Categorical { .. } => SequenceKind::Categorical,
            EmissionModel::Gaussian { .. } => SequenceKind::Gaussian,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    schema_version: u64,
    n_states: usize,
    emission: EmissionDocument,
    pi: Vec<f64>,
    trans: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum EmissionDocument {
    Categorical {
        n_symbols: usize,
        probs: Vec<Vec<f64>>,
    },
    Gaussian {
        means: Vec<f64>,
        variances: Vec<f64>,
    },
}

fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_row(values: impl IntoIterator<Item = f64>) -> String {
    let mut out = String::from("[");
    for (i, v) in values.into_iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(&format_real(v));
    }
    out.push(']');
    out
}

fn format_matrix(rows: &Array2<f64>, indent: &str) -> String {
    let mut out = String::from("[\n");
    for (i, row) in rows.rows().into_iter().enumerate() {
        let _ = write!(out, "{indent}  {}", format_row(row.iter().copied()));
        if i + 1 < rows.nrows() {
            out.push(',');
        }
        out.push('\n');
    }
    let _ = write!(out, "{indent}]");
    out
}

/// Render a model as its JSON document.
pub fn render_model(params: &HmmParameters) -> String {
    let mut out = String::from("{\n");
    let _ = writeln!(out, "  \"schema_version\": {SCHEMA_VERSION},");
    let _ = writeln!(out, "  \"n_states\": {},", params.n_states());
    out.push_str("  \"emission\": {\n");
    match &params.emit {
        EmissionModel::Categorical { emit } => {
            out.push_str("    \"kind\": \"categorical\",\n");
            let _ = writeln!(out, "    \"n_symbols\": {},", emit.ncols());
            let _ = writeln!(out, "    \"probs\": {}", format_matrix(emit, "    "));
        }
        EmissionModel::Gaussian { means, variances } => {
            out.push_str("    \"kind\": \"gaussian\",\n");
            let _ = writeln!(out, "    \"means\": {},", format_row(means.iter().copied()));
            let _ = writeln!(
                out,
                "    \"variances\": {}",
                format_row(variances.iter().copied())
            );
        }
    }
    out.push_str("  },\n");
    let _ = writeln!(
        out,
        "  \"pi\": {},",
        format_row(params.pi.probs.iter().copied())
    );
    let _ = writeln!(
        out,
        "  \"trans\": {}",
        format_matrix(&params.trans.rows, "  ")
    );
    out.push_str("}\n");
    out
}

/// Write a model document to `path`.
pub fn save_model(params: &HmmParameters, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_model(params)).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

fn rows_to_array2(rows: &[Vec<f64>], n_cols: usize, context: &str, path: &str) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((rows.len(), n_cols));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n_cols {
            return Err(Error::Parse {
                path: path.to_string(),
                message: format!(
                    "{context} row {i} has {} entries, expected {n_cols}",
                    row.len()
                ),
            });
        }
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

/// Load and validate a model document.
pub fn load_model(path: impl AsRef<Path>) -> Result<HmmParameters> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path_str.clone(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path_str.clone(),
            message: e.to_string(),
        })?;
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(found) if found == SCHEMA_VERSION => {}
        Some(found) => {
            return Err(Error::UnsupportedSchemaVersion {
                found,
                supported: SCHEMA_VERSION,
            })
        }
        None => {
            return Err(Error::Parse {
                path: path_str,
                message: "schema_version is missing or not an integer".into(),
            })
        }
    }
    let doc: ModelDocument = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path_str.clone(),
        message: e.to_string(),
    })?;
    debug_assert_eq!(doc.schema_version, SCHEMA_VERSION);
    let emit = match doc.emission {
        EmissionDocument::Categorical { n_symbols, probs } => EmissionModel::Categorical {
            emit: rows_to_array2(&probs, n_symbols, "emission", &path_str)?,
        },
        EmissionDocument::Gaussian { means, variances } => EmissionModel::Gaussian {
            means: Array1::from(means),
            variances: Array1::from(variances),
        },
    };
    HmmParameters {
        states: StateSpace {
            n_states: doc.n_states,
        },
        pi: InitialDistribution {
            probs: Array1::from(doc.pi),
        },
        trans: TransitionMatrix {
            rows: rows_to_array2(&doc.trans, doc.n_states, "trans", &path_str)?,
        },
        emit,
    }
    .validated()
}

/// Render observation sequences, one per line, space-separated.
pub fn render_sequences(sequences: &[ObservationSequence]) -> String {
    let mut out = String::new();
    for obs in sequences {
        let line = match obs {
            ObservationSequence::Categorical(symbols) => symbols
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(" "),
            ObservationSequence::Gaussian(values) => values
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" "),
        };
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// Write a sequence file.
pub fn save_sequences(sequences: &[ObservationSequence], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, render_sequences(sequences)).map_err(|source| Error::File {
        path: path.display().to_string(),
        source,
    })
}

/// Load every sequence from a file, in file order. Errors if the file holds
/// no records after comment stripping.
pub fn load_sequences(path: impl AsRef<Path>, kind: SequenceKind) -> Result<Vec<ObservationSequence>> {
    let path = path.as_ref();
    let path_str = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path_str.clone(),
        source,
    })?;
    let mut sequences = Vec::new();
    for (line_index, raw_line) in text.lines().enumerate() {
        let line_no = line_index + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let tokens: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        if tokens.is_empty() {
            continue;
        }
        let obs = match kind {
            SequenceKind::Categorical => {
                let mut symbols = Vec::with_capacity(tokens.len());
                for token in &tokens {
                    let symbol = token.parse::<usize>().map_err(|_| Error::Parse {
                        path: path_str.clone(),
                        message: format!("line {line_no}: invalid symbol '{token}'"),
                    })?;
                    symbols.push(symbol);
                }
                ObservationSequence::Categorical(symbols)
            }
            SequenceKind::Gaussian => {
                let mut values = Vec::with_capacity(tokens.len());
                for token in &tokens {
                    let value = token.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(
                        || Error::Parse {
                            path: path_str.clone(),
                            message: format!("line {line_no}: invalid value '{token}'"),
                        },
                    )?;
                    values.push(value);
                }
                ObservationSequence::Gaussian(values)
            }
        };
        sequences.push(obs);
    }
    if sequences.is_empty() {
        return Err(Error::EmptySequenceFile { path: path_str });
    }
    Ok(sequences)
}

/// Write the per-iteration lines of a fit report: iteration index, the
/// log-likelihood at the start of that iteration, and the relative change
/// from the previous iteration.
pub fn write_fit_trace<W: Write>(w: &mut W, trace: &[f64]) -> std::io::Result<()> {
    for (idx, ll) in trace.iter().enumerate() {
        if idx == 0 {
            writeln!(w, "iter {} loglik {ll} rel_change -", idx + 1)?;
        } else {
            let prev = trace[idx - 1];
            let rel = (ll - prev).abs() / (1.0 + prev.abs());
            writeln!(w, "iter {} loglik {ll} rel_change {rel:e}", idx + 1)?;
        }
    }
    Ok(())
}

/// Write the line-oriented fit report: the per-iteration trace lines, then
/// the convergence flag and iteration count.
pub fn write_fit_report<W: Write>(w: &mut W, result: &FitResult) -> std::io::Result<()> {
    write_fit_trace(w, &result.log_likelihood_trace)?;
    writeln!(w, "converged {}", result.converged)?;
    writeln!(w, "iterations {}", result.iterations)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{random_init, EmissionSpec};

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write as _;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn model_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for (i, params) in [
            random_init(1, EmissionSpec::Categorical { n_symbols: 1 }, 0).unwrap(),
            random_init(3, EmissionSpec::Categorical { n_symbols: 4 }, 5).unwrap(),
            random_init(2, EmissionSpec::Gaussian, 9).unwrap(),
        ]
        .iter()
        .enumerate()
        {
            let path = dir.path().join(format!("model{i}.json"));
            save_model(params, &path).unwrap();
            let loaded = load_model(&path).unwrap();
            assert_eq!(&loaded, params);
        }
    }

    #[test]
    fn load_rejects_bad_row_sum_with_row_index() {
        let doc = r#"{
            "schema_version": 1,
            "n_states": 2,
            "emission": {"kind": "categorical", "n_symbols": 2,
                         "probs": [[0.5, 0.5], [0.5, 0.5]]},
            "pi": [0.5, 0.5],
            "trans": [[0.5, 0.5], [0.5, 0.4]]
        }"#;
        let f = write_temp(doc);
        let err = load_model(f.path()).unwrap_err();
        assert!(err.to_string().contains("transition row 1"), "{err}");
    }

    #[test]
    fn load_rejects_unsupported_schema_version() {
        let doc = r#"{"schema_version": 999, "whatever": true}"#;
        let f = write_temp(doc);
        assert!(matches!(
            load_model(f.path()).unwrap_err(),
            Error::UnsupportedSchemaVersion { found: 999, .. }
        ));
    }

    #[test]
    fn load_rejects_malformed_json_with_position() {
        let f = write_temp("{\n  \"schema_version\": 1,\n");
        let err = load_model(f.path()).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn load_rejects_unknown_fields() {
        let doc = r#"{
            "schema_version": 1,
            "n_states": 1,
            "emission": {"kind": "categorical", "n_symbols": 1, "probs": [[1.0]]},
            "pi": [1.0],
            "trans": [[1.0]],
            "extra": 1
        }"#;
        let f = write_temp(doc);
        assert!(matches!(
            load_model(f.path()).unwrap_err(),
            Error::Parse { .. }
        ));
    }

    #[test]
    fn load_rejects_ragged_matrix() {
        let doc = r#"{
            "schema_version": 1,
            "n_states": 2,
            "emission": {"kind": "categorical", "n_symbols": 2,
                         "probs": [[0.5, 0.5], [0.5, 0.5]]},
            "pi": [0.5, 0.5],
            "trans": [[0.5, 0.5], [1.0]]
        }"#;
        let f = write_temp(doc);
        let err = load_model(f.path()).unwrap_err();
        assert!(err.to_string().contains("trans row 1"), "{err}");
    }

    #[test]
    fn sequences_parse_with_mixed_separators_and_comments() {
        let f = write_temp("# header\n0 1\n1,1 0\n\n# trailing comment\n");
        let sequences = load_sequences(f.path(), SequenceKind::Categorical).unwrap();
        assert_eq!(
            sequences,
            vec![
                ObservationSequence::Categorical(vec![0, 1]),
                ObservationSequence::Categorical(vec![1, 1, 0]),
            ]
        );
    }

    #[test]
    fn comment_only_file_is_empty() {
        let f = write_temp("# comment\n");
        assert!(matches!(
            load_sequences(f.path(), SequenceKind::Categorical).unwrap_err(),
            Error::EmptySequenceFile { .. }
        ));
    }

    #[test]
    fn gaussian_sequences_parse_reals() {
        let f = write_temp("1.5 2.5\n");
        let sequences = load_sequences(f.path(), SequenceKind::Gaussian).unwrap();
        assert_eq!(
            sequences,
            vec![ObservationSequence::Gaussian(vec![1.5, 2.5])]
        );
    }

    #[test]
    fn categorical_rejects_non_integer_token() {
        let f = write_temp("0 1.5\n");
        let err = load_sequences(f.path(), SequenceKind::Categorical).unwrap_err();
        assert!(err.to_string().contains("line 1"), "{err}");
        assert!(err.to_string().contains("1.5"), "{err}");
    }

    #[test]
    fn gaussian_rejects_non_finite_values() {
        let f = write_temp("1.0 inf\n");
        assert!(load_sequences(f.path(), SequenceKind::Gaussian).is_err());
    }

    #[test]
    fn sequence_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seqs.txt");
        let sequences = vec![
            ObservationSequence::Gaussian(vec![0.1, -2.5, 1.0 / 3.0]),
            ObservationSequence::Gaussian(vec![1e-12, 4.0e8]),
        ];
        save_sequences(&sequences, &path).unwrap();
        let loaded = load_sequences(&path, SequenceKind::Gaussian).unwrap();
        assert_eq!(loaded, sequences);
    }

    #[test]
    fn fit_report_format_is_stable() {
        let params = random_init(1, EmissionSpec::Categorical { n_symbols: 1 }, 0).unwrap();
        let result = crate::training::FitResult {
            params,
            log_likelihood_trace: vec![-10.0, -8.0],
            iterations: 2,
            converged: true,
        };
        let mut buf = Vec::new();
        write_fit_report(&mut buf, &result).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iter 1 loglik -10 rel_change -");
        assert!(lines[1].starts_with("iter 2 loglik -8 rel_change"));
        assert_eq!(lines[2], "converged true");
        assert_eq!(lines[3], "iterations 2");
    }
}
