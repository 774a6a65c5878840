//! CSV datasets, prediction tables and the versioned JSON model document.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a value
//! read back from any of these files is bit-identical to the one written.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{invalid, Result, TsvqrError};
use crate::kernel::KernelSpec;
use crate::model::{assemble_model, FitDiagnostics, LinearCache, TrainedModel};
use crate::qp::SolverConfig;

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Header and numeric rows of a header-first CSV, rejecting ragged or non-numeric rows.
fn read_numeric_csv<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(TsvqrError::Parse {
                line,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut row = Vec::with_capacity(header.len());
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| TsvqrError::Parse {
                line,
                message: format!("column {:?}: {field:?} is not a number", header[col]),
            })?;
            if !v.is_finite() {
                return Err(TsvqrError::Parse {
                    line,
                    message: format!("column {:?}: non-finite value", header[col]),
                });
            }
            row.push(v);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(invalid("dataset has no rows"));
    }
    Ok((header, rows))
}

fn target_index(header: &[String], target_col: Option<&str>) -> Result<usize> {
    match target_col {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| TsvqrError::Parse {
                line: 1,
                message: format!("no column named {name:?}"),
            }),
        None => Ok(header.len() - 1),
    }
}

/// Reads a header-first numeric CSV. The response is the column named
/// `target_col`, or the last column when `None`.
pub fn read_dataset_csv<R: Read>(input: R, target_col: Option<&str>) -> Result<Dataset> {
    let (header, rows) = read_numeric_csv(input)?;
    if header.len() < 2 {
        return Err(TsvqrError::Parse {
            line: 1,
            message: "expected at least one feature column and a target column".into(),
        });
    }
    let target = target_index(&header, target_col)?;
    let n = header.len() - 1;
    let mut features = Vec::with_capacity(rows.len() * n);
    let mut targets = Vec::with_capacity(rows.len());
    for row in &rows {
        for (col, &v) in row.iter().enumerate() {
            if col == target {
                targets.push(v);
            } else {
                features.push(v);
            }
        }
    }
    let inputs =
        Array2::from_shape_vec((targets.len(), n), features).map_err(|e| invalid(e.to_string()))?;
    let names = header
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i != target)
        .map(|(_, h)| h)
        .collect();
    Dataset::new(inputs, Array1::from(targets))?.with_feature_names(names)
}

/// Reads query inputs for a model with `n_features` inputs. A file with one
/// extra column is treated as a dataset and its response column is dropped.
pub fn read_inputs_csv<R: Read>(
    input: R,
    n_features: usize,
    target_col: Option<&str>,
) -> Result<Array2<f64>> {
    let (header, rows) = read_numeric_csv(input)?;
    let drop = if header.len() == n_features {
        None
    } else if header.len() == n_features + 1 {
        Some(target_index(&header, target_col)?)
    } else {
        return Err(TsvqrError::DimensionMismatch {
            expected: n_features,
            found: header.len(),
        });
    };
    let flat: Vec<f64> = rows
        .iter()
        .flat_map(|r| {
            r.iter()
                .enumerate()
                .filter(|(c, _)| Some(*c) != drop)
                .map(|(_, v)| *v)
        })
        .collect();
    Array2::from_shape_vec((rows.len(), n_features), flat).map_err(|e| invalid(e.to_string()))
}

pub fn write_dataset_csv<W: Write>(data: &Dataset, mut out: W) -> Result<()> {
    let names: Vec<String> = match data.feature_names() {
        Some(n) => n.to_vec(),
        None => (0..data.n_features()).map(|i| format!("x{i}")).collect(),
    };
    writeln!(out, "{},target", names.join(","))?;
    for (row, y) in data.inputs().rows().into_iter().zip(data.targets()) {
        for v in row {
            write!(out, "{v},")?;
        }
        writeln!(out, "{y}")?;
    }
    Ok(())
}

/// Writes `f_lower,f_upper,f` rows.
pub fn write_predictions_csv<W: Write>(bounds: &[(f64, f64)], mut out: W) -> Result<()> {
    writeln!(out, "f_lower,f_upper,f")?;
    for &(lo, up) in bounds {
        writeln!(out, "{lo},{up},{}", 0.5 * (lo + up))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HyperparamsDoc {
    c1: f64,
    c2: f64,
    eps1: f64,
    eps2: f64,
    tau: f64,
    solver: SolverConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelDoc {
    schema_version: u32,
    kernel: KernelSpec,
    hyperparams: HyperparamsDoc,
    standardization: Option<Standardizer>,
    alpha_lower: Vec<f64>,
    alpha_upper: Vec<f64>,
    train_inputs: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    linear_cache: Option<LinearCache>,
    diagnostics: FitDiagnostics,
    #[serde(default)]
    fit_seconds: f64,
}

/// Serializes a model as pretty JSON.
pub fn save_model<W: Write>(model: &TrainedModel, out: W) -> Result<()> {
    let h = model.hyper();
    let doc = ModelDoc {
        schema_version: MODEL_SCHEMA_VERSION,
        kernel: h.kernel,
        hyperparams: HyperparamsDoc {
            c1: h.c1,
            c2: h.c2,
            eps1: h.eps1,
            eps2: h.eps2,
            tau: h.tau,
            solver: h.solver,
        },
        standardization: model.standardizer().cloned(),
        alpha_lower: model.alpha_lower().to_vec(),
        alpha_upper: model.alpha_upper().to_vec(),
        train_inputs: model
            .train_inputs()
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        linear_cache: model.linear_cache().cloned(),
        diagnostics: *model.diagnostics(),
        fit_seconds: model.fit_seconds(),
    };
    serde_json::to_writer_pretty(out, &doc)?;
    Ok(())
}

pub fn load_model<R: Read>(input: R) -> Result<TrainedModel> {
    let doc: ModelDoc = serde_json::from_reader(input)?;
    if doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(TsvqrError::SchemaVersion(doc.schema_version));
    }
    let l = doc.train_inputs.len();
    let n = doc.train_inputs.first().map_or(0, Vec::len);
    if l == 0 || n == 0 || doc.train_inputs.iter().any(|r| r.len() != n) {
        return Err(invalid(
            "model training inputs must form a non-empty rectangular matrix",
        ));
    }
    let flat: Vec<f64> = doc.train_inputs.into_iter().flatten().collect();
    let inputs = Array2::from_shape_vec((l, n), flat).map_err(|e| invalid(e.to_string()))?;
    let h = doc.hyperparams;
    let hyper = crate::params::Hyperparams {
        c1: h.c1,
        c2: h.c2,
        eps1: h.eps1,
        eps2: h.eps2,
        tau: h.tau,
        kernel: doc.kernel,
        solver: h.solver,
    };
    let mut model = assemble_model(
        hyper,
        doc.alpha_lower,
        doc.alpha_upper,
        inputs,
        doc.standardization,
        doc.linear_cache,
        doc.diagnostics,
    )?;
    model.fit_seconds = doc.fit_seconds;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_reader_drops_response_when_present() {
        let with_y = read_inputs_csv("a,b,y\n1,2,3\n".as_bytes(), 2, None).unwrap();
        assert_eq!(with_y.row(0).to_vec(), vec![1.0, 2.0]);
        let named = read_inputs_csv("y,a,b\n3,1,2\n".as_bytes(), 2, Some("y")).unwrap();
        assert_eq!(named.row(0).to_vec(), vec![1.0, 2.0]);
        let bare = read_inputs_csv("a,b\n1,2\n".as_bytes(), 2, None).unwrap();
        assert_eq!(bare.row(0).to_vec(), vec![1.0, 2.0]);
        assert!(matches!(
            read_inputs_csv("a,b,c,d\n1,2,3,4\n".as_bytes(), 2, None),
            Err(TsvqrError::DimensionMismatch {
                expected: 2,
                found: 4
            })
        ));
    }

    #[test]
    fn reads_last_column_as_target() {
        let csv = "a,b,y\n1,2,3\n4,5,6\n";
        let d = read_dataset_csv(csv.as_bytes(), None).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.n_features(), 2);
        assert_eq!(d.targets().to_vec(), vec![3.0, 6.0]);
        assert_eq!(
            d.feature_names().unwrap(),
            &["a".to_string(), "b".to_string()]
        );
    }

    #[test]
    fn reads_named_target_column() {
        let csv = "y,a\n1,2\n3,4\n";
        let d = read_dataset_csv(csv.as_bytes(), Some("y")).unwrap();
        assert_eq!(d.targets().to_vec(), vec![1.0, 3.0]);
        assert_eq!(d.inputs().column(0).to_vec(), vec![2.0, 4.0]);
        assert!(read_dataset_csv(csv.as_bytes(), Some("nope")).is_err());
    }

    #[test]
    fn malformed_rows_report_line_numbers() {
        let csv = "a,y\n1,2\n3\n";
        match read_dataset_csv(csv.as_bytes(), None) {
            Err(TsvqrError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "a,y\n1,2\n3,4\nfoo,1\n";
        match read_dataset_csv(csv.as_bytes(), None) {
            Err(TsvqrError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(read_dataset_csv("a,y\n".as_bytes(), None).is_err());
        assert!(read_dataset_csv("y\n1\n".as_bytes(), None).is_err());
    }

    #[test]
    fn dataset_csv_round_trip_is_exact() {
        let d = Dataset::from_rows(
            &[vec![0.1 + 0.2, -1e-300], vec![std::f64::consts::PI, 7.0]],
            &[1.0 / 3.0, -2.5e17],
        )
        .unwrap()
        .with_feature_names(vec!["u".into(), "v".into()])
        .unwrap();
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf).unwrap();
        let back = read_dataset_csv(buf.as_slice(), None).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn rejects_unknown_schema_version() {
        let doc = r#"{"schema_version": 99}"#;
        assert!(load_model(doc.as_bytes()).is_err());
    }
}
