//! CSV ingestion and serialization.
//!
//! Layout: `user_id,<feature columns...>,treatment,<response columns...>`
//! with a header row, feature columns in schema order.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::discretize::{bin_index, discretize_fit};
use crate::data::schema::{DatasetSchema, FeatureKind};
use crate::data::{DataError, FeatureValue, Instance, RawRow};

/// Parses a dataset file against the schema. Row numbers in errors are
/// 1-based counting the header.
pub fn read_raw_csv(path: &Path, schema: &DatasetSchema) -> Result<Vec<RawRow>, DataError> {
    schema.validate()?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| DataError::Invalid(format!("cannot open {}: {e}", path.display())))?;

    let expected = expected_header(schema);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::Parse { row: 1, detail: e.to_string() })?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if header != expected {
        return Err(DataError::Parse {
            row: 1,
            detail: format!(
                "header mismatch: expected `{}`, found `{}`",
                expected.join(","),
                header.join(",")
            ),
        });
    }

    let f = schema.num_features();
    let r = schema.num_responses();
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row_no = idx + 2;
        let record = record.map_err(|e| DataError::Parse { row: row_no, detail: e.to_string() })?;
        if record.len() != expected.len() {
            return Err(DataError::Parse {
                row: row_no,
                detail: format!("expected {} columns, found {}", expected.len(), record.len()),
            });
        }
        let user_id = record[0].to_string();
        let mut values = Vec::with_capacity(f);
        for (j, spec) in schema.features.iter().enumerate() {
            let cell = &record[1 + j];
            let value = match &spec.kind {
                FeatureKind::Categorical { cardinality } => {
                    let id: usize = cell.parse().map_err(|_| DataError::Parse {
                        row: row_no,
                        detail: format!("feature `{}`: non-integer cell `{cell}`", spec.name),
                    })?;
                    if id >= *cardinality {
                        return Err(DataError::Parse {
                            row: row_no,
                            detail: format!(
                                "feature `{}`: id {id} outside cardinality {cardinality}",
                                spec.name
                            ),
                        });
                    }
                    FeatureValue::Categorical(id)
                }
                FeatureKind::Continuous { .. } => {
                    let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                        row: row_no,
                        detail: format!("feature `{}`: non-numeric cell `{cell}`", spec.name),
                    })?;
                    FeatureValue::Continuous(v)
                }
            };
            values.push(value);
        }
        let t_cell = &record[1 + f];
        let t: usize = t_cell.parse().map_err(|_| DataError::Parse {
            row: row_no,
            detail: format!("non-integer treatment `{t_cell}`"),
        })?;
        if t > schema.treatments {
            return Err(DataError::Parse {
                row: row_no,
                detail: format!("treatment {t} outside [0, {}]", schema.treatments),
            });
        }
        let mut y = Vec::with_capacity(r);
        for (ri, resp) in schema.responses.iter().enumerate() {
            let cell = &record[2 + f + ri];
            let v: f64 = cell.parse().map_err(|_| DataError::Parse {
                row: row_no,
                detail: format!("response `{}`: non-numeric cell `{cell}`", resp.name),
            })?;
            y.push(v);
        }
        rows.push(RawRow { user_id, values, t, y });
    }
    Ok(rows)
}

/// Fits equal-frequency boundaries for every unfitted continuous feature,
/// using only the provided rows (callers pass the training split).
pub fn fit_boundaries(rows: &[RawRow], schema: &mut DatasetSchema) -> Result<(), DataError> {
    if rows.is_empty() {
        return Err(DataError::Invalid("cannot fit boundaries on an empty dataset".into()));
    }
    for j in 0..schema.features.len() {
        let needs = matches!(
            &schema.features[j].kind,
            FeatureKind::Continuous { boundaries: None, .. }
        );
        if !needs {
            continue;
        }
        let column: Vec<f64> = rows
            .iter()
            .map(|row| match &row.values[j] {
                FeatureValue::Continuous(v) => *v,
                FeatureValue::Categorical(id) => *id as f64,
            })
            .collect();
        let bins = match &schema.features[j].kind {
            FeatureKind::Continuous { bins, .. } => *bins,
            _ => unreachable!(),
        };
        let fitted = discretize_fit(&column, bins)?;
        if let FeatureKind::Continuous { boundaries, .. } = &mut schema.features[j].kind {
            *boundaries = Some(fitted);
        }
    }
    Ok(())
}

/// Encodes raw rows against a fitted schema.
pub fn encode_rows(rows: &[RawRow], schema: &DatasetSchema) -> Result<Vec<Instance>, DataError> {
    if schema.needs_fit() {
        return Err(DataError::Schema(
            "schema has unfitted continuous features; call fit_boundaries first".into(),
        ));
    }
    rows.iter()
        .map(|row| {
            let x = row
                .values
                .iter()
                .zip(&schema.features)
                .map(|(v, spec)| match (v, &spec.kind) {
                    (FeatureValue::Categorical(id), _) => *id,
                    (FeatureValue::Continuous(v), FeatureKind::Continuous { boundaries, .. }) => {
                        bin_index(*v, boundaries.as_deref().unwrap_or(&[]))
                    }
                    (FeatureValue::Continuous(v), FeatureKind::Categorical { .. }) => *v as usize,
                })
                .collect();
            Ok(Instance {
                user_id: row.user_id.clone(),
                x,
                t: row.t,
                y: row.y.clone(),
            })
        })
        .collect()
}

/// Full ingestion: parse, fit boundaries on these rows when the schema has
/// none yet (pipelines that must fit on a training split only should call
/// [`read_raw_csv`]/[`fit_boundaries`]/[`encode_rows`] themselves), and
/// encode. Logs per-treatment counts.
pub fn load_csv(path: &Path, schema: &mut DatasetSchema) -> Result<Vec<Instance>, DataError> {
    let rows = read_raw_csv(path, schema)?;
    if schema.needs_fit() {
        fit_boundaries(&rows, schema)?;
    }
    let instances = encode_rows(&rows, schema)?;
    let mut counts = vec![0usize; schema.treatments + 1];
    for inst in &instances {
        counts[inst.t] += 1;
    }
    log::info!(
        "loaded {} instances from {}; per-treatment counts {:?}",
        instances.len(),
        path.display(),
        counts
    );
    Ok(instances)
}

/// Writes raw rows in the canonical layout. Floats use the shortest
/// round-trip representation, so write/read/write is byte-stable.
pub fn write_raw_csv(path: &Path, schema: &DatasetSchema, rows: &[RawRow]) -> Result<(), DataError> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{}", expected_header(schema).join(","))?;
    for row in rows {
        let mut cells: Vec<String> = Vec::with_capacity(2 + row.values.len() + row.y.len());
        cells.push(row.user_id.clone());
        for v in &row.values {
            cells.push(match v {
                FeatureValue::Categorical(id) => id.to_string(),
                FeatureValue::Continuous(x) => format!("{x}"),
            });
        }
        cells.push(row.t.to_string());
        for y in &row.y {
            cells.push(format!("{y}"));
        }
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()?;
    Ok(())
}

fn expected_header(schema: &DatasetSchema) -> Vec<String> {
    let mut h = Vec::with_capacity(2 + schema.features.len() + schema.responses.len());
    h.push("user_id".to_string());
    h.extend(schema.features.iter().map(|f| f.name.clone()));
    h.push("treatment".to_string());
    h.extend(schema.responses.iter().map(|r| r.name.clone()));
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{FeatureSpec, ResponseKind, ResponseSpec};

    fn schema() -> DatasetSchema {
        DatasetSchema {
            features: vec![
                FeatureSpec {
                    name: "cat_0".into(),
                    kind: FeatureKind::Categorical { cardinality: 3 },
                },
                FeatureSpec {
                    name: "cont_0".into(),
                    kind: FeatureKind::Continuous { bins: 2, boundaries: None },
                },
            ],
            treatments: 1,
            responses: vec![ResponseSpec {
                name: "visit".into(),
                kind: ResponseKind::Binary,
            }],
        }
    }

    fn write_fixture(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn three_row_fixture_round_trips() {
        let f = write_fixture(
            "user_id,cat_0,cont_0,treatment,visit\nu1,0,1.5,0,0\nu2,1,2.5,1,1\nu3,2,3.5,0,1\n",
        );
        let mut s = schema();
        let instances = load_csv(f.path(), &mut s).unwrap();
        assert_eq!(instances.len(), 3);
        assert_eq!(instances[1].t, 1);
        assert_eq!(instances[2].y, vec![1.0]);
    }

    #[test]
    fn treatment_out_of_range_is_a_parse_error() {
        let f = write_fixture("user_id,cat_0,cont_0,treatment,visit\nu1,0,1.0,2,0\n");
        let mut s = schema();
        match load_csv(f.path(), &mut s) {
            Err(DataError::Parse { row, detail }) => {
                assert_eq!(row, 2);
                assert!(detail.contains("treatment"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_a_parse_error() {
        let f = write_fixture("user_id,cat_0,cont_0,treatment,visit\nu1,0,abc,0,0\n");
        let mut s = schema();
        assert!(matches!(
            load_csv(f.path(), &mut s),
            Err(DataError::Parse { row: 2, .. })
        ));
    }

    #[test]
    fn missing_column_is_a_parse_error() {
        let f = write_fixture("user_id,cat_0,treatment,visit\nu1,0,0,0\n");
        let mut s = schema();
        assert!(matches!(load_csv(f.path(), &mut s), Err(DataError::Parse { row: 1, .. })));
    }

    #[test]
    fn serialization_is_byte_stable() {
        let mut s = schema();
        let rows = vec![
            RawRow {
                user_id: "u1".into(),
                values: vec![FeatureValue::Categorical(2), FeatureValue::Continuous(0.125)],
                t: 1,
                y: vec![1.0],
            },
            RawRow {
                user_id: "u2".into(),
                values: vec![FeatureValue::Categorical(0), FeatureValue::Continuous(3.7)],
                t: 0,
                y: vec![0.0],
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csv");
        let p2 = dir.path().join("b.csv");
        write_raw_csv(&p1, &s, &rows).unwrap();
        let parsed = read_raw_csv(&p1, &s).unwrap();
        write_raw_csv(&p2, &s, &parsed).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        let _ = &mut s;
    }

    #[test]
    fn separate_test_file_reuses_fitted_boundaries() {
        // Biased training file fits the bins; the test file is encoded with
        // the training boundaries untouched.
        let train = write_fixture(
            "user_id,cat_0,cont_0,treatment,visit\nu1,0,1.0,0,0\nu2,1,2.0,1,1\nu3,2,3.0,0,1\nu4,0,4.0,1,0\n",
        );
        let test = write_fixture("user_id,cat_0,cont_0,treatment,visit\nv1,0,100.0,0,0\n");
        let mut s = schema();
        let _ = load_csv(train.path(), &mut s).unwrap();
        let fitted = s.clone();
        let test_instances = load_csv(test.path(), &mut s).unwrap();
        assert_eq!(s, fitted);
        // 100.0 is above every boundary: clamps to the last bin.
        assert_eq!(test_instances[0].x[1], s.cardinality(1).unwrap() - 1);
    }
}
