//! CSV ingestion against a schema file, and CSV export.

use std::fs::{self, File};
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use flexcf_core::dataset::{Class, Dataset, FeatureKind, FeatureSchema, Instance, Schema};

use crate::error::{Error, Result};
use crate::schema_file::{Role, SchemaFile};

/// A loaded dataset plus the 1-based data rows skipped for missing cells.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub skipped_rows: Vec<usize>,
}

pub fn load_csv(path: &Path, schema_path: &Path) -> Result<Loaded> {
    let schema = SchemaFile::read(schema_path)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if file.metadata().map_err(|e| Error::io(path, e))?.len() == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    load_csv_from_reader(file, &schema).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

/// Per-column accumulator while scanning rows.
enum Column {
    Discrete {
        kind: FeatureKind,
        categories: Vec<String>,
        fixed: bool,
    },
    Continuous {
        declared: Option<[f64; 2]>,
        seen: Option<(f64, f64)>,
    },
}

pub fn load_csv_from_reader<R: Read>(reader: R, spec: &SchemaFile) -> Result<Loaded> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(Default::default()));
    }
    for h in &headers {
        if spec.column(h).is_none() {
            return Err(Error::UnknownColumn(h.clone()));
        }
    }
    for c in &spec.column {
        if !headers.contains(&c.name) {
            return Err(Error::MissingColumn(c.name.clone()));
        }
    }
    let label_pos = headers.iter().position(|h| *h == spec.label().name).expect("checked above");
    // Features in schema-file order, each mapped to its CSV position.
    let features: Vec<(usize, &crate::schema_file::ColumnSpec)> = spec
        .column
        .iter()
        .filter(|c| c.role == Role::Feature)
        .map(|c| (headers.iter().position(|h| *h == c.name).expect("checked above"), c))
        .collect();
    let mut columns: Vec<Column> = features
        .iter()
        .map(|(_, c)| match c.kind.expect("validated") {
            FeatureKind::Continuous => Column::Continuous {
                declared: c.range,
                seen: None,
            },
            kind => Column::Discrete {
                kind,
                categories: c.categories.clone().unwrap_or_default(),
                fixed: c.categories.is_some(),
            },
        })
        .collect();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut skipped_rows = Vec::new();
    let mut n_records = 0usize;
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        n_records += 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        if record.len() != headers.len() || record.iter().any(|cell| cell.trim().is_empty()) {
            skipped_rows.push(row);
            continue;
        }
        let label_text = record[label_pos].trim();
        let label = match label_text {
            "0" => Class::Desirable,
            "1" => Class::Undesirable,
            _ => {
                return Err(Error::NonBinaryLabel {
                    row,
                    value: label_text.to_string(),
                })
            }
        };
        let mut values = Vec::with_capacity(features.len());
        for ((pos, spec), col) in features.iter().zip(columns.iter_mut()) {
            let cell = record[*pos].trim();
            let value = match col {
                Column::Discrete { categories, fixed, .. } => match categories.iter().position(|c| c == cell) {
                    Some(code) => code as f64,
                    None if *fixed => {
                        return Err(Error::UnknownCategory {
                            column: spec.name.clone(),
                            row,
                            value: cell.to_string(),
                        })
                    }
                    None => {
                        categories.push(cell.to_string());
                        (categories.len() - 1) as f64
                    }
                },
                Column::Continuous { seen, .. } => {
                    let v: f64 = cell
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| Error::UnparsableValue {
                            column: spec.name.clone(),
                            row,
                            value: cell.to_string(),
                        })?;
                    *seen = Some(seen.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))));
                    v
                }
            };
            values.push(value);
        }
        rows.push(Instance::new(values));
        labels.push(label);
    }
    if n_records == 0 {
        return Err(Error::EmptyFile(Default::default()));
    }

    let schema_features = features
        .iter()
        .zip(columns)
        .map(|((_, spec), col)| {
            let f = match col {
                Column::Discrete { kind, categories, .. } => match kind {
                    FeatureKind::Ordinal => FeatureSchema::ordinal(spec.name.clone(), categories),
                    _ => FeatureSchema::categorical(spec.name.clone(), categories),
                },
                Column::Continuous { declared, seen } => {
                    // declared range widened to cover the data
                    let (lo, hi) = match (declared, seen) {
                        (Some([a, b]), Some((lo, hi))) => (a.min(lo), b.max(hi)),
                        (Some([a, b]), None) => (a, b),
                        (None, Some(seen)) => seen,
                        (None, None) => (0.0, 0.0),
                    };
                    FeatureSchema::continuous(spec.name.clone(), lo, hi)
                }
            };
            f.with_immutable(spec.immutable)
        })
        .collect();
    let schema = Arc::new(Schema::new(schema_features, spec.label().name.clone())?);
    Ok(Loaded {
        dataset: Dataset::new(schema, rows, labels)?,
        skipped_rows,
    })
}

/// Decoded CSV with a header row; features in schema order, label last.
pub fn write_csv<W: Write>(ds: &Dataset, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let csv_err = |e: csv::Error| Error::Csv(e.to_string());
    let mut header: Vec<&str> = ds.schema().names().collect();
    header.push(&ds.schema().label);
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..ds.len() {
        let mut record = ds.decode_row(i);
        record.push(ds.label(i).as_u8().to_string());
        w.write_record(&record).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Writes `data.csv`-style and `schema.toml`-style files for a dataset.
pub fn save_dataset(ds: &Dataset, csv_path: &Path, schema_path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf)?;
    fs::write(csv_path, buf).map_err(|e| Error::io(csv_path, e))?;
    fs::write(schema_path, SchemaFile::from_schema(ds.schema()).to_toml()).map_err(|e| Error::io(schema_path, e))
}
