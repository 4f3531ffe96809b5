//! Delimited-text import and export of labelled datasets.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::dataset::Dataset;
use crate::error::{KifError, Result};
use crate::rank_stats::LabelVector;

/// Reads a dataset from a file with a header row. `label_col` names the
/// label column; every other column must hold finite reals. Feature names
/// come from the header and row order is kept.
pub fn load_csv(path: impl AsRef<Path>, label_col: &str, delimiter: u8) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| KifError::Io(format!("{}: {e}", path.display())))?;
    read_csv(file, label_col, delimiter)
}

/// As [`load_csv`] from any reader. Rows are numbered from 1 after the
/// header in error messages.
pub fn read_csv<R: Read>(reader: R, label_col: &str, delimiter: u8) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .from_reader(reader);
    let header: Vec<String> = rdr
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let label_idx = header
        .iter()
        .position(|h| h == label_col)
        .ok_or_else(|| KifError::Parse {
            row: 0,
            column: label_col.to_string(),
            message: "label column not found in header".into(),
        })?;
    let feature_idx: Vec<usize> = (0..header.len()).filter(|&c| c != label_idx).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_idx.len()];
    let mut labels = Vec::new();

    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        labels.push(record[label_idx].trim().to_string());
        for (slot, &c) in feature_idx.iter().enumerate() {
            let cell = record[c].trim();
            let value: f64 = cell.parse().map_err(|_| KifError::Parse {
                row,
                column: header[c].clone(),
                message: format!("'{cell}' is not a number"),
            })?;
            if !value.is_finite() {
                return Err(KifError::Parse {
                    row,
                    column: header[c].clone(),
                    message: format!("non-finite value '{cell}'"),
                });
            }
            columns[slot].push(value);
        }
    }
    let names = feature_idx.iter().map(|&c| header[c].clone()).collect();
    Dataset::from_columns(columns, LabelVector::from_values(&labels)?)?.with_feature_names(names)
}

/// Writes `data` with a header row, features first and the label column
/// last. Values use the shortest representation that parses back to the
/// same `f64`.
pub fn write_csv<W: Write>(
    data: &Dataset,
    writer: W,
    label_col: &str,
    delimiter: u8,
) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(writer);
    let mut header: Vec<&str> = data.feature_names().iter().map(String::as_str).collect();
    header.push(label_col);
    wtr.write_record(&header)?;
    let mut record = Vec::with_capacity(data.p() + 1);
    for i in 0..data.n() {
        record.clear();
        record.extend((0..data.p()).map(|j| format!("{:?}", data.value(i, j))));
        record.push(data.labels().name_of(i).to_string());
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(
    data: &Dataset,
    path: impl AsRef<Path>,
    label_col: &str,
    delimiter: u8,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| KifError::Io(format!("{}: {e}", path.display())))?;
    write_csv(data, std::io::BufWriter::new(file), label_col, delimiter)
}
