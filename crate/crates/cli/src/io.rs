use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use wavica::Sample;

use crate::CliError;

/// Parses an `n x d` table of floats. A first line whose first field is not
/// a number is taken as a header.
pub fn parse_table(text: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    let mut width = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::input(format!("malformed CSV: {e}")))?;
        let line = record.position().map_or(idx as u64 + 1, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if rows.is_empty() && width.is_none() && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
            width = Some(record.len());
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (col, field) in record.iter().enumerate() {
            let v = field.parse::<f64>().map_err(|_| {
                CliError::input(format!(
                    "row {line} column {}: cannot parse '{field}' as a number",
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::input(format!(
                    "row {line} column {}: non-finite value",
                    col + 1
                )));
            }
            row.push(v);
        }
        if let Some(w) = rows.first().map(|r: &Vec<f64>| r.len()) {
            if row.len() != w {
                return Err(CliError::input(format!(
                    "row {line}: expected {w} columns, found {}",
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input("input contains no data rows".into()));
    }
    Ok(rows)
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    Ok(text)
}

/// Reads a sample in `[0,1]^d`.
pub fn read_sample(path: &Path) -> Result<Sample, CliError> {
    let rows = parse_table(&read_text(path)?)?;
    for (i, row) in rows.iter().enumerate() {
        if let Some(col) = row.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(CliError::input(format!(
                "data row {} column {}: value {} outside [0,1]",
                i + 1,
                col + 1,
                row[col]
            )));
        }
    }
    Sample::from_rows(&rows).map_err(|e| CliError::input(e.to_string()))
}

pub fn read_matrix(path: &Path) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let rows = parse_table(&read_text(path)?)?;
    let d = rows[0].len();
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(nalgebra::DMatrix::from_row_slice(rows.len(), d, &flat))
}

/// Output sink: the given file, or stdout.
pub fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

/// Writer for comma-separated report lines of varying width.
pub fn csv_writer(out: Box<dyn Write>) -> csv::Writer<Box<dyn Write>> {
    csv::WriterBuilder::new().flexible(true).from_writer(out)
}

/// Shortest decimal that parses back to the same double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// 17 significant digits.
pub fn fmt_f64_17(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_detection() {
        let rows = parse_table("x,y\n0.1,0.2\n0.3,0.4\n").unwrap();
        assert_eq!(rows, vec![vec![0.1, 0.2], vec![0.3, 0.4]]);
        let rows = parse_table("0.1,0.2\n\n0.3,0.4\n").unwrap();
        assert_eq!(rows.len(), 2);
    }

    #[test]
    fn reports_bad_cell() {
        let err = parse_table("0.1,0.2\n0.3,abc\n").unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("row 2 column 2"), "{}", err.message);
        assert!(parse_table("0.1,0.2\n0.3\n").is_err());
        assert!(parse_table("").is_err());
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, 0.999_999_999_999_999_9, 5e-300] {
            assert_eq!(fmt_f64_17(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }
}
