//! CSV input and output.
//!
//! Data files have a header row and one point per row. A column named like the
//! measure column holds weights, a `label` column is carried through, every other
//! column is a coordinate. Floats are written in Rust's shortest round-trip form.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use outsample::MeasuredSet;

use crate::error::CliError;

/// A parsed data file; may have zero rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub points: Vec<Vec<f64>>,
    pub weights: Option<Vec<f64>>,
    pub labels: Option<Vec<String>>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `None` for an empty table.
    pub fn to_set(&self) -> Result<Option<MeasuredSet>, CliError> {
        if self.is_empty() {
            return Ok(None);
        }
        let weights = self.weights.clone().unwrap_or_else(|| vec![1.0; self.len()]);
        let mut set = MeasuredSet::new(self.points.clone(), weights)?;
        if let Some(l) = &self.labels {
            set = set.with_labels(l.clone())?;
        }
        Ok(Some(set))
    }

    pub fn require_set(&self, what: &str) -> Result<MeasuredSet, CliError> {
        self.to_set()?
            .ok_or_else(|| CliError::Lib(outsample::Error::Dimension(format!("{what} file has no rows"))))
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse(field: &str, row: usize, col: &str) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Io(format!("row {row}, column {col}: {field:?} is not a number")))
}

pub fn read_table(path: &Path, measure_col: &str) -> Result<Table, CliError> {
    let mut rdr = open(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let weight_idx = headers.iter().position(|h| h == measure_col);
    let label_idx = headers.iter().position(|h| h == "label");
    let coord_idx: Vec<usize> = (0..headers.len())
        .filter(|i| Some(*i) != weight_idx && Some(*i) != label_idx)
        .collect();
    if coord_idx.is_empty() {
        return Err(CliError::Lib(outsample::Error::Dimension(format!(
            "{} has no coordinate columns",
            path.display()
        ))));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != headers.len() {
            return Err(CliError::Lib(outsample::Error::Dimension(format!(
                "row {r} has {} fields, header has {}",
                rec.len(),
                headers.len()
            ))));
        }
        let p = coord_idx
            .iter()
            .map(|&i| parse(&rec[i], r, &headers[i]))
            .collect::<Result<Vec<_>, _>>()?;
        points.push(p);
        if let Some(i) = weight_idx {
            weights.push(parse(&rec[i], r, &headers[i])?);
        }
        if let Some(i) = label_idx {
            labels.push(rec[i].to_string());
        }
    }
    Ok(Table {
        columns: coord_idx.iter().map(|&i| headers[i].clone()).collect(),
        points,
        weights: weight_idx.map(|_| weights),
        labels: label_idx.map(|_| labels),
    })
}

/// A square matrix from a headerless CSV file.
pub fn read_gram(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        rows.push(
            rec.iter()
                .enumerate()
                .map(|(c, f)| parse(f, r, &c.to_string()))
                .collect::<Result<Vec<f64>, _>>()?,
        );
    }
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) || n == 0 {
        return Err(CliError::Lib(outsample::Error::Dimension(format!(
            "Gram matrix in {} must be square and non-empty",
            path.display()
        ))));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Writes `header` and one row per matrix row, optionally prefixed by a label.
pub fn write_rows<W: Write>(
    out: W,
    header: &[String],
    blocks: &[&DMatrix<f64>],
    labels: Option<&[String]>,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let mut head: Vec<String> = Vec::new();
    if labels.is_some() {
        head.push("label".into());
    }
    head.extend_from_slice(header);
    w.write_record(&head)?;
    let rows = blocks.first().map_or(0, |b| b.nrows());
    for r in 0..rows {
        let mut rec: Vec<String> = Vec::new();
        if let Some(l) = labels {
            rec.push(l[r].clone());
        }
        for b in blocks {
            rec.extend(b.row(r).iter().map(|v| fmt_f64(*v)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a measured set as a data file (`x1..xD`, `weight` when not all 1, `label`).
pub fn write_set<W: Write>(out: W, set: &MeasuredSet) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    let uniform = set.weights().iter().all(|v| *v == 1.0);
    let mut head: Vec<String> = (1..=set.dim()).map(|i| format!("x{i}")).collect();
    if !uniform {
        head.push("weight".into());
    }
    if set.labels().is_some() {
        head.push("label".into());
    }
    w.write_record(&head)?;
    for i in 0..set.len() {
        let mut rec: Vec<String> = set.point(i).iter().map(|v| fmt_f64(*v)).collect();
        if !uniform {
            rec.push(fmt_f64(set.weights()[i]));
        }
        if let Some(l) = set.labels() {
            rec.push(l[i].clone());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
