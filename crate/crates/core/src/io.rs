//! Delimited text I/O for sample matrices, weight matrices and edge lists.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::admm::{Edge, JointEstimate};
use crate::error::{Error, Result};
use crate::model::PairedDataset;
use crate::weights::WeightMatrix;

/// A numeric table with column names.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub data: DMatrix<f64>,
}

/// Comma for `.csv`, tab otherwise.
pub fn delimiter_for(path: &Path) -> u8 {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => b',',
        _ => b'\t',
    }
}

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {msg}", path.display()))
}

fn read_records(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter_for(path))
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e))?;
    rdr.records().map(|r| r.map_err(|e| parse_err(path, e))).collect()
}

fn is_numeric_row(r: &csv::StringRecord) -> bool {
    r.iter().all(|f| f.parse::<f64>().is_ok())
}

fn parse_rows(path: &Path, rows: &[csv::StringRecord], ncols: usize, first_line: usize) -> Result<DMatrix<f64>> {
    let mut m = DMatrix::zeros(rows.len(), ncols);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(parse_err(path, format!("row {} has {} fields, expected {ncols}", i + first_line, r.len())));
        }
        for (j, f) in r.iter().enumerate() {
            m[(i, j)] = f
                .parse()
                .map_err(|_| parse_err(path, format!("row {} field {}: not a number: {f:?}", i + first_line, j + 1)))?;
        }
    }
    Ok(m)
}

/// Reads a sample-by-variable table. A first row with any non-numeric
/// field is taken as the header; otherwise names default to `V1..Vp`.
pub fn read_table(path: &Path) -> Result<Table> {
    let records = read_records(path)?;
    let Some(first) = records.first() else {
        return Err(parse_err(path, "empty file"));
    };
    let (names, rows, line) = if is_numeric_row(first) {
        ((1..=first.len()).map(|i| format!("V{i}")).collect::<Vec<_>>(), &records[..], 1)
    } else {
        (first.iter().map(str::to_string).collect(), &records[1..], 2)
    };
    let data = parse_rows(path, rows, names.len(), line)?;
    Ok(Table { names, data })
}

/// Two files of identical shape and column names.
pub fn read_paired(x_path: &Path, y_path: &Path) -> Result<PairedDataset> {
    let x = read_table(x_path)?;
    let y = read_table(y_path)?;
    if x.names != y.names {
        return Err(Error::DimensionMismatch("the two files have different columns".into()));
    }
    PairedDataset::new(x.data, y.data, Some(x.names))
}

/// One file with a `condition` column in {X, Y} and a `subject` column
/// pairing the rows. Pairs are ordered by first appearance of the subject.
pub fn read_long_paired(path: &Path) -> Result<PairedDataset> {
    let records = read_records(path)?;
    let Some(header) = records.first() else {
        return Err(parse_err(path, "empty file"));
    };
    let col = |name: &str| header.iter().position(|h| h == name);
    let (Some(ci), Some(si)) = (col("condition"), col("subject")) else {
        return Err(parse_err(path, "expected `condition` and `subject` columns"));
    };
    let value_cols: Vec<usize> = (0..header.len()).filter(|&k| k != ci && k != si).collect();
    let names: Vec<String> = value_cols.iter().map(|&k| header[k].to_string()).collect();
    let mut subjects: Vec<String> = Vec::new();
    let mut rows: Vec<[Option<Vec<f64>>; 2]> = Vec::new();
    for (line, r) in records.iter().enumerate().skip(1) {
        if r.len() != header.len() {
            return Err(parse_err(path, format!("row {} has {} fields, expected {}", line + 1, r.len(), header.len())));
        }
        let slot = match &r[ci] {
            "X" | "x" => 0,
            "Y" | "y" => 1,
            other => return Err(parse_err(path, format!("row {}: condition must be X or Y, got {other:?}", line + 1))),
        };
        let values = value_cols
            .iter()
            .map(|&k| r[k].parse::<f64>().map_err(|_| parse_err(path, format!("row {}: not a number: {:?}", line + 1, &r[k]))))
            .collect::<Result<Vec<_>>>()?;
        let s = r[si].to_string();
        let idx = match subjects.iter().position(|x| *x == s) {
            Some(i) => i,
            None => {
                subjects.push(s);
                rows.push([None, None]);
                rows.len() - 1
            }
        };
        if rows[idx][slot].replace(values).is_some() {
            return Err(parse_err(path, format!("subject {:?} has two rows for one condition", subjects[idx])));
        }
    }
    let p = names.len();
    let n = rows.len();
    let (mut x, mut y) = (DMatrix::zeros(n, p), DMatrix::zeros(n, p));
    for (i, pair) in rows.iter().enumerate() {
        let [Some(a), Some(b)] = pair else {
            return Err(Error::DimensionMismatch(format!("subject {:?} lacks one condition", subjects[i])));
        };
        for j in 0..p {
            x[(i, j)] = a[j];
            y[(i, j)] = b[j];
        }
    }
    PairedDataset::new(x, y, Some(names))
}

fn writer(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn fmt(v: f64) -> String {
    // shortest round-trip representation
    format!("{v}")
}

/// Writes `# key: value` lines.
pub fn write_metadata<W: Write>(w: &mut W, metadata: &[(String, String)]) -> Result<()> {
    for (k, v) in metadata {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

/// Writes a table with a header row.
pub fn write_table(path: &Path, names: &[String], data: &DMatrix<f64>) -> Result<()> {
    if names.len() != data.ncols() {
        return Err(Error::DimensionMismatch(format!("{} names for {} columns", names.len(), data.ncols())));
    }
    let d = delimiter_for(path) as char;
    let mut w = writer(path)?;
    writeln!(w, "{}", names.join(&d.to_string()))?;
    for i in 0..data.nrows() {
        let row: Vec<String> = (0..data.ncols()).map(|j| fmt(data[(i, j)])).collect();
        writeln!(w, "{}", row.join(&d.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a square weight matrix with a header row.
pub fn read_weights(path: &Path) -> Result<WeightMatrix> {
    let t = read_table(path)?;
    if !t.data.is_square() {
        return Err(Error::DimensionMismatch(format!("weight matrix is {}x{}", t.data.nrows(), t.data.ncols())));
    }
    WeightMatrix::from_entries(t.data)
}

pub fn write_weights(path: &Path, names: &[String], v: &WeightMatrix) -> Result<()> {
    let p = v.dim();
    write_table(path, names, &DMatrix::from_fn(p, p, |i, j| v.get(i, j)))
}

/// Writes an edge list with 1-based indices and variable names.
pub fn write_edges<'a>(
    path: &Path,
    edges: impl IntoIterator<Item = &'a Edge>,
    est: &JointEstimate,
    names: &[String],
    metadata: &[(String, String)],
) -> Result<()> {
    let mut w = writer(path)?;
    write_metadata(&mut w, metadata)?;
    writeln!(w, "i\tj\tname_i\tname_j\tomega_x\tomega_y")?;
    for &(i, j) in edges {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            i + 1,
            j + 1,
            names[i],
            names[j],
            fmt(est.omega_x[(i, j)]),
            fmt(est.omega_y[(i, j)])
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows of string fields under a header, tab separated.
pub fn write_rows(path: &Path, header: &[&str], rows: &[Vec<String>], metadata: &[(String, String)]) -> Result<()> {
    let mut w = writer(path)?;
    write_metadata(&mut w, metadata)?;
    writeln!(w, "{}", header.join("\t"))?;
    for r in rows {
        writeln!(w, "{}", r.join("\t"))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = writer(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}
