//! Tab-separated expression and label files, optionally gzip-compressed
//! (selected by a `.gz` extension).

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::preprocess::Subtype;

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open(path: &Path) -> Result<Box<dyn BufRead>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let r: Box<dyn Read> = if is_gz(path) {
        Box::new(GzDecoder::new(f))
    } else {
        Box::new(f)
    };
    Ok(Box::new(BufReader::new(r)))
}

fn create(path: &Path) -> Result<Box<dyn Write>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let w = BufWriter::new(f);
    Ok(if is_gz(path) {
        Box::new(GzEncoder::new(w, Compression::default()))
    } else {
        Box::new(w)
    })
}

struct Lines {
    path: PathBuf,
    inner: std::iter::Enumerate<std::io::Lines<Box<dyn BufRead>>>,
}

impl Lines {
    fn new(path: &Path) -> Result<Self> {
        Ok(Self {
            path: path.to_path_buf(),
            inner: open(path)?.lines().enumerate(),
        })
    }

    fn parse_err(&self, line: usize, msg: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line,
            msg: msg.into(),
        }
    }
}

impl Iterator for Lines {
    /// 1-based line number and contents, trailing `\r` removed, blank lines skipped.
    type Item = Result<(usize, String)>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let (i, line) = self.inner.next()?;
            match line {
                Err(e) => return Some(Err(Error::io(&self.path, e))),
                Ok(l) => {
                    let l = l.strip_suffix('\r').unwrap_or(&l).to_string();
                    if l.trim().is_empty() {
                        continue;
                    }
                    return Some(Ok((i + 1, l)));
                }
            }
        }
    }
}

struct Table {
    header: Vec<String>,
    row_names: Vec<String>,
    values: Vec<f64>,
    width: usize,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut lines = Lines::new(path)?;
    let (_, head) = lines
        .next()
        .ok_or_else(|| lines.parse_err(1, "file is empty; expected a header row"))??;
    let header: Vec<String> = head.split('\t').skip(1).map(str::to_string).collect();
    if header.is_empty() {
        return Err(lines.parse_err(1, "header has no data columns"));
    }
    let width = header.len();
    let mut row_names = Vec::new();
    let mut values = Vec::new();
    while let Some(item) = lines.next() {
        let (no, line) = item?;
        let mut fields = line.split('\t');
        let name = fields.next().unwrap_or_default().to_string();
        let start = values.len();
        for (j, f) in fields.enumerate() {
            if j >= width {
                break;
            }
            let v: f64 = f.trim().parse().map_err(|_| {
                lines.parse_err(no, format!("column {}: {f:?} is not a number", j + 2))
            })?;
            values.push(v);
        }
        let got = line.split('\t').count();
        if got != width + 1 {
            return Err(lines.parse_err(no, format!("expected {} fields, found {got}", width + 1)));
        }
        debug_assert_eq!(values.len() - start, width);
        row_names.push(name);
    }
    Ok(Table {
        header,
        row_names,
        values,
        width,
    })
}

fn check_unique(ids: &[String], what: &str, path: &Path) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(Error::Data(format!(
                "{}: duplicate {what} {id:?}",
                path.display()
            )));
        }
    }
    Ok(())
}

/// Reads an expression matrix. With `transpose` the file holds one gene per
/// row and one sample per column; otherwise one sample per row.
pub fn load_expression(path: &Path, transpose: bool) -> Result<Dataset> {
    let t = read_table(path)?;
    let m = Matrix::from_vec(t.row_names.len(), t.width, t.values)?;
    let (sample_ids, genes, x) = if transpose {
        (t.header, t.row_names, m.transpose())
    } else {
        (t.row_names, t.header, m)
    };
    check_unique(&sample_ids, "sample id", path)?;
    Ok(Dataset {
        sample_ids,
        genes,
        x,
        labels: None,
    })
}

/// Reads `sample_id<TAB>subtype` rows after a header.
pub fn load_labels(path: &Path) -> Result<HashMap<String, Subtype>> {
    let mut lines = Lines::new(path)?;
    lines
        .next()
        .ok_or_else(|| lines.parse_err(1, "file is empty; expected a header row"))??;
    let mut out = HashMap::new();
    while let Some(item) = lines.next() {
        let (no, line) = item?;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(lines.parse_err(no, format!("expected 2 fields, found {}", fields.len())));
        }
        let subtype: Subtype = fields[1].trim().parse()?;
        if out.insert(fields[0].to_string(), subtype).is_some() {
            return Err(Error::Data(format!(
                "{}: duplicate sample id {:?} in labels",
                path.display(),
                fields[0]
            )));
        }
    }
    Ok(out)
}

/// Writes samples-in-rows; values use Rust's shortest round-trip formatting,
/// so a reload is bit-exact.
pub fn write_expression(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    write!(w, "sample_id").map_err(io)?;
    for g in &ds.genes {
        write!(w, "\t{g}").map_err(io)?;
    }
    writeln!(w).map_err(io)?;
    for (id, row) in ds.sample_ids.iter().zip(ds.x.row_iter()) {
        write!(w, "{id}").map_err(io)?;
        for v in row {
            write!(w, "\t{v}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_labels(path: &Path, ds: &Dataset) -> Result<()> {
    let labels = ds
        .labels
        .as_ref()
        .ok_or_else(|| Error::Data("dataset has no labels to write".into()))?;
    let mut w = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(w, "sample_id\tsubtype").map_err(io)?;
    for (id, l) in ds.sample_ids.iter().zip(labels) {
        writeln!(w, "{id}\t{l}").map_err(io)?;
    }
    w.flush().map_err(io)
}
