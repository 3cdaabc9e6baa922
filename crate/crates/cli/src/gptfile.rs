//! CSV serialization of contracted GPT tables.
//!
//! ```text
//! version,1
//! order,N
//! radius,R
//! cc,1,M11,...,M1N
//! ...
//! ss,N,MN1,...,MNN
//! ```
//!
//! Rows are 1-based receiver orders; columns are source orders. Values are
//! written with 17 significant digits so reading restores every finite value
//! exactly.

use std::io::{Read, Write};
use std::path::Path;

use gptlab::{ContractedGptTable, Parity};
use nalgebra::DMatrix;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

const BLOCKS: [(&str, Parity, Parity); 4] = [
    ("cc", Parity::Cos, Parity::Cos),
    ("cs", Parity::Cos, Parity::Sin),
    ("sc", Parity::Sin, Parity::Cos),
    ("ss", Parity::Sin, Parity::Sin),
];

#[derive(Debug, Error)]
pub enum GptFileError {
    #[error("GPT file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("GPT file: {0}")]
    Csv(#[from] csv::Error),
    #[error("GPT file: {0}")]
    Io(#[from] std::io::Error),
    #[error("GPT file: {0}")]
    Table(#[from] gptlab::GptError),
}

fn format_err(line: usize, message: impl Into<String>) -> GptFileError {
    GptFileError::Format {
        line,
        message: message.into(),
    }
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_table(table: &ContractedGptTable, out: impl Write) -> Result<(), GptFileError> {
    let n = table.max_order();
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["version".to_string(), FORMAT_VERSION.to_string()])?;
    w.write_record(["order".to_string(), n.to_string()])?;
    w.write_record(["radius".to_string(), fmt_float(table.radius())])?;
    for (name, rp, sp) in BLOCKS {
        let block = table.block(rp, sp);
        for i in 0..n {
            let mut row = vec![name.to_string(), (i + 1).to_string()];
            row.extend((0..n).map(|j| fmt_float(block[(i, j)])));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(input: impl Read) -> Result<ContractedGptTable, GptFileError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut records = rdr.records().enumerate();
    let mut header = |key: &str| -> Result<String, GptFileError> {
        let (idx, rec) = records
            .next()
            .ok_or_else(|| format_err(0, format!("missing '{key}' header")))?;
        let rec = rec?;
        if rec.len() != 2 || &rec[0] != key {
            return Err(format_err(idx + 1, format!("expected '{key},<value>'")));
        }
        Ok(rec[1].to_string())
    };
    let version = header("version")?;
    if version != FORMAT_VERSION.to_string() {
        return Err(format_err(1, format!("unsupported version {version}")));
    }
    let n: usize = header("order")?
        .parse()
        .map_err(|_| format_err(2, "order must be a positive integer"))?;
    if n == 0 {
        return Err(format_err(2, "order must be a positive integer"));
    }
    let radius: f64 = header("radius")?
        .parse()
        .map_err(|_| format_err(3, "radius must be a number"))?;

    let mut blocks: Vec<DMatrix<f64>> = (0..4).map(|_| DMatrix::zeros(n, n)).collect();
    let mut seen = vec![false; 4 * n];
    for (idx, rec) in records {
        let line = idx + 1;
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let b = BLOCKS
            .iter()
            .position(|(name, _, _)| *name == &rec[0])
            .ok_or_else(|| format_err(line, format!("unknown block '{}'", &rec[0])))?;
        let row: usize = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .filter(|&i| (1..=n).contains(&i))
            .ok_or_else(|| format_err(line, format!("row index must be in 1..={n}")))?;
        if rec.len() != n + 2 {
            return Err(format_err(
                line,
                format!("expected {n} values, found {}", rec.len().saturating_sub(2)),
            ));
        }
        if std::mem::replace(&mut seen[b * n + row - 1], true) {
            return Err(format_err(line, "duplicate row"));
        }
        for j in 0..n {
            let v: f64 = rec[j + 2]
                .parse()
                .map_err(|_| format_err(line, format!("bad number '{}'", &rec[j + 2])))?;
            if !v.is_finite() {
                return Err(format_err(line, "non-finite value"));
            }
            blocks[b][(row - 1, j)] = v;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(format_err(
            0,
            format!(
                "missing row {} of block {}",
                missing % n + 1,
                BLOCKS[missing / n].0
            ),
        ));
    }
    let mut it = blocks.into_iter();
    let (cc, cs, sc, ss) = (
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    );
    Ok(ContractedGptTable::new(radius, cc, cs, sc, ss)?)
}

pub fn save(table: &ContractedGptTable, path: &Path) -> Result<(), GptFileError> {
    write_table(table, std::fs::File::create(path)?)
}

pub fn load(path: &Path) -> Result<ContractedGptTable, GptFileError> {
    read_table(std::fs::File::open(path)?)
}
