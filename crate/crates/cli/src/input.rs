use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use ustat_cs::kernels::{KernelId, Point};

use crate::exit::{RowError, UsageError};

/// Opens `path`, or stdin for `None` / `-`. The flag is true for stdin.
pub fn open(path: Option<&Path>) -> anyhow::Result<(Box<dyn BufRead>, bool)> {
    match path {
        None => Ok((Box::new(BufReader::new(io::stdin())), true)),
        Some(p) if p.as_os_str() == "-" => Ok((Box::new(BufReader::new(io::stdin())), true)),
        Some(p) => {
            let f = File::open(p).map_err(|e| UsageError(format!("cannot open {}: {e}", p.display())))?;
            Ok((Box::new(BufReader::new(f)), false))
        }
    }
}

/// Parses one CSV row into the point variant `kernel` expects.
pub fn parse_row(line: &str, kernel: KernelId) -> Result<Point, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let want = match kernel {
        KernelId::Variance | KernelId::Gmd => 1,
        KernelId::SpatialKendall | KernelId::MmdGauss => 2,
    };
    if fields.len() != want {
        return Err(format!("expected {want} column(s) for kernel {kernel}, got {}", fields.len()));
    }
    let mut v = [0.0; 2];
    for (slot, f) in v.iter_mut().zip(&fields) {
        let x: f64 = f.parse().map_err(|_| format!("not a number: `{f}`"))?;
        if !x.is_finite() {
            return Err(format!("non-finite value `{f}`"));
        }
        *slot = x;
    }
    Ok(match kernel {
        KernelId::Variance | KernelId::Gmd => Point::Scalar(v[0]),
        KernelId::SpatialKendall => Point::Vec2(v[0], v[1]),
        KernelId::MmdGauss => Point::Pair(v[0], v[1]),
    })
}

/// Iterates over data rows, skipping blank lines and an optional header.
/// Items carry the 1-based line number.
pub fn points(
    reader: Box<dyn BufRead>,
    kernel: KernelId,
    has_header: bool,
) -> impl Iterator<Item = anyhow::Result<(usize, Point)>> {
    reader
        .lines()
        .enumerate()
        .skip(usize::from(has_header))
        .filter_map(move |(i, line)| {
            let row = i + 1;
            match line {
                Err(e) => Some(Err(anyhow::Error::new(e).context(format!("reading row {row}")))),
                Ok(l) if l.trim().is_empty() => None,
                Ok(l) => Some(
                    parse_row(&l, kernel)
                        .map(|p| (row, p))
                        .map_err(|msg| RowError { row, msg }.into()),
                ),
            }
        })
}
