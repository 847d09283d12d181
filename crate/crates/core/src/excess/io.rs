//! On-disk form of a [`SampledCurrent`]: one JSON header line followed by a
//! CSV or little-endian binary body. Each record is `x_1 … x_N, w` and, when
//! frames are present, `sign, F_11, F_21, …` (frame entries column by column).

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{SampledCurrent, TangentFrame};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyFormat {
    Csv,
    Binary,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    ambient: usize,
    m: usize,
    has_frames: bool,
    format: BodyFormat,
    count: usize,
}

fn record_len(ambient: usize, m: usize, frames: bool) -> usize {
    ambient + 1 + if frames { 1 + ambient * m } else { 0 }
}

fn record(t: &SampledCurrent, i: usize) -> Vec<f64> {
    let mut row: Vec<f64> = t.points[i].iter().copied().collect();
    row.push(t.weights[i]);
    if let Some(fr) = &t.frames {
        row.push(fr[i].sign);
        row.extend(fr[i].frame.iter().copied());
    }
    row
}

pub fn write_current<W: Write>(t: &SampledCurrent, format: BodyFormat, out: &mut W) -> Result<()> {
    let header = Header {
        ambient: t.ambient,
        m: t.m,
        has_frames: t.frames.is_some(),
        format,
        count: t.len(),
    };
    serde_json::to_writer(&mut *out, &header)?;
    out.write_all(b"\n")?;
    for i in 0..t.len() {
        let row = record(t, i);
        match format {
            BodyFormat::Csv => {
                let line: Vec<String> = row.iter().map(|x| x.to_string()).collect();
                writeln!(out, "{}", line.join(","))?;
            }
            BodyFormat::Binary => {
                for x in row {
                    out.write_all(&x.to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}

pub fn read_current<R: BufRead>(input: &mut R) -> Result<SampledCurrent> {
    let mut line = String::new();
    input.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim())?;
    let len = record_len(header.ambient, header.m, header.has_frames);
    let mut rows = Vec::with_capacity(header.count);
    match header.format {
        BodyFormat::Csv => {
            for (k, l) in input.lines().enumerate() {
                let l = l?;
                if l.trim().is_empty() {
                    continue;
                }
                let row = l
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?;
                if row.len() != len {
                    return Err(Error::Parse(format!(
                        "row {} has {} fields, expected {len}",
                        k + 1,
                        row.len()
                    )));
                }
                rows.push(row);
            }
        }
        BodyFormat::Binary => {
            let mut bytes = Vec::new();
            input.read_to_end(&mut bytes)?;
            if bytes.len() != 8 * len * header.count {
                return Err(Error::Parse(format!(
                    "binary body has {} bytes, expected {}",
                    bytes.len(),
                    8 * len * header.count
                )));
            }
            let vals: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
                .collect();
            rows.extend(vals.chunks(len.max(1)).map(|c| c.to_vec()));
        }
    }
    if rows.len() != header.count {
        return Err(Error::Parse(format!(
            "header announces {} records, body has {}",
            header.count,
            rows.len()
        )));
    }
    let (n, m) = (header.ambient, header.m);
    let mut points = Vec::with_capacity(rows.len());
    let mut weights = Vec::with_capacity(rows.len());
    let mut frames = header.has_frames.then(Vec::new);
    for row in rows {
        points.push(DVector::from_column_slice(&row[..n]));
        weights.push(row[n]);
        if let Some(f) = frames.as_mut() {
            f.push(TangentFrame {
                sign: row[n + 1],
                frame: DMatrix::from_column_slice(n, m, &row[n + 2..]),
            });
        }
    }
    SampledCurrent::new(n, m, points, weights, frames)
}
