//! Text checkpoint format for a single network.
//!
//! ```text
//! ace-rl-mlp v1
//! hidden selu
//! output tanh
//! layers 2
//! layer 12 64
//! w <in values>        (one line per output row, row-major)
//! b <out values>
//! layer 64 1
//! ...
//! end
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{Activation, Layer, MlpParameters, NumericsError};

pub const CHECKPOINT_MAGIC: &str = "ace-rl-mlp";
pub const CHECKPOINT_VERSION: &str = "v1";

pub fn encode(params: &MlpParameters) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}");
    let _ = writeln!(out, "hidden {}", params.hidden_activation());
    let _ = writeln!(out, "output {}", params.output_activation());
    let _ = writeln!(out, "layers {}", params.layers().len());
    for layer in params.layers() {
        let _ = writeln!(out, "layer {} {}", layer.in_dim(), layer.out_dim());
        for row in layer.weights.rows() {
            write_values(&mut out, "w", row.iter());
        }
        write_values(&mut out, "b", layer.bias.iter());
    }
    out.push_str("end\n");
    out
}

fn write_values<'a>(out: &mut String, tag: &str, values: impl Iterator<Item = &'a f64>) {
    out.push_str(tag);
    for v in values {
        let _ = write!(out, " {v}");
    }
    out.push('\n');
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn next(&mut self, expect: &str) -> Result<(usize, Vec<&'a str>), NumericsError> {
        loop {
            match self.inner.next() {
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((n, l)) => return Ok((n + 1, l.split_whitespace().collect())),
                None => return Err(corrupt(0, format!("truncated file, expected {expect}"))),
            }
        }
    }

    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>), NumericsError> {
        let (n, fields) = self.next(tag)?;
        if fields.first() != Some(&tag) {
            return Err(corrupt(
                n,
                format!("expected '{tag}', found '{}'", fields.join(" ")),
            ));
        }
        Ok((n, fields[1..].to_vec()))
    }
}

fn corrupt(line: usize, message: String) -> NumericsError {
    NumericsError::Checkpoint { line, message }
}

fn parse_usize(line: usize, s: Option<&&str>) -> Result<usize, NumericsError> {
    s.and_then(|s| s.parse().ok())
        .ok_or_else(|| corrupt(line, "expected a non-negative integer".into()))
}

fn parse_values(line: usize, fields: &[&str], expected: usize) -> Result<Vec<f64>, NumericsError> {
    if fields.len() != expected {
        return Err(corrupt(
            line,
            format!("declared {expected} values, found {}", fields.len()),
        ));
    }
    fields
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| corrupt(line, format!("'{f}' is not a number")))
        })
        .collect()
}

pub fn decode(text: &str) -> Result<MlpParameters, NumericsError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (n, header) = lines.next("header")?;
    if header.first() != Some(&CHECKPOINT_MAGIC) {
        return Err(corrupt(n, "not an ace-rl network checkpoint".into()));
    }
    match header.get(1) {
        Some(&CHECKPOINT_VERSION) => {}
        Some(other) => return Err(NumericsError::UnsupportedVersion(other.to_string())),
        None => return Err(corrupt(n, "missing version tag".into())),
    }
    let (n, hidden) = lines.tagged("hidden")?;
    let hidden: Activation = hidden
        .first()
        .ok_or_else(|| corrupt(n, "missing hidden activation".into()))?
        .parse()?;
    let (n, output) = lines.tagged("output")?;
    let output: Activation = output
        .first()
        .ok_or_else(|| corrupt(n, "missing output activation".into()))?
        .parse()?;
    let (n, count) = lines.tagged("layers")?;
    let count = parse_usize(n, count.first())?;

    let mut layers = Vec::with_capacity(count);
    let mut prev_out = None;
    for k in 0..count {
        let (n, dims) = lines.tagged("layer")?;
        let in_dim = parse_usize(n, dims.first())?;
        let out_dim = parse_usize(n, dims.get(1))?;
        if let Some(prev) = prev_out {
            if prev != in_dim {
                return Err(corrupt(
                    n,
                    format!(
                        "layer {k} declares input {in_dim} but layer {} outputs {prev}",
                        k - 1
                    ),
                ));
            }
        }
        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let (n, row) = lines.tagged("w")?;
            weights.extend(parse_values(n, &row, in_dim)?);
        }
        let (n, bias) = lines.tagged("b")?;
        let bias = parse_values(n, &bias, out_dim)?;
        let weights = Array2::from_shape_vec((out_dim, in_dim), weights).expect("counted values");
        layers.push(Layer::new(weights, Array1::from(bias))?);
        prev_out = Some(out_dim);
    }
    let (n, end) = lines.next("end")?;
    if end != ["end"] {
        return Err(corrupt(
            n,
            format!("expected 'end', found '{}'", end.join(" ")),
        ));
    }
    MlpParameters::new(layers, hidden, output)
}

pub fn checkpoint_save(params: &MlpParameters, path: &Path) -> io::Result<()> {
    fs::write(path, encode(params))
}

pub fn checkpoint_load(path: &Path) -> Result<MlpParameters, NumericsError> {
    let text = fs::read_to_string(path).map_err(|e| NumericsError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    decode(&text)
}
