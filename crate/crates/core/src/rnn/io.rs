//! Plain-text model files.
//!
//! ```text
//! # optional comment lines
//! beamtrack-rnn 1
//! dims <input> <hidden> <output>
//! <tensor name> <rows> <cols>
//! <one matrix row per line>
//! ...
//! ```
//!
//! Tensors follow declaration order. Values use Rust's shortest round-trip
//! float formatting, so a write/read cycle is bit-exact.

use std::io::{BufRead, Write};

use super::lstm::LstmParams;
use super::network::RnnNetwork;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "beamtrack-rnn";

const TENSOR_NAMES: [&str; 11] = [
    "lstm1.w",
    "lstm1.u",
    "lstm1.b",
    "bilstm_fwd.w",
    "bilstm_fwd.u",
    "bilstm_fwd.b",
    "bilstm_bwd.w",
    "bilstm_bwd.u",
    "bilstm_bwd.b",
    "dense.w",
    "dense.b",
];

fn shapes(input: usize, hidden: usize, output: usize) -> [(usize, usize); 11] {
    let g = 4 * hidden;
    [
        (g, input),
        (g, hidden),
        (1, g),
        (g, hidden),
        (g, hidden),
        (1, g),
        (g, hidden),
        (g, hidden),
        (1, g),
        (output, 2 * hidden),
        (1, output),
    ]
}

pub fn write_model<W: Write>(mut out: W, net: &RnnNetwork, comments: &[String]) -> std::io::Result<()> {
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    writeln!(out, "{MAGIC} {FORMAT_VERSION}")?;
    let (i, h, o) = (net.input_dim(), net.lstm1.hidden_dim, net.output_dim());
    writeln!(out, "dims {i} {h} {o}")?;
    for ((name, (rows, cols)), data) in TENSOR_NAMES.iter().zip(shapes(i, h, o)).zip(net.tensors()) {
        writeln!(out, "{name} {rows} {cols}")?;
        for row in data.chunks(cols) {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    Ok(())
}

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn parse_usizes(line: &str, prefix: &str, n: usize) -> Result<Vec<usize>> {
    let mut toks = line.split_whitespace();
    if toks.next() != Some(prefix) {
        return Err(fmt_err(format!("expected `{prefix}`, found `{line}`")));
    }
    let vals: Vec<usize> = toks
        .map(|t| t.parse().map_err(|_| fmt_err(format!("bad integer `{t}`"))))
        .collect::<Result<_>>()?;
    if vals.len() != n {
        return Err(fmt_err(format!("`{prefix}` needs {n} values")));
    }
    Ok(vals)
}

pub fn read_model<R: BufRead>(input: R) -> Result<RnnNetwork> {
    let mut lines = Vec::new();
    for l in input.lines() {
        let l = l.map_err(|e| fmt_err(e.to_string()))?;
        let t = l.trim();
        if !t.is_empty() && !t.starts_with('#') {
            lines.push(t.to_string());
        }
    }
    let mut it = lines.iter();
    let header = it.next().ok_or_else(|| fmt_err("empty model file"))?;
    let version = parse_usizes(header, MAGIC, 1).map_err(|_| fmt_err("not a beamtrack model file"))?[0];
    if version != FORMAT_VERSION as usize {
        return Err(fmt_err(format!("unsupported model version {version}")));
    }
    let dims = parse_usizes(it.next().ok_or_else(|| fmt_err("missing dims"))?, "dims", 3)?;
    let (i, h, o) = (dims[0], dims[1], dims[2]);
    let mut net = RnnNetwork {
        lstm1: LstmParams::zeros(i, h),
        bilstm_fwd: LstmParams::zeros(h, h),
        bilstm_bwd: LstmParams::zeros(h, h),
        dense_weights: vec![0.0; o * 2 * h],
        dense_bias: vec![0.0; o],
    };
    for ((name, (rows, cols)), dst) in TENSOR_NAMES.iter().zip(shapes(i, h, o)).zip(net.tensors_mut()) {
        let line = it.next().ok_or_else(|| fmt_err(format!("missing tensor {name}")))?;
        let rc = parse_usizes(line, name, 2)?;
        if rc != [rows, cols] {
            return Err(fmt_err(format!("{name}: shape {rc:?}, expected [{rows}, {cols}]")));
        }
        dst.clear();
        for r in 0..rows {
            let row = it.next().ok_or_else(|| fmt_err(format!("{name}: missing row {r}")))?;
            let before = dst.len();
            for tok in row.split_whitespace() {
                dst.push(
                    tok.parse()
                        .map_err(|_| fmt_err(format!("{name}: bad number `{tok}`")))?,
                );
            }
            if dst.len() - before != cols {
                return Err(fmt_err(format!("{name}: row {r} has {} values", dst.len() - before)));
            }
        }
    }
    if it.next().is_some() {
        return Err(fmt_err("trailing data after last tensor"));
    }
    net.validate()?;
    Ok(net)
}
