//! LIBSVM text-format reader for binary classification data.
//!
//! One sample per nonempty line, `label idx:val idx:val ...` with 1-based
//! feature indices. Labels must form a subset of `{-1, +1}` or `{0, 1}`;
//! zero/one labels map to minus/plus one.

use crate::{CliError, Result};
use piag::{LabeledSample, SparseRow};
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<LabeledSample>,
    pub dim: usize,
}

struct RawSample {
    indices: Vec<u32>,
    values: Vec<f64>,
    label: f64,
}

pub fn load_libsvm(path: &Path, n_override: Option<usize>) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_libsvm(&text, n_override)
}

pub fn parse_libsvm(text: &str, n_override: Option<usize>) -> Result<Dataset> {
    let mut raw: Vec<RawSample> = Vec::new();
    let mut max_index_1based = 0usize;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().unwrap();
        let label: f64 = label_tok
            .parse()
            .map_err(|_| CliError::parse(line_no, format!("invalid label '{label_tok}'")))?;
        let mut indices: Vec<u32> = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        for tok in tokens {
            let (i_str, v_str) = tok.split_once(':').ok_or_else(|| {
                CliError::parse(line_no, format!("expected 'index:value', got '{tok}'"))
            })?;
            let i: usize = i_str.parse().map_err(|_| {
                CliError::parse(line_no, format!("invalid feature index '{i_str}'"))
            })?;
            if i == 0 {
                return Err(CliError::parse(line_no, "feature indices are 1-based"));
            }
            let v: f64 = v_str.parse().map_err(|_| {
                CliError::parse(line_no, format!("invalid feature value '{v_str}'"))
            })?;
            if let Some(&last) = indices.last() {
                if (i - 1) as u32 <= last {
                    return Err(CliError::parse(
                        line_no,
                        "feature indices must be strictly increasing",
                    ));
                }
            }
            indices.push((i - 1) as u32);
            values.push(v);
            max_index_1based = max_index_1based.max(i);
        }
        raw.push(RawSample {
            indices,
            values,
            label,
        });
    }

    let dim = match n_override {
        Some(n) => {
            if n < max_index_1based {
                return Err(CliError::config(format!(
                    "n_override {n} below the largest feature index {max_index_1based}"
                )));
            }
            n
        }
        None => max_index_1based,
    };

    // label mapping: {-1,+1} kept, {0,1} mapped 0 -> -1
    let mut zero_one = true;
    let mut pm_one = true;
    for s in &raw {
        if s.label != 0.0 && s.label != 1.0 {
            zero_one = false;
        }
        if s.label != -1.0 && s.label != 1.0 {
            pm_one = false;
        }
    }
    if !pm_one && !zero_one {
        let mut labels: Vec<String> = raw.iter().map(|s| format!("{}", s.label)).collect();
        labels.sort();
        labels.dedup();
        return Err(CliError::UnsupportedLabels { labels });
    }

    let mut samples = Vec::with_capacity(raw.len());
    for s in raw {
        let label = if pm_one {
            s.label
        } else if s.label == 0.0 {
            -1.0
        } else {
            1.0
        };
        let row = SparseRow::new(s.indices, s.values, dim.max(1))?;
        samples.push(LabeledSample::new(row, label)?);
    }
    Ok(Dataset { samples, dim })
}

/// Optional per-feature max-abs scaling; returns the applied scale factors.
pub fn max_abs_scale(samples: &mut [LabeledSample], dim: usize) -> Vec<f64> {
    let mut max_abs = vec![0.0f64; dim];
    for s in samples.iter() {
        for (&i, &v) in s.row().indices().iter().zip(s.row().values()) {
            max_abs[i as usize] = max_abs[i as usize].max(v.abs());
        }
    }
    let scales: Vec<f64> = max_abs
        .iter()
        .map(|&m| if m > 0.0 { 1.0 / m } else { 1.0 })
        .collect();
    for s in samples.iter_mut() {
        let row = s.row().clone();
        let mut row = row;
        row.scale_values(|i| scales[i as usize]);
        *s = LabeledSample::new(row, s.label()).unwrap();
    }
    scales
}
