//! Preference datasets on disk: `pair_id,label,f_0,...,f_{d-1}`.

use std::path::Path;

use prefdesign_core::model::{normalize_armset, ArmSet};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{HarnessError, Result};
use crate::output::fmt_sig;

/// Arms with their recorded orientation labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceData {
    pub arms: ArmSet,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplaySplit {
    pub train: PreferenceData,
    pub test: PreferenceData,
}

/// Reads a preference CSV, negates label-0 rows so that every arm is stored
/// as chosen-minus-rejected with label 1, and rescales all rows by the
/// largest norm.
pub fn read_preferences(path: &Path) -> Result<PreferenceData> {
    let file = std::fs::File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    if header.len() < 3 || &header[0] != "pair_id" || &header[1] != "label" {
        return Err(HarnessError::format(Some(1), "header must be pair_id,label,f_0,..."));
    }
    for (k, name) in header.iter().skip(2).enumerate() {
        if name != format!("f_{k}") {
            return Err(HarnessError::format(Some(1), format!("expected column f_{k}, found {name}")));
        }
    }
    let d = header.len() - 2;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize);
        if rec.len() != d + 2 {
            return Err(HarnessError::format(line, format!("expected {} fields, found {}", d + 2, rec.len())));
        }
        let flip = match &rec[1] {
            "1" => false,
            "0" => true,
            other => return Err(HarnessError::format(line, format!("label must be 0 or 1, found {other:?}"))),
        };
        let mut z = Vec::with_capacity(d);
        for field in rec.iter().skip(2) {
            let v: f64 =
                field.parse().map_err(|_| HarnessError::format(line, format!("cannot parse {field:?} as a number")))?;
            if !v.is_finite() {
                return Err(HarnessError::format(line, "non-finite feature"));
            }
            z.push(if flip { -v } else { v });
        }
        rows.push(z);
    }
    if rows.is_empty() {
        return Err(HarnessError::format(None, "file has no data rows"));
    }
    let arms = normalize_armset(&rows).map_err(|e| HarnessError::format(None, e.to_string()))?;
    let n = arms.len();
    Ok(PreferenceData { arms, labels: vec![true; n] })
}

/// Writes arms as a preference CSV with `pair_id` equal to the row index.
pub fn write_preferences(path: &Path, data: &PreferenceData) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(HarnessError::from)?;
    let d = data.arms.dim();
    let mut header = vec!["pair_id".to_string(), "label".to_string()];
    header.extend((0..d).map(|k| format!("f_{k}")));
    w.write_record(&header)?;
    for (i, label) in data.labels.iter().enumerate() {
        let mut rec = vec![i.to_string(), u8::from(*label).to_string()];
        // Full precision so that reading back reproduces the arms exactly.
        rec.extend(data.arms.features(i).iter().map(|x| format!("{x:?}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Seeded shuffle into train and test parts. The train share is
/// `round(fraction · n)`, kept in `[1, n − 1]` when `n ≥ 2`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(HarnessError::config("split fraction must lie in (0, 1)"));
    }
    if n < 2 {
        return Err(HarnessError::config("splitting needs at least two rows"));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let test = idx.split_off(n_train);
    Ok((idx, test))
}

pub fn split_dataset(data: &PreferenceData, fraction: f64, seed: u64) -> Result<ReplaySplit> {
    let (tr, te) = split_indices(data.arms.len(), fraction, seed)?;
    let part = |idx: &[usize]| -> Result<PreferenceData> {
        Ok(PreferenceData { arms: data.arms.subset(idx)?, labels: idx.iter().map(|&i| data.labels[i]).collect() })
    };
    Ok(ReplaySplit { train: part(&tr)?, test: part(&te)? })
}

/// [`read_preferences`] followed by a seeded split.
pub fn load_replay(path: &Path, fraction: f64, seed: u64) -> Result<ReplaySplit> {
    split_dataset(&read_preferences(path)?, fraction, seed)
}

/// Fraction of arms whose score sign agrees with the recorded orientation;
/// a zero score counts as wrong.
pub fn evaluate_accuracy(theta: &[f64], arms: &ArmSet, labels: &[bool]) -> Result<f64> {
    if arms.is_empty() || labels.len() != arms.len() {
        return Err(HarnessError::config("test set must be nonempty with one label per arm"));
    }
    let correct = arms
        .scores(theta)
        .into_iter()
        .zip(labels)
        .filter(|(s, &y)| if y { *s > 0.0 } else { *s < 0.0 })
        .count();
    Ok(correct as f64 / arms.len() as f64)
}

/// Comma-separated list of reals, as used for `θ` on the command line.
pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| HarnessError::config(format!("cannot parse {t:?} as a number"))))
        .collect()
}

/// Renders a vector with nine significant digits.
pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| fmt_sig(*x)).collect::<Vec<_>>().join(",")
}
