use rand::seq::SliceRandom;

use super::{EvalError, Result};
use crate::seed;

/// One cross-validation fold. `train` and `val` together form the
/// complement of `test`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub fold_id: usize,
    pub test: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

fn by_class(labels: &[usize], indices: &[usize]) -> Vec<Vec<usize>> {
    let n_classes = indices.iter().map(|&i| labels[i] + 1).max().unwrap_or(0);
    let mut out = vec![Vec::new(); n_classes];
    for &i in indices {
        out[labels[i]].push(i);
    }
    out
}

/// Stratified k-fold assignment of test folds. Each class is shuffled, then
/// dealt round-robin continuing where the previous class stopped, so fold
/// sizes differ by at most one and per-class counts by at most one.
///
/// Validation sets are carved from each training portion with
/// [`train_val_split`] using `val_fraction`.
pub fn stratified_kfold(labels: &[usize], k: usize, val_fraction: f64, seed: u64) -> Result<Vec<FoldAssignment>> {
    if k < 2 {
        return Err(EvalError::InvalidArgument(format!("k = {k} must be >= 2")));
    }
    let all: Vec<usize> = (0..labels.len()).collect();
    let classes = by_class(labels, &all);
    for (class, members) in classes.iter().enumerate() {
        if members.len() < k {
            return Err(EvalError::ClassTooSmall {
                class,
                count: members.len(),
                k,
            });
        }
    }
    let mut fold_of = vec![0usize; labels.len()];
    let mut offset = 0;
    for (class, members) in classes.iter().enumerate() {
        let mut members = members.clone();
        members.shuffle(&mut seed::stream(seed, "kfold", class as u64));
        for (m, &i) in members.iter().enumerate() {
            fold_of[i] = (offset + m) % k;
        }
        offset += members.len();
    }
    (0..k)
        .map(|fold_id| {
            let test: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] == fold_id).collect();
            let rest: Vec<usize> = all.iter().copied().filter(|&i| fold_of[i] != fold_id).collect();
            let (train, val) = train_val_split(labels, &rest, val_fraction, seed::derive(seed, "val-split", fold_id as u64))?;
            Ok(FoldAssignment {
                fold_id,
                test,
                train,
                val,
            })
        })
        .collect()
}

/// Stratified hold-out: `round(fraction * n_c)` members of each class go to
/// validation. Both outputs are sorted.
pub fn train_val_split(labels: &[usize], fold: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(EvalError::InvalidArgument(format!("fraction {fraction} outside (0, 1)")));
    }
    let mut train = Vec::new();
    let mut val = Vec::new();
    for (class, mut members) in by_class(labels, fold).into_iter().enumerate() {
        members.shuffle(&mut seed::stream(seed, "split", class as u64));
        let n_val = (fraction * members.len() as f64).round() as usize;
        val.extend_from_slice(&members[..n_val]);
        train.extend_from_slice(&members[n_val..]);
    }
    if train.is_empty() {
        return Err(EvalError::EmptyResult("train"));
    }
    if val.is_empty() {
        return Err(EvalError::EmptyResult("validation"));
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

/// FNV-1a digest over every fold's index sets, used to check that variants
/// were evaluated on the same partition.
pub fn fold_fingerprint(folds: &[FoldAssignment]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        for b in x.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    };
    for f in folds {
        eat(f.fold_id as u64);
        for part in [&f.test, &f.train, &f.val] {
            eat(part.len() as u64);
            part.iter().for_each(|&i| eat(i as u64));
        }
    }
    h
}
