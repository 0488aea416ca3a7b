//! Shannon entropy and information gain over class histograms.

use thiserror::Error;

use crate::label::LabelId;

/// Entropy in bits of a (possibly weighted) class histogram. Empty or
/// all-zero histograms have zero entropy.
pub fn entropy_bits(masses: &[f64]) -> f64 {
    let total: f64 = masses.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for &m in masses {
        if m > 0.0 {
            let p = m / total;
            h -= p * p.log2();
        }
    }
    h.max(0.0)
}

/// Multiplies class counts by per-class weights (missing weights count as 1).
pub fn weighted_masses(counts: &[f64], weights: Option<&[f64]>) -> Vec<f64> {
    match weights {
        None => counts.to_vec(),
        Some(w) => counts.iter().enumerate().map(|(z, &c)| c * w.get(z).copied().unwrap_or(1.0)).collect(),
    }
}

/// Gain of splitting a parent histogram into `left` and `parent - left`,
/// with children weighted by their share of the parent mass.
pub fn gain_from_masses(parent: &[f64], left: &[f64]) -> f64 {
    let total: f64 = parent.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let right: Vec<f64> = parent.iter().zip(left).map(|(p, l)| (p - l).max(0.0)).collect();
    let wl: f64 = left.iter().sum();
    let wr: f64 = right.iter().sum();
    entropy_bits(parent) - (wl / total) * entropy_bits(left) - (wr / total) * entropy_bits(&right)
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GainError {
    #[error("parent set is empty")]
    EmptyParent,
    #[error("left and right children do not partition the parent")]
    PartitionMismatch,
}

fn histogram(labels: &[LabelId]) -> Vec<f64> {
    let mut h = vec![0.0; labels.iter().map(|&l| l as usize + 1).max().unwrap_or(0)];
    for &l in labels {
        h[l as usize] += 1.0;
    }
    h
}

/// Information gain of a labelled partition, in bits.
pub fn information_gain(parent: &[LabelId], left: &[LabelId], right: &[LabelId]) -> Result<f64, GainError> {
    information_gain_weighted(parent, left, right, None)
}

/// Information gain with per-class weights applied to the class counts.
pub fn information_gain_weighted(
    parent: &[LabelId],
    left: &[LabelId],
    right: &[LabelId],
    weights: Option<&[f64]>,
) -> Result<f64, GainError> {
    if parent.is_empty() {
        return Err(GainError::EmptyParent);
    }
    let mut p = histogram(parent);
    let mut l = histogram(left);
    let mut r = histogram(right);
    let n = p.len().max(l.len()).max(r.len());
    for v in [&mut p, &mut l, &mut r] {
        v.resize(n, 0.0);
    }
    if p.iter().zip(l.iter().zip(&r)).any(|(a, (b, c))| *a != b + c) {
        return Err(GainError::PartitionMismatch);
    }
    Ok(gain_from_masses(&weighted_masses(&p, weights), &weighted_masses(&l, weights)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const A: LabelId = 1;
    const B: LabelId = 2;

    #[test]
    fn perfect_separation_is_one_bit() {
        let g = information_gain(&[A, A, B, B], &[A, A], &[B, B]).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_separation_is_zero() {
        let g = information_gain(&[A, A, B, B], &[A, B], &[A, B]).unwrap();
        assert!(g.abs() < 1e-12);
    }

    #[test]
    fn unbalanced_split() {
        // h({A,A,B}) = log2(3) - 2/3
        let h3 = 3f64.log2() - 2.0 / 3.0;
        assert!((h3 - 0.918_295_834).abs() < 1e-9);
        let g = information_gain(&[A, A, B, B], &[A, A, B], &[B]).unwrap();
        assert!((g - (1.0 - 0.75 * h3)).abs() < 1e-12);
        assert!((g - 0.3113).abs() < 1e-4);
    }

    #[test]
    fn mismatch_and_empty_are_rejected() {
        assert_eq!(information_gain(&[A, B], &[A], &[A]), Err(GainError::PartitionMismatch));
        assert_eq!(information_gain(&[], &[], &[]), Err(GainError::EmptyParent));
    }

    #[test]
    fn empty_child_contributes_nothing() {
        let g = information_gain(&[A, B], &[A, B], &[]).unwrap();
        assert!(g.abs() < 1e-12);
    }
}
