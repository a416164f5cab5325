use std::collections::HashMap;
use std::hash::Hash;

use super::PsychometricsError;

/// Cohen's kappa between two raters' labels for the same sequence of items.
///
/// `κ = (p_o − p_e) / (1 − p_e)`, with `p_e` from the product of each rater's
/// marginal label frequencies. When both raters use one identical label
/// throughout (`p_e = p_o = 1`) the result is 1.
pub fn cohens_kappa<T: Eq + Hash>(labels_a: &[T], labels_b: &[T]) -> Result<f64, PsychometricsError> {
    if labels_a.len() != labels_b.len() {
        return Err(PsychometricsError::LengthMismatch {
            a: labels_a.len(),
            b: labels_b.len(),
        });
    }
    if labels_a.is_empty() {
        return Err(PsychometricsError::NoLabels);
    }
    let n = labels_a.len() as f64;
    let mut marginal_a: HashMap<&T, usize> = HashMap::new();
    let mut marginal_b: HashMap<&T, usize> = HashMap::new();
    let mut agreements = 0usize;
    for (x, y) in labels_a.iter().zip(labels_b) {
        *marginal_a.entry(x).or_default() += 1;
        *marginal_b.entry(y).or_default() += 1;
        if x == y {
            agreements += 1;
        }
    }
    let observed = agreements as f64 / n;
    let chance: f64 = marginal_a
        .iter()
        .map(|(label, &count)| {
            let other = marginal_b.get(label).copied().unwrap_or(0);
            (count as f64 / n) * (other as f64 / n)
        })
        .sum();
    if chance >= 1.0 {
        return Ok(1.0);
    }
    Ok((observed - chance) / (1.0 - chance))
}
