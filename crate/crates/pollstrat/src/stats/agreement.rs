//! Inter-rater agreement: Cohen's kappa for two raters, Fleiss' kappa for
//! any number of raters.

use std::collections::BTreeMap;

use crate::stats::StatsError;

/// Cohen's kappa between two raters' label sequences.
///
/// When both raters are constant and identical, chance agreement is 1 and the
/// ratio is undefined; agreement is perfect, so 1.0 is returned by convention.
pub fn cohens_kappa<T: Ord + Clone>(labels_a: &[T], labels_b: &[T]) -> Result<f64, StatsError> {
    if labels_a.len() != labels_b.len() || labels_a.is_empty() {
        return Err(StatsError::LengthMismatch {
            left: labels_a.len(),
            right: labels_b.len(),
        });
    }
    let n = labels_a.len() as f64;
    let observed = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a == b)
        .count() as f64
        / n;

    let mut freq_a: BTreeMap<&T, f64> = BTreeMap::new();
    let mut freq_b: BTreeMap<&T, f64> = BTreeMap::new();
    for (a, b) in labels_a.iter().zip(labels_b) {
        *freq_a.entry(a).or_insert(0.0) += 1.0;
        *freq_b.entry(b).or_insert(0.0) += 1.0;
    }
    let chance: f64 = freq_a
        .iter()
        .map(|(cat, ca)| ca / n * freq_b.get(cat).copied().unwrap_or(0.0) / n)
        .sum();

    if (1.0 - chance).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Fleiss' kappa over an items x raters matrix of categorical ratings.
pub fn fleiss_kappa<T: Ord + Clone>(ratings: &[Vec<T>]) -> Result<f64, StatsError> {
    if ratings.len() < 2 {
        return Err(StatsError::TooFewItems { items: ratings.len() });
    }
    let n_raters = ratings[0].len();
    if n_raters < 2 {
        return Err(StatsError::TooFewRaters { raters: n_raters });
    }
    for (i, row) in ratings.iter().enumerate() {
        if row.len() != n_raters {
            return Err(StatsError::MissingCell { item: i });
        }
    }
    let n_items = ratings.len() as f64;
    let r = n_raters as f64;

    // Item x category count matrix.
    let mut categories: Vec<&T> = Vec::new();
    for row in ratings {
        for label in row {
            if !categories.contains(&label) {
                categories.push(label);
            }
        }
    }
    let mut counts = vec![vec![0.0; categories.len()]; ratings.len()];
    for (i, row) in ratings.iter().enumerate() {
        for label in row {
            let j = categories.iter().position(|c| *c == label).unwrap();
            counts[i][j] += 1.0;
        }
    }

    // Per-item agreement and category proportions.
    let p_bar: f64 = counts
        .iter()
        .map(|row| {
            row.iter().map(|c| c * (c - 1.0)).sum::<f64>() / (r * (r - 1.0))
        })
        .sum::<f64>()
        / n_items;
    let p_e: f64 = (0..categories.len())
        .map(|j| {
            let pj = counts.iter().map(|row| row[j]).sum::<f64>() / (n_items * r);
            pj * pj
        })
        .sum();

    if (1.0 - p_e).abs() < f64::EPSILON {
        return Ok(1.0);
    }
    Ok((p_bar - p_e) / (1.0 - p_e))
}
