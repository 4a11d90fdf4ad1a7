//! Pearson correlation with a two-sided t-test for significance.

use crate::stats::special::t_two_sided_p;
use crate::stats::StatsError;

/// Sample Pearson correlation and its two-sided p-value.
pub fn pearson(pairs: &[(f64, f64)]) -> Result<(f64, f64), StatsError> {
    let n = pairs.len();
    if n < 3 {
        return Err(StatsError::TooFewPairs { pairs: n });
    }
    let nf = n as f64;
    let mean_x = pairs.iter().map(|(x, _)| x).sum::<f64>() / nf;
    let mean_y = pairs.iter().map(|(_, y)| y).sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in pairs {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let p = if (1.0 - r * r) <= 0.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        t_two_sided_p(t, df)
    };
    Ok((r, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_line() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let (r, p) = pearson(&pairs).unwrap();
        assert_eq!(r, 1.0);
        assert!(p < 1e-10);
    }

    #[test]
    fn perfect_anticorrelation() {
        let pairs: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, -(i as f64))).collect();
        let (r, _) = pearson(&pairs).unwrap();
        assert_eq!(r, -1.0);
    }

    #[test]
    fn matches_direct_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let pairs: Vec<(f64, f64)> = (0..50)
            .map(|_| {
                let x: f64 = rng.gen_range(-1.0..1.0);
                (x, 0.7 * x + rng.gen_range(-0.3..0.3))
            })
            .collect();
        let (r, _) = pearson(&pairs).unwrap();
        // Textbook formula over raw sums.
        let n = pairs.len() as f64;
        let sx: f64 = pairs.iter().map(|(x, _)| x).sum();
        let sy: f64 = pairs.iter().map(|(_, y)| y).sum();
        let sxx: f64 = pairs.iter().map(|(x, _)| x * x).sum();
        let syy: f64 = pairs.iter().map(|(_, y)| y * y).sum();
        let sxy: f64 = pairs.iter().map(|(x, y)| x * y).sum();
        let oracle = (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt());
        assert!((r - oracle).abs() < 1e-12);
    }

    #[test]
    fn symmetry_in_coordinates() {
        let pairs = vec![(1.0, 4.0), (2.0, 1.5), (3.0, 9.0), (5.0, 2.0)];
        let swapped: Vec<(f64, f64)> = pairs.iter().map(|(x, y)| (*y, *x)).collect();
        assert_eq!(pearson(&pairs).unwrap().0, pearson(&swapped).unwrap().0);
    }

    #[test]
    fn zero_variance_is_an_error() {
        let pairs = vec![(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)];
        assert!(matches!(pearson(&pairs), Err(StatsError::ZeroVariance)));
    }

    #[test]
    fn too_few_pairs() {
        assert!(matches!(
            pearson(&[(0.0, 1.0), (1.0, 0.0)]),
            Err(StatsError::TooFewPairs { pairs: 2 })
        ));
    }
}
