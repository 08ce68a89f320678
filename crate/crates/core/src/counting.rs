//! Shot-noise-limited coincidence counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::biphoton::{DetectorPlane, Pattern};
use crate::error::{Error, Result};

/// Integer counts per detector position.
#[derive(Debug, Clone, PartialEq)]
pub struct CountsHistogram {
    positions: Vec<f64>,
    counts: Vec<u64>,
    plane: DetectorPlane,
    seed: Option<u64>,
}

impl CountsHistogram {
    pub fn new(positions: Vec<f64>, counts: Vec<u64>, plane: DetectorPlane) -> Result<Self> {
        if positions.len() != counts.len() || positions.is_empty() {
            return Err(Error::invalid("positions and counts must be equal, non-empty lengths"));
        }
        Ok(Self {
            positions,
            counts,
            plane,
            seed: None,
        })
    }

    /// Seed the counts were drawn with; `None` for measured or loaded data.
    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn plane(&self) -> DetectorPlane {
        self.plane
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }
}

/// Expected counts per bin when `total_counts` are spread over the pattern.
pub fn expected_counts(pattern: &Pattern, total_counts: f64) -> Result<Vec<f64>> {
    if !(total_counts >= 0.0 && total_counts.is_finite()) {
        return Err(Error::invalid("total counts must be non-negative"));
    }
    let sum: f64 = pattern.rates().iter().sum();
    if sum <= 0.0 {
        return Err(Error::invalid("pattern has no rate to sample"));
    }
    Ok(pattern
        .rates()
        .iter()
        .map(|r| r / sum * total_counts)
        .collect())
}

/// Independent Poisson draw per bin, mean proportional to the rate.
///
/// Bin `i` draws from its own ChaCha8 stream `i` under `seed`, so a bin's
/// count does not depend on how many bins precede it or on thread layout.
pub fn sample_counts(pattern: &Pattern, total_counts: u64, seed: u64) -> Result<CountsHistogram> {
    if total_counts == 0 {
        return Err(Error::invalid("total counts must be positive"));
    }
    let means = expected_counts(pattern, total_counts as f64)?;
    let counts = means
        .iter()
        .enumerate()
        .map(|(i, &mean)| {
            if mean == 0.0 {
                return Ok(0);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let dist = Poisson::new(mean)
                .map_err(|e| Error::invalid(format!("poisson mean {mean}: {e}")))?;
            Ok(dist.sample(&mut rng) as u64)
        })
        .collect::<Result<Vec<u64>>>()?;
    let mut h = CountsHistogram::new(pattern.positions().to_vec(), counts, pattern.plane())?;
    h.seed = Some(seed);
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(n: usize) -> Pattern {
        let xs = (0..n).map(|i| i as f64).collect();
        Pattern::new(xs, vec![1.0; n], DetectorPlane::ImagingFocal).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let p = flat(100);
        assert_eq!(
            sample_counts(&p, 10_000, 7).unwrap(),
            sample_counts(&p, 10_000, 7).unwrap()
        );
        assert_ne!(
            sample_counts(&p, 10_000, 7).unwrap(),
            sample_counts(&p, 10_000, 8).unwrap()
        );
    }

    #[test]
    fn zero_rate_bins_stay_empty() {
        let xs = (0..50).map(|i| i as f64).collect();
        let rates = (0..50).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let p = Pattern::new(xs, rates, DetectorPlane::Image).unwrap();
        let h = sample_counts(&p, 100_000, 1).unwrap();
        assert!(h.counts().iter().step_by(2).all(|&c| c == 0));
    }

    #[test]
    fn poisson_moments() {
        // mean and variance per bin both equal the expectation
        let p = flat(20_000);
        let h = sample_counts(&p, 800_000, 3).unwrap();
        let c = h.as_f64();
        let n = c.len() as f64;
        let mean = c.iter().sum::<f64>() / n;
        let var = c.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 40.0).abs() < 0.2, "{mean}");
        assert!((var / 40.0 - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn rejects_bad_totals() {
        let p = flat(4);
        assert!(sample_counts(&p, 0, 0).is_err());
        assert!(expected_counts(&p, f64::NAN).is_err());
        let zero = Pattern::new(vec![0.0, 1.0], vec![0.0, 0.0], DetectorPlane::Image).unwrap();
        assert!(sample_counts(&zero, 10, 0).is_err());
    }
}
