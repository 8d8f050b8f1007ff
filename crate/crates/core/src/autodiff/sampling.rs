//! Non-differentiable draws from the distributions the networks parameterise.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::{Error, Result};

/// Draws from `Beta(alpha, beta)` as `G_a / (G_a + G_b)` with unit-scale Gamma variates.
/// The result is nudged off the endpoints so it lies strictly inside (0, 1).
pub fn beta_sample<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> Result<f64> {
    let ga = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("Beta alpha {alpha}: {e}")))?
        .sample(rng);
    let gb = Gamma::new(beta, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("Beta beta {beta}: {e}")))?
        .sample(rng);
    let x = ga / (ga + gb);
    Ok(if x.is_nan() {
        0.5
    } else {
        x.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
    })
}

/// Samples an index from a probability vector by inverse CDF.
pub fn categorical_sample<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i;
        }
    }
    // Rounding can leave the cumulative sum just below 1.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Stream};

    #[test]
    fn beta_means() {
        let mut rng = substream(11, Stream::AgentSampling);
        for (a, b) in [(1.0, 1.0), (2.0, 5.0), (5.0, 2.0)] {
            let n = 100_000;
            let mut sum = 0.0;
            for _ in 0..n {
                let x = beta_sample(a, b, &mut rng).unwrap();
                assert!(x > 0.0 && x < 1.0);
                sum += x;
            }
            let mean = sum / n as f64;
            assert!((mean - a / (a + b)).abs() < 0.01, "({a},{b}) mean {mean}");
        }
        assert!(beta_sample(0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn categorical_frequencies() {
        let mut rng = substream(12, Stream::AgentSampling);
        let probs = [0.2, 0.0, 0.5, 0.3];
        let mut counts = [0usize; 4];
        for _ in 0..50_000 {
            counts[categorical_sample(&probs, &mut rng)] += 1;
        }
        assert_eq!(counts[1], 0);
        for (c, p) in counts.iter().zip(probs) {
            assert!((*c as f64 / 50_000.0 - p).abs() < 0.01);
        }
    }
}
