//! Logistic link from ranking scores to ratings.
//!
//! BPR produces unbounded ranking scores, not ratings. To report a comparable
//! MAE we fit `rating ≈ σ(α·score + β)` by least squares on the training pairs
//! (Levenberg-Marquardt on standardized scores) and use it for prediction.

use crate::error::{Error, Result};

const MAX_ITERS: usize = 500;
const STEP_TOL: f64 = 1e-12;
const MEAN_CLAMP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub alpha: f64,
    pub beta: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn sse(z: &[f64], r: &[f64], a: f64, b: f64) -> f64 {
    z.iter()
        .zip(r)
        .map(|(&z, &r)| {
            let e = sigmoid(a * z + b) - r;
            e * e
        })
        .sum()
}

impl Calibration {
    pub fn apply(&self, score: f64) -> f64 {
        if self.alpha == 0.0 {
            return sigmoid(self.beta);
        }
        sigmoid(self.alpha * score + self.beta)
    }

    /// Least-squares fit of `σ(α·s + β)` to `ratings`.
    ///
    /// Constant scores leave `α` unidentifiable; the fit then returns `α = 0`
    /// and a `β` reproducing the mean rating.
    pub fn fit(scores: &[f64], ratings: &[f64]) -> Result<Calibration> {
        if scores.is_empty() || scores.len() != ratings.len() {
            return Err(Error::invalid(format!(
                "calibration needs equal non-empty inputs, got {} scores and {} ratings",
                scores.len(),
                ratings.len()
            )));
        }
        if scores.iter().chain(ratings).any(|x| !x.is_finite()) {
            return Err(Error::invalid("calibration inputs must be finite"));
        }
        let n = scores.len() as f64;
        let mean_r = ratings.iter().sum::<f64>() / n;
        let b0 = logit(mean_r.clamp(MEAN_CLAMP, 1.0 - MEAN_CLAMP));
        let mean_s = scores.iter().sum::<f64>() / n;
        let std_s = (scores.iter().map(|s| (s - mean_s).powi(2)).sum::<f64>() / n).sqrt();
        if std_s <= 1e-12 * mean_s.abs().max(1.0) {
            return Ok(Calibration {
                alpha: 0.0,
                beta: b0,
            });
        }

        let z: Vec<f64> = scores.iter().map(|s| (s - mean_s) / std_s).collect();
        let (mut a, mut b) = (0.0, b0);
        let mut cost = sse(&z, ratings, a, b);
        let mut mu = 1e-3;
        for _ in 0..MAX_ITERS {
            // Normal equations of the Gauss-Newton step.
            let (mut jaa, mut jab, mut jbb, mut ga, mut gb) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&zk, &rk) in z.iter().zip(ratings) {
                let p = sigmoid(a * zk + b);
                let dp = p * (1.0 - p);
                let e = p - rk;
                jaa += dp * dp * zk * zk;
                jab += dp * dp * zk;
                jbb += dp * dp;
                ga += dp * zk * e;
                gb += dp * e;
            }
            let mut accepted = false;
            for _ in 0..50 {
                let (m00, m11) = (jaa * (1.0 + mu) + 1e-300, jbb * (1.0 + mu) + 1e-300);
                let det = m00 * m11 - jab * jab;
                if det <= 0.0 || !det.is_finite() {
                    mu *= 4.0;
                    continue;
                }
                let da = -(m11 * ga - jab * gb) / det;
                let db = -(m00 * gb - jab * ga) / det;
                let next = sse(&z, ratings, a + da, b + db);
                if next <= cost {
                    a += da;
                    b += db;
                    let improvement = cost - next;
                    cost = next;
                    mu = (mu / 3.0).max(1e-12);
                    accepted = true;
                    if da.abs().max(db.abs()) < STEP_TOL || improvement <= 1e-15 * cost {
                        return Ok(Self::unstandardize(a, b, mean_s, std_s));
                    }
                    break;
                }
                mu *= 4.0;
            }
            if !accepted {
                break;
            }
        }
        Ok(Self::unstandardize(a, b, mean_s, std_s))
    }

    fn unstandardize(a: f64, b: f64, mean: f64, std: f64) -> Calibration {
        Calibration {
            alpha: a / std,
            beta: b - a * mean / std,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scores_reproduce_mean() {
        let scores = [0.7; 6];
        let ratings = [0.1, 0.2, 0.3, 0.4, 0.5, 0.9];
        let cal = Calibration::fit(&scores, &ratings).unwrap();
        assert_eq!(cal.alpha, 0.0);
        let mean = ratings.iter().sum::<f64>() / 6.0;
        for s in [-5.0, 0.7, 100.0] {
            assert!((cal.apply(s) - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn large_scores_saturate_to_one() {
        let cal = Calibration {
            alpha: 1.5,
            beta: -0.3,
        };
        assert_eq!(cal.apply(f64::INFINITY), 1.0);
        assert_eq!(cal.apply(1e300), 1.0);
        assert!(cal.apply(40.0) > 1.0 - 1e-12);
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        assert!(Calibration::fit(&[1.0], &[]).is_err());
        assert!(Calibration::fit(&[], &[]).is_err());
    }

    /// Independent oracle: exhaustive grid, then repeated 10x zoom.
    fn grid_fit(s: &[f64], r: &[f64]) -> (f64, f64) {
        let cost = |a: f64, b: f64| -> f64 {
            s.iter()
                .zip(r)
                .map(|(&s, &r)| (1.0 / (1.0 + (-(a * s + b)).exp()) - r).powi(2))
                .sum()
        };
        let (mut ca, mut cb, mut half) = (0.0, 0.0, 10.0);
        for _ in 0..7 {
            let step = half / 50.0;
            let mut best = (f64::INFINITY, ca, cb);
            for i in -50..=50 {
                for j in -50..=50 {
                    let (a, b) = (ca + i as f64 * step, cb + j as f64 * step);
                    let c = cost(a, b);
                    if c < best.0 {
                        best = (c, a, b);
                    }
                }
            }
            ca = best.1;
            cb = best.2;
            half /= 10.0;
        }
        (ca, cb)
    }

    #[test]
    fn fit_matches_grid_search_oracle() {
        let scores = [-2.0, -1.4, -0.9, -0.3, 0.0, 0.4, 0.8, 1.3, 1.9, 2.5];
        let ratings = [0.05, 0.2, 0.15, 0.4, 0.35, 0.6, 0.55, 0.8, 0.75, 0.95];
        let cal = Calibration::fit(&scores, &ratings).unwrap();
        let (a, b) = grid_fit(&scores, &ratings);
        assert!((cal.alpha - a).abs() < 1e-3, "alpha {} vs {a}", cal.alpha);
        assert!((cal.beta - b).abs() < 1e-3, "beta {} vs {b}", cal.beta);
    }
}
