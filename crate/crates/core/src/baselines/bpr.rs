//! Bayesian Personalized Ranking with matrix-factorization scores.
//!
//! Every observed pair is treated as positive implicit feedback. A step draws
//! an observed `(u, i)`, a uniformly random item `j` the user has not touched,
//! and descends on
//!
//! ```text
//! -ln σ(s(u,i) - s(u,j)) + reg/2 (|p_u|^2 + |q_i|^2 + |q_j|^2 + b_i^2 + b_j^2)
//! ```
//!
//! with `s(u,i) = p_u·q_i + b_i`. Ranking scores are turned into ratings by a
//! fitted logistic link (see [`Calibration`]).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::calibration::Calibration;
use crate::dataio::{IdIndex, RatingDataset};
use crate::error::{Error, Result};
use crate::seed::{rng_for, tags};

pub const DEFAULT_DIM: usize = 20;
pub const DEFAULT_ITERATIONS: usize = 20;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_REG: f64 = 0.01;
const INIT_STD: f64 = 0.1;
const MAX_NEGATIVE_TRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BprConfig {
    pub dim: usize,
    /// Epochs; each runs `|train|` sampled steps.
    pub iterations: usize,
    pub learning_rate: f64,
    pub reg: f64,
    pub seed: u64,
}

impl Default for BprConfig {
    fn default() -> Self {
        BprConfig {
            dim: DEFAULT_DIM,
            iterations: DEFAULT_ITERATIONS,
            learning_rate: DEFAULT_LEARNING_RATE,
            reg: DEFAULT_REG,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BprModel {
    pub dim: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub item_bias: Vec<f64>,
    pub users: IdIndex,
    pub items: IdIndex,
    /// Set by [`BprModel::calibrate`]; required for rating predictions.
    pub calibration: Option<Calibration>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BprStats {
    /// Steps whose user had interacted with every item.
    pub saturated_users_skipped: u64,
    /// Steps where rejection sampling hit its cap without finding a negative.
    pub negatives_not_found: u64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

impl BprModel {
    fn row(v: &[f64], idx: usize, d: usize) -> &[f64] {
        &v[idx * d..(idx + 1) * d]
    }

    /// Ranking score `p_u·q_i + b_i` for dense indices.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        let d = self.dim;
        Self::row(&self.user_factors, user, d)
            .iter()
            .zip(Self::row(&self.item_factors, item, d))
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self.item_bias[item]
    }

    pub fn score_ids(&self, user_id: u64, item_id: u64) -> Result<f64> {
        let u = self.users.index_of(user_id).ok_or(Error::ColdStart {
            kind: "user",
            id: user_id,
        })?;
        let i = self.items.index_of(item_id).ok_or(Error::ColdStart {
            kind: "item",
            id: item_id,
        })?;
        Ok(self.score(u, i))
    }

    /// Loss of one sampled triple, including the regularizer on its parameters.
    pub fn triple_loss(&self, user: usize, pos: usize, neg: usize, reg: f64) -> f64 {
        let d = self.dim;
        let diff = self.score(user, pos) - self.score(user, neg);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        softplus(-diff)
            + 0.5
                * reg
                * (sq(Self::row(&self.user_factors, user, d))
                    + sq(Self::row(&self.item_factors, pos, d))
                    + sq(Self::row(&self.item_factors, neg, d))
                    + self.item_bias[pos].powi(2)
                    + self.item_bias[neg].powi(2))
    }

    /// One gradient step on [`triple_loss`](Self::triple_loss), all partials
    /// taken at the pre-step parameters.
    pub fn step(&mut self, user: usize, pos: usize, neg: usize, learning_rate: f64, reg: f64) {
        let d = self.dim;
        let diff = self.score(user, pos) - self.score(user, neg);
        // d/d(diff) of -ln σ(diff) is -σ(-diff)
        let w = sigmoid(-diff);
        let (ur, pr, nr) = (user * d, pos * d, neg * d);
        for l in 0..d {
            let p = self.user_factors[ur + l];
            let qi = self.item_factors[pr + l];
            let qj = self.item_factors[nr + l];
            self.user_factors[ur + l] -= learning_rate * (-w * (qi - qj) + reg * p);
            self.item_factors[pr + l] -= learning_rate * (-w * p + reg * qi);
            self.item_factors[nr + l] -= learning_rate * (w * p + reg * qj);
        }
        let (bi, bj) = (self.item_bias[pos], self.item_bias[neg]);
        self.item_bias[pos] -= learning_rate * (-w + reg * bi);
        self.item_bias[neg] -= learning_rate * (w + reg * bj);
    }

    /// Fit the score-to-rating link on `train`.
    pub fn calibrate(&mut self, train: &RatingDataset) -> Result<()> {
        let (scores, ratings): (Vec<f64>, Vec<f64>) = train
            .indexed()
            .into_iter()
            .map(|(u, i, r)| (self.score(u, i), r))
            .unzip();
        self.calibration = Some(Calibration::fit(&scores, &ratings)?);
        Ok(())
    }

    /// Calibrated rating estimate in `[0, 1]`.
    pub fn predict_rating(&self, user_id: u64, item_id: u64) -> Result<f64> {
        let cal = self
            .calibration
            .as_ref()
            .ok_or_else(|| Error::InvalidState("BPR calibration has not been fitted".into()))?;
        Ok(cal.apply(self.score_ids(user_id, item_id)?))
    }

    pub fn all_finite(&self) -> bool {
        self.user_factors
            .iter()
            .chain(&self.item_factors)
            .chain(&self.item_bias)
            .all(|x| x.is_finite())
    }
}

/// Initialize factors from `N(0, 0.1²)` and zero biases.
pub fn init_bpr(n_users: usize, n_items: usize, dim: usize, seed: u64) -> Result<BprModel> {
    if dim == 0 {
        return Err(Error::invalid("BPR dimension must be at least 1"));
    }
    let normal = Normal::new(0.0, INIT_STD).expect("valid std");
    let mut rng = rng_for(seed, tags::BPR_INIT, 0);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| normal.sample(&mut rng)).collect() };
    let user_factors = draw(n_users * dim);
    let item_factors = draw(n_items * dim);
    Ok(BprModel {
        dim,
        user_factors,
        item_factors,
        item_bias: vec![0.0; n_items],
        users: IdIndex::default(),
        items: IdIndex::default(),
        calibration: None,
    })
}

/// Train BPR and fit its calibration on the same training data.
pub fn train_bpr(train: &RatingDataset, config: &BprConfig) -> Result<(BprModel, BprStats)> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !(config.learning_rate >= 0.0 && config.learning_rate.is_finite()) {
        return Err(Error::invalid(format!(
            "BPR learning rate must be non-negative, got {}",
            config.learning_rate
        )));
    }
    if !(config.reg >= 0.0 && config.reg.is_finite()) {
        return Err(Error::invalid(format!(
            "BPR regularization must be non-negative, got {}",
            config.reg
        )));
    }
    train.ensure_normalized()?;
    let n_items = train.n_items();
    let mut model = init_bpr(train.n_users(), n_items, config.dim, config.seed)?;
    model.users = train.users().clone();
    model.items = train.items().clone();

    let pairs = train.indexed();
    let mut seen: Vec<Vec<usize>> = vec![Vec::new(); train.n_users()];
    for &(u, i, _) in &pairs {
        seen[u].push(i);
    }
    for items in &mut seen {
        items.sort_unstable();
    }

    let mut stats = BprStats::default();
    let mut rng = rng_for(config.seed, tags::BPR_SAMPLE, 0);
    for _ in 0..config.iterations {
        for _ in 0..pairs.len() {
            let (u, i, _) = pairs[rng.random_range(0..pairs.len())];
            if seen[u].len() >= n_items {
                stats.saturated_users_skipped += 1;
                continue;
            }
            let neg = (0..MAX_NEGATIVE_TRIES)
                .map(|_| rng.random_range(0..n_items))
                .find(|j| seen[u].binary_search(j).is_err());
            match neg {
                Some(j) => model.step(u, i, j, config.learning_rate, config.reg),
                None => stats.negatives_not_found += 1,
            }
        }
    }
    if !model.all_finite() {
        return Err(Error::InvalidState("BPR training diverged".into()));
    }
    model.calibrate(train)?;
    Ok((model, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Normalization, RatingTriple};

    fn dataset(pairs: &[(u64, u64, f64)]) -> RatingDataset {
        RatingDataset::from_triples(
            pairs
                .iter()
                .map(|&(u, i, r)| RatingTriple::new(u, i, r, r))
                .collect(),
            Normalization::Provided,
        )
        .unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let ds = dataset(&[(0, 0, 1.0), (0, 1, 0.5), (1, 2, 0.2), (2, 3, 0.9)]);
        let cfg = BprConfig {
            learning_rate: 0.0,
            dim: 4,
            ..BprConfig::default()
        };
        let (m, _) = train_bpr(&ds, &cfg).unwrap();
        let init = init_bpr(3, 4, 4, cfg.seed).unwrap();
        assert_eq!(m.user_factors, init.user_factors);
        assert_eq!(m.item_factors, init.item_factors);
        assert_eq!(m.item_bias, init.item_bias);
    }

    #[test]
    fn step_matches_finite_differences() {
        let mut m = init_bpr(2, 3, 3, 9).unwrap();
        m.item_bias = vec![0.1, -0.2, 0.05];
        let (u, i, j, reg) = (1, 0, 2, 0.03);
        let h = 1e-6;
        let base = m.clone();

        // Numerical gradient over every parameter touched by the step.
        let mut fd = Vec::new();
        let coords: Vec<(u8, usize)> = (0..3)
            .map(|l| (0u8, u * 3 + l))
            .chain((0..3).map(|l| (1u8, i * 3 + l)))
            .chain((0..3).map(|l| (1u8, j * 3 + l)))
            .chain([(2u8, i), (2u8, j)])
            .collect();
        fn get(m: &mut BprModel, (f, k): (u8, usize)) -> &mut f64 {
            match f {
                0 => &mut m.user_factors[k],
                1 => &mut m.item_factors[k],
                _ => &mut m.item_bias[k],
            }
        }
        for &c in &coords {
            let mut plus = base.clone();
            *get(&mut plus, c) += h;
            let mut minus = base.clone();
            *get(&mut minus, c) -= h;
            fd.push((plus.triple_loss(u, i, j, reg) - minus.triple_loss(u, i, j, reg)) / (2.0 * h));
        }

        let eta = 1e-3;
        m.step(u, i, j, eta, reg);
        for (&c, g) in coords.iter().zip(fd) {
            let before = *get(&mut base.clone(), c);
            let after = *get(&mut m, c);
            let analytic = (before - after) / eta;
            assert!((analytic - g).abs() < 1e-5, "{c:?}: {analytic} vs {g}");
        }
    }

    #[test]
    fn separates_preferred_items() {
        // Users 0..8 all consume items 1 and 2; items 3 and 4 are consumed only
        // by a disjoint group, so for user 0 they are negatives.
        let mut pairs = Vec::new();
        for u in 0..8 {
            pairs.push((u, 1, 1.0));
            pairs.push((u, 2, 1.0));
        }
        for u in 8..10 {
            pairs.push((u, 3, 1.0));
            pairs.push((u, 4, 1.0));
        }
        let ds = dataset(&pairs);
        let mut separated = 0;
        for seed in 0..20 {
            let cfg = BprConfig {
                dim: 4,
                iterations: 50,
                learning_rate: 0.05,
                reg: 0.01,
                seed,
            };
            let (m, _) = train_bpr(&ds, &cfg).unwrap();
            let s = |i| m.score_ids(0, i).unwrap();
            if s(1).min(s(2)) > s(3).max(s(4)) {
                separated += 1;
            }
        }
        assert!(separated >= 19, "separated in {separated}/20 runs");
    }

    #[test]
    fn saturated_user_is_skipped() {
        let ds = dataset(&[(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0)]);
        let cfg = BprConfig {
            dim: 2,
            iterations: 5,
            ..BprConfig::default()
        };
        let (_, stats) = train_bpr(&ds, &cfg).unwrap();
        assert!(stats.saturated_users_skipped > 0);
    }

    #[test]
    fn prediction_requires_calibration() {
        let mut m = init_bpr(1, 1, 2, 0).unwrap();
        m.users = IdIndex::from_ids([5]);
        m.items = IdIndex::from_ids([6]);
        assert!(matches!(
            m.predict_rating(5, 6),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let ds = dataset(&[
            (0, 0, 1.0),
            (0, 1, 0.5),
            (1, 2, 0.2),
            (2, 3, 0.9),
            (2, 0, 0.4),
        ]);
        let cfg = BprConfig {
            dim: 3,
            ..BprConfig::default()
        };
        assert_eq!(train_bpr(&ds, &cfg).unwrap(), train_bpr(&ds, &cfg).unwrap());
    }
}
