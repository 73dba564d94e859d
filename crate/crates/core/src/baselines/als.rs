//! Explicit-feedback Alternating Least Squares.
//!
//! Minimizes `sum_observed (r - p_u·q_i)^2 + λ (|P|^2 + |Q|^2)` by alternating
//! exact ridge solves: every user row given the item factors, then every item
//! row given the user factors. Rows with no observations are set to zero.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::dataio::{IdIndex, RatingDataset};
use crate::error::{Error, Result};
use crate::seed::{rng_for, tags};

pub const DEFAULT_RANK: usize = 10;
pub const DEFAULT_ITERATIONS: usize = 10;
pub const DEFAULT_LAMBDA: f64 = 0.1;

const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlsConfig {
    pub rank: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for AlsConfig {
    fn default() -> Self {
        AlsConfig {
            rank: DEFAULT_RANK,
            iterations: DEFAULT_ITERATIONS,
            lambda: DEFAULT_LAMBDA,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsModel {
    pub rank: usize,
    pub lambda: f64,
    /// `n_users x rank`, row-major.
    pub user_factors: Vec<f64>,
    /// `n_items x rank`, row-major.
    pub item_factors: Vec<f64>,
    pub users: IdIndex,
    pub items: IdIndex,
}

/// Observations grouped by row: `rows[i]` lists `(column, rating)`.
pub(crate) type Adjacency = Vec<Vec<(usize, f64)>>;

pub(crate) fn adjacency(data: &RatingDataset) -> (Adjacency, Adjacency) {
    let mut by_user = vec![Vec::new(); data.n_users()];
    let mut by_item = vec![Vec::new(); data.n_items()];
    for (u, i, r) in data.indexed() {
        by_user[u].push((i, r));
        by_item[i].push((u, r));
    }
    (by_user, by_item)
}

/// Solve every row of one side given the other side's factors.
///
/// Row `i` becomes `argmin_p sum_{(j, r) in rows[i]} (r - p·f_j)^2 + λ|p|^2`,
/// computed from the normal equations by Cholesky.
pub fn solve_side(
    rows: &[Vec<(usize, f64)>],
    fixed: &[f64],
    rank: usize,
    lambda: f64,
    side: &'static str,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; rows.len() * rank];
    let mut gram = DMatrix::<f64>::zeros(rank, rank);
    let mut rhs = DVector::<f64>::zeros(rank);
    for (row, obs) in rows.iter().enumerate() {
        if obs.is_empty() {
            continue;
        }
        gram.fill(0.0);
        rhs.fill(0.0);
        for &(col, r) in obs {
            let f = &fixed[col * rank..(col + 1) * rank];
            for a in 0..rank {
                rhs[a] += r * f[a];
                for b in 0..=a {
                    gram[(a, b)] += f[a] * f[b];
                }
            }
        }
        for a in 0..rank {
            gram[(a, a)] += lambda;
            for b in 0..a {
                gram[(b, a)] = gram[(a, b)];
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or(Error::Singular { side, row })?;
        // Rounding can leave a tiny positive pivot on a rank-deficient system.
        let l = chol.l_dirty();
        if (0..rank).any(|a| l[(a, a)] * l[(a, a)] <= PIVOT_TOLERANCE * gram[(a, a)]) {
            return Err(Error::Singular { side, row });
        }
        let sol = chol.solve(&rhs);
        if sol.iter().any(|x| !x.is_finite()) {
            return Err(Error::Singular { side, row });
        }
        out[row * rank..(row + 1) * rank].copy_from_slice(sol.as_slice());
    }
    Ok(out)
}

/// `sum_observed (r - p·q)^2 + λ (|P|^2 + |Q|^2)`.
pub fn als_objective(model: &AlsModel, data: &RatingDataset) -> f64 {
    let k = model.rank;
    let sq: f64 = data
        .indexed()
        .into_iter()
        .map(|(u, i, r)| {
            let e = r - dot(
                &model.user_factors[u * k..(u + 1) * k],
                &model.item_factors[i * k..(i + 1) * k],
            );
            e * e
        })
        .sum();
    let norms: f64 = model
        .user_factors
        .iter()
        .chain(&model.item_factors)
        .map(|x| x * x)
        .sum();
    sq + model.lambda * norms
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Train ALS, calling `on_half_step` after every user or item solve.
pub fn train_als_with<F: FnMut(&AlsModel)>(
    train: &RatingDataset,
    config: &AlsConfig,
    mut on_half_step: F,
) -> Result<AlsModel> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if config.rank == 0 {
        return Err(Error::invalid("ALS rank must be at least 1"));
    }
    if !(config.lambda >= 0.0 && config.lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "ALS regularization must be non-negative, got {}",
            config.lambda
        )));
    }
    train.ensure_normalized()?;
    let r = config.rank;
    let scale = (r as f64).sqrt();
    let mut rng = rng_for(config.seed, tags::ALS_INIT, 0);
    let item_factors: Vec<f64> = (0..train.n_items() * r)
        .map(|_| rng.random::<f64>() / scale)
        .collect();
    let mut model = AlsModel {
        rank: r,
        lambda: config.lambda,
        user_factors: vec![0.0; train.n_users() * r],
        item_factors,
        users: train.users().clone(),
        items: train.items().clone(),
    };
    let (by_user, by_item) = adjacency(train);
    for _ in 0..config.iterations {
        model.user_factors = solve_side(&by_user, &model.item_factors, r, config.lambda, "user")?;
        on_half_step(&model);
        model.item_factors = solve_side(&by_item, &model.user_factors, r, config.lambda, "item")?;
        on_half_step(&model);
    }
    Ok(model)
}

pub fn train_als(train: &RatingDataset, config: &AlsConfig) -> Result<AlsModel> {
    train_als_with(train, config, |_| {})
}

impl AlsModel {
    /// Unclamped inner product for dense indices.
    pub fn score(&self, user: usize, item: usize) -> f64 {
        let k = self.rank;
        dot(
            &self.user_factors[user * k..(user + 1) * k],
            &self.item_factors[item * k..(item + 1) * k],
        )
    }

    /// Inner product of the factor rows, clamped to `[0, 1]`.
    pub fn predict(&self, user_id: u64, item_id: u64) -> Result<f64> {
        let u = self.users.index_of(user_id).ok_or(Error::ColdStart {
            kind: "user",
            id: user_id,
        })?;
        let i = self.items.index_of(item_id).ok_or(Error::ColdStart {
            kind: "item",
            id: item_id,
        })?;
        Ok(self.score(u, i).clamp(0.0, 1.0))
    }
}
