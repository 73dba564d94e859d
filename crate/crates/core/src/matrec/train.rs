use std::io::Write;

use rand::seq::SliceRandom;

use super::features::{sgd_step, PairIntermediates, Sample, StepOutcome};
use super::{init_params, Hyperparams, MatRecParams};
use crate::dataio::{IdIndex, RatingDataset};
use crate::error::{Error, Result};
use crate::ranking::RankTable;
use crate::seed::{rng_for, tags};

/// Normalized ranks resolved onto a dataset's dense index space.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedRanks {
    x: Vec<Option<f64>>,
    y: Vec<Option<f64>>,
}

impl IndexedRanks {
    pub fn resolve(ranks: &RankTable, users: &IdIndex, items: &IdIndex) -> Self {
        IndexedRanks {
            x: users.ids().iter().map(|&id| ranks.x(id)).collect(),
            y: items.ids().iter().map(|&id| ranks.y(id)).collect(),
        }
    }

    pub fn x(&self, user: usize) -> Option<f64> {
        self.x.get(user).copied().flatten()
    }

    pub fn y(&self, item: usize) -> Option<f64> {
        self.y.get(item).copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainTrace {
    /// Sum over the epoch of each sample's loss, measured just before its step.
    pub epoch_loss: Vec<f64>,
    /// Steps skipped because a feature norm fell below epsilon.
    pub degenerate_steps: u64,
}

impl TrainTrace {
    /// Two-column `epoch,total_loss` table; epochs count from 1.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,total_loss")?;
        for (e, loss) in self.epoch_loss.iter().enumerate() {
            writeln!(out, "{},{}", e + 1, loss)?;
        }
        out.flush()
    }
}

fn samples(train: &RatingDataset, ranks: &IndexedRanks) -> Result<Vec<Sample>> {
    train
        .indexed()
        .into_iter()
        .map(|(user, item, rating)| {
            let missing =
                |kind, id| Error::InvalidState(format!("{kind} {id} has no popularity rank"));
            Ok(Sample {
                user,
                item,
                x: ranks
                    .x(user)
                    .ok_or_else(|| missing("user", train.users().id_at(user)))?,
                y: ranks
                    .y(item)
                    .ok_or_else(|| missing("item", train.items().id_at(item)))?,
                rating,
            })
        })
        .collect()
}

/// Train on every triple of `train` for `hyper.epochs` shuffled passes.
///
/// Parameters cover the dataset's full index maps, so a training split keeps
/// the index space of the dataset it came from.
pub fn train(
    train: &RatingDataset,
    ranks: &RankTable,
    hyper: &Hyperparams,
) -> Result<(MatRecModel, TrainTrace)> {
    hyper.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    train.ensure_normalized()?;
    let indexed_ranks = IndexedRanks::resolve(ranks, train.users(), train.items());
    let samples = samples(train, &indexed_ranks)?;
    let mut params = init_params(train.n_users(), train.n_items(), hyper)?;

    let mut trace = TrainTrace::default();
    let mut scratch = PairIntermediates::with_dim(hyper.latent_dim);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    for epoch in 0..hyper.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng_for(hyper.seed, tags::MATREC_SHUFFLE, epoch as u64));
        let mut total = 0.0;
        for &i in &order {
            match sgd_step(
                &mut params,
                &samples[i],
                hyper.learning_rate,
                hyper.norm_epsilon,
                &mut scratch,
            ) {
                StepOutcome::Applied { loss } => total += loss,
                StepOutcome::Degenerate => trace.degenerate_steps += 1,
            }
        }
        log::debug!("epoch {}: loss {total}", epoch + 1);
        trace.epoch_loss.push(total);
    }
    if !params.all_finite() {
        return Err(Error::InvalidState(
            "training produced non-finite parameters".into(),
        ));
    }

    Ok((
        MatRecModel {
            params,
            users: train.users().clone(),
            items: train.items().clone(),
            norm_epsilon: hyper.norm_epsilon,
        },
        trace,
    ))
}

/// Trained parameters plus the id maps needed to score raw id pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct MatRecModel {
    pub params: MatRecParams,
    pub users: IdIndex,
    pub items: IdIndex,
    pub norm_epsilon: f64,
}

impl MatRecModel {
    /// Cosine prediction for a raw id pair; `Ok(None)` for degenerate features.
    pub fn predict_ids(
        &self,
        user_id: u64,
        item_id: u64,
        ranks: &RankTable,
    ) -> Result<Option<f64>> {
        let user = self.users.index_of(user_id).ok_or(Error::ColdStart {
            kind: "user",
            id: user_id,
        })?;
        let item = self.items.index_of(item_id).ok_or(Error::ColdStart {
            kind: "item",
            id: item_id,
        })?;
        let (x, y) = match (ranks.x(user_id), ranks.y(item_id)) {
            (Some(x), Some(y)) => (x, y),
            _ => {
                return Err(Error::InvalidState(format!(
                    "pair ({user_id}, {item_id}) is missing a popularity rank"
                )))
            }
        };
        match super::predict_pair(&self.params, user, item, x, y, self.norm_epsilon) {
            Ok(p) => Ok(Some(p)),
            Err(Error::DegenerateFeature { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }
}
