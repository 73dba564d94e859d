//! Rating datasets: ingestion, normalization to `[0, 1]` and train/test splits.

mod readers;

use std::collections::HashSet;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::{rng_for, tags};

pub use readers::{
    load_lastfm, load_movielens, read_canonical, write_canonical, CANONICAL_HEADER, LASTFM_HEADER,
    MOVIELENS_HEADER,
};

/// One observed interaction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatingTriple {
    pub user_id: u64,
    pub item_id: u64,
    /// Normalized rating in `[0, 1]`. Zero until the dataset is normalized.
    pub rating: f64,
    /// Rating on the source file's own scale (listening count, stars, ...).
    pub raw_rating: f64,
}

impl RatingTriple {
    pub fn new(user_id: u64, item_id: u64, rating: f64, raw_rating: f64) -> Self {
        RatingTriple {
            user_id,
            item_id,
            rating,
            raw_rating,
        }
    }
}

/// Bijection between raw identifiers and contiguous indices `0..len`.
///
/// Indices follow ascending identifier order, so two datasets holding the same
/// set of ids always agree on the mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IdIndex {
    ids: Vec<u64>,
}

impl IdIndex {
    pub fn from_ids(ids: impl IntoIterator<Item = u64>) -> Self {
        let mut ids: Vec<u64> = ids.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        IdIndex { ids }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: u64) -> Option<usize> {
        self.ids.binary_search(&id).ok()
    }

    pub fn id_at(&self, index: usize) -> u64 {
        self.ids[index]
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NormScheme {
    /// Divide each rating by the largest raw rating of the same user.
    PerUserMax,
    /// Divide every rating by the largest raw rating in the file.
    GlobalMax,
}

impl std::str::FromStr for NormScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-user-max" => Ok(NormScheme::PerUserMax),
            "global-max" => Ok(NormScheme::GlobalMax),
            other => Err(Error::invalid(format!(
                "unknown normalization scheme `{other}` (expected per-user-max or global-max)"
            ))),
        }
    }
}

impl std::fmt::Display for NormScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NormScheme::PerUserMax => "per-user-max",
            NormScheme::GlobalMax => "global-max",
        })
    }
}

/// How the `rating` column of a dataset relates to `raw_rating`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Freshly loaded; `rating` is not meaningful yet.
    Pending,
    PerUserMax,
    GlobalMax {
        scale: f64,
    },
    /// Ratings supplied already normalized, with no single divisor.
    Provided,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    triples: Vec<RatingTriple>,
    users: IdIndex,
    items: IdIndex,
    normalization: Normalization,
}

impl RatingDataset {
    /// Build a dataset whose index maps cover exactly the ids in `triples`.
    pub fn from_triples(triples: Vec<RatingTriple>, normalization: Normalization) -> Result<Self> {
        let users = IdIndex::from_ids(triples.iter().map(|t| t.user_id));
        let items = IdIndex::from_ids(triples.iter().map(|t| t.item_id));
        Self::with_index(triples, users, items, normalization)
    }

    /// Build a dataset over externally supplied index maps, which must contain
    /// every id used by `triples` (they may contain more).
    pub fn with_index(
        triples: Vec<RatingTriple>,
        users: IdIndex,
        items: IdIndex,
        normalization: Normalization,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(triples.len());
        for t in &triples {
            if users.index_of(t.user_id).is_none() || items.index_of(t.item_id).is_none() {
                return Err(Error::InvalidData(format!(
                    "pair ({}, {}) not covered by the index maps",
                    t.user_id, t.item_id
                )));
            }
            if !seen.insert((t.user_id, t.item_id)) {
                return Err(Error::InvalidData(format!(
                    "duplicate pair ({}, {})",
                    t.user_id, t.item_id
                )));
            }
            if !(t.raw_rating.is_finite() && t.raw_rating >= 0.0) {
                return Err(Error::InvalidData(format!(
                    "raw rating {} of pair ({}, {}) is not a finite non-negative number",
                    t.raw_rating, t.user_id, t.item_id
                )));
            }
            if !(0.0..=1.0).contains(&t.rating) {
                return Err(Error::InvalidData(format!(
                    "rating {} of pair ({}, {}) outside [0, 1]",
                    t.rating, t.user_id, t.item_id
                )));
            }
        }
        Ok(RatingDataset {
            triples,
            users,
            items,
            normalization,
        })
    }

    pub fn triples(&self) -> &[RatingTriple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn users(&self) -> &IdIndex {
        &self.users
    }

    pub fn items(&self) -> &IdIndex {
        &self.items
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// The divisor mapping raw ratings to normalized ones, when there is a
    /// single one for the whole dataset.
    pub fn rating_scale(&self) -> Option<f64> {
        match self.normalization {
            Normalization::GlobalMax { scale } => Some(scale),
            _ => None,
        }
    }

    pub fn mean_rating(&self) -> f64 {
        if self.triples.is_empty() {
            return 0.0;
        }
        self.triples.iter().map(|t| t.rating).sum::<f64>() / self.triples.len() as f64
    }

    pub(crate) fn ensure_normalized(&self) -> Result<()> {
        if self.normalization == Normalization::Pending {
            return Err(Error::InvalidState(
                "dataset ratings have not been normalized".into(),
            ));
        }
        Ok(())
    }

    /// Dense `(user index, item index, rating)` view of the triples.
    pub(crate) fn indexed(&self) -> Vec<(usize, usize, f64)> {
        self.triples
            .iter()
            .map(|t| {
                (
                    self.users
                        .index_of(t.user_id)
                        .expect("validated on construction"),
                    self.items
                        .index_of(t.item_id)
                        .expect("validated on construction"),
                    t.rating,
                )
            })
            .collect()
    }

    fn with_triples(&self, triples: Vec<RatingTriple>) -> RatingDataset {
        RatingDataset {
            triples,
            users: self.users.clone(),
            items: self.items.clone(),
            normalization: self.normalization,
        }
    }
}

/// Map raw ratings into `[0, 1]`.
pub fn normalize_ratings(dataset: &RatingDataset, scheme: NormScheme) -> Result<RatingDataset> {
    if dataset.is_empty() {
        return Err(Error::invalid("cannot normalize an empty dataset"));
    }
    let (triples, normalization) = match scheme {
        NormScheme::GlobalMax => {
            let scale = dataset
                .triples
                .iter()
                .map(|t| t.raw_rating)
                .fold(0.0, f64::max);
            if scale <= 0.0 {
                return Err(Error::InvalidData("all raw ratings are zero".into()));
            }
            let triples = dataset
                .triples
                .iter()
                .map(|t| RatingTriple {
                    rating: t.raw_rating / scale,
                    ..*t
                })
                .collect();
            (triples, Normalization::GlobalMax { scale })
        }
        NormScheme::PerUserMax => {
            let mut user_max = vec![0.0f64; dataset.n_users()];
            for t in &dataset.triples {
                let u = dataset.users.index_of(t.user_id).expect("validated");
                user_max[u] = user_max[u].max(t.raw_rating);
            }
            let mut triples = Vec::with_capacity(dataset.len());
            for t in &dataset.triples {
                let max = user_max[dataset.users.index_of(t.user_id).expect("validated")];
                if max <= 0.0 {
                    return Err(Error::InvalidData(format!(
                        "user {} has only zero raw ratings",
                        t.user_id
                    )));
                }
                triples.push(RatingTriple {
                    rating: t.raw_rating / max,
                    ..*t
                });
            }
            (triples, Normalization::PerUserMax)
        }
    };
    Ok(RatingDataset {
        triples,
        users: dataset.users.clone(),
        items: dataset.items.clone(),
        normalization,
    })
}

/// Seeded random train/test partition with cold-start exclusion.
///
/// A `floor(test_fraction * len)` subset of a seeded shuffle is drawn as the
/// test set. Test rows whose user or item would then be missing from the
/// training set are moved back to it, scanning test rows in file order. Both
/// halves keep the parent's index maps and preserve the parent's row order.
pub fn split(
    dataset: &RatingDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(RatingDataset, RatingDataset)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} must lie in [0, 1)"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::invalid("cannot split an empty dataset"));
    }

    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, tags::SPLIT, 0));
    let n_test = (test_fraction * n as f64).floor() as usize;

    let mut in_test = vec![false; n];
    for &i in &order[..n_test] {
        in_test[i] = true;
    }

    let mut train_users = vec![false; dataset.n_users()];
    let mut train_items = vec![false; dataset.n_items()];
    let indexed = dataset.indexed();
    for (i, &(u, it, _)) in indexed.iter().enumerate() {
        if !in_test[i] {
            train_users[u] = true;
            train_items[it] = true;
        }
    }
    for (i, &(u, it, _)) in indexed.iter().enumerate() {
        if in_test[i] && !(train_users[u] && train_items[it]) {
            in_test[i] = false;
            train_users[u] = true;
            train_items[it] = true;
        }
    }

    let (test, train): (Vec<_>, Vec<_>) =
        dataset.triples.iter().zip(&in_test).partition(|(_, &t)| t);
    let strip = |v: Vec<(&RatingTriple, &bool)>| v.into_iter().map(|(t, _)| *t).collect();
    Ok((
        dataset.with_triples(strip(train)),
        dataset.with_triples(strip(test)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn raw(triples: &[(u64, u64, f64)]) -> RatingDataset {
        RatingDataset::from_triples(
            triples
                .iter()
                .map(|&(u, i, r)| RatingTriple::new(u, i, 0.0, r))
                .collect(),
            Normalization::Pending,
        )
        .unwrap()
    }

    #[test]
    fn per_user_max_scales_each_user_to_one() {
        let ds = raw(&[(1, 10, 10.0), (1, 11, 5.0), (2, 10, 3.0)]);
        let ds = normalize_ratings(&ds, NormScheme::PerUserMax).unwrap();
        let r: Vec<f64> = ds.triples().iter().map(|t| t.rating).collect();
        assert_eq!(r, vec![1.0, 0.5, 1.0]);
        assert_eq!(ds.rating_scale(), None);
    }

    #[test]
    fn single_interaction_users_all_map_to_one() {
        let ds = raw(&[(1, 1, 7.0), (2, 1, 300.0), (3, 2, 1.0)]);
        let ds = normalize_ratings(&ds, NormScheme::PerUserMax).unwrap();
        assert!(ds.triples().iter().all(|t| t.rating == 1.0));
    }

    #[test]
    fn global_max_divides_movielens_stars_by_five() {
        let stars = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
        let ds = raw(&stars
            .iter()
            .enumerate()
            .map(|(i, &s)| (1, i as u64, s))
            .collect::<Vec<_>>());
        let ds = normalize_ratings(&ds, NormScheme::GlobalMax).unwrap();
        assert_eq!(ds.rating_scale(), Some(5.0));
        for (t, s) in ds.triples().iter().zip(stars) {
            assert_eq!(t.rating, s / 5.0);
        }
        assert_eq!(ds.triples()[0].rating, 0.1);
        assert_eq!(ds.triples()[9].rating, 1.0);
    }

    #[test]
    fn all_zero_user_is_rejected_under_per_user_max() {
        let ds = raw(&[(1, 1, 0.0), (1, 2, 0.0), (2, 1, 4.0)]);
        let err = normalize_ratings(&ds, NormScheme::PerUserMax).unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)), "{err}");
    }

    #[test]
    fn duplicate_pairs_are_rejected() {
        let err = RatingDataset::from_triples(
            vec![
                RatingTriple::new(1, 1, 0.5, 1.0),
                RatingTriple::new(1, 1, 0.2, 1.0),
            ],
            Normalization::PerUserMax,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidData(_)));
    }

    fn synthetic(n: usize, seed: u64) -> RatingDataset {
        let mut rng = rng_for(seed, "test/synthetic", 0);
        let mut pairs = HashSet::new();
        while pairs.len() < n {
            pairs.insert((rng.random_range(0..60u64), rng.random_range(0..80u64)));
        }
        let mut pairs: Vec<_> = pairs.into_iter().collect();
        pairs.sort_unstable();
        let triples = pairs
            .into_iter()
            .map(|(u, i)| {
                let r = rng.random_range(1..=5) as f64;
                RatingTriple::new(u, i, r / 5.0, r)
            })
            .collect();
        RatingDataset::from_triples(triples, Normalization::GlobalMax { scale: 5.0 }).unwrap()
    }

    #[test]
    fn zero_fraction_keeps_everything_in_train() {
        let ds = synthetic(200, 1);
        let (train, test) = split(&ds, 0.0, 42).unwrap();
        assert!(test.is_empty());
        assert_eq!(train, ds);
    }

    #[test]
    fn split_is_a_partition_without_cold_start() {
        let ds = synthetic(1000, 2);
        let (train, test) = split(&ds, 0.2, 42).unwrap();
        assert!(test.len() <= 200);
        assert!(!test.is_empty());
        assert_eq!(train.len() + test.len(), ds.len());

        let key = |t: &RatingTriple| (t.user_id, t.item_id);
        let tr: HashSet<_> = train.triples().iter().map(key).collect();
        let te: HashSet<_> = test.triples().iter().map(key).collect();
        assert!(tr.is_disjoint(&te));
        let all: HashSet<_> = ds.triples().iter().map(key).collect();
        assert_eq!(&tr | &te, all);

        let tr_users: HashSet<_> = train.triples().iter().map(|t| t.user_id).collect();
        let tr_items: HashSet<_> = train.triples().iter().map(|t| t.item_id).collect();
        for t in test.triples() {
            assert!(tr_users.contains(&t.user_id) && tr_items.contains(&t.item_id));
        }
    }

    #[test]
    fn cold_start_rows_move_back_to_train() {
        // Every pair is the only one for its user, so nothing can be tested.
        let ds = raw(&(0..50).map(|i| (i, i, 1.0)).collect::<Vec<_>>());
        let ds = normalize_ratings(&ds, NormScheme::GlobalMax).unwrap();
        let (train, test) = split(&ds, 0.5, 3).unwrap();
        assert!(test.is_empty());
        assert_eq!(train.len(), 50);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let ds = synthetic(500, 3);
        let a = split(&ds, 0.3, 9).unwrap();
        let b = split(&ds, 0.3, 9).unwrap();
        assert_eq!(a, b);
        let c = split(&ds, 0.3, 10).unwrap();
        assert_ne!(a.1, c.1);
    }

    #[test]
    fn split_rejects_full_fraction() {
        let ds = synthetic(10, 4);
        assert!(matches!(split(&ds, 1.0, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            split(&ds, -0.1, 0),
            Err(Error::InvalidArgument(_))
        ));
    }
}
