//! End-to-end runs: load, normalize, split, rank, train, evaluate.

use std::path::Path;
use std::str::FromStr;

use crate::baselines::{train_als, train_bpr, AlsConfig, AlsModel, BprConfig, BprModel, BprStats};
use crate::dataio::{
    load_lastfm, load_movielens, normalize_ratings, read_canonical, split, NormScheme,
    RatingDataset,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, EvalReport, RatingModel, RunMetadata};
use crate::matrec::{self, Hyperparams, MatRecModel, TrainTrace};
use crate::ranking::{compute_ranks, RankTable};

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    LastFm,
    MovieLens,
    /// The `user,item,rating_normalized,rating_raw` table written by `ingest`.
    Canonical,
}

impl DatasetKind {
    pub fn default_norm(self) -> Option<NormScheme> {
        match self {
            DatasetKind::LastFm => Some(NormScheme::PerUserMax),
            DatasetKind::MovieLens => Some(NormScheme::GlobalMax),
            DatasetKind::Canonical => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::LastFm => "lastfm",
            DatasetKind::MovieLens => "movielens",
            DatasetKind::Canonical => "canonical",
        }
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lastfm" => Ok(DatasetKind::LastFm),
            "movielens" => Ok(DatasetKind::MovieLens),
            "canonical" => Ok(DatasetKind::Canonical),
            other => Err(Error::invalid(format!(
                "unknown dataset kind `{other}` (expected lastfm, movielens or canonical)"
            ))),
        }
    }
}

/// Load a file and normalize it. `norm = None` picks the kind's default; for
/// canonical files that means keeping the stored normalized ratings.
pub fn load_dataset(
    kind: DatasetKind,
    path: &Path,
    norm: Option<NormScheme>,
) -> Result<RatingDataset> {
    let raw = match kind {
        DatasetKind::LastFm => load_lastfm(path)?,
        DatasetKind::MovieLens => load_movielens(path)?,
        DatasetKind::Canonical => read_canonical(path)?,
    };
    match norm.or(kind.default_norm()) {
        Some(scheme) => normalize_ratings(&raw, scheme),
        None => Ok(raw),
    }
}

/// A dataset split into train/test with ranks computed from the training half.
#[derive(Debug, Clone)]
pub struct PreparedData {
    /// Short identity used in reports, e.g. `lastfm:user_artists.dat`.
    pub label: String,
    pub train: RatingDataset,
    pub test: RatingDataset,
    pub ranks: RankTable,
    pub seed: u64,
}

impl PreparedData {
    pub fn new(full: &RatingDataset, label: String, test_fraction: f64, seed: u64) -> Result<Self> {
        let (train, test) = split(full, test_fraction, seed)?;
        let ranks = compute_ranks(train.triples())?;
        Ok(PreparedData {
            label,
            train,
            test,
            ranks,
            seed,
        })
    }

    pub fn load(
        kind: DatasetKind,
        path: &Path,
        norm: Option<NormScheme>,
        test_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        let full = load_dataset(kind, path, norm)?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::new(
            &full,
            format!("{}:{name}", kind.as_str()),
            test_fraction,
            seed,
        )
    }

    /// Training-set mean rating, the evaluation fallback.
    pub fn fallback(&self) -> f64 {
        self.train.mean_rating()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    MatRec(Hyperparams),
    Als(AlsConfig),
    Bpr(BprConfig),
}

impl Algorithm {
    pub fn id(&self) -> &'static str {
        match self {
            Algorithm::MatRec(_) => "matrec",
            Algorithm::Als(_) => "als",
            Algorithm::Bpr(_) => "bpr",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            Algorithm::MatRec(h) => h.seed,
            Algorithm::Als(c) => c.seed,
            Algorithm::Bpr(c) => c.seed,
        }
    }

    /// Same algorithm with a different learning rate; ALS has none.
    pub fn with_learning_rate(&self, eta: f64) -> Result<Algorithm> {
        match *self {
            Algorithm::MatRec(h) => Ok(Algorithm::MatRec(Hyperparams {
                learning_rate: eta,
                ..h
            })),
            Algorithm::Bpr(c) => Ok(Algorithm::Bpr(BprConfig {
                learning_rate: eta,
                ..c
            })),
            Algorithm::Als(_) => Err(Error::invalid("ALS has no learning rate to sweep")),
        }
    }

    pub fn params(&self) -> Vec<(String, String)> {
        let kv = |k: &str, v: String| (k.to_string(), v);
        match self {
            Algorithm::MatRec(h) => vec![
                kv("dim", h.latent_dim.to_string()),
                kv("lr", h.learning_rate.to_string()),
                kv("epochs", h.epochs.to_string()),
                kv("eps", h.norm_epsilon.to_string()),
            ],
            Algorithm::Als(c) => vec![
                kv("rank", c.rank.to_string()),
                kv("iterations", c.iterations.to_string()),
                kv("lambda", c.lambda.to_string()),
            ],
            Algorithm::Bpr(c) => vec![
                kv("dim", c.dim.to_string()),
                kv("iterations", c.iterations.to_string()),
                kv("lr", c.learning_rate.to_string()),
                kv("reg", c.reg.to_string()),
            ],
        }
    }

    pub fn fit(&self, data: &PreparedData) -> Result<TrainedModel> {
        match self {
            Algorithm::MatRec(h) => {
                let (model, trace) = matrec::train(&data.train, &data.ranks, h)?;
                Ok(TrainedModel::MatRec(model, trace))
            }
            Algorithm::Als(c) => Ok(TrainedModel::Als(train_als(&data.train, c)?)),
            Algorithm::Bpr(c) => {
                let (model, stats) = train_bpr(&data.train, c)?;
                Ok(TrainedModel::Bpr(model, stats))
            }
        }
    }

    pub fn metadata(&self, data: &PreparedData) -> RunMetadata {
        RunMetadata {
            dataset: data.label.clone(),
            algorithm: self.id().to_string(),
            seed: self.seed(),
            params: self.params(),
        }
    }

    /// Train on `data.train` and evaluate on `data.test`.
    pub fn run(&self, data: &PreparedData) -> Result<(TrainedModel, EvalReport)> {
        let model = self.fit(data)?;
        let report = evaluate(
            model.as_rating_model(),
            &data.test,
            &data.ranks,
            data.fallback(),
            self.metadata(data),
        )?;
        Ok((model, report))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    MatRec(MatRecModel, TrainTrace),
    Als(AlsModel),
    Bpr(BprModel, BprStats),
}

impl TrainedModel {
    pub fn as_rating_model(&self) -> &dyn RatingModel {
        match self {
            TrainedModel::MatRec(m, _) => m,
            TrainedModel::Als(m) => m,
            TrainedModel::Bpr(m, _) => m,
        }
    }
}
