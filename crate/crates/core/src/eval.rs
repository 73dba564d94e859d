//! MAE evaluation with clamping and mean fallback.

use std::io::Write;

use crate::baselines::{AlsModel, BprModel};
use crate::dataio::RatingDataset;
use crate::error::{Error, Result};
use crate::matrec::MatRecModel;
use crate::ranking::RankTable;

/// Anything that can estimate a normalized rating for a raw id pair.
pub trait RatingModel: Sync {
    /// `Ok(None)` (or a cold-start error) means no usable estimate; the
    /// evaluator substitutes its fallback.
    fn predict(&self, user_id: u64, item_id: u64, ranks: &RankTable) -> Result<Option<f64>>;
}

impl RatingModel for MatRecModel {
    fn predict(&self, user_id: u64, item_id: u64, ranks: &RankTable) -> Result<Option<f64>> {
        self.predict_ids(user_id, item_id, ranks)
    }
}

impl RatingModel for AlsModel {
    fn predict(&self, user_id: u64, item_id: u64, _: &RankTable) -> Result<Option<f64>> {
        AlsModel::predict(self, user_id, item_id).map(Some)
    }
}

impl RatingModel for BprModel {
    fn predict(&self, user_id: u64, item_id: u64, _: &RankTable) -> Result<Option<f64>> {
        self.predict_rating(user_id, item_id).map(Some)
    }
}

/// Predicts the same value for every pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantModel(pub f64);

impl RatingModel for ConstantModel {
    fn predict(&self, _: u64, _: u64, _: &RankTable) -> Result<Option<f64>> {
        Ok(Some(self.0))
    }
}

/// Mean absolute error.
pub fn mae(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::invalid("MAE of an empty sequence"));
    }
    let total: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(total / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunMetadata {
    pub dataset: String,
    pub algorithm: String,
    pub seed: u64,
    /// Hyperparameters as `(name, value)` in a fixed order.
    pub params: Vec<(String, String)>,
}

impl RunMetadata {
    pub fn params_string(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// MAE on the normalized `[0, 1]` scale.
    pub mae: f64,
    /// MAE on the dataset's original rating scale, when it has a single one.
    pub mae_original: Option<f64>,
    pub n_evaluated: usize,
    /// Test pairs that fell back to the training mean.
    pub n_fallbacks: usize,
    pub metadata: RunMetadata,
}

pub const REPORT_HEADER: &str = "algorithm,dataset,scale,mae,n_evaluated,n_fallbacks,seed,params";

impl EvalReport {
    /// One row per reporting scale: `normalized`, then `original` if known.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{REPORT_HEADER}")?;
        let m = &self.metadata;
        let scales = std::iter::once(("normalized", self.mae))
            .chain(self.mae_original.map(|v| ("original", v)));
        for (scale, value) in scales {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                m.algorithm,
                m.dataset,
                scale,
                value,
                self.n_evaluated,
                self.n_fallbacks,
                m.seed,
                m.params_string()
            )?;
        }
        out.flush()
    }

    /// One-line human summary.
    pub fn summary(&self) -> String {
        let mut s = format!(
            "algorithm={} dataset={} mae={} n={} fallbacks={} seed={}",
            self.metadata.algorithm,
            self.metadata.dataset,
            self.mae,
            self.n_evaluated,
            self.n_fallbacks,
            self.metadata.seed
        );
        if let Some(orig) = self.mae_original {
            s.push_str(&format!(" mae_original={orig}"));
        }
        s
    }
}

/// Score every test triple, clamping predictions to `[0, 1]`.
///
/// Degenerate or cold-start pairs are predicted as `fallback` and counted.
/// Every test entity must be present in `ranks`.
pub fn evaluate(
    model: &dyn RatingModel,
    test: &RatingDataset,
    ranks: &RankTable,
    fallback: f64,
    metadata: RunMetadata,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    test.ensure_normalized()?;
    let mut predictions = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    let mut n_fallbacks = 0;
    for t in test.triples() {
        if ranks.x(t.user_id).is_none() || ranks.y(t.item_id).is_none() {
            return Err(Error::InvalidState(format!(
                "test pair ({}, {}) has no popularity rank; the split left it cold",
                t.user_id, t.item_id
            )));
        }
        let p = match model.predict(t.user_id, t.item_id, ranks) {
            Ok(Some(p)) => p.clamp(0.0, 1.0),
            Ok(None) | Err(Error::ColdStart { .. }) => {
                n_fallbacks += 1;
                fallback
            }
            Err(e) => return Err(e),
        };
        predictions.push(p);
        truths.push(t.rating);
    }
    let mae = mae(&predictions, &truths)?;
    Ok(EvalReport {
        mae,
        mae_original: test.rating_scale().map(|s| mae * s),
        n_evaluated: predictions.len(),
        n_fallbacks,
        metadata,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{Normalization, RatingTriple};
    use crate::ranking::compute_ranks;
    use crate::seed::rng_for;
    use rand::Rng;

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[0.2, 0.4], &[0.2, 0.4]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!(mae(&[0.0], &[0.0, 1.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }

    #[test]
    fn mae_matches_naive_loop() {
        let mut rng = rng_for(1, "test/mae", 0);
        let p: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let t: Vec<f64> = (0..100).map(|_| rng.random()).collect();
        let mut acc = 0.0;
        for i in 0..100 {
            let d = p[i] - t[i];
            acc += if d < 0.0 { -d } else { d };
        }
        assert!((mae(&p, &t).unwrap() - acc / 100.0).abs() < 1e-12);
    }

    fn data() -> RatingDataset {
        let triples = vec![
            RatingTriple::new(1, 1, 0.2, 1.0),
            RatingTriple::new(1, 2, 1.0, 5.0),
            RatingTriple::new(2, 1, 0.6, 3.0),
            RatingTriple::new(2, 3, 0.8, 4.0),
        ];
        RatingDataset::from_triples(triples, Normalization::GlobalMax { scale: 5.0 }).unwrap()
    }

    #[test]
    fn constant_predictor_gives_mean_absolute_deviation() {
        let ds = data();
        let ranks = compute_ranks(ds.triples()).unwrap();
        let c = 0.55;
        let r = evaluate(&ConstantModel(c), &ds, &ranks, 0.0, RunMetadata::default()).unwrap();
        let mad = ds
            .triples()
            .iter()
            .map(|t| (t.rating - c).abs())
            .sum::<f64>()
            / 4.0;
        assert_eq!(r.mae, mad);
        assert_eq!(r.n_fallbacks, 0);
        assert_eq!(r.n_evaluated, 4);
        assert_eq!(r.mae_original, Some(mad * 5.0));
    }

    #[test]
    fn predictions_are_clamped() {
        let ds = data();
        let ranks = compute_ranks(ds.triples()).unwrap();
        let r = evaluate(
            &ConstantModel(7.0),
            &ds,
            &ranks,
            0.0,
            RunMetadata::default(),
        )
        .unwrap();
        let want = ds.triples().iter().map(|t| 1.0 - t.rating).sum::<f64>() / 4.0;
        assert!((r.mae - want).abs() < 1e-15);
    }

    struct NoEstimate;
    impl RatingModel for NoEstimate {
        fn predict(&self, user_id: u64, _: u64, _: &RankTable) -> Result<Option<f64>> {
            if user_id == 1 {
                Ok(None)
            } else {
                Err(Error::ColdStart {
                    kind: "user",
                    id: user_id,
                })
            }
        }
    }

    #[test]
    fn missing_estimates_fall_back() {
        let ds = data();
        let ranks = compute_ranks(ds.triples()).unwrap();
        let r = evaluate(&NoEstimate, &ds, &ranks, 0.5, RunMetadata::default()).unwrap();
        assert_eq!(r.n_fallbacks, 4);
        let want = ds
            .triples()
            .iter()
            .map(|t| (t.rating - 0.5).abs())
            .sum::<f64>()
            / 4.0;
        assert_eq!(r.mae, want);
    }

    #[test]
    fn unranked_test_entity_is_a_state_error() {
        let ds = data();
        let ranks = compute_ranks(&ds.triples()[..1]).unwrap();
        assert!(matches!(
            evaluate(
                &ConstantModel(0.5),
                &ds,
                &ranks,
                0.5,
                RunMetadata::default()
            ),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn report_table_has_a_row_per_scale() {
        let report = EvalReport {
            mae: 0.25,
            mae_original: Some(1.25),
            n_evaluated: 10,
            n_fallbacks: 1,
            metadata: RunMetadata {
                dataset: "movielens:ratings.csv".into(),
                algorithm: "matrec".into(),
                seed: 42,
                params: vec![("dim".into(), "20".into()), ("lr".into(), "0.0003".into())],
            },
        };
        let mut buf = Vec::new();
        report.write_table(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            format!(
                "{REPORT_HEADER}\n\
                 matrec,movielens:ratings.csv,normalized,0.25,10,1,42,dim=20;lr=0.0003\n\
                 matrec,movielens:ratings.csv,original,1.25,10,1,42,dim=20;lr=0.0003\n"
            )
        );
    }
}
