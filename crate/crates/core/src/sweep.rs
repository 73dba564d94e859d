//! Learning-rate sweeps.
//!
//! Each point trains and evaluates an independent model on the same split, so
//! points may run in parallel; the curve is always ordered by learning rate.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::EvalReport;
use crate::pipeline::{Algorithm, PreparedData};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub eta: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
}

pub const CURVE_HEADER: &str =
    "eta,mae,n_fallbacks,n_evaluated,mae_original,algorithm,dataset,seed";

impl SweepCurve {
    /// The point with the lowest normalized MAE (first one on ties).
    pub fn best(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .min_by(|a, b| a.report.mae.total_cmp(&b.report.mae))
    }

    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{CURVE_HEADER}")?;
        for p in &self.points {
            let r = &p.report;
            let orig = r.mae_original.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                p.eta,
                r.mae,
                r.n_fallbacks,
                r.n_evaluated,
                orig,
                r.metadata.algorithm,
                r.metadata.dataset,
                r.metadata.seed
            )?;
        }
        out.flush()
    }
}

/// Train and evaluate `algorithm` once per learning rate in `etas`.
///
/// `etas` must be non-empty, positive and strictly increasing. At most
/// `threads` points run at once.
pub fn sweep_learning_rate(
    algorithm: &Algorithm,
    data: &PreparedData,
    etas: &[f64],
    threads: usize,
) -> Result<SweepCurve> {
    if etas.is_empty() {
        return Err(Error::invalid("learning-rate list is empty"));
    }
    if etas.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::invalid("learning rates must be positive and finite"));
    }
    if etas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("learning rates must be strictly increasing"));
    }
    let algos: Vec<Algorithm> = etas
        .iter()
        .map(|&eta| algorithm.with_learning_rate(eta))
        .collect::<Result<_>>()?;

    let run_point = |(&eta, algo): (&f64, &Algorithm)| -> Result<SweepPoint> {
        log::info!("{} eta={eta}", algo.id());
        let (_, report) = algo.run(data).map_err(|e| Error::AtLearningRate {
            eta,
            source: Box::new(e),
        })?;
        Ok(SweepPoint { eta, report })
    };

    let points: Vec<SweepPoint> = if threads <= 1 {
        etas.iter()
            .zip(&algos)
            .map(run_point)
            .collect::<Result<_>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidState(format!("thread pool: {e}")))?;
        pool.install(|| {
            etas.par_iter()
                .zip(algos.par_iter())
                .map(run_point)
                .collect::<Result<_>>()
        })?
    };
    Ok(SweepCurve { points })
}
