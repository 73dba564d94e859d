use super::{Family, MatRecParams};
use crate::error::{Error, Result};

/// Scratch values for one `(user, item)` pair.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PairIntermediates {
    /// Pair-dependent user feature `u + x·a + y·b`.
    pub t0: Vec<f64>,
    /// Pair-dependent item feature `v + x·c + y·d`.
    pub t1: Vec<f64>,
    /// `|t0|`
    pub t2: f64,
    /// `|t1|`
    pub t3: f64,
    /// `t2 · t3`
    pub t4: f64,
    /// `<t0, t1>`
    pub t5: f64,
    /// Residual `R - t5/t4`; zero until a rating is supplied.
    pub t6: f64,
    pub x: f64,
    pub y: f64,
}

impl PairIntermediates {
    pub fn with_dim(k: usize) -> Self {
        PairIntermediates {
            t0: vec![0.0; k],
            t1: vec![0.0; k],
            ..Default::default()
        }
    }

    /// Recompute everything except `t6` in place.
    pub(crate) fn fill(&mut self, params: &MatRecParams, user: usize, item: usize, x: f64, y: f64) {
        let k = params.latent_dim();
        self.t0.resize(k, 0.0);
        self.t1.resize(k, 0.0);
        let (a, b, u) = (
            params.row(Family::A, user),
            params.row(Family::B, user),
            params.row(Family::U, user),
        );
        let (c, d, v) = (
            params.row(Family::C, item),
            params.row(Family::D, item),
            params.row(Family::V, item),
        );
        let (mut n0, mut n1, mut dot) = (0.0, 0.0, 0.0);
        for l in 0..k {
            let f0 = u[l] + x * a[l] + y * b[l];
            let f1 = v[l] + x * c[l] + y * d[l];
            self.t0[l] = f0;
            self.t1[l] = f1;
            n0 += f0 * f0;
            n1 += f1 * f1;
            dot += f0 * f1;
        }
        self.t2 = n0.sqrt();
        self.t3 = n1.sqrt();
        self.t4 = self.t2 * self.t3;
        self.t5 = dot;
        self.t6 = 0.0;
        self.x = x;
        self.y = y;
    }

    pub fn is_degenerate(&self, eps: f64) -> bool {
        !(self.t2 >= eps && self.t3 >= eps)
    }

    /// Cosine of the two features; meaningful only when not degenerate.
    pub fn cosine(&self) -> f64 {
        self.t5 / self.t4
    }

    fn degenerate_error(&self, user: usize, item: usize) -> Error {
        Error::DegenerateFeature {
            user,
            item,
            user_norm: self.t2,
            item_norm: self.t3,
        }
    }
}

pub fn build_features(
    params: &MatRecParams,
    user: usize,
    item: usize,
    x: f64,
    y: f64,
) -> Result<PairIntermediates> {
    params.check_pair(user, item)?;
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::invalid(format!(
            "ranks must be finite, got x={x}, y={y}"
        )));
    }
    let mut pi = PairIntermediates::with_dim(params.latent_dim());
    pi.fill(params, user, item, x, y);
    Ok(pi)
}

/// Cosine prediction `t5 / t4` for a pair, in `[-1, 1]`.
pub fn predict_pair(
    params: &MatRecParams,
    user: usize,
    item: usize,
    x: f64,
    y: f64,
    eps: f64,
) -> Result<f64> {
    let pi = build_features(params, user, item, x, y)?;
    if pi.is_degenerate(eps) {
        return Err(pi.degenerate_error(user, item));
    }
    Ok(pi.cosine())
}

/// Squared cosine residual `(R - t5/t4)^2`.
pub fn pair_loss(
    params: &MatRecParams,
    user: usize,
    item: usize,
    x: f64,
    y: f64,
    rating: f64,
    eps: f64,
) -> Result<f64> {
    let r = rating - predict_pair(params, user, item, x, y, eps)?;
    Ok(r * r)
}

/// One training observation in index space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub user: usize,
    pub item: usize,
    /// Normalized user rank.
    pub x: f64,
    /// Normalized item rank.
    pub y: f64,
    pub rating: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// Parameters were updated; carries the loss before the update.
    Applied { loss: f64 },
    /// A feature norm was below epsilon; nothing changed.
    Degenerate,
}

/// Apply one SGD step for `sample`.
///
/// All six updates read the intermediates computed from the parameters as
/// they were before the step. With `g0 = -dL/dt0` and `g1 = -dL/dt1`,
///
/// ```text
/// g0 = 2·t6·(t1/t4 - t5·t0/(t2³·t3))      a += η·x·g0   b += η·y·g0   u += η·g0
/// g1 = 2·t6·(t0/t4 - t5·t1/(t2·t3³))      c += η·x·g1   d += η·y·g1   v += η·g1
/// ```
///
/// `scratch` is overwritten; reuse it across calls to avoid allocation.
pub fn sgd_step(
    params: &mut MatRecParams,
    sample: &Sample,
    learning_rate: f64,
    eps: f64,
    scratch: &mut PairIntermediates,
) -> StepOutcome {
    let Sample {
        user,
        item,
        x,
        y,
        rating,
    } = *sample;
    scratch.fill(params, user, item, x, y);
    if scratch.is_degenerate(eps) {
        return StepOutcome::Degenerate;
    }
    let pi = &*scratch;
    let t6 = rating - pi.t5 / pi.t4;
    scratch.t6 = t6;
    let loss = t6 * t6;
    if t6 == 0.0 || learning_rate == 0.0 {
        return StepOutcome::Applied { loss };
    }

    let pi = &*scratch;
    let s0 = 2.0 * t6 / pi.t4;
    let s0_self = 2.0 * t6 * pi.t5 / (pi.t2 * pi.t2 * pi.t2 * pi.t3);
    let s1_self = 2.0 * t6 * pi.t5 / (pi.t2 * pi.t3 * pi.t3 * pi.t3);
    let k = params.latent_dim();
    let (ux, uy) = (learning_rate * x, learning_rate * y);

    let (ur, ir) = (user * k, item * k);
    for l in 0..k {
        let g0 = s0 * pi.t1[l] - s0_self * pi.t0[l];
        let g1 = s0 * pi.t0[l] - s1_self * pi.t1[l];
        params.a[ur + l] += ux * g0;
        params.b[ur + l] += uy * g0;
        params.u[ur + l] += learning_rate * g0;
        params.c[ir + l] += ux * g1;
        params.d[ir + l] += uy * g1;
        params.v[ir + l] += learning_rate * g1;
    }
    StepOutcome::Applied { loss }
}
