//! Plain-text model dumps.
//!
//! ```text
//! <kind> <n_users> <n_items> <dim>      kind is matrec | als | bpr
//! <kind-specific scalars>              norm_epsilon / lambda / calibration
//! users <id> <id> ...
//! items <id> <id> ...
//! <section name>
//! <one row of space-separated values per user or item>
//! ...
//! ```
//!
//! MatRec sections are `a b u` (user rows) then `c d v` (item rows); ALS has
//! `user_factors item_factors`; BPR adds `item_bias` with one value per row.
//! Floats are written in shortest round-trip form, so a dump reloads bit-exact.

use std::io::{BufRead, Write};

use crate::baselines::{AlsModel, BprModel, Calibration};
use crate::dataio::IdIndex;
use crate::error::{Error, Result};
use crate::matrec::{Family, MatRecModel, MatRecParams};
use crate::pipeline::TrainedModel;

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    MatRec(MatRecModel),
    Als(AlsModel),
    Bpr(BprModel),
}

impl From<TrainedModel> for SavedModel {
    fn from(m: TrainedModel) -> Self {
        match m {
            TrainedModel::MatRec(m, _) => SavedModel::MatRec(m),
            TrainedModel::Als(m) => SavedModel::Als(m),
            TrainedModel::Bpr(m, _) => SavedModel::Bpr(m),
        }
    }
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::MatRec(_) => "matrec",
            SavedModel::Als(_) => "als",
            SavedModel::Bpr(_) => "bpr",
        }
    }

    pub fn as_rating_model(&self) -> &dyn crate::eval::RatingModel {
        match self {
            SavedModel::MatRec(m) => m,
            SavedModel::Als(m) => m,
            SavedModel::Bpr(m) => m,
        }
    }
}

fn write_ids<W: Write>(out: &mut W, name: &str, ids: &IdIndex) -> std::io::Result<()> {
    write!(out, "{name}")?;
    for id in ids.ids() {
        write!(out, " {id}")?;
    }
    writeln!(out)
}

fn write_rows<W: Write>(
    out: &mut W,
    name: &str,
    values: &[f64],
    dim: usize,
) -> std::io::Result<()> {
    writeln!(out, "{name}")?;
    for row in values.chunks(dim) {
        let mut first = true;
        for v in row {
            if !first {
                write!(out, " ")?;
            }
            write!(out, "{v}")?;
            first = false;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_model<W: Write>(model: &SavedModel, mut out: W) -> std::io::Result<()> {
    match model {
        SavedModel::MatRec(m) => {
            let p = &m.params;
            writeln!(
                out,
                "matrec {} {} {}",
                p.n_users(),
                p.n_items(),
                p.latent_dim()
            )?;
            writeln!(out, "norm_epsilon {}", m.norm_epsilon)?;
            write_ids(&mut out, "users", &m.users)?;
            write_ids(&mut out, "items", &m.items)?;
            for f in Family::ALL {
                write_rows(&mut out, f.name(), p.family(f), p.latent_dim())?;
            }
        }
        SavedModel::Als(m) => {
            writeln!(out, "als {} {} {}", m.users.len(), m.items.len(), m.rank)?;
            writeln!(out, "lambda {}", m.lambda)?;
            write_ids(&mut out, "users", &m.users)?;
            write_ids(&mut out, "items", &m.items)?;
            write_rows(&mut out, "user_factors", &m.user_factors, m.rank)?;
            write_rows(&mut out, "item_factors", &m.item_factors, m.rank)?;
        }
        SavedModel::Bpr(m) => {
            writeln!(out, "bpr {} {} {}", m.users.len(), m.items.len(), m.dim)?;
            match m.calibration {
                Some(c) => writeln!(out, "calibration {} {}", c.alpha, c.beta)?,
                None => writeln!(out, "calibration none")?,
            }
            write_ids(&mut out, "users", &m.users)?;
            write_ids(&mut out, "items", &m.items)?;
            write_rows(&mut out, "user_factors", &m.user_factors, m.dim)?;
            write_rows(&mut out, "item_factors", &m.item_factors, m.dim)?;
            write_rows(&mut out, "item_bias", &m.item_bias, 1)?;
        }
    }
    out.flush()
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::InvalidData(format!("model file line {}: {msg}", self.line))
    }

    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(Ok(l)) => Ok(l),
            Some(Err(e)) => Err(self.err(e)),
            None => Err(self.err("unexpected end of file")),
        }
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn keyed(&mut self, key: &str) -> Result<Vec<String>> {
        let l = self.next()?;
        let mut tokens = l.split_whitespace();
        if tokens.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        Ok(tokens.map(str::to_string).collect())
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad value {s:?}")))
    }

    fn ids(&mut self, key: &str, n: usize) -> Result<IdIndex> {
        let tokens = self.keyed(key)?;
        let ids: Vec<u64> = tokens
            .iter()
            .map(|t| self.parse(t))
            .collect::<Result<_>>()?;
        if ids.len() != n || ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(self.err(format!("expected {n} ascending {key} ids")));
        }
        Ok(IdIndex::from_ids(ids))
    }

    fn rows(&mut self, key: &str, n: usize, dim: usize) -> Result<Vec<f64>> {
        self.keyed(key)?;
        let mut out = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let l = self.next()?;
            let before = out.len();
            for t in l.split_whitespace() {
                out.push(self.parse::<f64>(t)?);
            }
            if out.len() - before != dim {
                return Err(self.err(format!("expected {dim} values")));
            }
        }
        Ok(out)
    }
}

pub fn read_model<R: BufRead>(input: R) -> Result<SavedModel> {
    let mut lines = Lines {
        inner: input.lines(),
        line: 0,
    };
    let header = lines.next()?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    let [kind, n, m, dim] = tokens[..] else {
        return Err(lines.err("expected `<kind> <n_users> <n_items> <dim>`"));
    };
    let (n, m, dim): (usize, usize, usize) = (lines.parse(n)?, lines.parse(m)?, lines.parse(dim)?);
    if n == 0 || m == 0 || dim == 0 {
        return Err(lines.err("sizes must be positive"));
    }
    match kind {
        "matrec" => {
            let eps = lines.keyed("norm_epsilon")?;
            let norm_epsilon: f64 = lines.parse(eps.first().map(String::as_str).unwrap_or(""))?;
            let users = lines.ids("users", n)?;
            let items = lines.ids("items", m)?;
            let mut params = MatRecParams::zeros(n, m, dim)?;
            for f in Family::ALL {
                let rows = if f.is_user_side() { n } else { m };
                let values = lines.rows(f.name(), rows, dim)?;
                params.family_mut(f).copy_from_slice(&values);
            }
            Ok(SavedModel::MatRec(MatRecModel {
                params,
                users,
                items,
                norm_epsilon,
            }))
        }
        "als" => {
            let lambda = lines.keyed("lambda")?;
            let lambda: f64 = lines.parse(lambda.first().map(String::as_str).unwrap_or(""))?;
            let users = lines.ids("users", n)?;
            let items = lines.ids("items", m)?;
            let user_factors = lines.rows("user_factors", n, dim)?;
            let item_factors = lines.rows("item_factors", m, dim)?;
            Ok(SavedModel::Als(AlsModel {
                rank: dim,
                lambda,
                user_factors,
                item_factors,
                users,
                items,
            }))
        }
        "bpr" => {
            let cal = lines.keyed("calibration")?;
            let calibration = match &cal[..] {
                [none] if none == "none" => None,
                [a, b] => Some(Calibration {
                    alpha: lines.parse(a)?,
                    beta: lines.parse(b)?,
                }),
                _ => return Err(lines.err("expected `calibration <alpha> <beta>` or `none`")),
            };
            let users = lines.ids("users", n)?;
            let items = lines.ids("items", m)?;
            let user_factors = lines.rows("user_factors", n, dim)?;
            let item_factors = lines.rows("item_factors", m, dim)?;
            let item_bias = lines.rows("item_bias", m, 1)?;
            Ok(SavedModel::Bpr(BprModel {
                dim,
                user_factors,
                item_factors,
                item_bias,
                users,
                items,
                calibration,
            }))
        }
        other => Err(lines.err(format!("unknown model kind `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::bpr::init_bpr;
    use crate::matrec::{init_params, Hyperparams};

    fn round_trip(m: &SavedModel) -> SavedModel {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        read_model(buf.as_slice()).unwrap()
    }

    #[test]
    fn matrec_dump_reloads_exactly() {
        let hyper = Hyperparams {
            latent_dim: 3,
            ..Hyperparams::default()
        };
        let m = SavedModel::MatRec(MatRecModel {
            params: init_params(2, 3, &hyper).unwrap(),
            users: IdIndex::from_ids([4, 9]),
            items: IdIndex::from_ids([1, 2, 30]),
            norm_epsilon: 1e-12,
        });
        assert_eq!(round_trip(&m), m);
    }

    #[test]
    fn baseline_dumps_reload_exactly() {
        let als = SavedModel::Als(AlsModel {
            rank: 2,
            lambda: 0.1,
            user_factors: vec![0.1, -0.2, 1.0 / 3.0, 4.5],
            item_factors: vec![0.7, 0.8],
            users: IdIndex::from_ids([1, 2]),
            items: IdIndex::from_ids([5]),
        });
        assert_eq!(round_trip(&als), als);

        let mut bpr = init_bpr(2, 2, 3, 1).unwrap();
        bpr.users = IdIndex::from_ids([1, 2]);
        bpr.items = IdIndex::from_ids([3, 4]);
        bpr.item_bias = vec![0.25, -1e-3];
        let uncal = SavedModel::Bpr(bpr.clone());
        assert_eq!(round_trip(&uncal), uncal);
        bpr.calibration = Some(Calibration {
            alpha: 2.5,
            beta: -0.125,
        });
        let cal = SavedModel::Bpr(bpr);
        assert_eq!(round_trip(&cal), cal);
    }

    #[test]
    fn truncated_dump_is_rejected() {
        let als = SavedModel::Als(AlsModel {
            rank: 1,
            lambda: 0.0,
            user_factors: vec![0.5],
            item_factors: vec![0.5],
            users: IdIndex::from_ids([1]),
            items: IdIndex::from_ids([1]),
        });
        let mut buf = Vec::new();
        write_model(&als, &mut buf).unwrap();
        buf.truncate(buf.len() - 4);
        assert!(matches!(
            read_model(buf.as_slice()),
            Err(Error::InvalidData(_))
        ));
        assert!(read_model("svd 1 1 1\n".as_bytes()).is_err());
    }
}
