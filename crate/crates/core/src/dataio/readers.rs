use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{Normalization, RatingDataset, RatingTriple};
use crate::error::{Error, Result};

pub const LASTFM_HEADER: &str = "userID\tartistID\tweight";
pub const MOVIELENS_HEADER: &str = "userId,movieId,rating,timestamp";
pub const CANONICAL_HEADER: &str = "user,item,rating_normalized,rating_raw";

struct LineReader {
    path: PathBuf,
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
}

impl LineReader {
    fn open(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(LineReader {
            path: path.to_path_buf(),
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }

    /// Next line with any trailing `\r` removed.
    fn next_line(&mut self) -> Result<Option<String>> {
        match self.lines.next() {
            None => Ok(None),
            Some(Err(e)) => Err(self.err(format!("read failed: {e}"))),
            Some(Ok(mut line)) => {
                self.line_no += 1;
                if line.ends_with('\r') {
                    line.pop();
                }
                Ok(Some(line))
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Ingest {
            path: self.path.clone(),
            line: self.line_no,
            msg: msg.into(),
        }
    }

    fn field<T: FromStr>(&self, raw: Option<&str>, name: &str) -> Result<T> {
        let raw = raw.ok_or_else(|| self.err(format!("missing field `{name}`")))?;
        raw.trim()
            .parse()
            .map_err(|_| self.err(format!("field `{name}` is not a valid number: {raw:?}")))
    }
}

/// Collapses duplicate pairs to their maximum raw rating, keeping first-seen order.
#[derive(Default)]
struct Collector {
    triples: Vec<RatingTriple>,
    seen: HashMap<(u64, u64), usize>,
}

impl Collector {
    fn push(&mut self, user: u64, item: u64, raw: f64) {
        match self.seen.get(&(user, item)) {
            Some(&i) => {
                let t = &mut self.triples[i];
                t.raw_rating = t.raw_rating.max(raw);
            }
            None => {
                self.seen.insert((user, item), self.triples.len());
                self.triples.push(RatingTriple::new(user, item, 0.0, raw));
            }
        }
    }

    fn finish(self, reader: &LineReader) -> Result<RatingDataset> {
        if self.triples.is_empty() {
            return Err(reader.err("no rating rows found"));
        }
        RatingDataset::from_triples(self.triples, Normalization::Pending)
    }
}

fn check_raw(reader: &LineReader, raw: f64) -> Result<f64> {
    if raw.is_finite() && raw >= 0.0 {
        Ok(raw)
    } else {
        Err(reader.err(format!("rating {raw} must be finite and non-negative")))
    }
}

/// Load a HetRec-2011 lastFM `user_artists.dat` file.
///
/// Raw ratings are listening weights; the returned dataset still needs
/// [`normalize_ratings`](super::normalize_ratings).
pub fn load_lastfm(path: impl AsRef<Path>) -> Result<RatingDataset> {
    let mut reader = LineReader::open(path.as_ref())?;
    match reader.next_line()? {
        Some(h) if h.trim_start_matches('\u{feff}') == LASTFM_HEADER => {}
        Some(h) => {
            return Err(reader.err(format!("expected header {LASTFM_HEADER:?}, found {h:?}")))
        }
        None => return Err(reader.err("empty file")),
    }
    let mut rows = Collector::default();
    while let Some(line) = reader.next_line()? {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let user = reader.field(fields.next(), "userID")?;
        let item = reader.field(fields.next(), "artistID")?;
        let weight = reader.field(fields.next(), "weight")?;
        if fields.next().is_some() {
            return Err(reader.err("expected 3 tab-separated fields"));
        }
        rows.push(user, item, check_raw(&reader, weight)?);
    }
    rows.finish(&reader)
}

/// Load MovieLens ratings: `ratings.csv` with its header, or the headerless
/// tab-separated `u.data` layout. The delimiter of the first line decides.
pub fn load_movielens(path: impl AsRef<Path>) -> Result<RatingDataset> {
    let mut reader = LineReader::open(path.as_ref())?;
    let first = reader
        .next_line()?
        .ok_or_else(|| reader.err("empty file"))?;
    let mut rows = Collector::default();

    let (delim, pending) = if first.contains('\t') {
        ('\t', Some(first))
    } else if first.trim_start_matches('\u{feff}') == MOVIELENS_HEADER {
        (',', None)
    } else {
        return Err(reader.err(format!(
            "expected header {MOVIELENS_HEADER:?} or tab-separated rows, found {first:?}"
        )));
    };

    let mut parse = |reader: &LineReader, line: &str| -> Result<()> {
        if line.trim().is_empty() {
            return Ok(());
        }
        let mut fields = line.split(delim);
        let user = reader.field(fields.next(), "userId")?;
        let item = reader.field(fields.next(), "movieId")?;
        let rating = reader.field(fields.next(), "rating")?;
        let _timestamp: i64 = reader.field(fields.next(), "timestamp")?;
        if fields.next().is_some() {
            return Err(reader.err("expected 4 fields"));
        }
        rows.push(user, item, check_raw(reader, rating)?);
        Ok(())
    };

    if let Some(line) = pending {
        parse(&reader, &line)?;
    }
    while let Some(line) = reader.next_line()? {
        parse(&reader, &line)?;
    }
    rows.finish(&reader)
}

/// Read the canonical `user,item,rating_normalized,rating_raw` table.
pub fn read_canonical(path: impl AsRef<Path>) -> Result<RatingDataset> {
    let mut reader = LineReader::open(path.as_ref())?;
    match reader.next_line()? {
        Some(h) if h == CANONICAL_HEADER => {}
        Some(h) => {
            return Err(reader.err(format!("expected header {CANONICAL_HEADER:?}, found {h:?}")))
        }
        None => return Err(reader.err("empty file")),
    }
    let mut triples = Vec::new();
    while let Some(line) = reader.next_line()? {
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let user = reader.field(fields.next(), "user")?;
        let item = reader.field(fields.next(), "item")?;
        let rating: f64 = reader.field(fields.next(), "rating_normalized")?;
        let raw = reader.field(fields.next(), "rating_raw")?;
        if fields.next().is_some() {
            return Err(reader.err("expected 4 comma-separated fields"));
        }
        if !(0.0..=1.0).contains(&rating) {
            return Err(reader.err(format!("normalized rating {rating} outside [0, 1]")));
        }
        triples.push(RatingTriple::new(
            user,
            item,
            rating,
            check_raw(&reader, raw)?,
        ));
    }
    if triples.is_empty() {
        return Err(reader.err("no rating rows found"));
    }
    let normalization = infer_normalization(&triples);
    RatingDataset::from_triples(triples, normalization)
}

/// Recognize the two built-in schemes by recomputing them bit-for-bit.
fn infer_normalization(triples: &[RatingTriple]) -> Normalization {
    let scale = triples.iter().map(|t| t.raw_rating).fold(0.0, f64::max);
    if scale > 0.0 && triples.iter().all(|t| t.rating == t.raw_rating / scale) {
        return Normalization::GlobalMax { scale };
    }
    let mut user_max: HashMap<u64, f64> = HashMap::new();
    for t in triples {
        let m = user_max.entry(t.user_id).or_insert(0.0);
        *m = m.max(t.raw_rating);
    }
    if triples.iter().all(|t| {
        let m = user_max[&t.user_id];
        m > 0.0 && t.rating == t.raw_rating / m
    }) {
        return Normalization::PerUserMax;
    }
    Normalization::Provided
}

pub fn write_canonical<W: Write>(dataset: &RatingDataset, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CANONICAL_HEADER}")?;
    for t in dataset.triples() {
        writeln!(
            out,
            "{},{},{},{}",
            t.user_id, t.item_id, t.rating, t.raw_rating
        )?;
    }
    out.flush()
}
