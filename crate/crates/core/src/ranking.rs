//! Popularity ranks of users and items.
//!
//! Popularity is the number of distinct counterparties: a user's popularity is
//! how many different items it touched, an item's is how many different users
//! touched it. Rank 1 is the most popular entity and ties go to the smaller id.
//! The model consumes the normalized rank `rank / count`, which lies in
//! `(0, 1]` with the most popular entity closest to zero.

use std::collections::{HashMap, HashSet};
use std::io::Write;

use crate::dataio::RatingTriple;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankEntry {
    pub id: u64,
    pub count: usize,
    pub rank: usize,
}

/// Ranks for one side (users or items).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ranking {
    /// Entries in rank order.
    entries: Vec<RankEntry>,
    by_id: HashMap<u64, usize>,
}

impl Ranking {
    fn from_counts(counts: HashMap<u64, usize>) -> Self {
        let mut pairs: Vec<(u64, usize)> = counts.into_iter().collect();
        pairs.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        let entries: Vec<RankEntry> = pairs
            .into_iter()
            .enumerate()
            .map(|(pos, (id, count))| RankEntry {
                id,
                count,
                rank: pos + 1,
            })
            .collect();
        let by_id = entries.iter().enumerate().map(|(i, e)| (e.id, i)).collect();
        Ranking { entries, by_id }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn get(&self, id: u64) -> Option<&RankEntry> {
        self.by_id.get(&id).map(|&i| &self.entries[i])
    }

    pub fn rank(&self, id: u64) -> Option<usize> {
        self.get(id).map(|e| e.rank)
    }

    pub fn normalized(&self, id: u64) -> Option<f64> {
        self.rank(id).map(|r| r as f64 / self.entries.len() as f64)
    }

    /// Write `entity_id,count,rank,normalized_rank` rows in rank order.
    pub fn write_table<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "entity_id,count,rank,normalized_rank")?;
        let n = self.entries.len() as f64;
        for e in &self.entries {
            writeln!(out, "{},{},{},{}", e.id, e.count, e.rank, e.rank as f64 / n)?;
        }
        out.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankTable {
    pub users: Ranking,
    pub items: Ranking,
}

impl RankTable {
    /// Normalized user rank, `x` in the model's feature construction.
    pub fn x(&self, user_id: u64) -> Option<f64> {
        self.users.normalized(user_id)
    }

    /// Normalized item rank, `y` in the model's feature construction.
    pub fn y(&self, item_id: u64) -> Option<f64> {
        self.items.normalized(item_id)
    }
}

pub fn compute_ranks(interactions: &[RatingTriple]) -> Result<RankTable> {
    if interactions.is_empty() {
        return Err(Error::invalid("cannot rank an empty interaction list"));
    }
    let pairs: HashSet<(u64, u64)> = interactions
        .iter()
        .map(|t| (t.user_id, t.item_id))
        .collect();
    let mut user_counts: HashMap<u64, usize> = HashMap::new();
    let mut item_counts: HashMap<u64, usize> = HashMap::new();
    for &(u, i) in &pairs {
        *user_counts.entry(u).or_default() += 1;
        *item_counts.entry(i).or_default() += 1;
    }
    Ok(RankTable {
        users: Ranking::from_counts(user_counts),
        items: Ranking::from_counts(item_counts),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(u: u64, i: u64) -> RatingTriple {
        RatingTriple::new(u, i, 1.0, 1.0)
    }

    #[test]
    fn singleton() {
        let r = compute_ranks(&[t(7, 9)]).unwrap();
        assert_eq!(r.users.rank(7), Some(1));
        assert_eq!(r.items.rank(9), Some(1));
        assert_eq!(r.x(7), Some(1.0));
        assert_eq!(r.y(9), Some(1.0));
    }

    #[test]
    fn ties_break_on_smaller_id() {
        // user 1 touches 5 items, users 2 and 3 touch 2 each
        let mut rows = Vec::new();
        rows.extend((0..5).map(|i| t(1, i)));
        rows.extend((0..2).map(|i| t(3, i)));
        rows.extend((0..2).map(|i| t(2, i)));
        let r = compute_ranks(&rows).unwrap();
        assert_eq!(r.users.rank(1), Some(1));
        assert_eq!(r.users.rank(2), Some(2));
        assert_eq!(r.users.rank(3), Some(3));
        assert_eq!(r.x(1), Some(1.0 / 3.0));
        assert_eq!(r.x(2), Some(2.0 / 3.0));
        assert_eq!(r.x(3), Some(1.0));
    }

    #[test]
    fn repeated_pairs_count_once() {
        let r = compute_ranks(&[t(1, 1), t(1, 1), t(1, 1), t(2, 1), t(2, 2)]).unwrap();
        assert_eq!(r.users.get(1).unwrap().count, 1);
        assert_eq!(r.users.get(2).unwrap().count, 2);
        assert_eq!(r.users.rank(2), Some(1));
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(matches!(compute_ranks(&[]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn table_lists_entities_in_rank_order() {
        let r = compute_ranks(&[t(1, 1), t(2, 1), t(2, 2)]).unwrap();
        let mut buf = Vec::new();
        r.users.write_table(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "entity_id,count,rank,normalized_rank\n2,2,1,0.5\n1,1,2,1\n"
        );
    }
}
