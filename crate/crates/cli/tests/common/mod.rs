#![allow(dead_code)]

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};

pub fn matrec() -> Command {
    Command::new(env!("CARGO_BIN_EXE_matrec"))
}

pub fn run(args: &[&str]) -> Output {
    matrec().args(args).output().expect("spawn matrec")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// `key=value` field from a summary line.
pub fn field(summary: &str, key: &str) -> Option<String> {
    summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix(key)?.strip_prefix('='))
        .map(str::to_string)
}

/// Listening-count file in the tab-separated lastFM layout, with skewed
/// user activity and item popularity.
pub fn write_lastfm(dir: &Path, users: u64, items: u64, seed: u64) -> PathBuf {
    let path = dir.join("user_artists.dat");
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    writeln!(f, "userID\tartistID\tweight").unwrap();
    for u in 1..=users {
        let n = (3 + 40 / u).min(items);
        let mut chosen = std::collections::BTreeSet::new();
        while (chosen.len() as u64) < n {
            let r: f64 = rng.random();
            chosen.insert(1 + (r * r * items as f64) as u64 % items);
        }
        for a in chosen {
            let w: f64 = rng.random();
            writeln!(f, "{u}\t{a}\t{}", 1 + (w * w * w * 5000.0) as u64).unwrap();
        }
    }
    f.flush().unwrap();
    path
}

/// `ratings.csv` in the MovieLens layout with half-star ratings.
pub fn write_movielens(dir: &Path, users: u64, items: u64, seed: u64) -> PathBuf {
    let path = dir.join("ratings.csv");
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path).unwrap());
    writeln!(f, "userId,movieId,rating,timestamp").unwrap();
    for u in 1..=users {
        let taste: f64 = rng.random();
        for m in 1..=items {
            if rng.random::<f64>() < 0.3 {
                let quality = (m % 7) as f64 / 6.0;
                let r = 0.5 + (9.0 * (0.5 * taste + 0.5 * quality)).round() / 2.0;
                writeln!(f, "{u},{m},{r},{}", 964982703 + m).unwrap();
            }
        }
    }
    f.flush().unwrap();
    path
}
