#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Lives of the synthetic fleet: 100 training engines of which 94 reach
/// 150 cycles, and 100 test engines of which 37 were observed for at least
/// 150 cycles.
pub struct Fleet {
    pub train_lives: Vec<u32>,
    pub test_observed: Vec<u32>,
    pub test_remaining: Vec<u32>,
}

pub fn fleet(seed: u64) -> Fleet {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let train_lives = (0..100).map(|i| if i % 17 == 5 { r.random_range(128..150) } else { r.random_range(150..360) }).collect::<Vec<_>>();
    let test_observed = (0..100).map(|i| if (i * 37) % 100 < 37 { r.random_range(150..300) } else { r.random_range(31..150) }).collect::<Vec<_>>();
    let test_remaining = (0..100).map(|_| r.random_range(7..150)).collect();
    Fleet { train_lives, test_observed, test_remaining }
}

/// Sensor readings that drift toward failure at an engine-specific rate,
/// so that early history carries information about total life.
fn engine_rows(out: &mut String, unit: usize, life: u32, observed: u32, r: &mut ChaCha8Rng) {
    let rate = 1.0 / life as f64;
    for t in 1..=observed {
        let wear = t as f64 * rate;
        write!(out, "{unit} {t} {:.4} {:.4} 100.0", r.random_range(-0.002..0.002), r.random_range(-0.0004..0.0004)).unwrap();
        for s in 1..=21 {
            let v = 500.0 + 10.0 * s as f64 + (s as f64 * 0.3) * wear * 8.0 + r.random_range(-0.5..0.5) * 0.2;
            write!(out, " {v:.4}").unwrap();
        }
        out.push('\n');
    }
}

/// Writes `train_FD001.txt`, `test_FD001.txt` and `RUL_FD001.txt` into `dir`.
pub fn write_fleet(dir: &Path, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    let f = fleet(seed);
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut train = String::new();
    for (i, life) in f.train_lives.iter().enumerate() {
        engine_rows(&mut train, i + 1, *life, *life, &mut r);
    }
    let mut test = String::new();
    let mut truth = String::new();
    for i in 0..100 {
        let life = f.test_observed[i] + f.test_remaining[i];
        engine_rows(&mut test, i + 1, life, f.test_observed[i], &mut r);
        writeln!(truth, "{}", f.test_remaining[i]).unwrap();
    }
    let paths = (dir.join("train_FD001.txt"), dir.join("test_FD001.txt"), dir.join("RUL_FD001.txt"));
    fs::write(&paths.0, train).unwrap();
    fs::write(&paths.1, test).unwrap();
    fs::write(&paths.2, truth).unwrap();
    paths
}
