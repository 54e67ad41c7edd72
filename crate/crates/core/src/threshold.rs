// SPDX-License-Identifier: MIT OR Apache-2.0

//! Monte-Carlo calibration of the multiscale statistic under the null and a
//! persisted table of the resulting critical values.
//!
//! Replicate `r` of a simulation with master seed `s` draws from
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `r`, so samples are
//! bit-reproducible across platforms and independent of thread scheduling.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{MqsError, Result};
use crate::model::QuantileLevel;
use crate::multiscale::local_stat;

/// Replicate count used when none is given.
pub const DEFAULT_REPS: usize = 5000;
/// Master seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_170_601;
/// Environment variable overriding the default table location.
pub const TABLE_PATH_ENV: &str = "MQSEG_THRESHOLD_PATH";

const TABLE_HEADER: &str = "mqseg-thresholds v1";

/// Simulated null values of the multiscale statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct NullSample {
    pub values: Vec<f64>,
    pub n: usize,
    pub beta: QuantileLevel,
    pub reps: usize,
    pub seed: u64,
}

fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Maximum of the penalized local statistic over all intervals of `bits`.
///
/// For fixed length the statistic is quasi-convex in the count, so only the
/// smallest and largest window counts need evaluating.
pub fn null_statistic(bits: &[bool], beta: QuantileLevel) -> f64 {
    let n = bits.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0u32);
    for &b in bits {
        prefix.push(prefix.last().unwrap() + b as u32);
    }
    let mut best = f64::NEG_INFINITY;
    for ell in 1..=n {
        let (mut lo, mut hi) = (u32::MAX, 0u32);
        for end in ell..=n {
            let c = prefix[end] - prefix[end - ell];
            lo = lo.min(c);
            hi = hi.max(c);
        }
        best = best
            .max(local_stat(lo as usize, ell, n, beta))
            .max(local_stat(hi as usize, ell, n, beta));
    }
    best
}

fn simulate_replicate(n: usize, beta: QuantileLevel, seed: u64, replicate: usize, buf: &mut Vec<bool>) -> f64 {
    let mut rng = replicate_rng(seed, replicate);
    buf.clear();
    buf.extend((0..n).map(|_| rng.random_bool(beta.value())));
    null_statistic(buf, beta)
}

fn check_args(n: usize, reps: usize) -> Result<()> {
    if n == 0 {
        return Err(MqsError::domain("series length must be positive"));
    }
    if reps == 0 {
        return Err(MqsError::domain("replicate count must be positive"));
    }
    Ok(())
}

/// Simulates `reps` null replicates in parallel.
pub fn simulate_mn(n: usize, beta: QuantileLevel, reps: usize, seed: u64) -> Result<NullSample> {
    check_args(n, reps)?;
    let values = (0..reps)
        .into_par_iter()
        .map_init(Vec::new, |buf, r| simulate_replicate(n, beta, seed, r, buf))
        .collect();
    Ok(NullSample {
        values,
        n,
        beta,
        reps,
        seed,
    })
}

/// Single-threaded variant of [`simulate_mn`]; produces identical samples.
pub fn simulate_mn_serial(n: usize, beta: QuantileLevel, reps: usize, seed: u64) -> Result<NullSample> {
    check_args(n, reps)?;
    let mut buf = Vec::new();
    let values = (0..reps)
        .map(|r| simulate_replicate(n, beta, seed, r, &mut buf))
        .collect();
    Ok(NullSample {
        values,
        n,
        beta,
        reps,
        seed,
    })
}

/// Empirical `(1 - alpha)`-quantile: the smallest sample value whose
/// empirical cdf reaches `1 - alpha`.
pub fn quantile_of(sample: &NullSample, alpha: f64) -> Result<f64> {
    quantile_of_values(&sample.values, alpha)
}

pub fn quantile_of_values(values: &[f64], alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MqsError::domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if values.is_empty() {
        return Err(MqsError::domain("empty sample"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len() as f64;
    // Guard against 0.8 * 5 evaluating to 4.000000000000001.
    let k = ((1.0 - alpha) * m - 1e-9 * m).ceil().max(1.0) as usize;
    Ok(sorted[k.min(sorted.len()) - 1])
}

/// Lookup key of a critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdKey {
    pub n: usize,
    pub beta: f64,
    pub alpha: f64,
    pub reps: usize,
    pub seed: u64,
}

impl ThresholdKey {
    /// Key with the default replicate count and seed.
    pub fn new(n: usize, beta: QuantileLevel, alpha: f64) -> Self {
        Self {
            n,
            beta: beta.value(),
            alpha,
            reps: DEFAULT_REPS,
            seed: DEFAULT_SEED,
        }
    }

    fn ordered(&self) -> OrderedKey {
        (self.n, self.beta.to_bits(), self.alpha.to_bits(), self.reps, self.seed)
    }

    fn validate(&self) -> Result<QuantileLevel> {
        let beta = QuantileLevel::new(self.beta)?;
        check_args(self.n, self.reps)?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MqsError::domain(format!("alpha = {} outside (0, 1)", self.alpha)));
        }
        Ok(beta)
    }
}

type OrderedKey = (usize, u64, u64, usize, u64);

/// In-memory table of critical values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ThresholdTable {
    entries: BTreeMap<OrderedKey, (ThresholdKey, f64)>,
}

impl ThresholdTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &ThresholdKey) -> Option<f64> {
        self.entries.get(&key.ordered()).map(|&(_, q)| q)
    }

    pub fn insert(&mut self, key: ThresholdKey, q: f64) {
        self.entries.insert(key.ordered(), (key, q));
    }

    pub fn iter(&self) -> impl Iterator<Item = (ThresholdKey, f64)> + '_ {
        self.entries.values().copied()
    }

    /// Parses the line format; `path` is only used in error messages.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let bad = |line: usize, message: String| MqsError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        match lines.next() {
            Some((_, h)) if h.trim() == TABLE_HEADER => {}
            _ => return Err(bad(1, format!("expected header '{TABLE_HEADER}'"))),
        }
        let mut table = Self::new();
        for (idx, raw) in lines {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(bad(idx + 1, format!("expected 6 fields, found {}", fields.len())));
            }
            let num = |k: usize| -> Result<f64> {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| bad(idx + 1, format!("field {}: {e}", k + 1)))
            };
            let int = |k: usize| -> Result<u64> {
                fields[k]
                    .parse::<u64>()
                    .map_err(|e| bad(idx + 1, format!("field {}: {e}", k + 1)))
            };
            let key = ThresholdKey {
                n: int(0)? as usize,
                beta: num(1)?,
                alpha: num(2)?,
                reps: int(3)? as usize,
                seed: int(4)?,
            };
            key.validate().map_err(|e| bad(idx + 1, e.to_string()))?;
            table.insert(key, num(5)?);
        }
        Ok(table)
    }

    pub fn render(&self) -> String {
        let mut out = String::from(TABLE_HEADER);
        out.push('\n');
        for (k, q) in self.iter() {
            out.push_str(&format!("{},{:?},{:?},{},{},{:?}\n", k.n, k.beta, k.alpha, k.reps, k.seed, q));
        }
        out
    }

    /// Loads a table; a missing file yields an empty table.
    pub fn load(path: &Path) -> Result<Self> {
        match fs::read_to_string(path) {
            Ok(text) => Self::parse(&text, path),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::new()),
            Err(e) => Err(MqsError::io(path, e)),
        }
    }

    /// Writes the whole table through a temporary file and a rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| MqsError::io(dir, e))?;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        let write = || -> std::io::Result<()> {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(self.render().as_bytes())?;
            f.sync_all()?;
            fs::rename(&tmp, path)
        };
        write().map_err(|e| {
            let _ = fs::remove_file(&tmp);
            MqsError::io(path, e)
        })
    }
}

/// Default table location: `$MQSEG_THRESHOLD_PATH`, else the user cache
/// directory, else the system temporary directory.
pub fn default_table_path() -> PathBuf {
    if let Some(p) = std::env::var_os(TABLE_PATH_ENV).filter(|p| !p.is_empty()) {
        return PathBuf::from(p);
    }
    let cache = std::env::var_os("XDG_CACHE_HOME")
        .filter(|p| !p.is_empty())
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".cache")))
        .unwrap_or_else(std::env::temp_dir);
    cache.join("mqseg").join("thresholds.txt")
}

/// A table bound to a file, with an in-memory cache of raw samples so that
/// several levels of one simulation cost a single run.
#[derive(Debug)]
pub struct ThresholdStore {
    path: Option<PathBuf>,
    table: ThresholdTable,
    samples: HashMap<(usize, u64, usize, u64), Vec<f64>>,
}

impl ThresholdStore {
    /// Opens (or starts) the table at `path`.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let table = ThresholdTable::load(&path)?;
        Ok(Self {
            path: Some(path),
            table,
            samples: HashMap::new(),
        })
    }

    pub fn open_default() -> Result<Self> {
        Self::open(default_table_path())
    }

    /// A store that never touches the filesystem.
    pub fn in_memory() -> Self {
        Self {
            path: None,
            table: ThresholdTable::new(),
            samples: HashMap::new(),
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn table(&self) -> &ThresholdTable {
        &self.table
    }

    /// Returns the cached critical value or simulates, stores and returns it.
    pub fn get_or_simulate(&mut self, key: ThresholdKey) -> Result<f64> {
        if let Some(q) = self.table.get(&key) {
            return Ok(q);
        }
        let beta = key.validate()?;
        let skey = (key.n, key.beta.to_bits(), key.reps, key.seed);
        let values = match self.samples.entry(skey) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(simulate_mn(key.n, beta, key.reps, key.seed)?.values),
        };
        let q = quantile_of_values(values, key.alpha)?;
        self.table.insert(key, q);
        if let Some(path) = &self.path {
            // Merge with entries other processes may have written meanwhile.
            let mut on_disk = ThresholdTable::load(path)?;
            for (k, v) in self.table.iter() {
                on_disk.insert(k, v);
            }
            on_disk.save(path)?;
            self.table = on_disk;
        }
        Ok(q)
    }

    /// Shorthand for the default replicate count and seed.
    pub fn threshold(&mut self, n: usize, beta: QuantileLevel, alpha: f64) -> Result<f64> {
        self.get_or_simulate(ThresholdKey::new(n, beta, alpha))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn beta(b: f64) -> QuantileLevel {
        QuantileLevel::new(b).unwrap()
    }

    /// Exact null distribution by enumerating every bit pattern.
    fn exact_distribution(n: usize, b: f64) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for mask in 0u32..(1 << n) {
            let bits: Vec<bool> = (0..n).map(|k| mask >> k & 1 == 1).collect();
            let ones = bits.iter().filter(|&&x| x).count() as i32;
            let p = b.powi(ones) * (1.0 - b).powi(n as i32 - ones);
            // independent evaluation over all intervals
            let mut m = f64::NEG_INFINITY;
            for i in 0..n {
                for j in i..n {
                    let ell = j - i + 1;
                    let c = bits[i..=j].iter().filter(|&&x| x).count();
                    let w = c as f64 / ell as f64;
                    let kl = |x: f64| if x > 0.0 { x * (x / b).ln() } else { 0.0 };
                    let t = ell as f64 * (kl(w) + if w < 1.0 { (1.0 - w) * ((1.0 - w) / (1.0 - b)).ln() } else { 0.0 });
                    let pen = (2.0 * (1.0 + (n as f64 / ell as f64).ln())).sqrt();
                    m = m.max((2.0 * t.max(0.0)).sqrt() - pen);
                }
            }
            match out.iter_mut().find(|(v, _)| (*v - m).abs() < 1e-12) {
                Some(slot) => slot.1 += p,
                None => out.push((m, p)),
            }
        }
        out
    }

    #[test]
    fn single_observation_closed_form() {
        let s = simulate_mn(1, beta(0.5), 64, 7).unwrap();
        let expected = (2.0 * 2f64.ln()).sqrt() - 2f64.sqrt();
        for v in &s.values {
            assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(expected, -0.236_80, epsilon = 1e-5);
    }

    #[test]
    fn simulation_is_reproducible() {
        let a = simulate_mn(40, beta(0.3), 200, 11).unwrap();
        let b = simulate_mn(40, beta(0.3), 200, 11).unwrap();
        assert_eq!(a, b);
        let c = simulate_mn(40, beta(0.3), 200, 12).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn parallel_equals_serial() {
        let a = simulate_mn(60, beta(0.5), 300, 5).unwrap();
        let b = simulate_mn_serial(60, beta(0.5), 300, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_reps_rejected() {
        assert!(simulate_mn(10, beta(0.5), 0, 1).is_err());
    }

    #[test]
    fn two_point_support_matches_enumeration() {
        let support = exact_distribution(2, 0.5);
        let s = simulate_mn(2, beta(0.5), 500, 3).unwrap();
        for v in &s.values {
            assert!(support.iter().any(|(x, _)| (x - v).abs() < 1e-12), "{v} outside support");
        }
    }

    #[test]
    fn small_n_frequencies_match_exact_distribution() {
        let reps = 20_000;
        for n in 1..=3 {
            for b in [0.25, 0.5, 0.8] {
                let exact = exact_distribution(n, b);
                let s = simulate_mn(n, beta(b), reps, 99).unwrap();
                for (x, p) in exact {
                    let freq = s.values.iter().filter(|v| (*v - x).abs() < 1e-12).count() as f64 / reps as f64;
                    let se = (p * (1.0 - p) / reps as f64).sqrt().max(1e-9);
                    assert!((freq - p).abs() <= 3.0 * se + 1e-12, "n={n} b={b} x={x}: {freq} vs {p}");
                }
            }
        }
    }

    #[test]
    fn null_statistic_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(1..30);
            let b = rng.random_range(0.05..0.95);
            let bits: Vec<bool> = (0..n).map(|_| rng.random_bool(b)).collect();
            let mut brute = f64::NEG_INFINITY;
            for i in 0..n {
                for j in i..n {
                    let c = bits[i..=j].iter().filter(|&&x| x).count();
                    brute = brute.max(local_stat(c, j - i + 1, n, beta(b)));
                }
            }
            assert_eq!(null_statistic(&bits, beta(b)), brute);
        }
    }

    #[test]
    fn quantile_examples() {
        let s = |v: Vec<f64>| NullSample {
            reps: v.len(),
            values: v,
            n: 1,
            beta: QuantileLevel::MEDIAN,
            seed: 0,
        };
        assert_eq!(quantile_of(&s(vec![1.0, 2.0, 3.0, 4.0, 5.0]), 0.2).unwrap(), 4.0);
        assert_eq!(quantile_of(&s(vec![5.0, 1.0, 4.0, 2.0, 3.0]), 0.5).unwrap(), 3.0);
        for a in [0.01, 0.3, 0.99] {
            assert_eq!(quantile_of(&s(vec![2.5; 7]), a).unwrap(), 2.5);
        }
        let sample = simulate_mn(50, beta(0.5), 400, 2).unwrap();
        assert!(quantile_of(&sample, 0.05).unwrap() >= quantile_of(&sample, 0.10).unwrap());
        assert!(quantile_of(&sample, 0.0).is_err());
        assert!(quantile_of(&sample, 1.0).is_err());
    }

    #[test]
    fn n500_sanity_envelope() {
        let s = simulate_mn(500, beta(0.5), DEFAULT_REPS, DEFAULT_SEED).unwrap();
        let q05 = quantile_of(&s, 0.05).unwrap();
        let q10 = quantile_of(&s, 0.10).unwrap();
        let q20 = quantile_of(&s, 0.20).unwrap();
        assert!(q10.is_finite() && (0.0..=10.0).contains(&q10), "q = {q10}");
        assert!(q05 >= q10 && q10 >= q20);
    }

    #[test]
    fn store_miss_then_hit_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let key = ThresholdKey {
            n: 30,
            beta: 0.5,
            alpha: 0.1,
            reps: 200,
            seed: 4,
        };
        let mut store = ThresholdStore::open(&path).unwrap();
        let q1 = store.get_or_simulate(key).unwrap();
        let q2 = store.get_or_simulate(key).unwrap();
        assert_eq!(q1.to_bits(), q2.to_bits());

        let other = ThresholdKey { seed: 5, ..key };
        store.get_or_simulate(other).unwrap();
        assert_eq!(store.table().len(), 2);

        let reopened = ThresholdStore::open(&path).unwrap();
        assert_eq!(reopened.table().get(&key).unwrap().to_bits(), q1.to_bits());
        assert_eq!(reopened.table(), store.table());
    }

    #[test]
    fn hand_written_table_is_returned_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        fs::write(&path, "mqseg-thresholds v1\n100,0.5,0.1,5000,1,0.12345678901234568\n").unwrap();
        let mut store = ThresholdStore::open(&path).unwrap();
        let key = ThresholdKey {
            n: 100,
            beta: 0.5,
            alpha: 0.1,
            reps: 5000,
            seed: 1,
        };
        assert_eq!(store.get_or_simulate(key).unwrap(), 0.123_456_789_012_345_68);
    }

    #[test]
    fn corrupt_table_reports_path_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "mqseg-thresholds v1\n100,0.5,oops,5000,1,0.1\n").unwrap();
        match ThresholdStore::open(&path) {
            Err(MqsError::Parse { path: p, line, .. }) => {
                assert_eq!(p, path);
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        fs::write(&path, "not a table\n").unwrap();
        assert!(ThresholdStore::open(&path).is_err());
    }

    #[test]
    fn render_round_trips_bit_exactly() {
        let mut t = ThresholdTable::new();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for i in 0..50 {
            let key = ThresholdKey {
                n: i + 1,
                beta: rng.random_range(0.01..0.99),
                alpha: rng.random_range(0.01..0.99),
                reps: 10,
                seed: rng.random(),
            };
            t.insert(key, rng.random::<f64>() * 7.0 - 2.0);
        }
        let back = ThresholdTable::parse(&t.render(), Path::new("mem")).unwrap();
        assert_eq!(back, t);
    }
}
