use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Evaluator, OpenLoopError, PolicyScore, SinusoidPolicy};
use crate::env::Task;

/// Amplitudes of the published grid, rad/s.
pub const PAPER_AMPLITUDES: [f64; 4] = [7.85, 10.467, 13.083, 15.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
}

impl Grid {
    /// Four amplitudes × 0, 0.1, …, 3.0 Hz.
    pub fn paper() -> Self {
        Grid { amplitudes: PAPER_AMPLITUDES.to_vec(), frequencies: (0..=30).map(|k| k as f64 / 10.0).collect() }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len() * self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cells in amplitude-major order; the position is the cell index.
    pub fn cells(&self) -> Vec<SinusoidPolicy> {
        self.amplitudes
            .iter()
            .flat_map(|&a| self.frequencies.iter().map(move |&f| SinusoidPolicy::new(a, f)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub index: usize,
    pub policy: SinusoidPolicy,
    pub score: PolicyScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub config_hash: String,
    pub task: Task,
    pub reps: usize,
    /// Cells in grid order.
    pub cells: Vec<SweepCell>,
}

impl SweepTable {
    /// Best first (scores are already signed for the task); ties keep grid order.
    pub fn ranked(&self) -> Vec<&SweepCell> {
        let mut out: Vec<&SweepCell> = self.cells.iter().collect();
        out.sort_by(|a, b| b.score.mean.total_cmp(&a.score.mean).then(a.index.cmp(&b.index)));
        out
    }

    pub fn best(&self) -> Option<&SweepCell> {
        self.ranked().first().copied()
    }

    pub fn cell(&self, amplitude: f64, frequency: f64) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.policy.amplitude == amplitude && c.policy.frequency == frequency)
    }

    /// Ranked rows: `rank,amplitude,frequency,mean,min,max,reps,failed`.
    pub fn write_csv(&self, w: impl Write) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["rank", "amplitude", "frequency", "mean", "min", "max", "reps", "failed"])
            .map_err(io::Error::other)?;
        for (rank, c) in self.ranked().into_iter().enumerate() {
            let s = &c.score;
            out.write_record([
                (rank + 1).to_string(),
                c.policy.amplitude.to_string(),
                c.policy.frequency.to_string(),
                s.mean.to_string(),
                s.min.to_string(),
                s.max.to_string(),
                s.reps.to_string(),
                s.failed.len().to_string(),
            ])
            .map_err(io::Error::other)?;
        }
        out.flush()
    }
}

/// One finished cell as stored in the resume cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    config_hash: String,
    reps: usize,
    policy: SinusoidPolicy,
    score: PolicyScore,
}

type CacheKey = (u64, u64);

fn key(p: &SinusoidPolicy) -> CacheKey {
    (p.amplitude.to_bits(), p.frequency.to_bits())
}

/// Append-only JSON-lines cache of finished cells. Entries for another
/// configuration or repetition count are ignored.
#[derive(Debug)]
pub struct SweepCache {
    file: Mutex<File>,
    hits: HashMap<CacheKey, PolicyScore>,
}

impl SweepCache {
    pub fn open(path: impl AsRef<Path>, config_hash: &str, reps: usize) -> Result<Self, OpenLoopError> {
        let path = path.as_ref();
        let mut hits = HashMap::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<io::Result<_>>()?;
            for line in lines.iter().filter(|l| !l.trim().is_empty()) {
                // a torn line from an interrupted run is simply recomputed
                let Ok(e) = serde_json::from_str::<CacheEntry>(line) else { continue };
                if e.config_hash == config_hash && e.reps == reps {
                    hits.insert(key(&e.policy), e.score);
                }
            }
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path)?;
        // start on a fresh line if the previous run died mid-write
        if file.metadata()?.len() > 0 {
            file.write_all(b"\n")?;
        }
        Ok(SweepCache { file: Mutex::new(file), hits })
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }

    fn get(&self, p: &SinusoidPolicy) -> Option<PolicyScore> {
        self.hits.get(&key(p)).cloned()
    }

    fn store(&self, entry: &CacheEntry) -> io::Result<()> {
        let mut line = serde_json::to_vec(entry)?;
        line.push(b'\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(&line)?;
        f.flush()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub reps: usize,
    /// Worker threads; 0 uses rayon's default.
    pub workers: usize,
}

/// Scores every grid cell. Cells are independent jobs on a bounded pool;
/// the table is assembled by cell index, so it does not depend on
/// completion order, worker count or which cells came from the cache.
pub fn grid_sweep(
    evaluator: &Evaluator,
    grid: &Grid,
    options: SweepOptions,
    cache: Option<&SweepCache>,
) -> Result<SweepTable, OpenLoopError> {
    if grid.is_empty() {
        return Err(OpenLoopError::Policy("empty amplitude or frequency grid".into()));
    }
    let cfg = evaluator.config();
    let cells = grid.cells();
    for p in &cells {
        p.validate(cfg.action_cap, cfg.control_rate)?;
    }
    let config_hash = cfg.hash();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| OpenLoopError::Policy(e.to_string()))?;
    let scores: Vec<Result<PolicyScore, OpenLoopError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|p| {
                if let Some(s) = cache.and_then(|c| c.get(p)) {
                    return Ok(s);
                }
                let score = evaluator.eval_sinusoid(*p, options.reps)?;
                if let Some(c) = cache {
                    c.store(&CacheEntry {
                        config_hash: config_hash.clone(),
                        reps: options.reps,
                        policy: *p,
                        score: score.clone(),
                    })?;
                }
                Ok(score)
            })
            .collect()
    });
    let mut out = Vec::with_capacity(cells.len());
    for (index, (policy, score)) in cells.into_iter().zip(scores).enumerate() {
        out.push(SweepCell { index, policy, score: score? });
    }
    Ok(SweepTable { config_hash, task: cfg.task, reps: options.reps, cells: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_grid_has_124_cells() {
        let g = Grid::paper();
        assert_eq!(g.len(), 124);
        assert_eq!(g.frequencies.first(), Some(&0.0));
        assert_eq!(g.frequencies.last(), Some(&3.0));
        assert!(g.frequencies.windows(2).all(|w| ((w[1] - w[0]) - 0.1).abs() < 1e-12));
        let cells = g.cells();
        assert_eq!(cells[31], SinusoidPolicy::new(10.467, 0.0));
    }
}
