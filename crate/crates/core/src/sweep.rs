//! Parameter sweeps: one simulation per (grid value, seed), run in
//! parallel.

use std::cmp::Ordering;
use std::io;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::config::{apply_preset, parse_value, RunConfig};
use crate::error::{Error, Result};
use crate::sim::run_simulation;

/// One swept key and its values.
///
/// Written `key=v1,v2,…` or `key=logspace:a:b:n` (n points from 10^a to
/// 10^b). The pseudo-key `preset` applies named threshold presets.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub key: String,
    pub values: Vec<String>,
}

impl FromStr for Grid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (key, rest) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("grid '{s}' is not key=values")))?;
        let key = key.trim().to_string();
        let rest = rest.trim();
        let values: Vec<String> = if let Some(spec) = rest.strip_prefix("logspace:") {
            let parts: Vec<&str> = spec.split(':').collect();
            let [a, b, n] = parts[..] else {
                return Err(Error::config(format!("logspace needs a:b:n, got '{spec}'")));
            };
            let num = |t: &str| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad logspace bound '{t}'")))
            };
            let (a, b) = (num(a)?, num(b)?);
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| Error::config(format!("bad logspace count '{n}'")))?;
            match n {
                0 => Vec::new(),
                1 => vec![10f64.powf(a).to_string()],
                _ => (0..n)
                    .map(|k| 10f64.powf(a + (b - a) * k as f64 / (n - 1) as f64).to_string())
                    .collect(),
            }
        } else {
            rest.split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect()
        };
        if key.is_empty() || values.is_empty() {
            return Err(Error::config(format!("grid '{s}' is empty")));
        }
        Ok(Grid { key, values })
    }
}

impl Grid {
    /// The config for one cell.
    pub fn apply(&self, base: &RunConfig, value: &str, seed: u64) -> Result<RunConfig> {
        let mut cfg = base.clone();
        cfg.seed = seed;
        if self.key == "preset" {
            apply_preset(&mut cfg, value)?;
        } else {
            cfg.set(&self.key, &parse_value(value))?;
        }
        Ok(cfg)
    }

    /// Values in emission order: numerically ascending when all values are
    /// numbers, otherwise as given.
    pub fn ordered_values(&self) -> Vec<String> {
        let mut v = self.values.clone();
        let nums: Option<Vec<f64>> = v.iter().map(|s| s.parse::<f64>().ok()).collect();
        if let Some(nums) = nums {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| nums[i].partial_cmp(&nums[j]).unwrap_or(Ordering::Equal));
            v = idx.into_iter().map(|i| self.values[i].clone()).collect();
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub algorithm: String,
    pub param_name: String,
    pub param_value: String,
    pub seed: u64,
    pub r_t: f64,
    pub c_t: u64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepFailure {
    pub param_value: String,
    pub seed: u64,
    pub message: String,
}

/// Mean and sample standard deviation over seeds for one grid value.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub param_value: String,
    pub runs: usize,
    pub mean_r: f64,
    pub std_r: f64,
    pub mean_c: f64,
    pub std_c: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub failures: Vec<SweepFailure>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub const SWEEP_HEADER: [&str; 7] = [
    "algorithm",
    "param_name",
    "param_value",
    "seed",
    "R_T",
    "C_T",
    "wall_ms",
];

impl SweepTable {
    /// Per grid value, in row order.
    pub fn summary(&self) -> Vec<CellSummary> {
        let mut out: Vec<CellSummary> = Vec::new();
        let mut k = 0;
        while k < self.rows.len() {
            let value = &self.rows[k].param_value;
            let end = self.rows[k..]
                .iter()
                .position(|r| &r.param_value != value)
                .map_or(self.rows.len(), |p| k + p);
            let rs: Vec<f64> = self.rows[k..end].iter().map(|r| r.r_t).collect();
            let cs: Vec<f64> = self.rows[k..end].iter().map(|r| r.c_t as f64).collect();
            let (mean_r, std_r) = mean_std(&rs);
            let (mean_c, std_c) = mean_std(&cs);
            out.push(CellSummary {
                param_value: value.clone(),
                runs: end - k,
                mean_r,
                std_r,
                mean_c,
                std_c,
            });
            k = end;
        }
        out
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        w.write_record(SWEEP_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.algorithm.clone(),
                r.param_name.clone(),
                r.param_value.clone(),
                r.seed.to_string(),
                r.r_t.to_string(),
                r.c_t.to_string(),
                r.wall_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(io::BufWriter::new(file)).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn read_csv<R: io::Read>(reader: R, path: &Path) -> Result<Self> {
        let perr = |line: u64, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| perr(1, e.to_string()))?.clone();
        if header.iter().ne(SWEEP_HEADER) {
            return Err(perr(1, format!("expected header {}", SWEEP_HEADER.join(","))));
        }
        let mut table = SweepTable::default();
        for (k, rec) in rdr.records().enumerate() {
            let line = k as u64 + 2;
            let rec = rec.map_err(|e| perr(line, e.to_string()))?;
            let bad = |col: &str| perr(line, format!("bad {col}"));
            table.rows.push(SweepRow {
                algorithm: rec[0].to_string(),
                param_name: rec[1].to_string(),
                param_value: rec[2].to_string(),
                seed: rec[3].parse().map_err(|_| bad("seed"))?,
                r_t: rec[4].parse().map_err(|_| bad("R_T"))?,
                c_t: rec[5].parse().map_err(|_| bad("C_T"))?,
                wall_ms: rec[6].parse().map_err(|_| bad("wall_ms"))?,
            });
        }
        Ok(table)
    }
}

/// Runs every (grid value, seed) cell; seeds are `base.seed + k` for
/// `k < seeds`. A failing cell is recorded in `failures` and the sweep goes
/// on. Rows come back sorted by (grid value, seed).
pub fn run_sweep(base: &RunConfig, grid: &Grid, seeds: u64) -> Result<SweepTable> {
    if grid.values.is_empty() {
        return Err(Error::config("sweep grid is empty"));
    }
    if seeds == 0 {
        return Err(Error::config("sweep needs at least one seed"));
    }
    let values = grid.ordered_values();
    let cells: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|v| (0..seeds).map(move |k| (v, k)))
        .collect();
    let results: Vec<(usize, u64, Result<SweepRow>)> = cells
        .par_iter()
        .map(|&(v, k)| {
            let value = &values[v];
            let seed = base.seed.wrapping_add(k);
            let run = grid.apply(base, value, seed).and_then(|cfg| {
                let trace = run_simulation(&cfg)?;
                Ok(SweepRow {
                    algorithm: cfg.algorithm.to_string(),
                    param_name: grid.key.clone(),
                    param_value: value.clone(),
                    seed,
                    r_t: trace.final_score(),
                    c_t: trace.final_comm(),
                    wall_ms: trace.wall_ms,
                })
            });
            (v, seed, run)
        })
        .collect();
    let mut table = SweepTable::default();
    for (v, seed, run) in results {
        match run {
            Ok(row) => table.rows.push(row),
            Err(e) => {
                log::warn!("sweep cell {}={} seed {seed} failed: {e}", grid.key, values[v]);
                table.failures.push(SweepFailure {
                    param_value: values[v].clone(),
                    seed,
                    message: e.to_string(),
                });
            }
        }
    }
    // par_iter().collect() keeps cell order, which is already (value, seed).
    Ok(table)
}
