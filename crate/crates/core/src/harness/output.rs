// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.


//! CSV tables and the run summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::config::RunConfig;
use super::ensemble::{EnsembleStats, Prepared, ShadowTally, Tally};
use super::experiments::{boundary_deviation, escape_rate, EscapeRate, FitOutcome};
use crate::walks::PlanSummary;
use crate::{Error, Result};

pub const STATS_HEADER: &str = "n,trials,mean_d,q10,q50,q90,mean_pivots,p_le_rn,ci_lo,ci_hi";
pub const BOUNDARY_HEADER: &str = "n,proxy_p,ci_lo,ci_hi";

/// Bootstrap resamples behind the escape-rate interval.
pub const RESAMPLES: usize = 400;

/// One stats table for `r_grid[k]`.
pub fn write_stats_csv<W: Write>(stats: &EnsembleStats, k: usize, mut out: W) -> Result<()> {
    writeln!(out, "{STATS_HEADER}")?;
    for (row, p) in stats.rows.iter().zip(&stats.deviations[k]) {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.n, row.trials, row.mean_d, row.q10, row.q50, row.q90, row.mean_pivots, p.p, p.ci.lo, p.ci.hi
        )?;
    }
    Ok(())
}

pub fn write_boundary_csv<W: Write>(stats: &EnsembleStats, k: usize, mut out: W) -> Result<()> {
    let proxy = stats.proxy.as_ref().ok_or_else(|| Error::Config("no boundary proxy in this run".into()))?;
    writeln!(out, "{BOUNDARY_HEADER}")?;
    for p in &proxy[k] {
        writeln!(out, "{},{},{},{}", p.n, p.p, p.ci.lo, p.ci.hi)?;
    }
    Ok(())
}

/// A plot-ready two-column file.
pub fn write_series<W: Write>(header: &str, points: &[(usize, f64)], mut out: W) -> Result<()> {
    writeln!(out, "{header}")?;
    for (n, v) in points {
        writeln!(out, "{n},{v}")?;
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub trials: usize,
    pub config: RunConfig,
    pub plan: Option<PlanSummary>,
    pub schottky: Option<serde_json::Value>,
    pub decay_fits: Vec<FitOutcome>,
    pub boundary_fits: Vec<FitOutcome>,
    /// `2C₀ + 9δ`, when the boundary proxy was computed.
    pub boundary_gap_bound: Option<f64>,
    pub escape: EscapeRate,
    pub invariants: Tally,
    pub shadow: ShadowTally,
    /// `None` unless the run was paranoid.
    pub paranoid_ok: Option<bool>,
    pub files: Vec<String>,
}

fn create(dir: &Path, name: &str, files: &mut Vec<String>) -> Result<BufWriter<File>> {
    files.push(name.to_string());
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

/// Writes every table of a run into `dir` and returns the summary, which
/// is also written as `summary.json`. Nothing written depends on the
/// worker count.
pub fn write_run(dir: &Path, prepared: &Prepared, stats: &EnsembleStats) -> Result<RunSummary> {
    std::fs::create_dir_all(dir)?;
    let config = &prepared.config;
    let mut files = Vec::new();
    let mut decay_fits = Vec::new();
    let mut boundary_fits = Vec::new();
    for (k, &r) in stats.r_grid.iter().enumerate() {
        let mut f = create(dir, &format!("stats_r{r}.csv"), &mut files)?;
        write_stats_csv(stats, k, &mut f)?;
        f.flush()?;
        decay_fits.push(FitOutcome::of(r, &stats.deviations[k]));
        if stats.proxy.is_some() {
            let mut f = create(dir, &format!("boundary_r{r}.csv"), &mut files)?;
            write_boundary_csv(stats, k, &mut f)?;
            f.flush()?;
            boundary_fits.push(boundary_deviation(stats, r)?.fit);
        }
    }
    let escape = escape_rate(stats, RESAMPLES, config.seed)?;
    let mut f = create(dir, "mean_distance.csv", &mut files)?;
    let means: Vec<(usize, f64)> = stats.rows.iter().map(|r| (r.n, r.mean_d)).collect();
    write_series("n,mean_d", &means, &mut f)?;
    f.flush()?;
    if let Some(trace) = &stats.trace {
        let mut f = create(dir, "trace.csv", &mut files)?;
        trace.write_csv(&mut f)?;
        f.flush()?;
    }
    let schottky = match prepared.schottky_json()? {
        Some(text) => Some(serde_json::from_str(&text).map_err(|e| Error::Input(e.to_string()))?),
        None => None,
    };
    files.push("summary.json".into());
    let summary = RunSummary {
        seed: config.seed,
        trials: stats.trials,
        config: config.clone(),
        plan: prepared.plan_summary(),
        schottky,
        decay_fits,
        boundary_fits,
        boundary_gap_bound: stats.proxy.as_ref().map(|_| 2.0 * stats.c0 + 9.0 * stats.delta),
        escape,
        invariants: stats.tally,
        shadow: stats.shadow,
        paranoid_ok: config.paranoid.then(|| stats.tally.failures() == 0),
        files,
    };
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Input(e.to_string()))?;
    std::fs::write(dir.join("summary.json"), text + "\n")?;
    Ok(summary)
}
