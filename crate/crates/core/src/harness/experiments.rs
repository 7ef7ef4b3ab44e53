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


//! Experiment drivers on top of ensembles.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{MeasureSpec, RunConfig};
use super::ensemble::{EnsembleStats, Prepared, RunOptions};
use super::stats::{bootstrap_mean, decay_fit, DecayFit, Interval, SeriesPoint};
use crate::seed::{stream, tag};
use crate::spaces::{Group, Space};
use crate::walks::DiscreteMeasure;
use crate::{Error, Result};

/// `P̂(d(o, Z_n·o) ≤ r·n)` with Wilson intervals; zero-event points are
/// marked censored.
pub fn deviation_curve(stats: &EnsembleStats, r: f64) -> Result<Vec<SeriesPoint>> {
    Ok(stats.deviations[stats.r_index(r)?].clone())
}

/// A decay fit, or the reason it could not be made.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitOutcome {
    pub r: f64,
    pub fit: Option<DecayFit>,
    pub error: Option<String>,
}

impl FitOutcome {
    pub fn of(r: f64, series: &[SeriesPoint]) -> FitOutcome {
        match decay_fit(r, series) {
            Ok(fit) => FitOutcome { r, fit: Some(fit), error: None },
            Err(e) => FitOutcome { r, fit: None, error: Some(e.to_string()) },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EscapeRate {
    pub n: usize,
    pub ell_hat: f64,
    /// Percentile bootstrap interval for `E d(o, Z_n·o)/n`.
    pub ci: Interval,
    /// `(n, E d/n)` over the recorded times.
    pub subadditive: Vec<(usize, f64)>,
    /// Whether `E d/n` never rises by more than two standard errors between
    /// recorded times. Diagnostic only.
    pub non_increasing: bool,
}

pub fn escape_rate(stats: &EnsembleStats, resamples: usize, seed: u64) -> Result<EscapeRate> {
    let n = stats.n_max();
    if n == 0 || stats.final_distances.is_empty() {
        return Err(Error::Input("empty ensemble".into()));
    }
    let scaled: Vec<f64> = stats.final_distances.iter().map(|d| d / n as f64).collect();
    let (ell_hat, ci) = bootstrap_mean(&scaled, resamples, seed);
    let subadditive: Vec<(usize, f64)> = stats.rows.iter().map(|r| (r.n, r.mean_d / r.n as f64)).collect();
    let se = |i: usize| {
        let r = &stats.rows[i];
        r.sd_d / (r.trials as f64).sqrt() / r.n as f64
    };
    let non_increasing = (1..stats.rows.len()).all(|i| subadditive[i].1 <= subadditive[i - 1].1 + 2.0 * (se(i) + se(i - 1)));
    Ok(EscapeRate { n, ell_hat, ci, subadditive, non_increasing })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryDeviation {
    pub r: f64,
    pub n_ref: usize,
    pub series: Vec<SeriesPoint>,
    pub fit: FitOutcome,
    /// Additive gap `2C₀ + 9δ` between the proxy and the true boundary
    /// product.
    pub gap_bound: f64,
}

/// Deviation series and fit for `(Z_n·o, Z_{n_ref}·o)_o ≤ r·n`.
pub fn boundary_deviation(stats: &EnsembleStats, r: f64) -> Result<BoundaryDeviation> {
    let (Some(proxy), Some(n_ref)) = (&stats.proxy, stats.n_ref) else {
        return Err(Error::Config("the boundary proxy needs n_ref".into()));
    };
    let series = proxy[stats.r_index(r)?].clone();
    let fit = FitOutcome::of(r, &series);
    Ok(BoundaryDeviation { r, n_ref, series, fit, gap_bound: 2.0 * stats.c0 + 9.0 * stats.delta })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackoffRow {
    pub label: String,
    /// `d(o, g·o)`.
    pub g_distance: f64,
    /// Smallest `C` with `inf_n d(o, gZ_n·o) − d(o, g·o) ≥ −C` on at least a
    /// `1 − ε` fraction of paths.
    pub c_g: f64,
    pub paths: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BackoffTable {
    pub epsilon: f64,
    pub horizon: usize,
    pub rows: Vec<BackoffRow>,
    pub max_c: f64,
}

/// Runs `paths` walks of length `horizon` from the `SAMPLER` streams of
/// `seed` and measures how far each translate `g·Z_n·o` falls back towards
/// `o`.
#[allow(clippy::too_many_arguments)]
pub fn uniform_backoff_experiment<S, G, L>(
    space: &S,
    mu: &DiscreteMeasure<G>,
    lift: L,
    family: &[(String, S::Iso)],
    epsilon: f64,
    horizon: usize,
    paths: usize,
    seed: u64,
) -> Result<BackoffTable>
where
    S: Space,
    G: Group,
    L: Fn(&G) -> S::Iso + Sync,
{
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Input(format!("epsilon = {epsilon} is not in [0, 1]")));
    }
    if paths == 0 || family.is_empty() {
        return Err(Error::Input("need at least one path and one g".into()));
    }
    let o = space.basepoint();
    let starts: Vec<S::Point> = family.iter().map(|(_, g)| space.act(g, &o)).collect();
    let base: Vec<f64> = starts.iter().map(|p| space.dist(&o, p)).collect();
    // Per path, the largest fall-back `max_n (d(o, g·o) − d(o, gZ_n·o))` for each g.
    let falls: Vec<Vec<f64>> = (0..paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, tag::SAMPLER, &[i as u64]);
            let mut z = S::Iso::identity();
            let mut worst = vec![0.0f64; family.len()];
            for _ in 0..horizon {
                z = z.compose(&lift(mu.sample(&mut rng)));
                let y = space.orbit(&z);
                for (k, (_, g)) in family.iter().enumerate() {
                    let fall = base[k] - space.dist(&o, &space.act(g, &y));
                    worst[k] = worst[k].max(fall);
                }
            }
            worst
        })
        .collect();
    let need = ((1.0 - epsilon) * paths as f64).ceil() as usize;
    let rows: Vec<BackoffRow> = family
        .iter()
        .enumerate()
        .map(|(k, (label, _))| {
            let mut v: Vec<f64> = falls.iter().map(|w| w[k]).collect();
            v.sort_by(f64::total_cmp);
            let c_g = if need == 0 { 0.0 } else { v[need.min(paths) - 1].max(0.0) };
            BackoffRow { label: label.clone(), g_distance: base[k], c_g, paths }
        })
        .collect();
    let max_c = rows.iter().map(|r| r.c_g).fold(0.0, f64::max);
    Ok(BackoffTable { epsilon, horizon, rows, max_c })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityRow {
    pub label: String,
    /// `max_{g ∈ K} (μ(g) − μ'(g))` over the support `K` of the base measure.
    pub deficit: f64,
    pub alpha_max: Option<f64>,
    pub escape: Option<EscapeRate>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityTable {
    pub r: f64,
    pub epsilon: f64,
    pub rows: Vec<ContinuityRow>,
    /// Smallest `ell_hat` over the rows that ran.
    pub min_ell: f64,
    /// Every row that ran has an interval reaching `r`.
    pub pass: bool,
}

fn measure_deficit(base: &RunConfig, other: &MeasureSpec) -> Result<f64> {
    let rank = match base.backend {
        super::config::BackendSpec::Tree { rank } => Some(rank),
        super::config::BackendSpec::Halfplane { .. } => None,
    };
    match rank {
        Some(rank) => {
            let mu = base.measure.tree_measure(rank)?;
            let nu = other.tree_measure(rank)?;
            Ok(mu.atoms().iter().map(|(g, p)| p - nu.prob(g)).fold(0.0, f64::max))
        }
        None => {
            let mu = base.measure.plane_measure()?;
            let nu = other.plane_measure()?;
            Ok(mu.atoms().iter().map(|(g, p)| p - nu.prob(g)).fold(0.0, f64::max))
        }
    }
}

/// Escape rates of perturbed measures decomposed against the base
/// configuration's Schottky set.
pub fn continuity_sweep(
    base: &RunConfig,
    perturbations: &[(String, MeasureSpec)],
    r: f64,
    epsilon: f64,
    resamples: usize,
) -> Result<ContinuityTable> {
    let mut rows = Vec::with_capacity(perturbations.len());
    for (label, spec) in perturbations {
        let deficit = measure_deficit(base, spec)?;
        let mut row = ContinuityRow { label: label.clone(), deficit, alpha_max: None, escape: None, error: None };
        if deficit > epsilon + 1e-12 {
            row.error = Some(format!("deficit {deficit} on the base support exceeds epsilon {epsilon}"));
            rows.push(row);
            continue;
        }
        let mut config = base.clone();
        config.measure = spec.clone();
        match Prepared::new(config).and_then(|p| {
            let amax = p.plan_summary().map(|s| s.alpha_max);
            p.run(base.workers, &RunOptions::default()).map(|s| (amax, s))
        }) {
            Ok((amax, stats)) => {
                row.alpha_max = amax;
                row.escape = Some(escape_rate(&stats, resamples, base.seed)?);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        rows.push(row);
    }
    let ran: Vec<&EscapeRate> = rows.iter().filter_map(|r| r.escape.as_ref()).collect();
    let min_ell = ran.iter().map(|e| e.ell_hat).fold(f64::INFINITY, f64::min);
    let pass = !ran.is_empty() && ran.iter().all(|e| e.ci.hi >= r);
    Ok(ContinuityTable { r, epsilon, rows, min_ell, pass })
}
