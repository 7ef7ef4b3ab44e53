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


//! Independent trajectories, run in parallel and reduced in index order.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{BackendSpec, FreeWords, RunConfig, SchottkySpec};
use super::oracle::at_most_rn;
use super::stats::{quantile, SeriesPoint};
use crate::geometry::{gromov_product, shadow_contains, ShadowSpec};
use crate::pivotal::{EngineParams, InvariantReport, Model, PivotEngine, PivotTrace, FreePivotState};
use crate::schottky::SchottkySet;
use crate::seed::{stream, tag};
use crate::spaces::{FreeTree, Group, GroupWord, Letter, MoebiusIsometry, OrbitPath, OrbitSpace, Space};
use crate::walks::{
    alpha_max, decompose, schottky_source, AssemblerEvent, BlockAssembler, DecompositionPlan, DiscreteMeasure, Jump,
    PlanSummary, Scheduler, Slot, SlotRole, Truncation,
};
use crate::{Error, Result};

/// Trajectories handed to the pool at a time; reduction order is fixed by
/// trajectory index, never by completion order.
const CHUNK: usize = 512;

/// A configuration with its measures, Schottky set and plan built.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub config: RunConfig,
    pub backend: Backend,
}

#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Backend {
    Free { rank: usize, words: Vec<GroupWord> },
    Tree { tree: FreeTree, plan: DecompositionPlan<GroupWord>, params: EngineParams, model: Model },
    /// The plan runs over factor lists so that products of far-moving
    /// matrices are never collapsed into one matrix.
    Plane {
        space: OrbitSpace,
        set: SchottkySet<MoebiusIsometry>,
        plan: DecompositionPlan<OrbitPath>,
        params: EngineParams,
        model: Model,
    },
}

fn read_certificate(path: &str) -> Result<String> {
    std::fs::read_to_string(Path::new(path))
        .map_err(|e| Error::Config(format!("cannot read Schottky certificate {path}: {e}")))
}

fn tree_schottky(spec: &SchottkySpec, tree: &FreeTree) -> Result<SchottkySet<GroupWord>> {
    match spec {
        SchottkySpec::Generators { eta, c0, d } => SchottkySet::new(tree.generators(), *eta, *c0, *d),
        SchottkySpec::Words { words, eta, c0, d } => {
            let elements: Result<Vec<GroupWord>> = words.iter().map(|w| GroupWord::parse(w)).collect();
            SchottkySet::new(elements?, *eta, *c0, *d)
        }
        SchottkySpec::Certificate { path } => SchottkySet::from_json(&read_certificate(path)?),
        SchottkySpec::Matrices { .. } => Err(Error::Config("matrix Schottky sets need the halfplane backend".into())),
    }
}

fn plane_schottky(spec: &SchottkySpec) -> Result<SchottkySet<MoebiusIsometry>> {
    match spec {
        SchottkySpec::Matrices { matrices, eta, c0, d } => {
            let elements: Result<Vec<MoebiusIsometry>> =
                matrices.iter().map(|[a, b, c, e]| MoebiusIsometry::new(*a, *b, *c, *e)).collect();
            SchottkySet::new(elements?, *eta, *c0, *d)
        }
        SchottkySpec::Certificate { path } => SchottkySet::from_json(&read_certificate(path)?),
        _ => Err(Error::Config("the halfplane backend needs a matrix Schottky set".into())),
    }
}

/// Resolves `α` and builds the plan.
fn plan_for<G: Group>(config: &RunConfig, mu: &DiscreteMeasure<G>, set: &SchottkySet<G>) -> Result<DecompositionPlan<G>> {
    let dec = config.decomposition.as_ref().ok_or_else(|| Error::Config("missing decomposition".into()))?;
    let alpha = match (dec.alpha, dec.alpha_fraction) {
        (Some(a), _) => a,
        (None, fraction) => {
            let mu_s = DiscreteMeasure::uniform(set.elements.iter().cloned())?;
            let source = schottky_source(mu, &mu_s, dec.flavor)?;
            let amax = alpha_max(&mu.power(dec.n, Truncation::NONE)?, &source);
            if amax <= 0.0 {
                return Err(Error::Contract("the Schottky part is not inside the support of the power".into()));
            }
            amax * fraction.unwrap_or(1.0)
        }
    };
    decompose(mu, dec.n, set, alpha, dec.flavor)
}

fn free_words(spec: &FreeWords, rank: usize, seed: u64, count: usize) -> Result<Vec<GroupWord>> {
    let letters = 2 * rank as u16;
    match spec {
        FreeWords::Adversarial => {
            let mut rng = stream(seed, tag::ADVERSARY, &[0]);
            let mut reference = GroupWord::identity();
            let a = GroupWord::generator(0);
            Ok((0..count)
                .map(|_| {
                    let mut prefix = reference.clone();
                    prefix.push(Letter(rng.gen_range(0..letters)));
                    let w = if prefix.is_identity() { a.clone() } else { prefix.inverse() };
                    reference = prefix.concat(&w);
                    w
                })
                .collect())
        }
        FreeWords::Constant { word } => {
            let w = GroupWord::parse(word)?;
            if w.is_identity() || !FreeTree::new(rank)?.contains(&w) {
                return Err(Error::Config(format!("constant word {word:?} is trivial or outside the rank")));
            }
            Ok(vec![w; count])
        }
        FreeWords::Random { max_len } => {
            if *max_len == 0 {
                return Err(Error::Config("random words need max_len ≥ 1".into()));
            }
            let mut rng = stream(seed, tag::ADVERSARY, &[1]);
            Ok((0..count)
                .map(|_| loop {
                    let len = rng.gen_range(1..=*max_len);
                    let w = GroupWord::from_letters((0..len).map(|_| Letter(rng.gen_range(0..letters))));
                    if !w.is_identity() {
                        break w;
                    }
                })
                .collect())
        }
    }
}

impl Prepared {
    pub fn new(config: RunConfig) -> Result<Prepared> {
        config.validate()?;
        let horizon = config.n_ref.unwrap_or(config.n_max);
        let backend = match (&config.backend, config.engine.model()) {
            (BackendSpec::Tree { rank }, None) => {
                let spec = config.free_words.clone().unwrap_or(FreeWords::Adversarial);
                Backend::Free { rank: *rank, words: free_words(&spec, *rank, config.seed, horizon)? }
            }
            (BackendSpec::Tree { rank }, Some(model)) => {
                let tree = FreeTree::new(*rank)?;
                let mu = config.measure.tree_measure(*rank)?;
                if let Some((g, _)) = mu.atoms().iter().find(|(g, _)| !tree.contains(g)) {
                    return Err(Error::Config(format!("atom {g} is outside the rank-{rank} tree")));
                }
                let set = tree_schottky(config.schottky.as_ref().expect("validated"), &tree)?;
                let params = EngineParams::of_set(&set);
                params.check(0.0).map_err(|e| Error::Config(e.to_string()))?;
                Backend::Tree { tree, plan: plan_for(&config, &mu, &set)?, params, model }
            }
            (BackendSpec::Halfplane { delta }, Some(model)) => {
                let space = OrbitSpace::new(*delta, OrbitSpace::default().tol)?;
                let mu = config.measure.plane_measure()?;
                let set = plane_schottky(config.schottky.as_ref().expect("validated"))?;
                let params = EngineParams::of_set(&set);
                params.check(*delta).map_err(|e| Error::Config(e.to_string()))?;
                let lifted_mu = DiscreteMeasure::new(mu.atoms().iter().map(|(g, p)| (OrbitPath::lift(g), *p)))?;
                let lifted_set =
                    SchottkySet::new(set.elements.iter().map(OrbitPath::lift).collect(), set.eta, set.c, set.d)?;
                let plan = plan_for(&config, &lifted_mu, &lifted_set)?;
                Backend::Plane { space, set, plan, params, model }
            }
            (BackendSpec::Halfplane { .. }, None) => unreachable!("rejected by validation"),
        };
        Ok(Prepared { config, backend })
    }

    pub fn plan_summary(&self) -> Option<PlanSummary> {
        match &self.backend {
            Backend::Free { .. } => None,
            Backend::Tree { plan, .. } => Some(plan.summary()),
            Backend::Plane { plan, .. } => Some(plan.summary()),
        }
    }

    /// The Schottky set in its certificate form.
    pub fn schottky_json(&self) -> Result<Option<String>> {
        match &self.backend {
            Backend::Free { .. } => Ok(None),
            Backend::Tree { plan, .. } => plan.schottky.to_json().map(Some),
            Backend::Plane { set, .. } => set.to_json().map(Some),
        }
    }

    pub fn delta(&self) -> f64 {
        match &self.backend {
            Backend::Plane { space, .. } => space.delta(),
            _ => 0.0,
        }
    }

    pub fn c0(&self) -> f64 {
        match &self.backend {
            Backend::Free { .. } => 0.0,
            Backend::Tree { params, .. } | Backend::Plane { params, .. } => params.c0,
        }
    }

    /// Steps per recorded time.
    pub fn stride(&self) -> usize {
        match &self.backend {
            Backend::Free { .. } => 1,
            Backend::Tree { plan, .. } => plan.n,
            Backend::Plane { plan, .. } => plan.n,
        }
    }

    /// Recorded times `N, 2N, …` up to `n_max`.
    pub fn grid(&self) -> Vec<usize> {
        let s = self.stride();
        (1..=self.config.n_max / s).map(|i| i * s).collect()
    }

    pub fn words(&self) -> Option<&[GroupWord]> {
        match &self.backend {
            Backend::Free { words, .. } => Some(words),
            _ => None,
        }
    }
}

/// Per-run switches beyond the configuration.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Keep the pivotal trace of trajectory 0.
    pub trace: bool,
    /// Follow the pivot with this stack index and test shadow trapping.
    pub shadow_anchor: Option<usize>,
}

/// Invariant checks over committed steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub steps: u64,
    pub certificate_failures: u64,
    pub chain_failures: u64,
    pub origin_chain_failures: u64,
    pub bound_failures: u64,
    /// Free-engine stack invariant failures.
    pub stack_failures: u64,
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        self.steps += o.steps;
        self.certificate_failures += o.certificate_failures;
        self.chain_failures += o.chain_failures;
        self.origin_chain_failures += o.origin_chain_failures;
        self.bound_failures += o.bound_failures;
        self.stack_failures += o.stack_failures;
    }

    fn record(&mut self, r: &InvariantReport) {
        self.steps += 1;
        self.certificate_failures += u64::from(!r.certificates_ok);
        self.chain_failures += u64::from(r.chain.as_ref().is_some_and(|c| !c.ok));
        self.origin_chain_failures += u64::from(r.origin_chain.as_ref().is_some_and(|c| !c.ok));
        self.bound_failures += u64::from(!r.bound_ok);
    }

    pub fn failures(&self) -> u64 {
        self.certificate_failures
            + self.chain_failures
            + self.origin_chain_failures
            + self.bound_failures
            + self.stack_failures
    }
}

/// Shadow trapping of one anchor pivot over one trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ShadowTally {
    /// Trajectories whose stack reached the anchor index.
    pub anchored: u64,
    /// Anchored trajectories that never lost the anchor pivot.
    pub held: u64,
    /// Block endpoints `Z_n·o` tested in held trajectories. Positions inside
    /// an open block are not positions of the pivotal walk and are skipped.
    pub checked: u64,
    pub failures: u64,
}

impl ShadowTally {
    fn add(&mut self, o: &ShadowTally) {
        self.anchored += o.anchored;
        self.held += o.held;
        self.checked += o.checked;
        self.failures += o.failures;
    }
}

struct ShadowProbe<P> {
    index: usize,
    radius: f64,
    anchor: Option<(usize, P)>,
    lost: bool,
    checked: u64,
    failures: u64,
}

impl<P: Clone> ShadowProbe<P> {
    fn new(index: usize, radius: f64) -> ShadowProbe<P> {
        ShadowProbe { index, radius, anchor: None, lost: false, checked: 0, failures: 0 }
    }

    fn after_step<S: Space<Point = P>>(&mut self, engine: &PivotEngine<'_, S>) {
        if self.lost {
            return;
        }
        let recs = engine.stack().records();
        match &self.anchor {
            None => {
                if let Some(r) = recs.get(self.index) {
                    self.anchor = Some((r.time, r.pivot_point.clone()));
                }
            }
            Some((time, _)) => {
                if recs.get(self.index).is_none_or(|r| r.time != *time) {
                    self.lost = true;
                }
            }
        }
    }

    fn test<S: Space<Point = P>>(&mut self, space: &S, origin: &P, y: &P) {
        if let (Some((_, anchor)), false) = (&self.anchor, self.lost) {
            let spec = ShadowSpec { origin: origin.clone(), anchor: anchor.clone(), radius: self.radius };
            self.checked += 1;
            self.failures += u64::from(!shadow_contains(space, &spec, y));
        }
    }

    fn finish(&self) -> ShadowTally {
        let anchored = self.anchor.is_some();
        let held = anchored && !self.lost;
        ShadowTally {
            anchored: u64::from(anchored),
            held: u64::from(held),
            checked: if held { self.checked } else { 0 },
            failures: if held { self.failures } else { 0 },
        }
    }
}

/// What one trajectory contributes, at the recorded times.
#[derive(Clone, Debug, Default)]
pub struct TrajectoryRecord {
    pub distances: Vec<f64>,
    pub pivots: Vec<u32>,
    /// `(Z_n·o, Z_{n_ref}·o)_o`, when a reference time is configured.
    pub proxies: Vec<f64>,
    pub tally: Tally,
    pub shadow: ShadowTally,
    pub trace: Option<PivotTrace>,
}

fn lift_jump<G, I>(jump: &Jump<G>, lift: &impl Fn(&G) -> I) -> Jump<I> {
    match jump {
        Jump::Simple { a, b } => Jump::Simple { a: lift(a), b: lift(b) },
        Jump::Refined { a, b, r, c, d } => Jump::Refined { a: lift(a), b: lift(b), r: lift(r), c: lift(c), d: lift(d) },
    }
}

/// The slot's product as isometries of the engine's space, factor by factor
/// where the slot knows its factors.
fn lift_slot<G: Group, I: Group>(slot: &Slot<G>, lift: &impl Fn(&G) -> I) -> I {
    let fold = |parts: &[&G]| parts.iter().fold(I::identity(), |acc, g| acc.compose(&lift(g)));
    match &slot.role {
        SlotRole::Filler => lift(&slot.product),
        SlotRole::Opening(Jump::Simple { a, b }) => fold(&[a, b]),
        SlotRole::Opening(Jump::Refined { a, b, r, c, d }) => fold(&[a, b, r, c, d]),
        SlotRole::Gap(factors) => factors.iter().fold(I::identity(), |acc, g| acc.compose(&lift(g))),
        SlotRole::Closing { c, d } => fold(&[c, d]),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_model<S, G, L>(
    space: &S,
    plan: &DecompositionPlan<G>,
    lift: L,
    params: EngineParams,
    model: Model,
    config: &RunConfig,
    index: u64,
    opts: &RunOptions,
) -> Result<TrajectoryRecord>
where
    S: Space,
    G: Group,
    L: Fn(&G) -> S::Iso,
{
    let n = plan.n;
    let engine_slots = config.n_max / n;
    let total_slots = config.n_ref.map_or(engine_slots, |r| r / n);
    let origin = space.basepoint();
    let mut scheduler = Scheduler::new(plan, config.seed, index);
    let mut assembler = BlockAssembler::new(plan.flavor);
    let mut engine: Option<PivotEngine<'_, S>> = None;
    let mut probe = opts.shadow_anchor.map(|k| ShadowProbe::new(k, 2.0 * params.c0 + 6.0 * space.delta()));
    let mut out = TrajectoryRecord {
        distances: Vec::with_capacity(engine_slots),
        pivots: Vec::with_capacity(engine_slots),
        trace: opts.trace.then(PivotTrace::default),
        ..TrajectoryRecord::default()
    };
    let mut points = Vec::new();
    let mut z = S::Iso::identity();
    for i in 0..total_slots {
        let slot = scheduler.next_slot();
        z = z.compose(&lift_slot(&slot, &lift));
        let y = space.orbit(&z);
        if i >= engine_slots {
            continue;
        }
        match assembler.push(&slot) {
            AssemblerEvent::Nothing => {}
            AssemblerEvent::First { prefix } => {
                engine = Some(PivotEngine::new(space, params, model)?.with_prefix(&lift(&prefix)));
            }
            AssemblerEvent::Step(step) => {
                let e = engine.as_mut().expect("the first block creates the engine");
                e.step(&lift_jump(&step.jump, &lift), &lift(&step.w))?;
                if config.paranoid {
                    out.tally.record(&e.check_invariants(false));
                }
                if let Some(trace) = out.trace.as_mut() {
                    trace.rows.push(e.trace_row());
                }
                if let Some(p) = probe.as_mut() {
                    p.after_step(e);
                    p.test(space, &origin, e.current_point());
                }
            }
        }
        let pivots = match (&engine, assembler.pending()) {
            (Some(e), Some(jump)) => e.peek(&lift_jump(jump, &lift), &lift(&assembler.tail()))?.pivots,
            _ => 0,
        };
        out.distances.push(space.dist(&origin, &y));
        out.pivots.push(pivots as u32);
        if config.n_ref.is_some() {
            points.push(y);
        }
    }
    if let (Some(e), true) = (&engine, config.paranoid) {
        let full = e.check_invariants(true);
        if !full.ok {
            out.tally.record(&full);
        }
    }
    if config.n_ref.is_some() {
        let last = space.orbit(&z);
        out.proxies = points.iter().map(|p| gromov_product(space, p, &last, &origin)).collect();
    }
    out.shadow = probe.map(|p| p.finish()).unwrap_or_default();
    Ok(out)
}

fn run_free(rank: usize, words: &[GroupWord], config: &RunConfig, index: u64, opts: &RunOptions) -> Result<TrajectoryRecord> {
    let tree = FreeTree::new(rank)?;
    let horizon = config.n_ref.unwrap_or(config.n_max);
    let mut rng = stream(config.seed, tag::WALK, &[index]);
    let letters = 2 * rank as u16;
    let mut state = FreePivotState::new();
    let mut out = TrajectoryRecord {
        distances: Vec::with_capacity(config.n_max),
        pivots: Vec::with_capacity(config.n_max),
        trace: opts.trace.then(PivotTrace::default),
        ..TrajectoryRecord::default()
    };
    let mut points = Vec::new();
    for (n, w) in words.iter().enumerate().take(horizon) {
        let s = Letter(rng.gen_range(0..letters));
        state.step(s, w)?;
        if n >= config.n_max {
            continue;
        }
        if config.paranoid {
            out.tally.steps += 1;
            out.tally.stack_failures += u64::from(!state.check_invariants());
        }
        if let Some(trace) = out.trace.as_mut() {
            trace.rows.push(state.trace_row());
        }
        out.distances.push(state.current().len() as f64);
        out.pivots.push(state.pivots() as u32);
        if config.n_ref.is_some() {
            points.push(state.current().clone());
        }
    }
    if config.n_ref.is_some() {
        let o = tree.basepoint();
        out.proxies = points.iter().map(|p| gromov_product(&tree, p, state.current(), &o)).collect();
    }
    Ok(out)
}

impl Prepared {
    /// Runs trajectory `index` on its own streams.
    pub fn trajectory(&self, index: u64, opts: &RunOptions) -> Result<TrajectoryRecord> {
        let config = &self.config;
        match &self.backend {
            Backend::Free { rank, words } => run_free(*rank, words, config, index, opts),
            Backend::Tree { tree, plan, params, model } => {
                run_model(tree, plan, GroupWord::clone, *params, *model, config, index, opts)
            }
            Backend::Plane { space, plan, params, model, .. } => {
                run_model(space, plan, OrbitPath::clone, *params, *model, config, index, opts)
            }
        }
    }

    /// Runs every trajectory on a pool of `workers` threads (`0` for the
    /// default) and reduces the records in index order.
    pub fn run(&self, workers: usize, opts: &RunOptions) -> Result<EnsembleStats> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
        let grid = self.grid();
        let mut acc = Accumulator::new(&self.config, grid);
        let trials = self.config.trials;
        let mut start = 0;
        while start < trials {
            let end = (start + CHUNK).min(trials);
            let records: Vec<Result<TrajectoryRecord>> = pool.install(|| {
                (start..end)
                    .into_par_iter()
                    .map(|i| {
                        let o = RunOptions { trace: opts.trace && i == 0, ..opts.clone() };
                        self.trajectory(i as u64, &o)
                    })
                    .collect()
            });
            for record in records {
                acc.push(record?);
            }
            start = end;
        }
        Ok(acc.finish(self))
    }
}

struct Accumulator {
    grid: Vec<usize>,
    r_grid: Vec<f64>,
    trials: usize,
    sum_d: Vec<f64>,
    sum_d2: Vec<f64>,
    values: Vec<Vec<f64>>,
    sum_pivots: Vec<f64>,
    le: Vec<Vec<usize>>,
    proxy_le: Vec<Vec<usize>>,
    sum_proxy: Vec<f64>,
    has_proxy: bool,
    final_pivots: Vec<usize>,
    tally: Tally,
    shadow: ShadowTally,
    trace: Option<PivotTrace>,
}

impl Accumulator {
    fn new(config: &RunConfig, grid: Vec<usize>) -> Accumulator {
        let m = grid.len();
        let r = config.r_grid.len();
        Accumulator {
            grid,
            r_grid: config.r_grid.clone(),
            trials: 0,
            sum_d: vec![0.0; m],
            sum_d2: vec![0.0; m],
            values: (0..m).map(|_| Vec::with_capacity(config.trials)).collect(),
            sum_pivots: vec![0.0; m],
            le: vec![vec![0; m]; r],
            proxy_le: vec![vec![0; m]; r],
            sum_proxy: vec![0.0; m],
            has_proxy: config.n_ref.is_some(),
            final_pivots: Vec::with_capacity(config.trials),
            tally: Tally::default(),
            shadow: ShadowTally::default(),
            trace: None,
        }
    }

    fn push(&mut self, rec: TrajectoryRecord) {
        debug_assert_eq!(rec.distances.len(), self.grid.len());
        self.trials += 1;
        for (j, &d) in rec.distances.iter().enumerate() {
            self.sum_d[j] += d;
            self.sum_d2[j] += d * d;
            self.values[j].push(d);
            self.sum_pivots[j] += f64::from(rec.pivots[j]);
        }
        for (j, &p) in rec.proxies.iter().enumerate() {
            self.sum_proxy[j] += p;
        }
        for (k, &r) in self.r_grid.iter().enumerate() {
            for (j, &n) in self.grid.iter().enumerate() {
                self.le[k][j] += usize::from(at_most_rn(rec.distances[j], r, n));
                if let Some(&p) = rec.proxies.get(j) {
                    self.proxy_le[k][j] += usize::from(at_most_rn(p, r, n));
                }
            }
        }
        self.final_pivots.push(rec.pivots.last().map_or(0, |&a| a as usize));
        self.tally.add(&rec.tally);
        self.shadow.add(&rec.shadow);
        if self.trace.is_none() {
            self.trace = rec.trace;
        }
    }

    fn finish(mut self, prepared: &Prepared) -> EnsembleStats {
        let t = self.trials as f64;
        let final_distances = self.values.last().cloned().unwrap_or_default();
        let rows = self
            .grid
            .iter()
            .enumerate()
            .map(|(j, &n)| {
                let values = &mut self.values[j];
                values.sort_by(f64::total_cmp);
                let mean_d = self.sum_d[j] / t;
                let var = if self.trials > 1 { (self.sum_d2[j] - t * mean_d * mean_d).max(0.0) / (t - 1.0) } else { 0.0 };
                GridRow {
                    n,
                    trials: self.trials,
                    mean_d,
                    sd_d: var.sqrt(),
                    q10: quantile(values, 0.1),
                    q50: quantile(values, 0.5),
                    q90: quantile(values, 0.9),
                    mean_pivots: self.sum_pivots[j] / t,
                    mean_proxy: self.has_proxy.then(|| self.sum_proxy[j] / t),
                }
            })
            .collect();
        let series = |counts: &[Vec<usize>]| -> Vec<Vec<SeriesPoint>> {
            counts
                .iter()
                .map(|c| self.grid.iter().zip(c).map(|(&n, &k)| SeriesPoint::from_counts(n, k, self.trials)).collect())
                .collect()
        };
        let deviations = series(&self.le);
        let proxy = self.has_proxy.then(|| series(&self.proxy_le));
        EnsembleStats {
            trials: self.trials,
            stride: prepared.stride(),
            n_ref: prepared.config.n_ref,
            c0: prepared.c0(),
            delta: prepared.delta(),
            r_grid: self.r_grid.clone(),
            rows,
            deviations,
            proxy,
            final_distances,
            final_pivots: self.final_pivots,
            tally: self.tally,
            shadow: self.shadow,
            trace: self.trace,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub n: usize,
    pub trials: usize,
    pub mean_d: f64,
    pub sd_d: f64,
    pub q10: f64,
    pub q50: f64,
    pub q90: f64,
    pub mean_pivots: f64,
    pub mean_proxy: Option<f64>,
}

/// Aggregates over an ensemble at the recorded times.
#[derive(Clone, Debug, Serialize)]
pub struct EnsembleStats {
    pub trials: usize,
    pub stride: usize,
    pub n_ref: Option<usize>,
    pub c0: f64,
    pub delta: f64,
    pub r_grid: Vec<f64>,
    pub rows: Vec<GridRow>,
    /// `P̂(d(o, Z_n·o) ≤ r·n)`, one series per `r`.
    pub deviations: Vec<Vec<SeriesPoint>>,
    /// `P̂((Z_n·o, Z_{n_ref}·o)_o ≤ r·n)`, one series per `r`.
    pub proxy: Option<Vec<Vec<SeriesPoint>>>,
    #[serde(skip)]
    pub final_distances: Vec<f64>,
    #[serde(skip)]
    pub final_pivots: Vec<usize>,
    pub tally: Tally,
    pub shadow: ShadowTally,
    #[serde(skip)]
    pub trace: Option<PivotTrace>,
}

impl EnsembleStats {
    pub fn n_max(&self) -> usize {
        self.rows.last().map_or(0, |r| r.n)
    }

    /// Position of `r` in the grid.
    pub fn r_index(&self, r: f64) -> Result<usize> {
        self.r_grid
            .iter()
            .position(|x| (x - r).abs() <= 1e-12)
            .ok_or_else(|| Error::Config(format!("r = {r} is not in the r-grid {:?}", self.r_grid)))
    }
}

/// Builds and runs the configured ensemble.
pub fn run_ensemble(config: &RunConfig) -> Result<EnsembleStats> {
    Prepared::new(config.clone())?.run(config.workers, &RunOptions::default())
}
