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

//! Pivotal times of `w₀s₁w₁⋯sₙwₙ` in a hyperbolic space, where each `s_i`
//! is a Schottky jump `ab` (simple model) or `abrcd` (refined model).

use serde::{Deserialize, Serialize};

use super::trace::TraceRow;
use crate::geometry::{
    check_alignment, gromov_product, validate_chain, witness_extend, witness_extends, AlignParams, Chain, ChainReport,
    ChainShadowCertificate,
};
use crate::schottky::SchottkySet;
use crate::spaces::{Group, Space};
use crate::walks::Jump;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Simple,
    Refined,
}

/// Alignment slack `C₀` and Schottky separation `D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub c0: f64,
    pub d: f64,
}

impl EngineParams {
    pub fn new(c0: f64, d: f64) -> EngineParams {
        EngineParams { c0, d }
    }

    pub fn of_set<G>(set: &SchottkySet<G>) -> EngineParams {
        EngineParams { c0: set.c, d: set.d }
    }

    /// `20C₀ + 100δ + 1`.
    pub fn required_separation(c0: f64, delta: f64) -> f64 {
        20.0 * c0 + 100.0 * delta + 1.0
    }

    pub fn check(&self, delta: f64) -> Result<()> {
        if !(self.c0 >= 0.0 && self.d.is_finite()) {
            return Err(Error::Input(format!("invalid engine parameters {self:?}")));
        }
        let need = Self::required_separation(self.c0, delta);
        if self.d < need {
            return Err(Error::Contract(format!("separation D = {} below 20C₀ + 100δ + 1 = {need}", self.d)));
        }
        Ok(())
    }

    /// Parameters of the cross-pivot chain, `(2C₀ + 3δ, D − 2C₀ − 3δ)`.
    pub fn pivot_chain(&self, delta: f64) -> AlignParams {
        AlignParams { c: 2.0 * self.c0 + 3.0 * delta, d: self.d - 2.0 * self.c0 - 3.0 * delta, delta }
    }

    /// The same chain started at the basepoint, `(2C₀ + 4δ, D − 2C₀ − 3δ)`.
    pub fn origin_chain(&self, delta: f64) -> AlignParams {
        AlignParams { c: 2.0 * self.c0 + 4.0 * delta, ..self.pivot_chain(delta) }
    }
}

/// Points visited during one step: `y⁻`, then one point per factor of the
/// jump, then `y_{n+1}⁻` after `w`.
#[derive(Clone, Debug)]
pub struct MarkerSet<P> {
    pub minus: P,
    /// `y, y⁺` (simple) or `y⁽¹⁾, …, y⁽⁵⁾` (refined).
    pub points: Vec<P>,
    pub next_minus: P,
}

impl<P> MarkerSet<P> {
    /// `y_n`, which is `y⁽⁴⁾` in the refined model.
    pub fn pivot_point(&self) -> &P {
        &self.points[self.points.len() - 2]
    }

    /// `y_n⁺`.
    pub fn pivot_dir(&self) -> &P {
        &self.points[self.points.len() - 1]
    }

    /// The point after `y⁻` across a Schottky jump: `y` or `y⁽¹⁾`.
    pub fn mid(&self) -> &P {
        &self.points[0]
    }
}

#[derive(Clone, Debug)]
pub struct PivotRecord<P> {
    pub time: usize,
    pub minus: P,
    pub mid: P,
    pub pivot_point: P,
    pub pivot_dir: P,
    /// `d(o, r·o)`; zero in the simple model.
    pub rho_jump_length: f64,
    /// Sum of `rho_jump_length` over this record and those below it.
    pub rho_cumulative: f64,
    /// Membership of the current endpoint (for the top record) or of the
    /// next record's `y⁻` in `CS_{pivot_point}(pivot_dir; C₀ + δ)`.
    pub certificate: ChainShadowCertificate<P>,
}

#[derive(Clone, Debug)]
pub struct PivotalStack<P> {
    model: Model,
    records: Vec<PivotRecord<P>>,
}

impl<P: Clone> PivotalStack<P> {
    pub fn new(model: Model) -> PivotalStack<P> {
        PivotalStack { model, records: Vec::new() }
    }

    pub fn model(&self) -> Model {
        self.model
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PivotRecord<P>] {
        &self.records
    }

    pub fn top(&self) -> Option<&PivotRecord<P>> {
        self.records.last()
    }

    pub fn times(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.time).collect()
    }

    /// `|P_n|` in the simple model, `Σ d(o, r_k·o)` over the stack in the
    /// refined one.
    pub fn pivot_lower_bound(&self) -> f64 {
        match self.model {
            Model::Simple => self.records.len() as f64,
            Model::Refined => self.records.last().map_or(0.0, |r| r.rho_cumulative),
        }
    }

    /// `y_k` for the `index`-th surviving record.
    pub fn anchor_point(&self, index: usize) -> Result<&P> {
        self.records
            .get(index)
            .map(|r| &r.pivot_point)
            .ok_or(Error::IndexOutOfRange { index, len: self.records.len() })
    }
}

/// Outcome of [`PivotEngine::peek`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peek {
    pub pivotal: bool,
    pub pivots: usize,
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct StepOutcome<P> {
    pub time: usize,
    pub pivotal: bool,
    pub popped: usize,
    /// Index of the record whose certificate absorbed `y_{n+1}⁻` when the
    /// step was not pivotal and the stack did not empty.
    pub extended: Option<usize>,
    pub markers: MarkerSet<P>,
}

/// Result of revalidating a stack snapshot.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantReport {
    pub certificates_ok: bool,
    /// The cross-pivot chain `y_{k₁}⁻, y_{k₁}, …, y_{k_p}, y_{n+1}⁻`.
    pub chain: Option<ChainReport>,
    /// The same chain with `y_{k₁}⁻` replaced by `o`.
    pub origin_chain: Option<ChainReport>,
    pub distance: f64,
    pub bound: f64,
    pub bound_ok: bool,
    pub ok: bool,
}

/// The simple and refined pivotal engines.
pub struct PivotEngine<'a, S: Space> {
    space: &'a S,
    params: EngineParams,
    stack: PivotalStack<S::Point>,
    origin: S::Point,
    /// `w₀s₁⋯s_n w_n`.
    position: S::Iso,
    /// `y_{n+1}⁻`.
    current: S::Point,
    time: usize,
    paranoid: bool,
}

impl<'a, S: Space> PivotEngine<'a, S> {
    pub fn new(space: &'a S, params: EngineParams, model: Model) -> Result<PivotEngine<'a, S>> {
        params.check(space.delta())?;
        let origin = space.basepoint();
        Ok(PivotEngine {
            space,
            params,
            stack: PivotalStack::new(model),
            current: origin.clone(),
            origin,
            position: S::Iso::identity(),
            time: 0,
            paranoid: false,
        })
    }

    /// Starts the walk at `w₀` instead of the identity.
    pub fn with_prefix(mut self, w0: &S::Iso) -> Self {
        assert_eq!(self.time, 0, "the prefix must be set before the first step");
        self.position = w0.clone();
        self.current = self.space.orbit(w0);
        self
    }

    /// Revalidate the stack after every step and fail on any violation.
    pub fn paranoid(mut self, on: bool) -> Self {
        self.paranoid = on;
        self
    }

    pub fn model(&self) -> Model {
        self.stack.model
    }

    pub fn params(&self) -> EngineParams {
        self.params
    }

    pub fn stack(&self) -> &PivotalStack<S::Point> {
        &self.stack
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn position(&self) -> &S::Iso {
        &self.position
    }

    /// `y_{n+1}⁻`.
    pub fn current_point(&self) -> &S::Point {
        &self.current
    }

    pub fn distance(&self) -> f64 {
        self.space.dist(&self.origin, &self.current)
    }

    pub fn pivot_lower_bound(&self) -> f64 {
        self.stack.pivot_lower_bound()
    }

    pub fn anchor_point(&self, index: usize) -> Result<&S::Point> {
        self.stack.anchor_point(index)
    }

    pub fn trace_row(&self) -> TraceRow {
        TraceRow {
            n: self.time,
            pivots: self.stack.len(),
            pivot_times: self.stack.times(),
            distance: self.distance(),
            bound: self.pivot_lower_bound(),
        }
    }

    pub fn simple_step(&mut self, a: &S::Iso, b: &S::Iso, w: &S::Iso) -> Result<StepOutcome<S::Point>> {
        self.step(&Jump::Simple { a: a.clone(), b: b.clone() }, w)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn refined_step(
        &mut self,
        a: &S::Iso,
        b: &S::Iso,
        r: &S::Iso,
        c: &S::Iso,
        d: &S::Iso,
        w: &S::Iso,
    ) -> Result<StepOutcome<S::Point>> {
        let jump = Jump::Refined { a: a.clone(), b: b.clone(), r: r.clone(), c: c.clone(), d: d.clone() };
        self.step(&jump, w)
    }

    fn check_separation(&self, g: &S::Iso, name: &str) -> Result<()> {
        let moved = self.space.displacement(g);
        if moved < self.params.d - self.space.tolerance() * self.params.d.max(1.0) {
            return Err(Error::Contract(format!("Schottky factor {name} moves the basepoint by {moved} < D = {}", self.params.d)));
        }
        Ok(())
    }

    /// Markers of a step from the current position, with the position after
    /// `w`.
    fn markers(&self, jump: &Jump<S::Iso>, w: &S::Iso) -> Result<(MarkerSet<S::Point>, S::Iso)> {
        let factors: Vec<&S::Iso> = match (self.stack.model, jump) {
            (Model::Simple, Jump::Simple { a, b }) => {
                self.check_separation(a, "a")?;
                self.check_separation(b, "b")?;
                vec![a, b]
            }
            (Model::Refined, Jump::Refined { a, b, r, c, d }) => {
                for (g, name) in [(a, "a"), (b, "b"), (c, "c"), (d, "d")] {
                    self.check_separation(g, name)?;
                }
                vec![a, b, r, c, d]
            }
            (model, _) => return Err(Error::Contract(format!("jump shape does not match the {model:?} engine"))),
        };
        let space = self.space;
        let mut g = self.position.clone();
        let mut points = Vec::with_capacity(factors.len());
        for f in &factors {
            g = g.compose(f);
            points.push(space.orbit(&g));
        }
        let next_position = g.compose(w);
        let markers = MarkerSet { minus: self.current.clone(), points, next_minus: space.orbit(&next_position) };
        Ok((markers, next_position))
    }

    /// Pivot count and lower bound the stack would have after `step(jump, w)`,
    /// leaving the engine untouched.
    pub fn peek(&self, jump: &Jump<S::Iso>, w: &S::Iso) -> Result<Peek> {
        let (markers, _) = self.markers(jump, w)?;
        let recs = &self.stack.records;
        if self.local_condition(&markers) {
            let rho = match jump {
                Jump::Refined { r, .. } => self.space.displacement(r),
                Jump::Simple { .. } => 0.0,
            };
            let pivots = recs.len() + 1;
            let bound = match self.stack.model {
                Model::Simple => pivots as f64,
                Model::Refined => recs.last().map_or(0.0, |r| r.rho_cumulative) + rho,
            };
            return Ok(Peek { pivotal: true, pivots, bound });
        }
        let mut through = markers.mid();
        for (i, rec) in recs.iter().enumerate().rev() {
            if witness_extends(self.space, &rec.certificate, &markers.next_minus, through, self.params.c0) {
                let bound = match self.stack.model {
                    Model::Simple => (i + 1) as f64,
                    Model::Refined => rec.rho_cumulative,
                };
                return Ok(Peek { pivotal: false, pivots: i + 1, bound });
            }
            through = &rec.mid;
        }
        Ok(Peek { pivotal: false, pivots: 0, bound: 0.0 })
    }

    /// One step of the walk: markers, local test, then push or backtrack.
    pub fn step(&mut self, jump: &Jump<S::Iso>, w: &S::Iso) -> Result<StepOutcome<S::Point>> {
        let (markers, next_position) = self.markers(jump, w)?;
        let n = self.time + 1;
        let space = self.space;

        let pivotal = self.local_condition(&markers);
        let mut popped = 0;
        let mut extended = None;
        if pivotal {
            let slack = self.params.c0 + space.delta();
            let certificate = ChainShadowCertificate::fresh(
                space,
                markers.pivot_point().clone(),
                markers.pivot_dir().clone(),
                markers.next_minus.clone(),
                slack,
            )
            .ok_or_else(|| Error::Invariant(format!("step {n}: fresh certificate rejected after a passing local test")))?;
            let rho = match jump {
                Jump::Refined { r, .. } => space.displacement(r),
                Jump::Simple { .. } => 0.0,
            };
            let below = self.stack.records.last().map_or(0.0, |r| r.rho_cumulative);
            self.stack.records.push(PivotRecord {
                time: n,
                minus: markers.minus.clone(),
                mid: markers.mid().clone(),
                pivot_point: markers.pivot_point().clone(),
                pivot_dir: markers.pivot_dir().clone(),
                rho_jump_length: rho,
                rho_cumulative: below + rho,
                certificate,
            });
        } else {
            // The top certificate ends at y_n⁻ and is extended through the
            // current mid marker; a popped record hands over its own y⁻ and
            // mid marker to the record below it.
            let mut through = markers.mid().clone();
            while let Some(top) = self.stack.records.last_mut() {
                if let Some(cert) = witness_extend(space, &top.certificate, &markers.next_minus, &through, self.params.c0) {
                    top.certificate = cert;
                    extended = Some(self.stack.records.len() - 1);
                    break;
                }
                let gone = self.stack.records.pop().expect("nonempty");
                through = gone.mid;
                popped += 1;
            }
        }

        self.position = next_position;
        self.current = markers.next_minus.clone();
        self.time = n;
        if self.paranoid {
            let report = self.check_invariants(false);
            if !report.ok {
                return Err(Error::Invariant(format!("step {n}: {report:?}")));
            }
        }
        Ok(StepOutcome { time: n, pivotal, popped, extended, markers })
    }

    /// Consecutive alignment of `y_k, y⁻, …, y⁺, y_{n+1}⁻` at slack `C₀`, and
    /// in the refined model also `(y⁽¹⁾, y⁽⁴⁾)_{y⁽³⁾} ≤ C₀`.
    fn local_condition(&self, m: &MarkerSet<S::Point>) -> bool {
        let space = self.space;
        let c0 = self.params.c0;
        let prev = self.stack.top().map_or(&self.origin, |r| &r.pivot_point);
        let mut seq = Vec::with_capacity(m.points.len() + 3);
        seq.push(prev.clone());
        seq.push(m.minus.clone());
        seq.extend(m.points.iter().cloned());
        seq.push(m.next_minus.clone());
        if !check_alignment(space, &seq, c0) {
            return false;
        }
        match self.stack.model {
            Model::Simple => true,
            Model::Refined => gromov_product(space, &m.points[0], &m.points[3], &m.points[2]) <= c0 + space.tolerance(),
        }
    }

    /// Cross-pivot chain from record `from` on, ending at `y_{n+1}⁻`. With
    /// `origin` and `from == 0` the first point is `o`.
    fn cross_pivot_points(&self, from: usize, origin: bool) -> Vec<S::Point> {
        let recs = &self.stack.records;
        let mut pts = Vec::with_capacity(2 * (recs.len() - from) + 1);
        for (i, r) in recs.iter().enumerate().skip(from) {
            if i == 0 && origin {
                pts.push(self.origin.clone());
            } else {
                pts.push(r.minus.clone());
            }
            pts.push(r.pivot_point.clone());
        }
        pts.push(self.current.clone());
        pts
    }

    /// Revalidates the stack. With `full` every certificate and both chains
    /// are checked from scratch; otherwise only what the last step could
    /// have changed: the top certificate's last link and the last two
    /// records of each chain.
    pub fn check_invariants(&self, full: bool) -> InvariantReport {
        let space = self.space;
        let eps = space.tolerance();
        let delta = space.delta();
        let recs = &self.stack.records;

        let same = |p: &S::Point, q: &S::Point| space.dist(p, q) <= eps.max(1e-12) * 16.0;
        let mut certificates_ok = recs.windows(2).all(|w| w[0].time < w[1].time);
        if let Some(top) = recs.last() {
            certificates_ok &= same(top.certificate.tip(), &self.current);
        }
        let check_cert = |r: &PivotRecord<S::Point>| {
            if full {
                r.certificate.validate(space)
            } else {
                let pts = &r.certificate.witness.points;
                let tail = Chain::new(pts[pts.len().saturating_sub(3)..].to_vec(), r.certificate.witness.params);
                let first = gromov_product(space, &pts[0], &pts[1], &r.certificate.direction);
                validate_chain(space, &tail).ok && first <= r.certificate.slack + eps
            }
        };
        if full {
            for (i, r) in recs.iter().enumerate() {
                certificates_ok &= check_cert(r);
                if let Some(next) = recs.get(i + 1) {
                    certificates_ok &= same(r.certificate.tip(), &next.minus);
                }
                certificates_ok &= same(&r.certificate.base, &r.pivot_point);
            }
        } else if let Some(top) = recs.last() {
            certificates_ok &= check_cert(top);
        }

        let (chain, origin_chain) = if recs.is_empty() {
            (None, None)
        } else {
            let from = if full { 0 } else { recs.len().saturating_sub(2) };
            let plain = Chain::new(self.cross_pivot_points(from, false), self.params.pivot_chain(delta));
            let with_o = Chain::new(self.cross_pivot_points(from, true), self.params.origin_chain(delta));
            (Some(validate_chain(space, &plain)), Some(validate_chain(space, &with_o)))
        };

        let distance = self.distance();
        let bound = self.pivot_lower_bound();
        let bound_ok = distance >= bound - eps * bound.max(1.0);
        let ok = certificates_ok
            && bound_ok
            && chain.as_ref().is_none_or(|c| c.ok)
            && origin_chain.as_ref().is_none_or(|c| c.ok);
        InvariantReport { certificates_ok, chain, origin_chain, distance, bound, bound_ok, ok }
    }
}
