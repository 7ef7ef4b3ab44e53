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


//! Schottky sets: verification and construction.
//!
//! A finite set `S` is `(η, C, D)`-Schottky when every element moves the
//! basepoint by at least `D` and, for all `x, y`, at most a fraction `η` of
//! the elements `s` (and separately of the inverses) have `(x, s·y)_o > C`.
//! The universal quantifier is replaced by a [`PairSampler`]: exhaustive
//! balls in the tree, stratified random pairs in the half-plane.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::geometry::gromov_product;
use crate::seed::{stream, tag};
use crate::spaces::{BoundaryPoint, BoundarySpace, FreeTree, Group, HalfPlane, MoebiusIsometry, Space, UpperHalfPoint};
use crate::walks::DiscreteMeasure;
use crate::{Error, Result};

/// Maximum number of violating pairs kept in a report.
const MAX_WITNESSES: usize = 16;

/// How a ping-pong set was assembled from `u` and `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingPongInfo {
    /// Exponent applied to `u` and `v` before forming products.
    pub n: usize,
    /// Length of the products.
    pub m: usize,
    /// Final power applied to every product.
    pub p: usize,
    /// Neighbourhood depth used for the disjointness argument.
    pub k: f64,
    /// Largest Gromov product between distinct fixed points of the products.
    pub boundary_separation: f64,
    /// One word over `{u, v}` per element, in element order.
    pub words: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchottkySet<G> {
    pub elements: Vec<G>,
    pub eta: f64,
    pub c: f64,
    pub d: f64,
    /// Support-atom indices whose product gives each element, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expressions: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<PingPongInfo>,
    /// The verification that certified the set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<VerificationReport>,
}

impl<G: Group> SchottkySet<G> {
    pub fn new(elements: Vec<G>, eta: f64, c: f64, d: f64) -> Result<SchottkySet<G>> {
        if elements.is_empty() {
            return Err(Error::Input("a Schottky set needs at least one element".into()));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(Error::Input(format!("eta = {eta} is not in (0, 1)")));
        }
        if !(c >= 0.0 && d >= 0.0) {
            return Err(Error::Input("C and D must be nonnegative".into()));
        }
        Ok(SchottkySet { elements, eta, c, d, expressions: Vec::new(), construction: None, report: None })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn inverses(&self) -> Vec<G> {
        self.elements.iter().map(Group::inverse).collect()
    }

    /// The same set re-expressed in another isometry type.
    pub fn map<H: Group>(&self, f: impl Fn(&G) -> H) -> SchottkySet<H> {
        SchottkySet {
            elements: self.elements.iter().map(f).collect(),
            eta: self.eta,
            c: self.c,
            d: self.d,
            expressions: self.expressions.clone(),
            construction: self.construction.clone(),
            report: self.report.clone(),
        }
    }

    /// The same elements certified at different parameters.
    pub fn with_params(&self, eta: f64, c: f64, d: f64) -> Result<SchottkySet<G>> {
        let mut out = SchottkySet::new(self.elements.clone(), eta, c, d)?;
        out.expressions = self.expressions.clone();
        out.construction = self.construction.clone();
        Ok(out)
    }
}

impl<G: Group + Serialize + DeserializeOwned> SchottkySet<G> {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<SchottkySet<G>> {
        let set: SchottkySet<G> = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        SchottkySet::new(set.elements.clone(), set.eta, set.c, set.d)?;
        Ok(set)
    }
}

/// A sampled pair `(x, y)` at which too many elements misbehave.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViolationWitness {
    pub x: String,
    pub y: String,
    /// True when the violation is for the inverses.
    pub inverse: bool,
    pub bad_elements: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    /// Number of `(x, y)` pairs checked.
    pub trials: usize,
    pub sampler: String,
    pub eta: f64,
    pub c: f64,
    pub d: f64,
    pub worst_bad_fraction: f64,
    pub worst_forward: f64,
    pub worst_inverse: f64,
    pub witnesses: Vec<ViolationWitness>,
    /// `min d(o, s·o)` over the set.
    pub translation_min: f64,
    pub translation_ok: bool,
    pub passed: bool,
}

/// Source of `(x, y)` pairs standing in for "all `x, y ∈ X`".
#[derive(Clone, Debug)]
pub enum PairSampler<P> {
    /// Every ordered pair of the listed points.
    Exhaustive { points: Vec<P>, description: String },
    /// An explicit list of pairs.
    Pairs { pairs: Vec<(P, P)>, description: String },
}

impl<P> PairSampler<P> {
    pub fn trials(&self) -> usize {
        match self {
            PairSampler::Exhaustive { points, .. } => points.len() * points.len(),
            PairSampler::Pairs { pairs, .. } => pairs.len(),
        }
    }

    pub fn description(&self) -> &str {
        match self {
            PairSampler::Exhaustive { description, .. } | PairSampler::Pairs { description, .. } => description,
        }
    }
}

/// All ordered pairs of reduced words of length at most `radius`.
pub fn tree_ball_sampler(tree: &FreeTree, radius: usize) -> PairSampler<crate::spaces::GroupWord> {
    PairSampler::Exhaustive {
        points: tree.ball(radius),
        description: format!("exhaustive, word length <= {radius}"),
    }
}

/// The point at distance `r` from `i` on the ray towards `xi`.
pub fn toward_boundary(xi: &BoundaryPoint, r: f64) -> UpperHalfPoint {
    match *xi {
        BoundaryPoint::Infinity => UpperHalfPoint::polar(r, 0.0),
        BoundaryPoint::Finite(t) => UpperHalfPoint::polar(r, 2.0 * (-1.0f64).atan2(t)),
    }
}

/// Stratified random pairs: near points (radius ≤ 3), far points
/// (radius 3 to 25) and points close to the axes of `elements`, mixed
/// uniformly for `x` and `y`.
pub fn h2_stratified_sampler(
    space: &HalfPlane,
    elements: &[MoebiusIsometry],
    pairs: usize,
    seed: u64,
) -> PairSampler<UpperHalfPoint> {
    let ends: Vec<BoundaryPoint> = elements
        .iter()
        .filter_map(|g| space.fixed_points(g).ok())
        .flat_map(|f| [f.attracting, f.repelling])
        .collect();
    let mut rng = stream(seed, tag::SAMPLER, &[pairs as u64]);
    let draw = |rng: &mut crate::seed::StreamRng| match rng.gen_range(0..3) {
        0 => UpperHalfPoint::polar(rng.gen_range(0.0..3.0), rng.gen_range(0.0..2.0 * PI)),
        1 if !ends.is_empty() => {
            let xi = &ends[rng.gen_range(0..ends.len())];
            let p = toward_boundary(xi, rng.gen_range(0.0..25.0));
            let jitter = MoebiusIsometry::rotation(rng.gen_range(-0.02..0.02));
            space.act(&jitter, &p)
        }
        _ => UpperHalfPoint::polar(rng.gen_range(3.0..25.0), rng.gen_range(0.0..2.0 * PI)),
    };
    let pairs = (0..pairs).map(|_| (draw(&mut rng), draw(&mut rng))).collect();
    PairSampler::Pairs { pairs, description: "stratified near/far/axis sample".into() }
}

struct PairOutcome {
    forward: f64,
    inverse: f64,
    witnesses: Vec<ViolationWitness>,
}

fn check_pair<S: Space>(
    space: &S,
    set: &SchottkySet<S::Iso>,
    inverses: &[S::Iso],
    x: &S::Point,
    y: &S::Point,
) -> PairOutcome {
    let o = space.basepoint();
    let limit = set.c + space.tolerance();
    let bad = |elements: &[S::Iso]| -> Vec<usize> {
        elements
            .iter()
            .enumerate()
            .filter(|(_, s)| gromov_product(space, x, &space.act(s, y), &o) > limit)
            .map(|(i, _)| i)
            .collect()
    };
    let k = set.elements.len() as f64;
    let (fwd, inv) = (bad(&set.elements), bad(inverses));
    let (forward, inverse) = (fwd.len() as f64 / k, inv.len() as f64 / k);
    let mut witnesses = Vec::new();
    for (list, frac, is_inv) in [(fwd, forward, false), (inv, inverse, true)] {
        if frac > set.eta {
            witnesses.push(ViolationWitness {
                x: format!("{x:?}"),
                y: format!("{y:?}"),
                inverse: is_inv,
                bad_elements: list,
            });
        }
    }
    PairOutcome { forward, inverse, witnesses }
}

/// Checks the Schottky conditions of `set` on every pair of `sampler`.
///
/// Pairs are processed in parallel; the report does not depend on the
/// number of threads.
pub fn verify_schottky<S: Space>(
    space: &S,
    set: &SchottkySet<S::Iso>,
    sampler: &PairSampler<S::Point>,
) -> Result<VerificationReport> {
    if set.elements.is_empty() {
        return Err(Error::Input("cannot verify an empty set".into()));
    }
    let inverses = set.inverses();
    let outcomes: Vec<PairOutcome> = match sampler {
        PairSampler::Exhaustive { points, .. } => points
            .par_iter()
            .map(|x| {
                let mut acc = PairOutcome { forward: 0.0, inverse: 0.0, witnesses: Vec::new() };
                for y in points {
                    let r = check_pair(space, set, &inverses, x, y);
                    acc.forward = acc.forward.max(r.forward);
                    acc.inverse = acc.inverse.max(r.inverse);
                    if acc.witnesses.len() < MAX_WITNESSES {
                        acc.witnesses.extend(r.witnesses);
                    }
                }
                acc
            })
            .collect(),
        PairSampler::Pairs { pairs, .. } => {
            pairs.par_iter().map(|(x, y)| check_pair(space, set, &inverses, x, y)).collect()
        }
    };
    let mut worst_forward = 0.0f64;
    let mut worst_inverse = 0.0f64;
    let mut witnesses = Vec::new();
    for r in outcomes {
        worst_forward = worst_forward.max(r.forward);
        worst_inverse = worst_inverse.max(r.inverse);
        for w in r.witnesses {
            if witnesses.len() < MAX_WITNESSES {
                witnesses.push(w);
            }
        }
    }
    let translation_min = set.elements.iter().map(|s| space.displacement(s)).fold(f64::INFINITY, f64::min);
    let translation_ok = translation_min >= set.d - space.tolerance();
    let worst_bad_fraction = worst_forward.max(worst_inverse);
    Ok(VerificationReport {
        trials: sampler.trials(),
        sampler: sampler.description().to_string(),
        eta: set.eta,
        c: set.c,
        d: set.d,
        worst_bad_fraction,
        worst_forward,
        worst_inverse,
        witnesses,
        translation_min,
        translation_ok,
        passed: translation_ok && worst_bad_fraction <= set.eta + 1e-12,
    })
}

/// Search limits for [`pingpong_construct`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PingPongLimits {
    pub max_n: usize,
    pub max_p: usize,
    /// Margins added to the disjointness threshold, tried in order.
    pub margins: Vec<f64>,
    /// Word-length radius of the exhaustive tree sampler.
    pub tree_radius: usize,
    /// Pair count of the random half-plane sampler.
    pub pairs: usize,
    pub seed: u64,
}

impl Default for PingPongLimits {
    fn default() -> Self {
        PingPongLimits {
            max_n: 64,
            max_p: 4096,
            margins: vec![0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0],
            tree_radius: 4,
            pairs: 10_000,
            seed: 0,
        }
    }
}

/// Backends that know how to sample pairs for verification.
pub trait VerificationSampling: BoundarySpace {
    fn construction_sampler(&self, elements: &[Self::Iso], limits: &PingPongLimits, seed: u64)
        -> PairSampler<Self::Point>;
}

impl VerificationSampling for FreeTree {
    fn construction_sampler(&self, _: &[Self::Iso], limits: &PingPongLimits, _: u64) -> PairSampler<Self::Point> {
        tree_ball_sampler(self, limits.tree_radius)
    }
}

impl VerificationSampling for HalfPlane {
    fn construction_sampler(
        &self,
        elements: &[MoebiusIsometry],
        limits: &PingPongLimits,
        seed: u64,
    ) -> PairSampler<UpperHalfPoint> {
        h2_stratified_sampler(self, elements, limits.pairs, seed)
    }
}

/// Smallest `m` with `2^{1−m} < η`.
pub fn pingpong_length(eta: f64) -> usize {
    let mut m = 1;
    while 2f64.powi(1 - m as i32) >= eta {
        m += 1;
    }
    m
}

fn all_ends_distinct<S: BoundarySpace>(space: &S, elements: &[S::Iso]) -> Result<Option<Vec<S::Boundary>>> {
    let mut ends = Vec::with_capacity(2 * elements.len());
    for g in elements {
        if !space.is_loxodromic(g) {
            return Ok(None);
        }
        let f = space.fixed_points(g)?;
        ends.push(f.attracting);
        ends.push(f.repelling);
    }
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            if space.same_boundary_point(&ends[i], &ends[j]) {
                return Ok(None);
            }
        }
    }
    Ok(Some(ends))
}

/// Ping-pong construction from two loxodromics with disjoint fixed points.
///
/// Products of length `m` in `uⁿ, vⁿ` are formed with `n` doubled until
/// their fixed points are pairwise distinct. For each margin the depth
/// `K = B + δ + margin` is tried, where `B` is the largest product between
/// distinct fixed points, and the power `p` is doubled until every element
/// moves `o` by at least `d` and verification passes at `C = K + δ`. The
/// first passing `(K, p)` is returned.
pub fn pingpong_construct<S: VerificationSampling>(
    space: &S,
    u: &S::Iso,
    v: &S::Iso,
    eta: f64,
    d: f64,
    limits: &PingPongLimits,
) -> Result<SchottkySet<S::Iso>> {
    if !(eta > 0.0 && eta < 1.0) || !(d >= 0.0) {
        return Err(Error::Input(format!("invalid (eta, D) = ({eta}, {d})")));
    }
    if !space.is_loxodromic(u) || !space.is_loxodromic(v) {
        return Err(Error::Input("u and v must be loxodromic".into()));
    }
    if !space.disjoint_fixed_points(u, v)? {
        return Err(Error::Input("u and v share a fixed point".into()));
    }
    let m = pingpong_length(eta);
    let words: Vec<Vec<bool>> = (0..1usize << m).map(|bits| (0..m).map(|i| bits >> (m - 1 - i) & 1 == 1).collect()).collect();
    let mut n = 1;
    let (products, ends) = loop {
        let (un, vn) = (u.power(n), v.power(n));
        let products: Vec<S::Iso> = words
            .iter()
            .map(|w| w.iter().fold(S::Iso::identity(), |acc, &is_v| acc.compose(if is_v { &vn } else { &un })))
            .collect();
        if let Some(ends) = all_ends_distinct(space, &products)? {
            break (products, ends);
        }
        n *= 2;
        if n > limits.max_n {
            return Err(Error::ConstructionFailed(format!(
                "products of length {m} keep sharing fixed points up to n = {}",
                limits.max_n
            )));
        }
    };
    let mut separation = 0.0f64;
    for i in 0..ends.len() {
        for j in i + 1..ends.len() {
            separation = separation.max(space.boundary_product(&ends[i], &ends[j]));
        }
    }
    let delta = space.delta();
    let word_names: Vec<String> =
        words.iter().map(|w| w.iter().map(|&is_v| if is_v { 'v' } else { 'u' }).collect()).collect();
    let mut diagnostics = String::from("no margin tried");
    for (attempt, &margin) in limits.margins.iter().enumerate() {
        let k = separation + delta + margin;
        let c = k + delta;
        let mut p = 1;
        while p <= limits.max_p {
            let elements: Vec<S::Iso> = products.iter().map(|g| g.power(p)).collect();
            let moves: Vec<f64> = elements.iter().map(|s| space.displacement(s)).collect();
            if moves.iter().any(|x| !x.is_finite()) {
                diagnostics = format!("K = {k}: powers left the representable range at p = {p}");
                break;
            }
            if moves.iter().all(|&x| x >= d - space.tolerance()) {
                let mut set = SchottkySet::new(elements.clone(), eta, c, d)?;
                let sampler = space.construction_sampler(&elements, limits, limits.seed ^ (attempt as u64) << 32 ^ p as u64);
                let report = verify_schottky(space, &set, &sampler)?;
                if report.passed {
                    set.construction = Some(PingPongInfo {
                        n,
                        m,
                        p,
                        k,
                        boundary_separation: separation,
                        words: word_names,
                    });
                    set.report = Some(report);
                    return Ok(set);
                }
                diagnostics = format!(
                    "K = {k}, p = {p}: worst bad fraction {} > eta = {eta}",
                    report.worst_bad_fraction
                );
            }
            p *= 2;
        }
    }
    Err(Error::ConstructionFailed(diagnostics))
}

/// Ping-pong construction whose separation satisfies
/// `D ≥ 20C + 100δ + 1` for the certified `C`.
pub fn pingpong_for_engine<S: VerificationSampling>(
    space: &S,
    u: &S::Iso,
    v: &S::Iso,
    eta: f64,
    limits: &PingPongLimits,
) -> Result<SchottkySet<S::Iso>> {
    let required = |c: f64| 20.0 * c + 100.0 * space.delta() + 1.0;
    let mut set = pingpong_construct(space, u, v, eta, 1.0, limits)?;
    for _ in 0..4 {
        let d = required(set.c);
        if set.d >= d {
            return Ok(set);
        }
        set = pingpong_construct(space, u, v, eta, d, limits)?;
    }
    if set.d >= required(set.c) {
        Ok(set)
    } else {
        Err(Error::ConstructionFailed("separation requirement did not stabilise".into()))
    }
}

/// Limits for [`find_schottky_in_support`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportSearchLimits {
    /// Largest convolution power searched for `u₀`, `v₀`.
    pub max_power: usize,
    /// Cap on enumerated products per power.
    pub max_candidates: usize,
    pub pingpong: PingPongLimits,
}

impl Default for SupportSearchLimits {
    fn default() -> Self {
        SupportSearchLimits { max_power: 4, max_candidates: 50_000, pingpong: PingPongLimits::default() }
    }
}

/// Two loxodromic products of atoms with disjoint fixed points.
#[derive(Clone, Debug)]
pub struct IndependentPair<G> {
    pub u_expr: Vec<usize>,
    pub u0: G,
    pub v_expr: Vec<usize>,
    pub v0: G,
}

#[derive(Clone, Debug)]
pub struct IndependenceSearch<G> {
    pub pair: Option<IndependentPair<G>>,
    /// Largest product length fully enumerated.
    pub deepest_power: usize,
}

/// Enumerates products of `atoms` of length `1, 2, …, max_power` in
/// lexicographic order and returns the first loxodromic that has fixed
/// points disjoint from an earlier loxodromic. Levels with more than
/// `max_candidates` products are skipped along with everything after them.
pub fn find_independent_loxodromics<S: BoundarySpace>(
    space: &S,
    atoms: &[S::Iso],
    max_power: usize,
    max_candidates: usize,
) -> Result<IndependenceSearch<S::Iso>> {
    let mut candidates: Vec<(Vec<usize>, S::Iso)> = Vec::new();
    let mut deepest = 0;
    for level in 1..=max_power {
        let count = atoms.len().checked_pow(level as u32).unwrap_or(usize::MAX);
        if count > max_candidates || atoms.is_empty() {
            break;
        }
        deepest = level;
        let mut idx = vec![0usize; level];
        for _ in 0..count {
            let g = idx.iter().fold(S::Iso::identity(), |acc, &i| acc.compose(&atoms[i]));
            if space.is_loxodromic(&g) {
                for (expr, h) in &candidates {
                    if space.disjoint_fixed_points(h, &g)? {
                        let pair = IndependentPair { u_expr: expr.clone(), u0: h.clone(), v_expr: idx, v0: g };
                        return Ok(IndependenceSearch { pair: Some(pair), deepest_power: level });
                    }
                }
                candidates.push((idx.clone(), g));
            }
            for slot in idx.iter_mut().rev() {
                *slot += 1;
                if *slot < atoms.len() {
                    break;
                }
                *slot = 0;
            }
        }
    }
    Ok(IndependenceSearch { pair: None, deepest_power: deepest })
}

/// A Schottky set inside the support of `μ^power`.
#[derive(Clone, Debug)]
pub struct SupportSchottky<G> {
    pub power: usize,
    pub set: SchottkySet<G>,
    /// Atom indices of `u₀` and `v₀`.
    pub u0: Vec<usize>,
    pub v0: Vec<usize>,
}

/// Searches products of support atoms for two loxodromics `u₀ ∈ supp μ^a`,
/// `v₀ ∈ supp μ^b` with disjoint fixed points, then runs the ping-pong
/// construction on `u = u₀^b`, `v = v₀^a`. Every element of the result is a
/// product of `M = a·b·n·m·p` atoms, recorded in `set.expressions`.
pub fn find_schottky_in_support<S: VerificationSampling>(
    space: &S,
    mu: &DiscreteMeasure<S::Iso>,
    eta: f64,
    d: f64,
    limits: &SupportSearchLimits,
) -> Result<SupportSchottky<S::Iso>> {
    let atoms: Vec<S::Iso> = mu.atoms().iter().map(|(g, _)| g.clone()).collect();
    let search = find_independent_loxodromics(space, &atoms, limits.max_power, limits.max_candidates)?;
    let Some(pair) = search.pair else {
        return Err(Error::SearchFailed {
            deepest_power: search.deepest_power,
            reason: "no two loxodromics with disjoint fixed points in the searched supports".into(),
        });
    };
    let IndependentPair { u_expr, u0, v_expr, v0 } = pair;
    let (a, b) = (u_expr.len(), v_expr.len());
    let mut set = pingpong_construct(space, &u0.power(b), &v0.power(a), eta, d, &limits.pingpong)?;
    let info = set.construction.clone().expect("ping-pong records its construction");
    let u_block: Vec<usize> = u_expr.iter().copied().cycle().take(a * b * info.n).collect();
    let v_block: Vec<usize> = v_expr.iter().copied().cycle().take(a * b * info.n).collect();
    set.expressions = info
        .words
        .iter()
        .map(|w| {
            let once: Vec<usize> =
                w.chars().flat_map(|ch| if ch == 'v' { v_block.iter() } else { u_block.iter() }).copied().collect();
            once.iter().copied().cycle().take(once.len() * info.p).collect()
        })
        .collect();
    Ok(SupportSchottky { power: a * b * info.n * info.m * info.p, set, u0: u_expr, v0: v_expr })
}
