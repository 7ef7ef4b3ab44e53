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

//! Gromov products, alignment, chains, shadows and chain-shadow certificates.
//!
//! Every real comparison is made with the backend's tolerance added on the
//! permissive side, so float noise never fails a test that exact tree
//! arithmetic would pass.

use serde::{Deserialize, Serialize};

use crate::spaces::Space;
use crate::{Error, Result};

mod certificate;

pub use certificate::{chain_shadow_two_point, witness_extend, witness_extends, ChainShadowCertificate};

/// `(x, z)_y = (d(x,y) + d(y,z) − d(x,z)) / 2`, clamped to its exact range
/// `[0, min(d(x,y), d(y,z))]`.
pub fn gromov_product<S: Space>(space: &S, x: &S::Point, z: &S::Point, y: &S::Point) -> f64 {
    let xy = space.dist(x, y);
    let yz = space.dist(y, z);
    let xz = space.dist(x, z);
    ((xy + yz - xz) / 2.0).clamp(0.0, xy.min(yz))
}

/// True iff every consecutive triple has middle-based product at most `c`.
/// Sequences shorter than three points are vacuously aligned.
pub fn check_alignment<S: Space>(space: &S, points: &[S::Point], c: f64) -> bool {
    let eps = space.tolerance();
    points.windows(3).all(|t| gromov_product(space, &t[0], &t[2], &t[1]) <= c + eps)
}

/// Alignment slack `c`, separation `d` and hyperbolicity constant `delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignParams {
    pub c: f64,
    pub d: f64,
    pub delta: f64,
}

impl AlignParams {
    pub fn new(c: f64, d: f64, delta: f64) -> Result<AlignParams> {
        if !(c >= 0.0 && d >= 0.0 && delta >= 0.0) {
            return Err(Error::Input(format!("negative chain parameters ({c}, {d}, {delta})")));
        }
        Ok(AlignParams { c, d, delta })
    }
}

/// A `(C, D)`-chain candidate: interior products at most `C`, consecutive
/// distances at least `D`.
#[derive(Clone, Debug)]
pub struct Chain<P> {
    pub points: Vec<P>,
    pub params: AlignParams,
}

impl<P: Clone> Chain<P> {
    pub fn new(points: Vec<P>, params: AlignParams) -> Chain<P> {
        Chain { points, params }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainReport {
    pub ok: bool,
    /// Largest interior product (0 when there is none).
    pub worst_product: f64,
    /// Smallest consecutive distance (infinite when there is none).
    pub worst_gap: f64,
    /// Repeated consecutive points, or a zero separation request.
    pub degenerate: bool,
}

pub fn validate_chain<S: Space>(space: &S, chain: &Chain<S::Point>) -> ChainReport {
    let eps = space.tolerance();
    let pts = &chain.points;
    let mut worst_product = 0.0f64;
    let mut worst_gap = f64::INFINITY;
    for pair in pts.windows(2) {
        worst_gap = worst_gap.min(space.dist(&pair[0], &pair[1]));
    }
    for t in pts.windows(3) {
        worst_product = worst_product.max(gromov_product(space, &t[0], &t[2], &t[1]));
    }
    let degenerate = pts.len() >= 2 && (chain.params.d <= 0.0 || worst_gap <= eps);
    let ok = !degenerate && worst_product <= chain.params.c + eps && worst_gap >= chain.params.d - eps;
    ChainReport { ok, worst_product, worst_gap, degenerate }
}

/// `Σ (d(xᵢ, xᵢ₊₁) − (2C + 2δ))`, a lower bound for `d(x₀, xₙ)` that is at
/// least `n` when `D ≥ 2C + 2δ + 1`.
pub fn chain_distance_bound<S: Space>(space: &S, chain: &Chain<S::Point>) -> Result<f64> {
    let AlignParams { c, d, delta } = chain.params;
    let eps = space.tolerance();
    if d < 2.0 * c + 2.0 * delta + 1.0 - eps {
        return Err(Error::Contract(format!("separation {d} below 2C + 2δ + 1 = {}", 2.0 * c + 2.0 * delta + 1.0)));
    }
    if chain.points.len() >= 2 {
        let report = validate_chain(space, chain);
        if !report.ok {
            return Err(Error::Contract(format!("not a valid chain: {report:?}")));
        }
    }
    Ok(chain
        .points
        .windows(2)
        .map(|p| space.dist(&p[0], &p[1]) - (2.0 * c + 2.0 * delta))
        .sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InteriorReport {
    /// Whether `D ≥ 2C + 4δ + 1`, under which no violation may occur.
    pub precondition_met: bool,
    pub bound: f64,
    pub max_product: f64,
    /// `(i, (x₀, xₙ)_{xᵢ})` for every interior index exceeding the bound.
    pub violations: Vec<(usize, f64)>,
}

/// Checks `(x₀, xₙ)_{xᵢ} ≤ C + 2δ` at every interior point.
pub fn interior_product_check<S: Space>(space: &S, chain: &Chain<S::Point>) -> InteriorReport {
    let AlignParams { c, d, delta } = chain.params;
    let eps = space.tolerance();
    let bound = c + 2.0 * delta;
    let pts = &chain.points;
    let mut max_product = 0.0f64;
    let mut violations = Vec::new();
    if pts.len() >= 3 {
        let (first, last) = (&pts[0], &pts[pts.len() - 1]);
        for (i, p) in pts.iter().enumerate().take(pts.len() - 1).skip(1) {
            let g = gromov_product(space, first, last, p);
            max_product = max_product.max(g);
            if g > bound + eps {
                violations.push((i, g));
            }
        }
    }
    InteriorReport {
        precondition_met: d >= 2.0 * c + 4.0 * delta + 1.0 - eps,
        bound,
        max_product,
        violations,
    }
}

/// The shadow `{y : (y, origin)_anchor ≤ radius}`.
#[derive(Clone, Debug)]
pub struct ShadowSpec<P> {
    pub origin: P,
    pub anchor: P,
    pub radius: f64,
}

pub fn shadow_contains<S: Space>(space: &S, spec: &ShadowSpec<S::Point>, y: &S::Point) -> bool {
    let eps = space.tolerance();
    let inside = gromov_product(space, y, &spec.origin, &spec.anchor) <= spec.radius + eps;
    if inside {
        debug_assert!(
            space.dist(y, &spec.origin)
                >= space.dist(&spec.anchor, &spec.origin) - 2.0 * spec.radius - 4.0 * eps.max(1e-12),
            "points of a shadow cannot be much closer to the origin than its anchor"
        );
    }
    inside
}

/// `min_{z ∈ tail} (x, z)_base`, a computable stand-in for the product of `x`
/// with the limit point of the tail. Infinite for an empty tail.
pub fn boundary_product_proxy<S: Space>(space: &S, x: &S::Point, tail: &[S::Point], base: &S::Point) -> f64 {
    tail.iter().map(|z| gromov_product(space, x, z, base)).fold(f64::INFINITY, f64::min)
}
