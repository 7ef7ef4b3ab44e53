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

//! Chain-shadow certificates.
//!
//! Membership of `z` in the chain-shadow `CS_y(y⁺; C)` is existential. The
//! engines only ever need a sufficient condition, so membership is carried
//! by an explicit witness chain that is grown by [`witness_extend`].

use super::{gromov_product, validate_chain, AlignParams, Chain};
use crate::spaces::Space;

/// A witness that the tip of `witness` lies in `CS_base(direction; slack)`:
/// a `(slack, 2·slack + 2δ + 1)`-chain starting at `base` whose first jump
/// satisfies `(x₀, x₁)_direction ≤ slack`.
#[derive(Clone, Debug)]
pub struct ChainShadowCertificate<P> {
    pub base: P,
    pub direction: P,
    pub slack: f64,
    pub witness: Chain<P>,
}

impl<P: Clone> ChainShadowCertificate<P> {
    /// The two-point certificate `(base, tip)`, if it is one.
    pub fn fresh<S: Space<Point = P>>(space: &S, base: P, direction: P, tip: P, slack: f64) -> Option<Self> {
        let delta = space.delta();
        let params = AlignParams { c: slack, d: 2.0 * slack + 2.0 * delta + 1.0, delta };
        let cert = ChainShadowCertificate {
            base: base.clone(),
            direction,
            slack,
            witness: Chain::new(vec![base, tip], params),
        };
        cert.validate(space).then_some(cert)
    }

    pub fn tip(&self) -> &P {
        self.witness.points.last().expect("certificates hold at least two points")
    }

    pub fn len(&self) -> usize {
        self.witness.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.witness.points.is_empty()
    }

    /// Full revalidation of the chain and of the first-jump condition.
    pub fn validate<S: Space<Point = P>>(&self, space: &S) -> bool {
        let pts = &self.witness.points;
        if pts.len() < 2 {
            return false;
        }
        let first_jump = gromov_product(space, &pts[0], &pts[1], &self.direction);
        validate_chain(space, &self.witness).ok && first_jump <= self.slack + space.tolerance()
    }

    /// The half-space consequences of membership:
    /// `(base, tip)_direction ≤ 2C + δ` and
    /// `d(base, tip) ≥ d(base, direction) − 2C − δ`.
    pub fn satisfies_half_space_bounds<S: Space<Point = P>>(&self, space: &S) -> bool {
        let eps = space.tolerance();
        let (c, delta) = (self.slack, space.delta());
        let tip = self.tip();
        let product = gromov_product(space, &self.base, tip, &self.direction);
        let far = space.dist(&self.base, tip) >= space.dist(&self.base, &self.direction) - 2.0 * c - delta - eps;
        product <= 2.0 * c + delta + eps && far
    }
}

/// Tries to append `candidate` to the witness chain, going through
/// `pivot_mid`, the marker that follows the current tip.
///
/// The tests are `(x_{i−1}, pivot_mid)_tip ≤ c0` and
/// `(tip, candidate)_{pivot_mid} ≤ c0`, with `d(tip, pivot_mid) ≥ 2c0 + 2δ + 1`.
/// They imply `(x_{i−1}, candidate)_tip ≤ c0 + δ`; that product and the new
/// gap are then checked directly, so a returned certificate is always valid.
/// `c0 + δ` must not exceed the certificate slack.
pub fn witness_extend<S: Space>(
    space: &S,
    cert: &ChainShadowCertificate<S::Point>,
    candidate: &S::Point,
    pivot_mid: &S::Point,
    c0: f64,
) -> Option<ChainShadowCertificate<S::Point>> {
    if !witness_extends(space, cert, candidate, pivot_mid, c0) {
        return None;
    }
    let mut out = cert.clone();
    out.witness.points.push(candidate.clone());
    Some(out)
}

/// The test of [`witness_extend`] without building the extended chain.
pub fn witness_extends<S: Space>(
    space: &S,
    cert: &ChainShadowCertificate<S::Point>,
    candidate: &S::Point,
    pivot_mid: &S::Point,
    c0: f64,
) -> bool {
    let eps = space.tolerance();
    let delta = space.delta();
    debug_assert!(c0 + delta <= cert.slack + eps, "alignment slack exceeds the certificate slack");
    let pts = &cert.witness.points;
    if pts.len() < 2 {
        return false;
    }
    let tip = &pts[pts.len() - 1];
    let prev = &pts[pts.len() - 2];
    let aligned = gromov_product(space, prev, pivot_mid, tip) <= c0 + eps
        && gromov_product(space, tip, candidate, pivot_mid) <= c0 + eps
        && space.dist(tip, pivot_mid) >= 2.0 * c0 + 2.0 * delta + 1.0 - eps;
    if !aligned {
        return false;
    }
    let params = cert.witness.params;
    gromov_product(space, prev, candidate, tip) <= params.c + eps && space.dist(tip, candidate) >= params.d - eps
}

/// The two-point sufficient test for `z ∈ CS_y(y⁺; c)`: the chain `(y, z)`
/// works when `(y, z)_{y⁺} ≤ c` and `d(y, z) ≥ 2c + 2δ + 1`.
pub fn chain_shadow_two_point<S: Space>(space: &S, y: &S::Point, y_plus: &S::Point, z: &S::Point, c: f64) -> bool {
    let eps = space.tolerance();
    gromov_product(space, y, z, y_plus) <= c + eps && space.dist(y, z) >= 2.0 * c + 2.0 * space.delta() + 1.0 - eps
}
