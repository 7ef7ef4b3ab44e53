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

//! Metric backends.
//!
//! A backend implements [`Space`]: a basepoint `o`, a distance, an isometry
//! action and a declared hyperbolicity constant. Isometries form a [`Group`]
//! with canonical keys so that measures can merge equal atoms. Backends with
//! a visual boundary additionally implement [`BoundarySpace`].

use std::fmt;
use std::hash::Hash;

use crate::Result;

mod halfplane;
mod orbit;
mod tree;
mod word;

pub use halfplane::{
    classify_isometry, fixed_points, h2_dist, moebius_act, BoundaryPoint, HalfPlane, IsometryClass,
    MoebiusIsometry, UpperHalfPoint, DEFAULT_DELTA, DEFAULT_TOLERANCE,
};
pub use orbit::{OrbitPath, OrbitSpace};
pub use tree::{FreeTree, TreeEnd};
pub use word::{concat_reduce, invert_word, tree_dist, GroupWord, Letter};

/// Group structure on isometries.
pub trait Group: Clone + Send + Sync + fmt::Debug + 'static {
    /// Canonical key; equal isometries have equal keys.
    type Key: Clone + Eq + Ord + Hash + fmt::Debug + Send + Sync;

    fn identity() -> Self;
    /// `self ∘ other`, acting as `other` first.
    fn compose(&self, other: &Self) -> Self;
    fn inverse(&self) -> Self;
    fn key(&self) -> Self::Key;

    fn power(&self, k: usize) -> Self {
        let mut acc = Self::identity();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.compose(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.compose(&base);
            }
        }
        acc
    }
}

/// The space contract consumed by every other module.
pub trait Space: Send + Sync {
    type Point: Clone + Send + Sync + fmt::Debug;
    type Iso: Group;

    fn basepoint(&self) -> Self::Point;
    /// Declared hyperbolicity constant for the four-point condition.
    fn delta(&self) -> f64;
    /// Numeric slack added on the permissive side of real comparisons.
    fn tolerance(&self) -> f64;
    fn dist(&self, p: &Self::Point, q: &Self::Point) -> f64;
    fn act(&self, g: &Self::Iso, p: &Self::Point) -> Self::Point;

    fn orbit(&self, g: &Self::Iso) -> Self::Point {
        self.act(g, &self.basepoint())
    }

    /// `d(o, g·o)`.
    fn displacement(&self, g: &Self::Iso) -> f64 {
        self.dist(&self.basepoint(), &self.orbit(g))
    }
}

/// Attracting and repelling fixed points of a loxodromic isometry.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPoints<B> {
    pub attracting: B,
    pub repelling: B,
}

/// Backends whose loxodromic isometries have computable boundary fixed points.
pub trait BoundarySpace: Space {
    type Boundary: Clone + Send + Sync + fmt::Debug;

    fn is_loxodromic(&self, g: &Self::Iso) -> bool;
    fn fixed_points(&self, g: &Self::Iso) -> Result<FixedPoints<Self::Boundary>>;
    /// Gromov product `(ξ, ζ)_o` of two boundary points; infinite iff equal.
    fn boundary_product(&self, a: &Self::Boundary, b: &Self::Boundary) -> f64;
    /// Stable translation length `lim d(o, gⁿ·o)/n`.
    fn translation_length(&self, g: &Self::Iso) -> f64;

    fn same_boundary_point(&self, a: &Self::Boundary, b: &Self::Boundary) -> bool {
        self.boundary_product(a, b).is_infinite()
    }

    /// True iff the fixed-point pairs of `g` and `h` are disjoint.
    fn disjoint_fixed_points(&self, g: &Self::Iso, h: &Self::Iso) -> Result<bool> {
        let fg = self.fixed_points(g)?;
        let fh = self.fixed_points(h)?;
        let pairs = [
            (&fg.attracting, &fh.attracting),
            (&fg.attracting, &fh.repelling),
            (&fg.repelling, &fh.attracting),
            (&fg.repelling, &fh.repelling),
        ];
        Ok(pairs.iter().all(|(a, b)| !self.same_boundary_point(a, b)))
    }
}
