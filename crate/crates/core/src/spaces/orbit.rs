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

//! Long-range half-plane backend.
//!
//! Orbit points far from `i` cannot be stored in plain coordinates: nearby
//! points at distance `L` from `i` agree to `e^{-L}` relative precision. Here
//! a point `g·i` is a node in a persistent tree of Moebius factors. The
//! distance between two nodes multiplies only the factors on the tree path
//! between them, so shared history cancels exactly instead of numerically.

use std::fmt;
use std::sync::Arc;

use super::halfplane::{moebius_key, MoebiusIsometry, UpperHalfPoint, DEFAULT_DELTA, DEFAULT_TOLERANCE};
use super::{Group, Space};
use crate::{Error, Result};

/// A matrix stored as `e^{log_scale} · m` with `max |m_ij| = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Scaled {
    m: MoebiusIsometry,
    log_scale: f64,
}

impl Scaled {
    const IDENTITY: Scaled = Scaled { m: MoebiusIsometry::IDENTITY, log_scale: 0.0 };

    fn renormalized(m: MoebiusIsometry, log_scale: f64) -> Scaled {
        let mx = m.a.abs().max(m.b.abs()).max(m.c.abs()).max(m.d.abs());
        Scaled {
            m: MoebiusIsometry { a: m.a / mx, b: m.b / mx, c: m.c / mx, d: m.d / mx },
            log_scale: log_scale + mx.ln(),
        }
    }

    fn mul(&self, g: &MoebiusIsometry) -> Scaled {
        Scaled::renormalized(self.m.mul(g), self.log_scale)
    }

    /// `d(i, M·i)` from `cosh d = ‖M‖²/2`, evaluated in log space when large.
    fn displacement(&self) -> f64 {
        let ln_x = 2.0 * self.log_scale + self.m.frobenius_sq().ln() - std::f64::consts::LN_2;
        if ln_x < 30.0 {
            ln_x.exp().max(1.0).acosh()
        } else {
            ln_x + (1.0 + (1.0 - (-2.0 * ln_x).exp()).sqrt()).ln()
        }
    }

    fn to_matrix(self) -> Option<MoebiusIsometry> {
        let s = self.log_scale.exp();
        let m = MoebiusIsometry { a: self.m.a * s, b: self.m.b * s, c: self.m.c * s, d: self.m.d * s };
        m.entries().iter().all(|v| v.is_finite()).then_some(m)
    }
}

struct Node {
    factor: MoebiusIsometry,
    parent: Option<Arc<Node>>,
    depth: usize,
    cumulative: Scaled,
}

impl Drop for Node {
    // Long chains would otherwise drop recursively.
    fn drop(&mut self) {
        let mut next = self.parent.take();
        while let Some(arc) = next {
            match Arc::try_unwrap(arc) {
                Ok(mut node) => next = node.parent.take(),
                Err(_) => break,
            }
        }
    }
}

/// The isometry `f₁ f₂ ⋯ f_k`, equivalently the orbit point `f₁ ⋯ f_k · i`.
#[derive(Clone, Default)]
pub struct OrbitPath {
    node: Option<Arc<Node>>,
}

impl OrbitPath {
    pub fn root() -> OrbitPath {
        OrbitPath { node: None }
    }

    pub fn lift(g: &MoebiusIsometry) -> OrbitPath {
        OrbitPath::root().then(g)
    }

    /// Right multiplication by one factor, sharing this path as prefix.
    pub fn then(&self, g: &MoebiusIsometry) -> OrbitPath {
        let (depth, cumulative) = match &self.node {
            None => (1, Scaled::IDENTITY.mul(g)),
            Some(n) => (n.depth + 1, n.cumulative.mul(g)),
        };
        OrbitPath { node: Some(Arc::new(Node { factor: *g, parent: self.node.clone(), depth, cumulative })) }
    }

    pub fn depth(&self) -> usize {
        self.node.as_ref().map_or(0, |n| n.depth)
    }

    /// Factors from the root outwards.
    pub fn factors(&self) -> Vec<MoebiusIsometry> {
        let mut out = Vec::with_capacity(self.depth());
        let mut cur = self.node.as_deref();
        while let Some(n) = cur {
            out.push(n.factor);
            cur = n.parent.as_deref();
        }
        out.reverse();
        out
    }

    fn cumulative(&self) -> Scaled {
        self.node.as_ref().map_or(Scaled::IDENTITY, |n| n.cumulative)
    }

    /// The full product as a plain matrix, if its entries are representable.
    pub fn matrix(&self) -> Option<MoebiusIsometry> {
        self.cumulative().to_matrix()
    }

    /// Plain coordinates of the orbit point, if representable.
    pub fn point(&self) -> Result<UpperHalfPoint> {
        let m = self.matrix().ok_or_else(|| Error::NumericDomain("orbit point out of f64 range".into()))?;
        m.act(&UpperHalfPoint::I)
    }

    /// `d(i, self·i)`.
    pub fn displacement(&self) -> f64 {
        self.cumulative().displacement()
    }

    /// `self⁻¹ · other`, multiplied along the tree path between the nodes.
    fn relative(&self, other: &OrbitPath) -> Scaled {
        let mut a = self.node.as_deref();
        let mut b = other.node.as_deref();
        let depth = |n: Option<&Node>| n.map_or(0, |n| n.depth);
        let mut up: Vec<&MoebiusIsometry> = Vec::new();
        let mut down: Vec<&MoebiusIsometry> = Vec::new();
        while depth(a) > depth(b) {
            let n = a.expect("deeper node exists");
            up.push(&n.factor);
            a = n.parent.as_deref();
        }
        while depth(b) > depth(a) {
            let n = b.expect("deeper node exists");
            down.push(&n.factor);
            b = n.parent.as_deref();
        }
        while let (Some(x), Some(y)) = (a, b) {
            if std::ptr::eq(x, y) {
                break;
            }
            up.push(&x.factor);
            down.push(&y.factor);
            a = x.parent.as_deref();
            b = y.parent.as_deref();
        }
        // Identical factors right after the branch point cancel exactly.
        while let (Some(x), Some(y)) = (up.last(), down.last()) {
            if x == y {
                up.pop();
                down.pop();
            } else {
                break;
            }
        }
        let mut acc = Scaled::IDENTITY;
        for f in up {
            acc = acc.mul(&f.inv());
        }
        for f in down.into_iter().rev() {
            acc = acc.mul(f);
        }
        acc
    }

    pub fn distance_to(&self, other: &OrbitPath) -> f64 {
        match (&self.node, &other.node) {
            (None, _) => other.displacement(),
            (_, None) => self.displacement(),
            _ => self.relative(other).displacement(),
        }
    }
}

impl fmt::Debug for OrbitPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OrbitPath")
            .field("depth", &self.depth())
            .field("displacement", &self.displacement())
            .finish()
    }
}

impl Group for OrbitPath {
    type Key = ([i64; 4], i64);

    fn identity() -> Self {
        OrbitPath::root()
    }

    fn compose(&self, other: &Self) -> Self {
        other.factors().iter().fold(self.clone(), |acc, g| acc.then(g))
    }

    fn inverse(&self) -> Self {
        self.factors().iter().rev().fold(OrbitPath::root(), |acc, g| acc.then(&g.inv()))
    }

    fn key(&self) -> Self::Key {
        let c = self.cumulative();
        (moebius_key(&c.m), (c.log_scale * 1e8).round() as i64)
    }
}

/// Half-plane backend over [`OrbitPath`] points, for walks that travel far.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrbitSpace {
    pub delta: f64,
    pub tol: f64,
}

impl Default for OrbitSpace {
    fn default() -> Self {
        OrbitSpace { delta: DEFAULT_DELTA, tol: DEFAULT_TOLERANCE }
    }
}

impl OrbitSpace {
    pub fn new(delta: f64, tol: f64) -> Result<OrbitSpace> {
        if !(delta >= 0.0 && tol >= 0.0) {
            return Err(Error::Input("delta and tolerance must be nonnegative".into()));
        }
        Ok(OrbitSpace { delta, tol })
    }

    pub fn lift(&self, g: &MoebiusIsometry) -> OrbitPath {
        OrbitPath::lift(g)
    }

    /// The orbit point lying at the plain coordinates `p`.
    pub fn point_at(&self, p: &UpperHalfPoint) -> OrbitPath {
        OrbitPath::lift(&MoebiusIsometry::sending_i_to(p))
    }
}

impl Space for OrbitSpace {
    type Point = OrbitPath;
    type Iso = OrbitPath;

    fn basepoint(&self) -> OrbitPath {
        OrbitPath::root()
    }

    fn delta(&self) -> f64 {
        self.delta
    }

    fn tolerance(&self) -> f64 {
        self.tol
    }

    fn dist(&self, p: &OrbitPath, q: &OrbitPath) -> f64 {
        p.distance_to(q)
    }

    fn act(&self, g: &OrbitPath, p: &OrbitPath) -> OrbitPath {
        g.compose(p)
    }

    fn orbit(&self, g: &OrbitPath) -> OrbitPath {
        g.clone()
    }

    fn displacement(&self, g: &OrbitPath) -> f64 {
        g.displacement()
    }
}
