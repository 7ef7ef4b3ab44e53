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

//! The Cayley tree of `F_d` with its word metric.

use super::word::{tree_dist, GroupWord, Letter};
use super::{BoundarySpace, FixedPoints, Space};
use crate::{Error, Result};

/// Free group of rank `rank` acting on its Cayley tree. Exact, `δ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreeTree {
    pub rank: usize,
}

impl FreeTree {
    pub fn new(rank: usize) -> Result<FreeTree> {
        if rank == 0 || rank > 1 << 14 {
            return Err(Error::Input(format!("unsupported rank {rank}")));
        }
        Ok(FreeTree { rank })
    }

    pub fn generators(&self) -> Vec<GroupWord> {
        Letter::all(self.rank).map(GroupWord::letter).collect()
    }

    /// All reduced words of length at most `max_len`, shortest first.
    pub fn ball(&self, max_len: usize) -> Vec<GroupWord> {
        let mut out = vec![GroupWord::identity()];
        let mut frontier = vec![GroupWord::identity()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for w in &frontier {
                for l in Letter::all(self.rank) {
                    if w.last() != Some(l.inverse()) {
                        let mut v = w.clone();
                        v.push(l);
                        next.push(v);
                    }
                }
            }
            out.extend(next.iter().cloned());
            frontier = next;
        }
        out
    }

    pub fn contains(&self, w: &GroupWord) -> bool {
        w.letters().iter().all(|l| l.index() < self.rank)
    }
}

impl Space for FreeTree {
    type Point = GroupWord;
    type Iso = GroupWord;

    fn basepoint(&self) -> GroupWord {
        GroupWord::identity()
    }

    fn delta(&self) -> f64 {
        0.0
    }

    fn tolerance(&self) -> f64 {
        0.0
    }

    #[inline]
    fn dist(&self, p: &GroupWord, q: &GroupWord) -> f64 {
        tree_dist(p, q) as f64
    }

    fn act(&self, g: &GroupWord, p: &GroupWord) -> GroupWord {
        g.concat(p)
    }

    fn orbit(&self, g: &GroupWord) -> GroupWord {
        g.clone()
    }

    fn displacement(&self, g: &GroupWord) -> f64 {
        g.len() as f64
    }
}

/// An end of the tree fixed by a nontrivial element: the eventually periodic
/// ray `prefix · period · period · …`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeEnd {
    pub prefix: GroupWord,
    pub period: GroupWord,
}

impl TreeEnd {
    pub fn letter_at(&self, i: usize) -> Letter {
        let h = self.prefix.letters();
        if i < h.len() {
            h[i]
        } else {
            let c = self.period.letters();
            c[(i - h.len()) % c.len()]
        }
    }
}

impl BoundarySpace for FreeTree {
    type Boundary = TreeEnd;

    fn is_loxodromic(&self, g: &GroupWord) -> bool {
        !g.is_identity()
    }

    fn fixed_points(&self, g: &GroupWord) -> Result<FixedPoints<TreeEnd>> {
        if g.is_identity() {
            return Err(Error::Classification("the identity has no fixed ends".into()));
        }
        let (h, c) = g.cyclic_decomposition();
        Ok(FixedPoints {
            attracting: TreeEnd { prefix: h.clone(), period: c.clone() },
            repelling: TreeEnd { prefix: h, period: c.inverse() },
        })
    }

    /// Common prefix length of the two rays. Agreement past both prefixes
    /// over `|c₁| + |c₂|` letters forces equality (Fine and Wilf).
    fn boundary_product(&self, a: &TreeEnd, b: &TreeEnd) -> f64 {
        let horizon = a.prefix.len().max(b.prefix.len()) + a.period.len() + b.period.len();
        (0..horizon)
            .find(|&i| a.letter_at(i) != b.letter_at(i))
            .map_or(f64::INFINITY, |i| i as f64)
    }

    fn translation_length(&self, g: &GroupWord) -> f64 {
        g.cyclic_decomposition().1.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::Group;

    fn w(s: &str) -> GroupWord {
        GroupWord::parse(s).unwrap()
    }

    #[test]
    fn ball_sizes() {
        let t = FreeTree::new(2).unwrap();
        assert_eq!(t.ball(3).len(), 1 + 4 + 12 + 36);
        let t3 = FreeTree::new(3).unwrap();
        assert_eq!(t3.ball(2).len(), 1 + 6 + 30);
    }

    /// Exhaustive four-point check on all words of length ≤ 6 in F₂. The
    /// group acts transitively, so the base may be taken at the identity.
    #[test]
    fn four_point_condition_is_exact_with_zero_delta() {
        let t = FreeTree::new(2).unwrap();
        let ball = t.ball(6);
        let n = ball.len();
        let mut lcp = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                lcp[i * n + j] = ball[i].common_prefix_len(&ball[j]) as u8;
            }
        }
        for x in 0..n {
            let row_x = &lcp[x * n..(x + 1) * n];
            for y in 0..n {
                let xy = row_x[y];
                let row_y = &lcp[y * n..(y + 1) * n];
                for z in 0..n {
                    assert!(row_x[z] >= xy.min(row_y[z]));
                }
            }
        }
    }

    #[test]
    fn fixed_ends() {
        let t = FreeTree::new(2).unwrap();
        let fp = t.fixed_points(&w("abA")).unwrap();
        assert_eq!(fp.attracting.prefix, w("a"));
        assert_eq!(fp.attracting.period, w("b"));
        assert_eq!(fp.repelling.period, w("B"));
        assert_eq!(t.translation_length(&w("abA")), 1.0);
        assert!(t.fixed_points(&GroupWord::identity()).is_err());
    }

    #[test]
    fn ends_of_commuting_elements_coincide() {
        let t = FreeTree::new(2).unwrap();
        let g = w("ab");
        assert!(!t.disjoint_fixed_points(&g, &g.power(3)).unwrap());
        assert!(!t.disjoint_fixed_points(&g, &g.inverse()).unwrap());
        assert!(t.disjoint_fixed_points(&w("a"), &w("b")).unwrap());
        assert!(t.disjoint_fixed_points(&w("aab"), &w("aba")).unwrap());
        let ea = t.fixed_points(&w("aab")).unwrap().attracting;
        let eb = t.fixed_points(&w("aaa")).unwrap().attracting;
        assert_eq!(t.boundary_product(&ea, &eb), 2.0);
    }

    #[test]
    fn action_is_isometric() {
        let t = FreeTree::new(2).unwrap();
        let ball = t.ball(3);
        let g = w("abA");
        for p in &ball {
            for q in &ball {
                assert_eq!(t.dist(p, q), t.dist(&t.act(&g, p), &t.act(&g, q)));
            }
        }
    }
}
