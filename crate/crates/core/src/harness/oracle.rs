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


//! Exact law of the word length of a simple random walk on a free group.
//!
//! With `μ(e) = h` and mass `(1 − h)/(2d)` on each generator and inverse,
//! `|Z_n|` is a birth-death chain on ℕ reflected at 0: from `k ≥ 1` it moves
//! up with probability `(1 − h)(2d − 1)/(2d)` and down with `(1 − h)/(2d)`,
//! and from 0 it moves up with probability `1 − h`.

use serde::Serialize;

use crate::{Error, Result};

/// `d ≤ r·n`, with a small absolute allowance so that exact integer
/// distances on the tree compare the same way everywhere.
pub fn at_most_rn(d: f64, r: f64, n: usize) -> bool {
    d <= r * n as f64 + 1e-9
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReflectedChain {
    pub rank: usize,
    pub hold: f64,
}

impl ReflectedChain {
    pub fn new(rank: usize, hold: f64) -> Result<ReflectedChain> {
        if rank == 0 {
            return Err(Error::Input("the rank must be positive".into()));
        }
        if !(0.0..1.0).contains(&hold) {
            return Err(Error::Input(format!("holding probability {hold} is not in [0, 1)")));
        }
        Ok(ReflectedChain { rank, hold })
    }

    fn moves(&self) -> (f64, f64) {
        let m = 1.0 - self.hold;
        let two_d = 2.0 * self.rank as f64;
        (m * (two_d - 1.0) / two_d, m / two_d)
    }

    /// `lim E|Z_n|/n = (1 − h)(d − 1)/d`.
    pub fn drift(&self) -> f64 {
        let d = self.rank as f64;
        (1.0 - self.hold) * (d - 1.0) / d
    }

    /// One application of the transition matrix to a row vector.
    pub fn step(&self, dist: &[f64]) -> Vec<f64> {
        let (up, down) = self.moves();
        let m = 1.0 - self.hold;
        let mut next = vec![0.0; dist.len() + 1];
        for (k, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            if k == 0 {
                next[0] += p * self.hold;
                next[1] += p * m;
            } else {
                next[k] += p * self.hold;
                next[k + 1] += p * up;
                next[k - 1] += p * down;
            }
        }
        next
    }

    /// Laws of `|Z_0|, …, |Z_n|`; entry `k` of row `n` is `P(|Z_n| = k)`.
    pub fn laws(&self, n: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(n + 1);
        out.push(vec![1.0]);
        for i in 0..n {
            let next = self.step(&out[i]);
            out.push(next);
        }
        out
    }

    /// `P(|Z_n| ≤ r·n)` for `n = 0..=n_max`.
    pub fn deviation_series(&self, r: f64, n_max: usize) -> Vec<f64> {
        self.laws(n_max)
            .iter()
            .enumerate()
            .map(|(n, law)| law.iter().enumerate().filter(|(k, _)| at_most_rn(*k as f64, r, n)).map(|(_, p)| p).sum())
            .collect()
    }

    pub fn mean(&self, n: usize) -> f64 {
        self.laws(n)[n].iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }
}
