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


//! Stochastic domination of pivot counts by sums of i.i.d. increments.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tail mass below which increment laws are cut.
pub const LAW_TAIL: f64 = 1e-12;

/// Laws of the increment `U` with `P(U = 1) = p₁` and geometric mass on the
/// negative integers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ULaw {
    /// Free group of rank `d ≥ 2`: `P(U = 1) = (d − 1)/d`,
    /// `P(U = −j) = (2d − 3)/(d (2d − 2)^j)`.
    Free { d: usize },
    /// `P(U = 1) = 9/10`, `P(U = −j) = 9/10^{j+1}`.
    Simple,
    /// `P(U = 1) = 1 − 7η`, `P(U = −j) = (1 − 7η)(7η)^j`, for `7η < 1`.
    Refined { eta: f64 },
}

impl ULaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ULaw::Free { d } if d < 2 => Err(Error::Input(format!("free law needs d ≥ 2, got {d}"))),
            ULaw::Refined { eta } if !(eta > 0.0 && 7.0 * eta < 1.0) => {
                Err(Error::Input(format!("refined law needs 0 < 7η < 1, got η = {eta}")))
            }
            _ => Ok(()),
        }
    }

    /// `P(U = 1)` and `P(U = −j)` as a function of `j ≥ 1`.
    fn parts(&self) -> (f64, Box<dyn Fn(i32) -> f64>) {
        match *self {
            ULaw::Free { d } => {
                let d = d as f64;
                ((d - 1.0) / d, Box::new(move |j| (2.0 * d - 3.0) / (d * (2.0 * d - 2.0).powi(j))))
            }
            ULaw::Simple => (0.9, Box::new(|j| 9.0 / 10f64.powi(j + 1))),
            ULaw::Refined { eta } => {
                let p = 1.0 - 7.0 * eta;
                (p, Box::new(move |j| p * (7.0 * eta).powi(j)))
            }
        }
    }

    /// Probabilities of `U = −J, …, −1, 0, 1` with the negative tail cut
    /// once the remaining mass is below [`LAW_TAIL`]. The cut mass is
    /// dropped, which only lowers tail probabilities of sums.
    pub fn pmf(&self) -> Result<LatticeLaw> {
        self.validate()?;
        let (p1, neg) = self.parts();
        let mut negatives = Vec::new();
        let mut total = p1;
        let mut j = 1;
        while 1.0 - total > LAW_TAIL && j < 10_000 {
            let p = neg(j);
            negatives.push(p);
            total += p;
            j += 1;
        }
        let offset = negatives.len();
        let mut probs: Vec<f64> = negatives.into_iter().rev().collect();
        probs.push(0.0);
        probs.push(p1);
        Ok(LatticeLaw { offset, probs })
    }

    /// `E[U]` by summation of the cut law.
    pub fn mean(&self) -> Result<f64> {
        Ok(self.pmf()?.mean())
    }
}

/// A law on the integers: `probs[i]` is the mass at `i − offset`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatticeLaw {
    pub offset: usize,
    pub probs: Vec<f64>,
}

impl LatticeLaw {
    pub fn dirac_zero() -> LatticeLaw {
        LatticeLaw { offset: 0, probs: vec![1.0] }
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i as f64 - self.offset as f64) * p).sum()
    }

    pub fn convolve(&self, other: &LatticeLaw) -> LatticeLaw {
        let mut probs = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, p) in self.probs.iter().enumerate() {
            if *p == 0.0 {
                continue;
            }
            for (j, q) in other.probs.iter().enumerate() {
                probs[i + j] += p * q;
            }
        }
        LatticeLaw { offset: self.offset + other.offset, probs }
    }

    /// `n`-fold convolution power, cutting atoms below `LAW_TAIL · 1e-6`
    /// at the negative end after each step to bound the support.
    pub fn power(&self, n: usize) -> LatticeLaw {
        let mut acc = LatticeLaw::dirac_zero();
        for _ in 0..n {
            acc = acc.convolve(self);
            let cut = acc.probs.iter().take_while(|p| **p < LAW_TAIL * 1e-6).count();
            if cut > 0 && cut < acc.probs.len() {
                acc.probs.drain(..cut);
                acc.offset -= cut.min(acc.offset);
            }
        }
        acc
    }

    /// `P(X ≥ i)`.
    pub fn tail(&self, i: i64) -> f64 {
        let start = i + self.offset as i64;
        if start <= 0 {
            return self.mass();
        }
        self.probs.iter().skip(start as usize).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationRow {
    pub i: usize,
    /// `P(U₁ + ⋯ + U_n ≥ i)`.
    pub law_tail: f64,
    /// `P̂(A_n ≥ i)`.
    pub empirical_tail: f64,
    pub sigma: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationReport {
    pub law: ULaw,
    pub n: usize,
    pub trials: usize,
    pub sigmas: f64,
    /// Largest `P(ΣU ≥ i) − P̂(A_n ≥ i)` over `i`.
    pub max_gap: f64,
    pub worst_i: usize,
    pub rows: Vec<DominationRow>,
    pub violations: usize,
    pub pass: bool,
}

/// Compares the empirical tails of `A_n` with those of the `n`-fold sum of
/// `U`, at every `i ≥ 1` where either side is positive. A row violates when
/// the law's tail exceeds the empirical one by more than `sigmas` binomial
/// standard deviations.
pub fn domination_check(samples: &[usize], n: usize, law: ULaw, sigmas: f64) -> Result<DominationReport> {
    if samples.is_empty() {
        return Err(Error::Input("no pivot-count samples".into()));
    }
    let sum = law.pmf()?.power(n);
    let trials = samples.len();
    let top = samples.iter().copied().max().unwrap_or(0).max(n);
    let mut counts = vec![0usize; top + 2];
    for &a in samples {
        counts[a] += 1;
    }
    let mut at_least = vec![0usize; top + 2];
    for i in (0..=top).rev() {
        at_least[i] = at_least[i + 1] + counts[i];
    }
    let t = trials as f64;
    let mut rows = Vec::with_capacity(top);
    let (mut max_gap, mut worst_i) = (f64::NEG_INFINITY, 1);
    for (i, &count) in at_least.iter().enumerate().take(top + 1).skip(1) {
        let law_tail = sum.tail(i as i64);
        let empirical_tail = count as f64 / t;
        let sigma = (law_tail * (1.0 - law_tail) / t).max(0.0).sqrt();
        let gap = law_tail - empirical_tail;
        if gap > max_gap {
            max_gap = gap;
            worst_i = i;
        }
        let violation = gap > sigmas * sigma + 1e-12;
        rows.push(DominationRow { i, law_tail, empirical_tail, sigma, violation });
    }
    let violations = rows.iter().filter(|r| r.violation).count();
    Ok(DominationReport { law, n, trials, sigmas, max_gap, worst_i, rows, violations, pass: violations == 0 })
}
