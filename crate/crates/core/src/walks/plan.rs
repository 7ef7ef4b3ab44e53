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


use serde::{Deserialize, Serialize};

use super::measure::{convolve, DiscreteMeasure, Truncation};
use crate::schottky::{find_independent_loxodromics, SchottkySet};
use crate::spaces::{BoundarySpace, Group};
use crate::{Error, Result};

/// Atomwise tolerance for the decomposition identity.
pub const IDENTITY_TOLERANCE: f64 = 1e-10;

/// Which Schottky part is split off `μ^N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Flavor {
    /// `μ^N = α μ_S² + (1 − α) ν`.
    Simple,
    /// `μ^N = α (μ_S² ∗ μ ∗ μ_S²) + (1 − α) ν` with `N = 4M + 1`.
    Refined,
    /// The simple split, with Schottky pairs taken in couples at least
    /// `gap` slots apart.
    Gapped { gap: usize },
}

/// `μ^N = α · source + (1 − α) · ν` with the source built from a Schottky set.
#[derive(Clone, Debug)]
pub struct DecompositionPlan<G: Group> {
    pub n: usize,
    pub alpha: f64,
    pub alpha_max: f64,
    pub flavor: Flavor,
    pub schottky: SchottkySet<G>,
    pub mu: DiscreteMeasure<G>,
    /// Uniform measure on the Schottky set.
    pub mu_s: DiscreteMeasure<G>,
    pub mu_n: DiscreteMeasure<G>,
    /// `μ_S²`, or `μ_S² ∗ μ ∗ μ_S²` for the refined flavor.
    pub source: DiscreteMeasure<G>,
    /// Absent when `α = 1`.
    pub nu: Option<DiscreteMeasure<G>>,
    /// Largest atomwise error of the reassembled identity.
    pub identity_error: f64,
}

/// Plan parameters in a serializable form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub n: usize,
    pub alpha: f64,
    pub alpha_max: f64,
    pub flavor: Flavor,
    pub schottky_size: usize,
    pub eta: f64,
    pub c: f64,
    pub d: f64,
    pub nu_atoms: usize,
    pub identity_error: f64,
}

impl<G: Group> DecompositionPlan<G> {
    pub fn gap(&self) -> usize {
        match self.flavor {
            Flavor::Gapped { gap } => gap,
            _ => 0,
        }
    }

    pub fn summary(&self) -> PlanSummary {
        PlanSummary {
            n: self.n,
            alpha: self.alpha,
            alpha_max: self.alpha_max,
            flavor: self.flavor,
            schottky_size: self.schottky.len(),
            eta: self.schottky.eta,
            c: self.schottky.c,
            d: self.schottky.d,
            nu_atoms: self.nu.as_ref().map_or(0, DiscreteMeasure::len),
            identity_error: self.identity_error,
        }
    }

    /// Recomputes `α · source + (1 − α) ν` and compares it with `μ^N`.
    pub fn verify_identity(&self) -> Result<f64> {
        let rebuilt = match &self.nu {
            Some(nu) => DiscreteMeasure::mixture(&[(self.alpha, &self.source), (1.0 - self.alpha, nu)])?,
            None => self.source.clone(),
        };
        Ok(rebuilt.max_atom_diff(&self.mu_n))
    }
}

/// The Schottky part for a flavor.
pub fn schottky_source<G: Group>(
    mu: &DiscreteMeasure<G>,
    mu_s: &DiscreteMeasure<G>,
    flavor: Flavor,
) -> Result<DiscreteMeasure<G>> {
    let pair = convolve(mu_s, mu_s, Truncation::NONE)?;
    match flavor {
        Flavor::Simple | Flavor::Gapped { .. } => Ok(pair),
        Flavor::Refined => convolve(&convolve(&pair, mu, Truncation::NONE)?, &pair, Truncation::NONE),
    }
}

/// `min_g μ^N(g) / source(g)` over the source atoms, capped at one.
pub fn alpha_max<G: Group>(mu_n: &DiscreteMeasure<G>, source: &DiscreteMeasure<G>) -> f64 {
    source
        .atoms()
        .iter()
        .map(|(g, p)| mu_n.prob(g) / p)
        .fold(1.0f64, f64::min)
}

/// Splits `μ^N` into the Schottky part of `flavor` and a remainder `ν`.
pub fn decompose<G: Group>(
    mu: &DiscreteMeasure<G>,
    n: usize,
    schottky: &SchottkySet<G>,
    alpha: f64,
    flavor: Flavor,
) -> Result<DecompositionPlan<G>> {
    if n == 0 {
        return Err(Error::Input("N must be positive".into()));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        if alpha > 1.0 {
            return Err(Error::Infeasible { alpha, alpha_max: 1.0 });
        }
        return Err(Error::Input(format!("alpha = {alpha} is not in (0, 1]")));
    }
    if let Flavor::Gapped { gap } = flavor {
        if gap == 0 {
            return Err(Error::Input("the gap must be at least 1".into()));
        }
    }
    let mu_s = DiscreteMeasure::uniform(schottky.elements.iter().cloned())?;
    let source = schottky_source(mu, &mu_s, flavor)?;
    let mu_n = mu.power(n, Truncation::NONE)?;
    let amax = alpha_max(&mu_n, &source);
    if amax <= 0.0 {
        return Err(Error::Contract("the Schottky part is not inside the support of the power".into()));
    }
    if alpha > amax * (1.0 + 1e-12) {
        return Err(Error::Infeasible { alpha, alpha_max: amax });
    }
    let nu = if alpha >= 1.0 {
        None
    } else {
        let mut atoms = Vec::with_capacity(mu_n.len());
        for (g, p) in mu_n.atoms() {
            let rest = (p - alpha * source.prob(g)) / (1.0 - alpha);
            if rest < -IDENTITY_TOLERANCE {
                return Err(Error::Infeasible { alpha, alpha_max: amax });
            }
            if rest > IDENTITY_TOLERANCE * 1e-3 {
                atoms.push((g.clone(), rest));
            }
        }
        Some(DiscreteMeasure::from_weights(atoms)?)
    };
    let mut plan = DecompositionPlan {
        n,
        alpha,
        alpha_max: amax,
        flavor,
        schottky: schottky.clone(),
        mu: mu.clone(),
        mu_s,
        mu_n,
        source,
        nu,
        identity_error: 0.0,
    };
    plan.identity_error = plan.verify_identity()?;
    if plan.identity_error > IDENTITY_TOLERANCE {
        return Err(Error::Invariant(format!("decomposition identity off by {}", plan.identity_error)));
    }
    Ok(plan)
}

/// Outcome of the non-elementarity heuristic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NonElementarity {
    pub found: bool,
    /// Product length at which independent loxodromics appeared, or the
    /// deepest length searched.
    pub power: usize,
}

/// Looks for two loxodromics with disjoint fixed points among products of
/// at most `max_power` atoms of `nu`. Failure is inconclusive.
pub fn non_elementary_heuristic<S: BoundarySpace>(
    space: &S,
    nu: &DiscreteMeasure<S::Iso>,
    max_power: usize,
) -> Result<NonElementarity> {
    let atoms: Vec<S::Iso> = nu.atoms().iter().map(|(g, _)| g.clone()).collect();
    let search = find_independent_loxodromics(space, &atoms, max_power, 200_000)?;
    Ok(NonElementarity { found: search.pair.is_some(), power: search.deepest_power })
}
