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


use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::spaces::{GroupWord, Group, Letter};
use crate::{Error, Result};

/// Tolerance on the total mass of a measure.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Optional pruning of light atoms during convolution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Keep at most this many atoms, dropping the lightest.
    pub max_atoms: Option<usize>,
    /// Largest total mass that may be dropped.
    pub budget: f64,
}

impl Truncation {
    pub const NONE: Truncation = Truncation { max_atoms: None, budget: 0.0 };
}

/// A finitely supported probability measure on isometries. Atoms are
/// merged by canonical key and kept sorted by key.
#[derive(Clone, Debug)]
pub struct DiscreteMeasure<G: Group> {
    atoms: Vec<(G, f64)>,
    keys: Vec<G::Key>,
    sampler: WeightedIndex<f64>,
    dropped_mass: f64,
}

#[derive(Serialize, Deserialize)]
struct AtomRecord<G> {
    element: G,
    probability: f64,
}

impl<G: Group> DiscreteMeasure<G> {
    /// Builds a measure from weighted atoms. Equal atoms are merged; the
    /// weights must be positive and sum to one.
    pub fn new(atoms: impl IntoIterator<Item = (G, f64)>) -> Result<DiscreteMeasure<G>> {
        let atoms: Vec<(G, f64)> = atoms.into_iter().collect();
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::Input(format!("atom masses sum to {total}, not 1")));
        }
        Self::from_weights(atoms)
    }

    /// Like [`DiscreteMeasure::new`] but normalizes the weights.
    pub fn from_weights(atoms: impl IntoIterator<Item = (G, f64)>) -> Result<DiscreteMeasure<G>> {
        let mut merged: BTreeMap<G::Key, (G, f64)> = BTreeMap::new();
        for (g, p) in atoms {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Input(format!("atom weight {p} is not positive")));
            }
            merged.entry(g.key()).and_modify(|e| e.1 += p).or_insert((g, p));
        }
        if merged.is_empty() {
            return Err(Error::Input("a measure needs at least one atom".into()));
        }
        let total: f64 = merged.values().map(|(_, p)| p).sum();
        let (keys, atoms): (Vec<_>, Vec<_>) = merged.into_iter().map(|(k, (g, p))| (k, (g, p / total))).unzip();
        Self::assemble(atoms, keys, 0.0)
    }

    fn assemble(atoms: Vec<(G, f64)>, keys: Vec<G::Key>, dropped_mass: f64) -> Result<DiscreteMeasure<G>> {
        let sampler = WeightedIndex::new(atoms.iter().map(|(_, p)| *p))
            .map_err(|e| Error::Input(format!("invalid weights: {e}")))?;
        Ok(DiscreteMeasure { atoms, keys, sampler, dropped_mass })
    }

    pub fn dirac(g: G) -> DiscreteMeasure<G> {
        Self::new([(g, 1.0)]).expect("a single unit atom is a measure")
    }

    pub fn uniform(elements: impl IntoIterator<Item = G>) -> Result<DiscreteMeasure<G>> {
        Self::from_weights(elements.into_iter().map(|g| (g, 1.0)))
    }

    pub fn atoms(&self) -> &[(G, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Mass removed by truncation on the way to this measure.
    pub fn dropped_mass(&self) -> f64 {
        self.dropped_mass
    }

    pub fn prob(&self, g: &G) -> f64 {
        self.prob_key(&g.key())
    }

    pub fn prob_key(&self, key: &G::Key) -> f64 {
        self.keys.binary_search(key).map_or(0.0, |i| self.atoms[i].1)
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &G {
        &self.atoms[self.sample_index(rng)].0
    }

    /// Largest atomwise difference `|self(g) − other(g)|`.
    pub fn max_atom_diff(&self, other: &DiscreteMeasure<G>) -> f64 {
        let mut diff = 0.0f64;
        for (g, p) in &self.atoms {
            diff = diff.max((p - other.prob(g)).abs());
        }
        for (g, p) in &other.atoms {
            diff = diff.max((p - self.prob(g)).abs());
        }
        diff
    }

    /// `Σ p_i μ_i` for weights summing to one.
    pub fn mixture(parts: &[(f64, &DiscreteMeasure<G>)]) -> Result<DiscreteMeasure<G>> {
        let atoms = parts
            .iter()
            .filter(|(w, _)| *w > 0.0)
            .flat_map(|(w, m)| m.atoms.iter().map(move |(g, p)| (g.clone(), w * p)));
        Self::new(atoms)
    }

    /// Image under `g ↦ f(g)`.
    pub fn map(&self, f: impl Fn(&G) -> G) -> Result<DiscreteMeasure<G>> {
        Self::new(self.atoms.iter().map(|(g, p)| (f(g), *p)))
    }

    /// `n`-fold convolution power, `μ⁰ = δ_e`.
    pub fn power(&self, n: usize, truncation: Truncation) -> Result<DiscreteMeasure<G>> {
        let mut acc = DiscreteMeasure::dirac(G::identity());
        for _ in 0..n {
            acc = convolve(&acc, self, truncation)?;
        }
        Ok(acc)
    }

    /// `[μ⁰, μ¹, …, μⁿ]`.
    pub fn power_table(&self, n: usize, truncation: Truncation) -> Result<Vec<DiscreteMeasure<G>>> {
        let mut table = vec![DiscreteMeasure::dirac(G::identity())];
        for k in 0..n {
            let next = convolve(&table[k], self, truncation)?;
            table.push(next);
        }
        Ok(table)
    }

    /// Draws `g₁ ⋯ g_k` from `μ^k` given only the product, i.e. samples the
    /// factors of a `μ`-walk conditioned on its value at time `k`.
    ///
    /// `table` must be `power_table(k)` of `self`. Factors are drawn from the
    /// last one backwards with `P(g_k = h) ∝ μ(h) μ^{k−1}(γ h⁻¹)`.
    pub fn sample_bridge<R: Rng + ?Sized>(
        &self,
        table: &[DiscreteMeasure<G>],
        product: &G,
        rng: &mut R,
    ) -> Result<Vec<G>> {
        let k = table.len() - 1;
        let mut rest = product.clone();
        let mut factors = Vec::with_capacity(k);
        let mut weights = Vec::with_capacity(self.atoms.len());
        for level in (1..=k).rev() {
            weights.clear();
            weights.extend(self.atoms.iter().map(|(h, p)| p * table[level - 1].prob(&rest.compose(&h.inverse()))));
            let pick = WeightedIndex::new(&weights)
                .map_err(|_| Error::Contract("product is outside the support of the power".into()))?
                .sample(rng);
            let h = &self.atoms[pick].0;
            rest = rest.compose(&h.inverse());
            factors.push(h.clone());
        }
        factors.reverse();
        Ok(factors)
    }
}

impl<G: Group + Serialize + DeserializeOwned> DiscreteMeasure<G> {
    pub fn to_json(&self) -> Result<String> {
        let records: Vec<AtomRecord<&G>> =
            self.atoms.iter().map(|(g, p)| AtomRecord { element: g, probability: *p }).collect();
        serde_json::to_string_pretty(&records).map_err(|e| Error::Input(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<DiscreteMeasure<G>> {
        let records: Vec<AtomRecord<G>> = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::new(records.into_iter().map(|r| (r.element, r.probability)))
    }
}

impl DiscreteMeasure<GroupWord> {
    /// Uniform measure on the `2d` generators and their inverses.
    pub fn uniform_generators(rank: usize) -> Result<DiscreteMeasure<GroupWord>> {
        Self::uniform(Letter::all(rank).map(GroupWord::letter))
    }

    /// Mass `hold` on the identity, the rest uniform on the generators.
    pub fn lazy_generators(rank: usize, hold: f64) -> Result<DiscreteMeasure<GroupWord>> {
        if !(0.0..1.0).contains(&hold) {
            return Err(Error::Input(format!("holding probability {hold} is not in [0, 1)")));
        }
        let share = (1.0 - hold) / (2 * rank) as f64;
        let gens = Letter::all(rank).map(|l| (GroupWord::letter(l), share));
        Self::from_weights(std::iter::once((GroupWord::identity(), hold)).chain(gens).filter(|(_, p)| *p > 0.0))
    }
}

/// `(m1 ∗ m2)(g) = Σ_{g₁g₂ = g} m1(g₁) m2(g₂)`.
///
/// With a truncation policy the lightest atoms are dropped and the rest
/// renormalized; dropping more than the budget is an error.
pub fn convolve<G: Group>(
    m1: &DiscreteMeasure<G>,
    m2: &DiscreteMeasure<G>,
    truncation: Truncation,
) -> Result<DiscreteMeasure<G>> {
    let mut merged: BTreeMap<G::Key, (G, f64)> = BTreeMap::new();
    for (g1, p1) in &m1.atoms {
        for (g2, p2) in &m2.atoms {
            let g = g1.compose(g2);
            merged.entry(g.key()).and_modify(|e| e.1 += p1 * p2).or_insert((g, p1 * p2));
        }
    }
    let mut entries: Vec<(G::Key, (G, f64))> = merged.into_iter().collect();
    let mut dropped = m1.dropped_mass + m2.dropped_mass;
    if let Some(max_atoms) = truncation.max_atoms {
        if entries.len() > max_atoms {
            let mut order: Vec<usize> = (0..entries.len()).collect();
            order.sort_by(|&i, &j| entries[j].1 .1.total_cmp(&entries[i].1 .1).then(i.cmp(&j)));
            let mut keep = vec![false; entries.len()];
            for &i in &order[..max_atoms] {
                keep[i] = true;
            }
            let lost: f64 = order[max_atoms..].iter().map(|&i| entries[i].1 .1).sum();
            if lost > truncation.budget {
                return Err(Error::Truncation { dropped: lost, budget: truncation.budget });
            }
            dropped += lost;
            let mut i = 0;
            entries.retain(|_| {
                i += 1;
                keep[i - 1]
            });
        }
    }
    let total: f64 = entries.iter().map(|(_, (_, p))| p).sum();
    let (keys, atoms): (Vec<_>, Vec<_>) = entries.into_iter().map(|(k, (g, p))| (k, (g, p / total))).unzip();
    DiscreteMeasure::assemble(atoms, keys, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::MoebiusIsometry;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn w(s: &str) -> GroupWord {
        GroupWord::parse(s).unwrap()
    }

    #[test]
    fn identity_is_neutral() {
        let mu = DiscreteMeasure::uniform_generators(2).unwrap();
        let e = DiscreteMeasure::dirac(GroupWord::identity());
        assert!(convolve(&e, &mu, Truncation::NONE).unwrap().max_atom_diff(&mu) < 1e-15);
    }

    #[test]
    fn square_of_a_and_inverse() {
        let mu = DiscreteMeasure::uniform([w("a"), w("A")]).unwrap();
        let sq = convolve(&mu, &mu, Truncation::NONE).unwrap();
        assert_eq!(sq.len(), 3);
        assert!((sq.prob(&GroupWord::identity()) - 0.5).abs() < 1e-15);
        assert!((sq.prob(&w("aa")) - 0.25).abs() < 1e-15);
        assert!((sq.prob(&w("AA")) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn convolution_is_associative() {
        let m1 = DiscreteMeasure::from_weights([(w("a"), 1.0), (w("bA"), 2.0), (w(""), 0.5)]).unwrap();
        let m2 = DiscreteMeasure::from_weights([(w("B"), 3.0), (w("ab"), 1.0)]).unwrap();
        let m3 = DiscreteMeasure::from_weights([(w("Ba"), 1.0), (w("b"), 1.0), (w("A"), 2.0)]).unwrap();
        let left = convolve(&convolve(&m1, &m2, Truncation::NONE).unwrap(), &m3, Truncation::NONE).unwrap();
        let right = convolve(&m1, &convolve(&m2, &m3, Truncation::NONE).unwrap(), Truncation::NONE).unwrap();
        assert_eq!(left.len(), right.len());
        assert!(left.max_atom_diff(&right) < 1e-15);
    }

    #[test]
    fn truncation_budget() {
        let mu = DiscreteMeasure::uniform_generators(2).unwrap();
        let tight = Truncation { max_atoms: Some(4), budget: 0.1 };
        assert!(matches!(convolve(&mu, &mu, tight), Err(Error::Truncation { .. })));
        let loose = Truncation { max_atoms: Some(4), budget: 1.0 };
        let m = convolve(&mu, &mu, loose).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m.dropped_mass() > 0.0);
        let total: f64 = m.atoms().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DiscreteMeasure::new([(w("a"), 0.5)]).is_err());
        assert!(DiscreteMeasure::<GroupWord>::new([]).is_err());
        assert!(DiscreteMeasure::new([(w("a"), -0.5), (w("b"), 1.5)]).is_err());
        let merged = DiscreteMeasure::new([(w("a"), 0.5), (w("a"), 0.5)]).unwrap();
        assert_eq!(merged.len(), 1);
    }

    #[test]
    fn moebius_atoms_merge_by_key() {
        let g = MoebiusIsometry::diag(2.0);
        let m = DiscreteMeasure::uniform([g, g.compose(&g).compose(&g.inverse())]).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn bridge_factors_have_the_right_law() {
        let mu = DiscreteMeasure::from_weights([(w("a"), 1.0), (w("b"), 2.0), (w("A"), 1.0)]).unwrap();
        let table = mu.power_table(3, Truncation::NONE).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut counts: BTreeMap<Vec<GroupWord>, usize> = BTreeMap::new();
        let trials = 60_000;
        for _ in 0..trials {
            let gamma = table[3].sample(&mut rng).clone();
            let f = mu.sample_bridge(&table, &gamma, &mut rng).unwrap();
            assert_eq!(f.iter().fold(GroupWord::identity(), |acc, g| acc.concat(g)), gamma);
            *counts.entry(f).or_default() += 1;
        }
        // The factor triples must be i.i.d. with law mu.
        for (f, count) in counts {
            let p: f64 = f.iter().map(|g| mu.prob(g)).product();
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((count as f64 / trials as f64 - p).abs() < 5.0 * se + 1e-4, "{f:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let mu = DiscreteMeasure::lazy_generators(2, 0.5).unwrap();
        let back = DiscreteMeasure::<GroupWord>::from_json(&mu.to_json().unwrap()).unwrap();
        assert!(back.max_atom_diff(&mu) < 1e-15);
        assert!((mu.prob(&GroupWord::identity()) - 0.5).abs() < 1e-15);
    }
}
