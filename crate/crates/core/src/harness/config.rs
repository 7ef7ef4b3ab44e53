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


//! Run configuration, read from TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pivotal::{EngineParams, Model};
use crate::spaces::{GroupWord, MoebiusIsometry};
use crate::walks::{DiscreteMeasure, Flavor};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    /// Cayley tree of the free group of the given rank.
    Tree { rank: usize },
    /// Upper half-plane; trajectories are tracked as factor paths.
    Halfplane {
        #[serde(default = "default_delta")]
        delta: f64,
    },
}

fn default_delta() -> f64 {
    crate::spaces::HalfPlane::default().delta
}

impl BackendSpec {
    pub fn delta(&self) -> f64 {
        match self {
            BackendSpec::Tree { .. } => 0.0,
            BackendSpec::Halfplane { delta } => *delta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    /// Single-letter pivots of `s₁w₁⋯sₙwₙ` on the tree.
    Free,
    Simple,
    Refined,
}

impl EngineKind {
    pub fn model(self) -> Option<Model> {
        match self {
            EngineKind::Free => None,
            EngineKind::Simple => Some(Model::Simple),
            EngineKind::Refined => Some(Model::Refined),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordAtom {
    pub word: String,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixAtom {
    /// `[a, b, c, d]` of a matrix in SL(2, ℝ).
    pub matrix: [f64; 4],
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    UniformGenerators,
    LazyGenerators { hold: f64 },
    Words { atoms: Vec<WordAtom> },
    Matrices { atoms: Vec<MatrixAtom> },
}

impl MeasureSpec {
    pub fn tree_measure(&self, rank: usize) -> Result<DiscreteMeasure<GroupWord>> {
        match self {
            MeasureSpec::UniformGenerators => DiscreteMeasure::<GroupWord>::uniform_generators(rank),
            MeasureSpec::LazyGenerators { hold } => DiscreteMeasure::<GroupWord>::lazy_generators(rank, *hold),
            MeasureSpec::Words { atoms } => {
                let atoms: Result<Vec<(GroupWord, f64)>> =
                    atoms.iter().map(|a| Ok((GroupWord::parse(&a.word)?, a.weight))).collect();
                DiscreteMeasure::from_weights(atoms?)
            }
            MeasureSpec::Matrices { .. } => Err(Error::Config("matrix atoms need the halfplane backend".into())),
        }
    }

    pub fn plane_measure(&self) -> Result<DiscreteMeasure<MoebiusIsometry>> {
        match self {
            MeasureSpec::Matrices { atoms } => {
                let atoms: Result<Vec<(MoebiusIsometry, f64)>> = atoms
                    .iter()
                    .map(|a| {
                        let [p, q, r, s] = a.matrix;
                        Ok((MoebiusIsometry::new(p, q, r, s)?, a.weight))
                    })
                    .collect();
                DiscreteMeasure::from_weights(atoms?)
            }
            _ => Err(Error::Config("the halfplane backend needs matrix atoms".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchottkySpec {
    /// The free generators and their inverses.
    Generators { eta: f64, c0: f64, d: f64 },
    /// Explicit words on the tree.
    Words { words: Vec<String>, eta: f64, c0: f64, d: f64 },
    /// Explicit matrices in the half-plane.
    Matrices { matrices: Vec<[f64; 4]>, eta: f64, c0: f64, d: f64 },
    /// A certificate written by `schottky construct`.
    Certificate { path: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    /// Steps per slot.
    pub n: usize,
    /// Explicit `α`; defaults to `alpha_fraction · α_max`.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub alpha_fraction: Option<f64>,
    pub flavor: Flavor,
}

/// The words `w_i` fed to the free engine. They never depend on the
/// trajectory's own generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FreeWords {
    /// `w_i` is the inverse of `Z'_{i−1}s'_i` along a reference sequence
    /// `s'`, or `a` when that prefix is trivial.
    Adversarial,
    Constant { word: String },
    /// Uniform letters, reduced, resampled until nontrivial.
    Random { max_len: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads; `0` lets the pool decide. Never serialized, so
    /// outputs do not depend on it.
    #[serde(default, skip_serializing)]
    pub workers: usize,
    pub trials: usize,
    /// Horizon in walk steps.
    pub n_max: usize,
    #[serde(default)]
    pub r_grid: Vec<f64>,
    /// Reference time for the boundary proxy; must exceed `n_max`.
    #[serde(default)]
    pub n_ref: Option<usize>,
    #[serde(default)]
    pub paranoid: bool,
    pub backend: BackendSpec,
    pub engine: EngineKind,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub schottky: Option<SchottkySpec>,
    #[serde(default)]
    pub decomposition: Option<DecompositionSpec>,
    #[serde(default)]
    pub free_words: Option<FreeWords>,
}

fn default_seed() -> u64 {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Steps per recorded time: `N` for the decomposed engines, one for the
    /// free engine.
    pub fn stride(&self) -> usize {
        match (&self.engine, &self.decomposition) {
            (EngineKind::Free, _) | (_, None) => 1,
            (_, Some(d)) => d.n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.n_max == 0 {
            return bad("n_max must be positive".into());
        }
        if let Some(r) = self.r_grid.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return bad(format!("r-grid entry {r} is negative or not finite"));
        }
        if let Some(n_ref) = self.n_ref {
            if n_ref <= self.n_max {
                return bad(format!("n_ref = {n_ref} must exceed n_max = {}", self.n_max));
            }
            if n_ref % self.stride() != 0 {
                return bad(format!("n_ref = {n_ref} is not a multiple of N = {}", self.stride()));
            }
        }
        match (&self.backend, self.engine) {
            (BackendSpec::Tree { rank }, _) if *rank == 0 => return bad("the tree rank must be positive".into()),
            (BackendSpec::Halfplane { delta }, _) if !(*delta >= 0.0) => return bad("delta must be nonnegative".into()),
            (BackendSpec::Halfplane { .. }, EngineKind::Free) => return bad("the free engine runs on the tree only".into()),
            _ => {}
        }
        match self.engine {
            EngineKind::Free => {
                if self.decomposition.is_some() {
                    return bad("the free engine takes no decomposition".into());
                }
                if matches!(self.backend, BackendSpec::Tree { rank } if rank < 2) {
                    return bad("the free engine needs rank at least 2".into());
                }
            }
            EngineKind::Simple | EngineKind::Refined => {
                let Some(dec) = &self.decomposition else {
                    return bad("the simple and refined engines need a decomposition".into());
                };
                if self.schottky.is_none() {
                    return bad("the simple and refined engines need a Schottky set".into());
                }
                if dec.n == 0 || self.n_max < dec.n {
                    return bad(format!("n_max = {} must be at least N = {}", self.n_max, dec.n));
                }
                if let (Some(_), Some(_)) = (dec.alpha, dec.alpha_fraction) {
                    return bad("give alpha or alpha_fraction, not both".into());
                }
                if let Some(f) = dec.alpha_fraction {
                    if !(f > 0.0 && f <= 1.0) {
                        return bad(format!("alpha_fraction = {f} is not in (0, 1]"));
                    }
                }
                let ok = matches!(
                    (self.engine, dec.flavor),
                    (EngineKind::Simple, Flavor::Simple) | (EngineKind::Refined, Flavor::Refined | Flavor::Gapped { .. })
                );
                if !ok {
                    return bad(format!("flavor {:?} does not feed the {:?} engine", dec.flavor, self.engine));
                }
            }
        }
        if let Some(
            SchottkySpec::Generators { c0, d, .. }
            | SchottkySpec::Words { c0, d, .. }
            | SchottkySpec::Matrices { c0, d, .. },
        ) = &self.schottky
        {
            EngineParams::new(*c0, *d)
                .check(self.backend.delta())
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}
