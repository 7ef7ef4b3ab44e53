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


use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::measure::Truncation;
use super::plan::{DecompositionPlan, Flavor};
use crate::seed::{stream, tag, StreamRng};
use crate::spaces::{Group, Space};
use crate::Result;

/// The isometries consumed by one pivotal step besides the free word `w`.
#[derive(Clone, Debug, PartialEq)]
pub enum Jump<G> {
    Simple { a: G, b: G },
    Refined { a: G, b: G, r: G, c: G, d: G },
}

impl<G: Group> Jump<G> {
    pub fn product(&self) -> G {
        match self {
            Jump::Simple { a, b } => a.compose(b),
            Jump::Refined { a, b, r, c, d } => a.compose(b).compose(r).compose(c).compose(d),
        }
    }
}

/// What a slot of `N` steps contributes.
#[derive(Clone, Debug, PartialEq)]
pub enum SlotRole<G> {
    /// A draw from `ν`.
    Filler,
    /// First Schottky slot of a block. For the gapped flavor it carries the
    /// opening pair only.
    Opening(Jump<G>),
    /// A `μ^N` slot inside the gap, with its `N` factors.
    Gap(Vec<G>),
    /// Second Schottky slot of a gapped block.
    Closing { c: G, d: G },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotKind {
    Filler,
    Opening,
    Gap,
    Closing,
}

impl<G> SlotRole<G> {
    pub fn kind(&self) -> SlotKind {
        match self {
            SlotRole::Filler => SlotKind::Filler,
            SlotRole::Opening(_) => SlotKind::Opening,
            SlotRole::Gap(_) => SlotKind::Gap,
            SlotRole::Closing { .. } => SlotKind::Closing,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Slot<G> {
    pub index: usize,
    pub epsilon: bool,
    pub role: SlotRole<G>,
    /// `γ_i`, the product of the slot.
    pub product: G,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Searching,
    InGap { remaining: usize },
    Waiting,
}

/// Generates the slots `γ₀, γ₁, …` of one trajectory.
///
/// The Bernoulli variables come from one stream per trajectory and every
/// slot draws from its own stream keyed by `(trajectory, slot)`, so the two
/// views of the walk are generated consistently.
pub struct Scheduler<'a, G: Group> {
    plan: &'a DecompositionPlan<G>,
    master: u64,
    trajectory: u64,
    eps_rng: StreamRng,
    slot: usize,
    phase: Phase,
}

impl<'a, G: Group> Scheduler<'a, G> {
    pub fn new(plan: &'a DecompositionPlan<G>, master: u64, trajectory: u64) -> Scheduler<'a, G> {
        Scheduler {
            plan,
            master,
            trajectory,
            eps_rng: stream(master, tag::SCHEDULE, &[trajectory]),
            slot: 0,
            phase: Phase::Searching,
        }
    }

    fn schottky_pair(&self, rng: &mut StreamRng) -> (G, G) {
        let s = &self.plan.mu_s;
        (s.sample(rng).clone(), s.sample(rng).clone())
    }

    pub fn next_slot(&mut self) -> Slot<G> {
        let plan = self.plan;
        let index = self.slot;
        self.slot += 1;
        let epsilon = plan.nu.is_none() || self.eps_rng.gen_bool(plan.alpha);
        let mut rng = stream(self.master, tag::SEGMENT, &[self.trajectory, index as u64]);
        let role = match (plan.flavor, self.phase) {
            (_, Phase::InGap { remaining }) => {
                let factors: Vec<G> = (0..plan.n).map(|_| plan.mu.sample(&mut rng).clone()).collect();
                self.phase = if remaining > 1 { Phase::InGap { remaining: remaining - 1 } } else { Phase::Waiting };
                SlotRole::Gap(factors)
            }
            (_, _) if !epsilon => SlotRole::Filler,
            (Flavor::Simple, _) => {
                let (a, b) = self.schottky_pair(&mut rng);
                SlotRole::Opening(Jump::Simple { a, b })
            }
            (Flavor::Refined, _) => {
                let (a, b) = self.schottky_pair(&mut rng);
                let r = plan.mu.sample(&mut rng).clone();
                let (c, d) = self.schottky_pair(&mut rng);
                SlotRole::Opening(Jump::Refined { a, b, r, c, d })
            }
            (Flavor::Gapped { gap }, Phase::Searching) => {
                let (a, b) = self.schottky_pair(&mut rng);
                self.phase = Phase::InGap { remaining: gap };
                SlotRole::Opening(Jump::Simple { a, b })
            }
            (Flavor::Gapped { .. }, Phase::Waiting) => {
                let (c, d) = self.schottky_pair(&mut rng);
                self.phase = Phase::Searching;
                SlotRole::Closing { c, d }
            }
        };
        let product = match &role {
            SlotRole::Filler => plan.nu.as_ref().expect("fillers need nu").sample(&mut rng).clone(),
            SlotRole::Opening(jump) => jump.product(),
            SlotRole::Gap(factors) => factors.iter().fold(G::identity(), |acc, g| acc.compose(g)),
            SlotRole::Closing { c, d } => c.compose(d),
        };
        Slot { index, epsilon, role, product }
    }
}

impl<G: Group> Iterator for Scheduler<'_, G> {
    type Item = Slot<G>;

    fn next(&mut self) -> Option<Slot<G>> {
        Some(self.next_slot())
    }
}

/// A pivotal step ready for an engine: a completed block and the word that
/// follows it.
#[derive(Clone, Debug)]
pub struct BlockStep<G> {
    pub jump: Jump<G>,
    pub w: G,
}

/// Turns slots into engine steps.
///
/// A block is complete at its opening slot (simple, refined) or at its
/// closing slot (gapped); in the gapped case everything between the two
/// Schottky slots forms `ρ`. The step of a block is released once the next
/// block completes, with `w` the word between the two blocks.
#[derive(Clone, Debug)]
pub struct BlockAssembler<G> {
    gapped: bool,
    completed: usize,
    pending: Option<Jump<G>>,
    /// The prefix before the first block, then the word after the last
    /// completed block, up to the currently open block if any.
    base: G,
    open: Option<OpenBlock<G>>,
}

#[derive(Clone, Debug)]
struct OpenBlock<G> {
    a: G,
    b: G,
    rho: G,
    /// `a·b·ρ` so far.
    product: G,
}

/// What a slot changed.
#[derive(Clone, Debug)]
pub enum AssemblerEvent<G> {
    Nothing,
    /// The first block completed; the prefix `w₀` is final.
    First { prefix: G },
    /// A block completed and releases the previous one.
    Step(BlockStep<G>),
}

impl<G: Group> BlockAssembler<G> {
    pub fn new(flavor: Flavor) -> BlockAssembler<G> {
        BlockAssembler {
            gapped: matches!(flavor, Flavor::Gapped { .. }),
            completed: 0,
            pending: None,
            base: G::identity(),
            open: None,
        }
    }

    /// Number of completed blocks.
    pub fn completed(&self) -> usize {
        self.completed
    }

    /// The last completed block, not yet released.
    pub fn pending(&self) -> Option<&Jump<G>> {
        self.pending.as_ref()
    }

    /// Product of all slots after the last completed block (`w'(n)`), or
    /// of all slots so far before any block completed.
    pub fn tail(&self) -> G {
        match &self.open {
            Some(open) => self.base.compose(&open.product),
            None => self.base.clone(),
        }
    }

    fn complete(&mut self, jump: Jump<G>) -> AssemblerEvent<G> {
        self.completed += 1;
        let base = std::mem::replace(&mut self.base, G::identity());
        let event = match self.pending.take() {
            None => AssemblerEvent::First { prefix: base },
            Some(prev) => AssemblerEvent::Step(BlockStep { jump: prev, w: base }),
        };
        self.pending = Some(jump);
        event
    }

    pub fn push(&mut self, slot: &Slot<G>) -> AssemblerEvent<G> {
        match &slot.role {
            SlotRole::Filler | SlotRole::Gap(_) => {
                match &mut self.open {
                    Some(open) => {
                        open.rho = open.rho.compose(&slot.product);
                        open.product = open.product.compose(&slot.product);
                    }
                    None => self.base = self.base.compose(&slot.product),
                }
                AssemblerEvent::Nothing
            }
            SlotRole::Opening(Jump::Simple { a, b }) if self.gapped => {
                self.open = Some(OpenBlock { a: a.clone(), b: b.clone(), rho: G::identity(), product: slot.product.clone() });
                AssemblerEvent::Nothing
            }
            SlotRole::Opening(jump) => self.complete(jump.clone()),
            SlotRole::Closing { c, d } => {
                let open = self.open.take().expect("a closing slot follows an opening slot");
                self.complete(Jump::Refined { a: open.a, b: open.b, r: open.rho, c: c.clone(), d: d.clone() })
            }
        }
    }
}

/// One trajectory of the reconstruction, materialized.
#[derive(Clone, Debug)]
pub struct ScheduledTrajectory<G> {
    /// Steps per slot.
    pub n: usize,
    pub epsilons: Vec<bool>,
    pub kinds: Vec<SlotKind>,
    pub slot_products: Vec<G>,
    /// Slots `t_j` at which blocks open.
    pub times: Vec<usize>,
    /// Slots `t'_j` at which blocks complete (equal to `times` unless gapped).
    pub closing_times: Vec<usize>,
    /// Completed blocks, in order.
    pub jumps: Vec<Jump<G>>,
    /// `w₀, w₁, …`: the prefix and the words between completed blocks. The
    /// last entry is the word after the last completed block.
    pub segments: Vec<G>,
    /// Individual steps `g₀, g₁, …`, when resolved.
    pub steps: Vec<G>,
}

impl<G: Group> ScheduledTrajectory<G> {
    pub fn horizon(&self) -> usize {
        self.n * self.slot_products.len()
    }

    /// `τ(k)`: the number of blocks completed by step `k`.
    pub fn tau(&self, k: usize) -> usize {
        self.closing_times.iter().take_while(|&&t| self.n * (t + 1) <= k).count()
    }

    /// `Z_k`. Needs resolved steps unless `k` is a multiple of `N`.
    pub fn position(&self, k: usize) -> G {
        if k % self.n == 0 {
            self.slot_products[..k / self.n].iter().fold(G::identity(), |acc, g| acc.compose(g))
        } else {
            self.steps[..k].iter().fold(G::identity(), |acc, g| acc.compose(g))
        }
    }

    /// `w'(k)`: everything after block `τ(k)` up to step `k`.
    pub fn tail(&self, k: usize) -> G {
        let tau = self.tau(k);
        let start = if tau == 0 { 0 } else { self.n * (self.closing_times[tau - 1] + 1) };
        if k % self.n == 0 {
            self.slot_products[start / self.n..k / self.n].iter().fold(G::identity(), |acc, g| acc.compose(g))
        } else {
            self.steps[start..k].iter().fold(G::identity(), |acc, g| acc.compose(g))
        }
    }

    /// `w₀ · Π (block_j · w_j)` over the completed blocks.
    pub fn recomposed(&self) -> G {
        let mut acc = self.segments[0].clone();
        for (jump, w) in self.jumps.iter().zip(&self.segments[1..]) {
            acc = acc.compose(&jump.product()).compose(w);
        }
        acc
    }

    /// Writes `k,distance,epsilon,kind` rows at slot boundaries, or at every
    /// step when steps are resolved.
    pub fn write_csv<S: Space<Iso = G>, W: Write>(&self, space: &S, out: &mut W) -> Result<()> {
        writeln!(out, "k,distance,epsilon,kind")?;
        let o = space.basepoint();
        let mut z = G::identity();
        writeln!(out, "0,0,,")?;
        if self.steps.is_empty() {
            for (i, g) in self.slot_products.iter().enumerate() {
                z = z.compose(g);
                let kind = format!("{:?}", self.kinds[i]).to_lowercase();
                let d = space.dist(&o, &space.orbit(&z));
                writeln!(out, "{},{},{},{}", self.n * (i + 1), d, u8::from(self.epsilons[i]), kind)?;
            }
        } else {
            for (k, g) in self.steps.iter().enumerate() {
                z = z.compose(g);
                let d = space.dist(&o, &space.orbit(&z));
                if (k + 1) % self.n == 0 {
                    let i = k / self.n;
                    let kind = format!("{:?}", self.kinds[i]).to_lowercase();
                    writeln!(out, "{},{},{},{}", k + 1, d, u8::from(self.epsilons[i]), kind)?;
                } else {
                    writeln!(out, "{},{},,", k + 1, d)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs the scheduler for `slots` slots of trajectory `trajectory`.
///
/// With `resolve_steps`, every slot is split into its `N` individual steps:
/// gap slots carry them already, other slots are bridged conditionally on
/// their product, which keeps the steps i.i.d. with law `μ`.
pub fn schedule<G: Group>(
    plan: &DecompositionPlan<G>,
    master: u64,
    trajectory: u64,
    slots: usize,
    resolve_steps: bool,
) -> Result<ScheduledTrajectory<G>> {
    let mut scheduler = Scheduler::new(plan, master, trajectory);
    let mut assembler = BlockAssembler::new(plan.flavor);
    let table = if resolve_steps { plan.mu.power_table(plan.n, Truncation::NONE)? } else { Vec::new() };
    let mut out = ScheduledTrajectory {
        n: plan.n,
        epsilons: Vec::with_capacity(slots),
        kinds: Vec::with_capacity(slots),
        slot_products: Vec::with_capacity(slots),
        times: Vec::new(),
        closing_times: Vec::new(),
        jumps: Vec::new(),
        segments: Vec::new(),
        steps: Vec::new(),
    };
    for _ in 0..slots {
        let slot = scheduler.next_slot();
        match slot.role.kind() {
            SlotKind::Opening => {
                out.times.push(slot.index);
                if !matches!(plan.flavor, Flavor::Gapped { .. }) {
                    out.closing_times.push(slot.index);
                }
            }
            SlotKind::Closing => out.closing_times.push(slot.index),
            _ => {}
        }
        if resolve_steps {
            match &slot.role {
                SlotRole::Gap(factors) => out.steps.extend(factors.iter().cloned()),
                _ => {
                    let mut rng = stream(master, tag::WALK, &[trajectory, slot.index as u64]);
                    out.steps.extend(plan.mu.sample_bridge(&table, &slot.product, &mut rng)?);
                }
            }
        }
        match assembler.push(&slot) {
            AssemblerEvent::Nothing => {}
            AssemblerEvent::First { prefix } => out.segments.push(prefix),
            AssemblerEvent::Step(step) => {
                out.jumps.push(step.jump);
                out.segments.push(step.w);
            }
        }
        out.epsilons.push(slot.epsilon);
        out.kinds.push(slot.role.kind());
        out.slot_products.push(slot.product);
    }
    match assembler.pending().cloned() {
        Some(jump) => {
            out.jumps.push(jump);
            out.segments.push(assembler.tail());
        }
        None => out.segments.push(assembler.tail()),
    }
    Ok(out)
}

/// Draws `ρ_j`: `N·A` steps of `μ` followed by `wait` draws of `ν`, from the
/// stream keyed by `slot`.
pub fn rho_sampler<G: Group>(plan: &DecompositionPlan<G>, wait: usize, seed: u64, slot: u64) -> G {
    let mut rng = stream(seed, tag::RHO, &[slot]);
    let mut acc = G::identity();
    for _ in 0..plan.n * plan.gap() {
        acc = acc.compose(plan.mu.sample(&mut rng));
    }
    if let Some(nu) = &plan.nu {
        for _ in 0..wait {
            acc = acc.compose(nu.sample(&mut rng));
        }
    }
    acc
}
