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


//! Measures on isometries, Schottky decompositions of convolution powers
//! and the slot-by-slot reconstruction of a walk from a decomposition.

mod measure;
mod plan;
mod schedule;

pub use measure::{convolve, DiscreteMeasure, Truncation, MASS_TOLERANCE};
pub use plan::{
    alpha_max, decompose, non_elementary_heuristic, schottky_source, DecompositionPlan, Flavor, NonElementarity,
    PlanSummary, IDENTITY_TOLERANCE,
};
pub use schedule::{
    rho_sampler, schedule, AssemblerEvent, BlockAssembler, BlockStep, Jump, ScheduledTrajectory, Scheduler, Slot,
    SlotKind, SlotRole,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::SchottkySet;
    use crate::spaces::{FreeTree, GroupWord, Space};
    use std::collections::BTreeMap;

    fn tree_plan(alpha: f64, flavor: Flavor, hold: f64) -> DecompositionPlan<GroupWord> {
        let mu = DiscreteMeasure::lazy_generators(2, hold).unwrap();
        let s = SchottkySet::new(FreeTree::new(2).unwrap().generators(), 0.5, 0.0, 1.0).unwrap();
        let n = if flavor == Flavor::Refined { 5 } else { 2 };
        decompose(&mu, n, &s, alpha, flavor).unwrap()
    }

    #[test]
    fn alpha_one_makes_every_slot_schottky() {
        let plan = tree_plan(1.0, Flavor::Simple, 0.0);
        let t = schedule(&plan, 3, 0, 20, false).unwrap();
        assert!(t.epsilons.iter().all(|&e| e));
        assert_eq!(t.times, (0..20).collect::<Vec<_>>());
        for k in 0..=40 {
            assert_eq!(t.tau(k), k / 2);
        }
        assert!(t.segments[1..].iter().all(GroupWord::is_identity));
    }

    #[test]
    fn first_slot_has_the_law_of_the_power() {
        let plan = tree_plan(0.1, Flavor::Simple, 0.5);
        // Exact law of γ₀ from the sampling recipe.
        let mut exact: BTreeMap<GroupWord, f64> = BTreeMap::new();
        for (a, pa) in plan.mu_s.atoms() {
            for (b, pb) in plan.mu_s.atoms() {
                *exact.entry(a.concat(b)).or_default() += plan.alpha * pa * pb;
            }
        }
        for (g, p) in plan.nu.as_ref().unwrap().atoms() {
            *exact.entry(g.clone()).or_default() += (1.0 - plan.alpha) * p;
        }
        for (g, p) in &exact {
            assert!((p - plan.mu_n.prob(g)).abs() < 1e-12, "{g}");
        }
        assert_eq!(exact.len(), plan.mu_n.len());
        // Empirical check of the scheduler itself.
        let trials = 50_000;
        let mut counts: BTreeMap<GroupWord, usize> = BTreeMap::new();
        for i in 0..trials {
            let mut s = Scheduler::new(&plan, 11, i);
            *counts.entry(s.next_slot().product).or_default() += 1;
        }
        for (g, p) in plan.mu_n.atoms() {
            let f = *counts.get(g).unwrap_or(&0) as f64 / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            assert!((f - p).abs() < 5.0 * se + 1e-4, "{g}: {f} vs {p}");
        }
    }

    #[test]
    fn gapped_blocks_keep_their_gap() {
        let plan = tree_plan(0.2, Flavor::Gapped { gap: 3 }, 0.5);
        for traj in 0..50 {
            let t = schedule(&plan, 9, traj, 120, false).unwrap();
            assert!(t.closing_times.len() <= t.times.len());
            for (open, close) in t.times.iter().zip(&t.closing_times) {
                assert!(close - open > 3);
            }
            for j in 1..t.closing_times.len() {
                assert!(t.times[j] > t.closing_times[j - 1]);
            }
            assert_eq!(t.recomposed(), t.position(t.horizon()));
            assert!(t.jumps.iter().all(|j| matches!(j, Jump::Refined { .. })));
        }
    }

    #[test]
    fn segments_recompose_the_walk() {
        for flavor in [Flavor::Simple, Flavor::Refined] {
            let plan = tree_plan(0.05, flavor, 0.3);
            for traj in 0..50 {
                let t = schedule(&plan, 5, traj, 60, true).unwrap();
                let z = t.position(t.horizon());
                assert_eq!(t.recomposed(), z);
                assert_eq!(t.steps.iter().fold(GroupWord::identity(), |acc, g| acc.concat(g)), z);
                for k in 0..=t.horizon() {
                    let tau = t.tau(k);
                    let head = t.segments[0].clone();
                    let mut acc = head;
                    for j in 0..tau {
                        acc = acc.concat(&t.jumps[j].product());
                        if j + 1 < tau {
                            acc = acc.concat(&t.segments[j + 1]);
                        }
                    }
                    if tau == 0 {
                        assert_eq!(t.tail(k), t.position(k));
                    } else {
                        assert_eq!(acc.concat(&t.tail(k)), t.position(k), "k = {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn schedules_are_deterministic() {
        let plan = tree_plan(0.2, Flavor::Gapped { gap: 2 }, 0.5);
        let a = schedule(&plan, 77, 4, 100, true).unwrap();
        let b = schedule(&plan, 77, 4, 100, true).unwrap();
        assert_eq!(a.slot_products, b.slot_products);
        assert_eq!(a.steps, b.steps);
        assert_eq!(a.epsilons, b.epsilons);
        let c = schedule(&plan, 78, 4, 100, true).unwrap();
        assert_ne!(a.slot_products, c.slot_products);
    }

    #[test]
    fn trajectory_csv() {
        let plan = tree_plan(0.2, Flavor::Simple, 0.5);
        let t = schedule(&plan, 1, 0, 10, true).unwrap();
        let mut out = Vec::new();
        t.write_csv(&FreeTree::new(2).unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("k,distance,epsilon,kind\n0,0,,\n"));
        assert_eq!(text.lines().count(), 22);
    }

    #[test]
    fn rho_without_wait_is_a_power_of_mu() {
        let plan = tree_plan(0.2, Flavor::Gapped { gap: 5 }, 0.0);
        let tree = FreeTree::new(2).unwrap();
        let draws = 4_000;
        let rho_mean: f64 =
            (0..draws).map(|i| tree.displacement(&rho_sampler(&plan, 0, 3, i))).sum::<f64>() / draws as f64;
        let mut rng = crate::seed::stream(4, 0, &[]);
        let direct_mean: f64 = (0..draws)
            .map(|_| {
                let z = (0..10).fold(GroupWord::identity(), |acc, _| acc.concat(plan.mu.sample(&mut rng)));
                z.len() as f64
            })
            .sum::<f64>()
            / draws as f64;
        // Both estimate E|Z_10| for the simple walk on F₂ (about 5.5).
        assert!((rho_mean - direct_mean).abs() < 0.15, "{rho_mean} vs {direct_mean}");
        assert!((rho_mean / 10.0 - 0.55).abs() < 0.05);
    }

    #[test]
    fn tau_lags_less_often_as_n_grows() {
        let plan = tree_plan(0.25, Flavor::Gapped { gap: 1 }, 0.5);
        let trials = 2_000;
        let eta = 0.3;
        let freq = |slots: usize| {
            let mut hits = 0;
            for traj in 0..trials {
                let t = schedule(&plan, 21, traj, slots, false).unwrap();
                let n = t.horizon();
                // Mean block length in slots: two geometric waits and the gap.
                let block = plan.gap() as f64 + 2.0 / plan.alpha;
                if (t.tau(n) as f64) <= (1.0 - eta) * n as f64 / (plan.n as f64 * block) {
                    hits += 1;
                }
            }
            hits as f64 / trials as f64
        };
        let (f1, f2, f3) = (freq(10), freq(40), freq(120));
        assert!(f1 >= f2 && f2 >= f3, "{f1} {f2} {f3}");
        assert!(f3 < f1);
    }
}
