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

//! Pivotal times for `Z_n = s₁w₁⋯sₙwₙ` in a free group, read directly on the
//! Cayley tree.

use super::trace::{PivotTrace, TraceRow};
use crate::spaces::{tree_dist, GroupWord, Letter};
use crate::{Error, Result};

/// A pivotal time `k` and its guard vertex `Z_{k−1}s_k`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FreeRecord {
    pub time: usize,
    pub guard: GroupWord,
    /// `Z_{k−1}s_k(w_k)₀`. Every later position has this prefix while the
    /// record survives.
    pub entry: GroupWord,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FreeStepOutcome {
    pub time: usize,
    pub pivotal: bool,
    pub popped: usize,
}

/// `Z_n` with its pivotal stack.
#[derive(Clone, Debug, Default)]
pub struct FreePivotState {
    current: GroupWord,
    stack: Vec<FreeRecord>,
    time: usize,
}

/// `v ∈ [p, q]`, i.e. `(p, q)_v = 0`.
fn on_segment(v: &GroupWord, p: &GroupWord, q: &GroupWord) -> bool {
    tree_dist(p, v) + tree_dist(v, q) == tree_dist(p, q)
}

impl FreePivotState {
    pub fn new() -> FreePivotState {
        FreePivotState::default()
    }

    pub fn current(&self) -> &GroupWord {
        &self.current
    }

    pub fn stack(&self) -> &[FreeRecord] {
        &self.stack
    }

    /// `A_n = |P_n|`.
    pub fn pivots(&self) -> usize {
        self.stack.len()
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn pivot_times(&self) -> Vec<usize> {
        self.stack.iter().map(|r| r.time).collect()
    }

    /// Appends `s` then `w` to the path.
    ///
    /// Records are popped from the top while their guard lies on one of the
    /// two segments just traversed. Guards are nested along the path, so a
    /// surviving record protects every record below it.
    pub fn step(&mut self, s: Letter, w: &GroupWord) -> Result<FreeStepOutcome> {
        if w.is_identity() {
            return Err(Error::Input("the word following a generator must be nontrivial".into()));
        }
        let n = self.time + 1;
        let back = s.inverse();
        let local = self.current.last() != Some(back) && w.first() != Some(back);

        let mut mid = self.current.clone();
        mid.push(s);
        let end = mid.concat(w);

        let mut popped = 0;
        while let Some(top) = self.stack.last() {
            if on_segment(&top.guard, &self.current, &mid) || on_segment(&top.guard, &mid, &end) {
                self.stack.pop();
                popped += 1;
            } else {
                break;
            }
        }
        if local {
            debug_assert_eq!(popped, 0, "a locally geodesic step cannot come back");
            let mut entry = mid.clone();
            entry.push(w.first().expect("w is nontrivial"));
            self.stack.push(FreeRecord { time: n, guard: mid, entry });
        }
        self.current = end;
        self.time = n;
        Ok(FreeStepOutcome { time: n, pivotal: local, popped })
    }

    /// Every surviving record still has the current position in its subtree,
    /// and record times increase strictly.
    pub fn check_invariants(&self) -> bool {
        let times_ok = self.stack.windows(2).all(|p| p[0].time < p[1].time);
        let trapped = self.stack.iter().all(|r| self.current.letters().starts_with(r.entry.letters()));
        times_ok && trapped && self.current.len() >= self.stack.len()
    }

    pub fn trace_row(&self) -> TraceRow {
        TraceRow {
            n: self.time,
            pivots: self.stack.len(),
            pivot_times: self.pivot_times(),
            distance: self.current.len() as f64,
            bound: self.stack.len() as f64,
        }
    }
}

/// Runs the free engine over `(s_i, w_i)` pairs and records every step.
pub fn free_trace<'a, I>(steps: I) -> Result<(FreePivotState, PivotTrace)>
where
    I: IntoIterator<Item = (Letter, &'a GroupWord)>,
{
    let mut state = FreePivotState::new();
    let mut trace = PivotTrace::default();
    for (s, w) in steps {
        state.step(s, w)?;
        trace.rows.push(state.trace_row());
    }
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> GroupWord {
        GroupWord::parse(s).unwrap()
    }

    const A: Letter = Letter(0);

    #[test]
    fn straight_path_is_all_pivots() {
        let b = w("b");
        let mut state = FreePivotState::new();
        for n in 1..=50 {
            let out = state.step(A, &b).unwrap();
            assert!(out.pivotal);
            assert_eq!(state.current().len(), 2 * n);
            assert_eq!(state.pivots(), n);
        }
        assert!(state.check_invariants());
    }

    #[test]
    fn immediate_cancellation() {
        let mut state = FreePivotState::new();
        let out = state.step(A, &w("A")).unwrap();
        assert!(!out.pivotal);
        assert!(state.current().is_identity());
        assert_eq!(state.pivots(), 0);
    }

    #[test]
    fn trivial_word_is_rejected() {
        let mut state = FreePivotState::new();
        assert!(matches!(state.step(A, &GroupWord::identity()), Err(Error::Input(_))));
    }

    #[test]
    fn inverse_of_the_prefix_returns_home() {
        let mut state = FreePivotState::new();
        let letters = [Letter(0), Letter(2), Letter(4), Letter(0), Letter(3)];
        for (i, &s) in letters.iter().enumerate() {
            let mut prefix = state.current().clone();
            prefix.push(s);
            let word = if prefix.is_identity() { w("a") } else { prefix.inverse() };
            state.step(s, &word).unwrap();
            assert!(state.current().is_identity(), "step {i}");
            assert_eq!(state.pivots(), 0);
        }
    }

    #[test]
    fn backtracking_pops_exactly_the_crossed_guards() {
        let mut state = FreePivotState::new();
        for _ in 0..3 {
            state.step(A, &w("b")).unwrap();
        }
        // Z = ababab. Going back to `abab` crosses the guard `ababa` only.
        let out = state.step(Letter(2), &w("BBA")).unwrap();
        assert_eq!(state.current(), &w("abab"));
        assert_eq!(out.popped, 1);
        assert_eq!(state.pivot_times(), vec![1, 2]);
        // Landing on a guard counts as coming back.
        let out = state.step(Letter(3), &w("c")).unwrap();
        assert_eq!(state.current(), &w("abac"));
        assert_eq!(out.popped, 1);
        assert_eq!(state.pivot_times(), vec![1]);
    }

    /// Reference: a time is pivotal iff it was locally geodesic and no later
    /// segment of the whole path meets its guard.
    fn pivots_by_definition(steps: &[(Letter, GroupWord)]) -> Vec<usize> {
        let mut z = GroupWord::identity();
        let mut segments = Vec::new();
        let mut candidates = Vec::new();
        for (k, (s, word)) in steps.iter().enumerate() {
            let back = s.inverse();
            let local = z.last() != Some(back) && word.first() != Some(back);
            let mut mid = z.clone();
            mid.push(*s);
            let end = mid.concat(word);
            segments.push((k + 1, z.clone(), mid.clone()));
            segments.push((k + 1, mid.clone(), end.clone()));
            if local {
                candidates.push((k + 1, mid));
            }
            z = end;
        }
        candidates
            .into_iter()
            .filter(|(k, guard)| {
                segments.iter().filter(|(t, _, _)| t > k).all(|(_, p, q)| !on_segment(guard, p, q))
            })
            .map(|(k, _)| k)
            .collect()
    }

    fn arb_steps() -> impl Strategy<Value = Vec<(Letter, GroupWord)>> {
        let letter = (0u16..6).prop_map(Letter);
        let word = prop::collection::vec(0u16..6, 1..6)
            .prop_map(|ls| GroupWord::from_letters(ls.into_iter().map(Letter)))
            .prop_filter("nontrivial", |w| !w.is_identity());
        prop::collection::vec((letter, word), 1..40)
    }

    proptest! {
        #[test]
        fn stack_matches_the_definition(steps in arb_steps()) {
            let mut state = FreePivotState::new();
            let mut previous: Vec<usize> = Vec::new();
            for (i, (s, word)) in steps.iter().enumerate() {
                state.step(*s, word).unwrap();
                let now = state.pivot_times();
                // P_{n+1} ⊆ P_n ∪ {n+1}.
                prop_assert!(now.iter().all(|t| previous.contains(t) || *t == i + 1));
                prop_assert!(state.check_invariants());
                prop_assert_eq!(&now, &pivots_by_definition(&steps[..=i]));
                previous = now;
            }
        }
    }
}
