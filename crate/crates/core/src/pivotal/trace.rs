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

use serde::Serialize;

use crate::Result;

/// State after step `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub n: usize,
    pub pivots: usize,
    pub pivot_times: Vec<usize>,
    /// `d(o, y_{n+1}⁻)`, or `|Z_n|` for the free engine.
    pub distance: f64,
    /// The pivot lower bound for `distance`.
    pub bound: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PivotTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str = "n,pivots,pivot_times,distance,bound";

impl PivotTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// CSV with pivot times joined by `;`. Floats use the shortest
    /// round-trip form so equal traces give equal bytes.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{TRACE_HEADER}")?;
        for row in &self.rows {
            let times: Vec<String> = row.pivot_times.iter().map(|t| t.to_string()).collect();
            writeln!(out, "{},{},{},{},{}", row.n, row.pivots, times.join(";"), row.distance, row.bound)?;
        }
        Ok(())
    }

    /// `P_{n+1} ⊆ P_n ∪ {n+1}` between consecutive rows.
    pub fn stack_law_holds(&self) -> bool {
        self.rows.windows(2).all(|p| {
            p[1].pivot_times.iter().all(|t| *t == p[1].n || p[0].pivot_times.contains(t))
        })
    }

    /// Steps where `distance < bound − slack`.
    pub fn bound_violations(&self, slack: f64) -> Vec<usize> {
        self.rows.iter().filter(|r| r.distance < r.bound - slack).map(|r| r.n).collect()
    }
}
