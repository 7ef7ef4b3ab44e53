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


//! Pivotal-time engines.
//!
//! * [`FreePivotState`]: the exact definition for `s₁w₁⋯sₙwₙ` in a free
//!   group, with `s_i` single generators.
//! * [`PivotEngine`]: the simple and refined models over any [`Space`],
//!   where each jump is made of Schottky elements and pivotal records carry
//!   chain-shadow certificates.
//!
//! [`Space`]: crate::spaces::Space

mod engine;
mod free;
mod trace;

pub use engine::{
    EngineParams, InvariantReport, MarkerSet, Model, Peek, PivotEngine, PivotRecord, PivotalStack, StepOutcome,
};
pub use free::{free_trace, FreePivotState, FreeRecord, FreeStepOutcome};
pub use trace::{PivotTrace, TraceRow, TRACE_HEADER};
