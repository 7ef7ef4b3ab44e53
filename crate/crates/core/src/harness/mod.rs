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


//! Monte Carlo ensembles, statistics and experiment drivers.

mod config;
mod domination;
mod ensemble;
mod experiments;
mod oracle;
mod output;
mod stats;

pub use config::{
    BackendSpec, DecompositionSpec, EngineKind, FreeWords, MatrixAtom, MeasureSpec, RunConfig, SchottkySpec, WordAtom,
};
pub use domination::{domination_check, DominationReport, DominationRow, LatticeLaw, ULaw, LAW_TAIL};
pub use ensemble::{
    run_ensemble, Backend, EnsembleStats, GridRow, Prepared, RunOptions, ShadowTally, Tally, TrajectoryRecord,
};
pub use experiments::{
    boundary_deviation, continuity_sweep, deviation_curve, escape_rate, uniform_backoff_experiment, BackoffRow,
    BackoffTable, BoundaryDeviation, ContinuityRow, ContinuityTable, EscapeRate, FitOutcome,
};
pub use oracle::{at_most_rn, ReflectedChain};
pub use output::{
    write_boundary_csv, write_run, write_series, write_stats_csv, RunSummary, BOUNDARY_HEADER, RESAMPLES, STATS_HEADER,
};
pub use stats::{bootstrap_mean, decay_fit, ols, quantile, wilson, DecayFit, Interval, SeriesPoint, Z95};
