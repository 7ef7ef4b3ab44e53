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

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-domain input.
    #[error("invalid input: {0}")]
    Input(String),
    /// A numeric operation left its domain of validity.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),
    /// An isometry does not have the type an operation requires.
    #[error("classification error: {0}")]
    Classification(String),
    /// A documented precondition of an operation was violated.
    #[error("contract violated: {0}")]
    Contract(String),
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("Schottky construction failed: {0}")]
    ConstructionFailed(String),
    #[error("Schottky search failed at power {deepest_power}: {reason}")]
    SearchFailed { deepest_power: usize, reason: String },
    #[error("decomposition infeasible: requested alpha {alpha} exceeds alpha_max {alpha_max}")]
    Infeasible { alpha: f64, alpha_max: f64 },
    #[error("truncation dropped mass {dropped} beyond budget {budget}")]
    Truncation { dropped: f64, budget: f64 },
    #[error("fit error: {0}")]
    Fit(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
