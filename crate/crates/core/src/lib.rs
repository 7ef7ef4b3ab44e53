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

//! Random walks on Gromov-hyperbolic spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`spaces`]: the exact free-group (Cayley tree) backend and the numeric
//!   upper half-plane backends, behind the [`spaces::Space`] contract.
//! * [`geometry`]: Gromov products, chains, shadows and chain-shadow
//!   certificates.
//! * [`schottky`]: verification and ping-pong construction of Schottky sets.
//! * [`walks`]: finitely supported measures, Schottky decompositions and
//!   scheduled reconstructions of the walk.
//! * [`pivotal`]: the pivotal-time engines.
//! * [`harness`]: Monte Carlo ensembles, statistics and experiment drivers
//!   used by the `hyperwalk` command line tool.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod pivotal;
pub mod schottky;
pub mod seed;
pub mod spaces;
pub mod walks;

pub use error::{Error, Result};
