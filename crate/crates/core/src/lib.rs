// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

//! Upload-bandwidth estimation with cooperating helper peers.
//!
//! The source sends TAB-stamped probe frames round-robin to its helpers;
//! each helper turns inter-arrival times into throughput samples, filters
//! outliers and reports an average back. The source aggregates the reports
//! into a capacity estimate. The same machinery drives the
//! available-bandwidth search and ping-based headroom checks.
//!
//! [`netsim`] is a deterministic uplink simulator that runs the engines
//! end to end, and [`alloc`] solves the ring-constrained allocation problem.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod exec;
pub mod helper;
pub mod netsim;
pub mod protocol;
pub mod sender;
