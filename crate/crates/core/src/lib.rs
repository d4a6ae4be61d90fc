// Copyright 2026 The raman-xtalk Authors
// SPDX-License-Identifier: Apache-2.0

//! Simulation and analysis of optical crosstalk in individually addressed
//! trapped-ion chains driven by two-tone Raman beams.

pub mod chain;
pub mod config;
pub mod dynamics;
pub mod experiments;
pub mod freq_plan;
pub mod gates;
pub mod linalg;
pub mod report;
pub mod stats;
pub mod verify;
