//! Grid frequency-response simulation with a distributed, irradiance-aware
//! demand-response controller.
//!
//! Each demand-response substation estimates system inertia from its own
//! irradiance sensor and load measurement, turns the ROCOF seen at relay
//! arming into a local shed amount, and acts without communication. The
//! simulator compares that scheme against a conventional adaptive UFLS that
//! assumes the inertia of a fixed benchmark operating point.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimation;
pub mod grid_sim;
pub mod pv_model;
pub mod report;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Sim(#[from] grid_sim::SimError),
    #[error(transparent)]
    Report(#[from] report::ReportError),
    #[error(transparent)]
    Batch(#[from] Box<grid_sim::BatchError>),
}

/// Coarse failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numeric,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Scenario(e) if e.is_io() => ErrorKind::Io,
            Error::Scenario(_) => ErrorKind::Validation,
            Error::Sim(e) if e.is_numeric() => ErrorKind::Numeric,
            Error::Sim(_) => ErrorKind::Validation,
            Error::Report(e) => e.kind(),
            Error::Batch(b) => b.source.kind(),
        }
    }
}
