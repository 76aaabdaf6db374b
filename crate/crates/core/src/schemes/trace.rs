//! Per-iteration records of a run.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::metric::PrimalVector;
use crate::subsolver::PsiState;

/// Which test accepted the step that produced a row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcceptTag {
    Start,
    GradStop,
    SufficientDecrease,
    AccelInequality,
    FixedStep,
    MonitorGradStop,
    MonitorSufficientDecrease,
    MonitorFixedStep,
    Restart,
}

impl AcceptTag {
    pub const ALL: [AcceptTag; 9] = [
        AcceptTag::Start,
        AcceptTag::GradStop,
        AcceptTag::SufficientDecrease,
        AcceptTag::AccelInequality,
        AcceptTag::FixedStep,
        AcceptTag::MonitorGradStop,
        AcceptTag::MonitorSufficientDecrease,
        AcceptTag::MonitorFixedStep,
        AcceptTag::Restart,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AcceptTag::Start => "start",
            AcceptTag::GradStop => "grad_stop",
            AcceptTag::SufficientDecrease => "sufficient_decrease",
            AcceptTag::AccelInequality => "accel_inequality",
            AcceptTag::FixedStep => "fixed_step",
            AcceptTag::MonitorGradStop => "monitor_grad_stop",
            AcceptTag::MonitorSufficientDecrease => "monitor_sufficient_decrease",
            AcceptTag::MonitorFixedStep => "monitor_fixed_step",
            AcceptTag::Restart => "restart",
        }
    }

    /// Rows produced by the monitor sequence of the two-phase methods.
    pub fn is_monitor(&self) -> bool {
        matches!(
            self,
            AcceptTag::MonitorGradStop
                | AcceptTag::MonitorSufficientDecrease
                | AcceptTag::MonitorFixedStep
        )
    }
}

impl fmt::Display for AcceptTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AcceptTag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AcceptTag::ALL
            .iter()
            .find(|t| t.as_str() == s)
            .copied()
            .ok_or_else(|| format!("unknown accept tag `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    /// `f̃` at the row's point (`F̃_δ` for restart rows).
    pub f_value: f64,
    /// Dual norm of `∇f̃` at the row's point.
    pub grad_norm: f64,
    /// Regularization constant after the step (`H_t`, or the fixed `M`).
    pub h: f64,
    /// `H̃_t` of the accelerated adaptive loop.
    pub htilde: Option<f64>,
    /// Trials spent on the step that produced the row.
    pub inner_trials: usize,
    pub oracle_calls_cum: u64,
    pub tag: AcceptTag,
    pub x: Option<PrimalVector>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Main,
    Monitor,
    Correction,
}

/// Data of an accepted step, sufficient to re-check its certificate and its
/// acceptance test.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAudit {
    /// Index of the trace row produced by this step.
    pub row: usize,
    pub phase: Phase,
    /// Trial index `i` of the accepted step.
    pub trial: usize,
    /// Regularization used by the accepted trial (`2^i H_t` or `M`).
    pub reg: f64,
    pub alpha: f64,
    pub center: PrimalVector,
    pub candidate: PrimalVector,
    pub g_phi: Option<PrimalVector>,
    pub model_increment: f64,
    pub residual: f64,
    pub step_norm: f64,
    pub theta: f64,
    pub tag: AcceptTag,
    /// Sides of the acceptance test `lhs ≥ rhs` (`NaN` when the step was
    /// accepted by the gradient stop or without a test).
    pub test_lhs: f64,
    pub test_rhs: f64,
}

/// Coefficients of one accelerated step.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelRecord {
    /// `t + 1`: the estimating function below is `ψ_{t+1}`.
    pub t: usize,
    pub a: f64,
    /// `A_{t+1}`.
    pub big_a: f64,
    /// `min ψ_{t+1} = ψ_{t+1}(v_{t+1})`.
    pub psi_min: f64,
    pub psi: PsiState,
    /// Row of `x_{t+1}` in the trace.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartRecord {
    pub k: usize,
    /// `y_k`, start of the inner accelerated run.
    pub y: PrimalVector,
    /// `u_k`.
    pub u: PrimalVector,
    /// `‖∇F̃_δ(u_k)‖_*`.
    pub grad_regularized: f64,
    /// `‖∇f̃(u_k)‖_*`.
    pub grad_original: f64,
    /// `F̃_δ(y_k)`.
    pub value_y: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartInfo {
    pub delta: f64,
    pub h_delta: f64,
    /// Inner run length `m`.
    pub m: usize,
    pub records: Vec<RestartRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    /// Fixed-length runs that are not stopped by a gradient test.
    Completed,
    /// The model residual reached working precision before the gradient
    /// target; the last iterate is kept.
    Stalled,
    Error(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub scheme: String,
    pub n: usize,
    pub p: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub h0: f64,
    pub htilde0: f64,
    pub theta: f64,
    pub nonconvex: bool,
    /// Fixed regularization of the constant-`M` schemes.
    pub fixed_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub records: Vec<TraceRecord>,
    pub audits: Vec<StepAudit>,
    pub accel: Vec<AccelRecord>,
    pub restart: Option<RestartInfo>,
    pub status: RunStatus,
}

impl RunTrace {
    pub fn new(meta: RunMeta) -> Self {
        Self {
            meta,
            records: Vec::new(),
            audits: Vec::new(),
            accel: Vec::new(),
            restart: None,
            status: RunStatus::BudgetExhausted,
        }
    }

    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.records.last().map_or(0, |r| r.oracle_calls_cum)
    }

    pub fn min_grad_norm(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.grad_norm)
            .fold(f64::INFINITY, f64::min)
    }

    /// Rows of the main sequence (the start row included).
    pub fn main_rows(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| !r.tag.is_monitor())
    }

    /// Rows of the monitor sequence, preceded by the start row.
    pub fn monitor_rows(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.tag == AcceptTag::Start || r.tag.is_monitor())
    }

    /// Number of outer iterations performed.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }
}
