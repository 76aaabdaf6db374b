//! Replays the explicit complexity bounds of the schemes against measured
//! traces.
//!
//! Each bound is checked at every iteration where its hypotheses hold. A
//! bound whose constants are missing from the [`ReplayContext`] is reported
//! as skipped with the reason, never as satisfied.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use tensormin::schemes::{n_cap, n_tilde_cap, restart_count_bound, AccelRecord, TraceRecord};
use tensormin::subsolver::{solve_at_coefficient, PsiState};
use tensormin::{factorial, CompositePart, MetricSpace};

use crate::config::{ConfigError, SchemeName};

/// Relative slack of every real-valued comparison.
pub const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundTag {
    /// Oracle calls of the adaptive method after `T` iterations.
    OracleCalls,
    /// Caps on the adaptive regularization constants `H_t` and `H̃_t`.
    RegularizationCap,
    /// Minimal gradient norm of the adaptive method after the transient `m`.
    GradientRate,
    /// Residual rate of the main sequence of the accelerated adaptive method.
    AcceleratedValueRate,
    /// Minimal monitor gradient norm of the accelerated adaptive method.
    TwoPhaseGradientRate,
    /// Iteration count of the composite method before `‖∇f̃‖_* ≤ ε`.
    CompositeIterationCount,
    /// Minimal monitor gradient norm of the accelerated composite method.
    CompositeTwoPhaseGradientRate,
    /// Number of restarts before `‖∇F̃_δ‖_* ≤ ε/2`.
    RestartCount,
    /// Residual rate of the fixed-constant accelerated method.
    EstimatingValueRate,
    /// Lower bound on the accumulated coefficients `A_t`.
    CoefficientGrowth,
    /// `A_t f̃(x_t) ≤ min ψ_t`.
    EstimatingMinimum,
    /// `ψ_t(x*) ≤ A_t f̃(x*) + ‖x* − x₀‖^q/q`.
    EstimatingMajorant,
}

impl BoundTag {
    pub const ALL: [BoundTag; 12] = [
        BoundTag::OracleCalls,
        BoundTag::RegularizationCap,
        BoundTag::GradientRate,
        BoundTag::AcceleratedValueRate,
        BoundTag::TwoPhaseGradientRate,
        BoundTag::CompositeIterationCount,
        BoundTag::CompositeTwoPhaseGradientRate,
        BoundTag::RestartCount,
        BoundTag::EstimatingValueRate,
        BoundTag::CoefficientGrowth,
        BoundTag::EstimatingMinimum,
        BoundTag::EstimatingMajorant,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BoundTag::OracleCalls => "oracle_calls",
            BoundTag::RegularizationCap => "regularization_cap",
            BoundTag::GradientRate => "gradient_rate",
            BoundTag::AcceleratedValueRate => "accelerated_value_rate",
            BoundTag::TwoPhaseGradientRate => "two_phase_gradient_rate",
            BoundTag::CompositeIterationCount => "composite_iteration_count",
            BoundTag::CompositeTwoPhaseGradientRate => "composite_two_phase_gradient_rate",
            BoundTag::RestartCount => "restart_count",
            BoundTag::EstimatingValueRate => "estimating_value_rate",
            BoundTag::CoefficientGrowth => "coefficient_growth",
            BoundTag::EstimatingMinimum => "estimating_minimum",
            BoundTag::EstimatingMajorant => "estimating_majorant",
        }
    }

    /// Parses a comma-separated list; `all` selects every bound.
    pub fn parse_list(s: &str) -> Result<Vec<BoundTag>, ConfigError> {
        if s.trim() == "all" {
            return Ok(BoundTag::ALL.to_vec());
        }
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for BoundTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundTag {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BoundTag::ALL
            .iter()
            .find(|t| t.as_str() == s)
            .copied()
            .ok_or_else(|| ConfigError::new("bounds", format!("unknown bound `{s}`")))
    }
}

/// Restart data of a regularize-restart run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartContext {
    pub delta: f64,
    pub h_delta: f64,
    pub m: usize,
    /// `R ≥ ‖x₀ − x*‖`.
    pub distance_bound: Option<f64>,
    /// `S ≥ f̃(x₀) − f̃*`.
    pub residual_bound: Option<f64>,
}

/// Constants a replay may need. Absent values make the bounds that need
/// them skip.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplayContext {
    pub scheme: Option<SchemeName>,
    pub p: Option<usize>,
    /// Exponent `α` of the model regularization.
    pub alpha: Option<f64>,
    /// Hölder exponent `ν` of the declared constant.
    pub nu: Option<f64>,
    /// `H_{f,p}(ν)`.
    pub holder_constant: Option<f64>,
    /// Whether the run used `α = ν` (otherwise the universal `α = 1`).
    pub known_nu: bool,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    pub h0: Option<f64>,
    pub htilde0: Option<f64>,
    /// Exact optimal value of the traced objective.
    pub f_star: Option<f64>,
    /// A lower bound on the optimal value, used where a lower bound keeps
    /// the check valid.
    pub f_star_lower: Option<f64>,
    /// Upper bound on `‖x₀ − x*‖`.
    pub distance: Option<f64>,
    /// `D₀ ≥ max{‖x − x*‖ : f(x) ≤ f(x₀)}`.
    pub level_radius: Option<f64>,
    /// Fixed regularization constant `M` of the constant-`M` schemes.
    pub fixed_m: Option<f64>,
    pub minimizer: Option<Vec<f64>>,
    #[serde(default)]
    pub composite: CompositePart,
    pub restart: Option<RestartContext>,
}

/// One accelerated step, as persisted next to a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccelRow {
    pub t: usize,
    pub a: f64,
    pub big_a: f64,
    pub psi_min: f64,
    /// Trace row of `x_t`.
    pub row: usize,
    pub psi: PsiState,
}

impl From<&AccelRecord> for AccelRow {
    fn from(r: &AccelRecord) -> Self {
        Self {
            t: r.t,
            a: r.a,
            big_a: r.big_a,
            psi_min: r.psi_min,
            row: r.row,
            psi: r.psi.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundPoint {
    /// Iteration index the comparison refers to.
    pub index: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum BoundStatus {
    Satisfied,
    Violated,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub tag: BoundTag,
    pub points: Vec<BoundPoint>,
    pub status: BoundStatus,
    /// `min (rhs − lhs)` over the points.
    pub worst_margin: Option<f64>,
}

impl BoundReport {
    pub fn satisfied(&self) -> bool {
        self.status == BoundStatus::Satisfied
    }

    pub fn violated(&self) -> bool {
        self.status == BoundStatus::Violated
    }

    fn skipped(tag: BoundTag, reason: impl Into<String>) -> Self {
        Self {
            tag,
            points: Vec::new(),
            status: BoundStatus::Skipped(reason.into()),
            worst_margin: None,
        }
    }
}

impl fmt::Display for BoundReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.status {
            BoundStatus::Skipped(r) => write!(f, "{}: skipped ({r})", self.tag),
            s => {
                let word = if *s == BoundStatus::Satisfied { "satisfied" } else { "VIOLATED" };
                write!(
                    f,
                    "{}: {word} at {} points, worst margin {:.6e}",
                    self.tag,
                    self.points.len(),
                    self.worst_margin.unwrap_or(f64::NAN)
                )
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Compare {
    /// `lhs ≤ rhs` up to [`SLACK`] relative to the larger side.
    Real,
    /// Integer `lhs` against `⌊rhs⌋`, guarding only against rounding of
    /// `rhs` itself.
    Integer,
}

fn holds(lhs: f64, rhs: f64, mode: Compare) -> bool {
    match mode {
        Compare::Real => lhs <= rhs + SLACK * lhs.abs().max(rhs.abs()),
        Compare::Integer => lhs <= (rhs + 1e-9 * rhs.abs().max(1.0)).floor(),
    }
}

fn finish(tag: BoundTag, points: Vec<BoundPoint>, mode: Compare) -> BoundReport {
    if points.is_empty() {
        return BoundReport::skipped(tag, "no iteration of the trace meets the hypotheses");
    }
    let ok = points.iter().all(|p| holds(p.lhs, p.rhs, mode));
    let worst = points.iter().map(|p| p.rhs - p.lhs).fold(f64::INFINITY, f64::min);
    BoundReport {
        tag,
        points,
        status: if ok {
            BoundStatus::Satisfied
        } else {
            BoundStatus::Violated
        },
        worst_margin: Some(worst),
    }
}

type Need<T> = Result<T, String>;

fn need<T: Copy>(v: Option<T>, what: &str) -> Need<T> {
    v.ok_or_else(|| format!("missing {what}"))
}

struct Data<'a> {
    records: &'a [TraceRecord],
    accel: Option<&'a [AccelRow]>,
    ctx: &'a ReplayContext,
}

impl Data<'_> {
    fn scheme(&self, allowed: &[SchemeName]) -> Need<SchemeName> {
        let s = need(self.ctx.scheme, "scheme name")?;
        if allowed.contains(&s) {
            Ok(s)
        } else {
            Err(format!("does not apply to {s}"))
        }
    }

    fn epsilon_unit(&self) -> Need<f64> {
        let e = need(self.ctx.epsilon, "epsilon")?;
        if e > 0.0 && e < 1.0 {
            Ok(e)
        } else {
            Err("constants require ε ∈ (0,1)".into())
        }
    }

    fn p(&self) -> Need<usize> {
        need(self.ctx.p, "order p")
    }

    fn q_alpha(&self) -> Need<f64> {
        Ok(self.p()? as f64 + need(self.ctx.alpha, "model exponent alpha")?)
    }

    fn q_nu(&self) -> Need<f64> {
        Ok(self.p()? as f64 + need(self.ctx.nu, "Hölder exponent nu")?)
    }

    fn holder(&self) -> Need<(f64, f64)> {
        Ok((
            need(self.ctx.nu, "Hölder exponent nu")?,
            need(self.ctx.holder_constant, "Hölder constant H")?,
        ))
    }

    /// `max{H₀, N_ν(ε)}`.
    fn h_cap(&self, eps: f64) -> Need<f64> {
        let (nu, h) = self.holder()?;
        let theta = need(self.ctx.theta, "theta")?;
        let n = n_cap(self.p()?, nu, h, theta, eps, self.ctx.known_nu);
        Ok(need(self.ctx.h0, "H0")?.max(n))
    }

    /// `max{H̃₀, Ñ_ν(ε)}`.
    fn htilde_cap(&self, eps: f64) -> Need<f64> {
        let (nu, h) = self.holder()?;
        let theta = need(self.ctx.theta, "theta")?;
        let n = n_tilde_cap(self.p()?, nu, h, theta, eps, self.ctx.known_nu);
        Ok(need(self.ctx.htilde0, "Htilde0")?.max(n))
    }

    fn main_rows(&self) -> Vec<&TraceRecord> {
        self.records.iter().filter(|r| !r.tag.is_monitor()).collect()
    }

    fn monitor_rows(&self) -> Vec<&TraceRecord> {
        self.records
            .iter()
            .filter(|r| r.tag == tensormin::schemes::AcceptTag::Start || r.tag.is_monitor())
            .collect()
    }
}

/// Number of leading rows whose gradient norm exceeds `eps`.
fn segment(rows: &[&TraceRecord], eps: f64) -> usize {
    rows.iter().take_while(|r| r.grad_norm > eps).count()
}

fn oracle_calls(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg1])?;
    let eps = d.epsilon_unit()?;
    let cap = d.h_cap(eps)?;
    let h0 = need(d.ctx.h0, "H0")?;
    let rows = d.main_rows();
    let seg = segment(&rows, eps);
    Ok(rows[..seg]
        .iter()
        .map(|r| BoundPoint {
            index: r.iter,
            lhs: r.oracle_calls_cum as f64,
            rhs: 2.0 * r.iter as f64 + cap.log2() - h0.log2(),
        })
        .collect())
}

fn regularization_cap(d: &Data) -> Need<Vec<BoundPoint>> {
    let s = d.scheme(&[SchemeName::Alg1, SchemeName::Alg2])?;
    let eps = d.epsilon_unit()?;
    let cap = d.h_cap(eps)?;
    let mut pts = Vec::new();
    if s == SchemeName::Alg1 {
        let rows = d.main_rows();
        let seg = segment(&rows, eps);
        pts.extend(rows[..seg].iter().map(|r| BoundPoint {
            index: r.iter,
            lhs: r.h,
            rhs: cap,
        }));
        return Ok(pts);
    }
    let tcap = d.htilde_cap(eps)?;
    let main = d.main_rows();
    let seg = segment(&main, eps);
    for r in &main[..seg] {
        pts.push(BoundPoint {
            index: r.iter,
            lhs: need(r.htilde, "Htilde column")?,
            rhs: tcap,
        });
    }
    let mon = d.monitor_rows();
    let seg = segment(&mon, eps);
    pts.extend(mon[..seg].iter().map(|r| BoundPoint {
        index: r.iter,
        lhs: r.h,
        rhs: cap,
    }));
    Ok(pts)
}

fn gradient_rate(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg1])?;
    let eps = d.epsilon_unit()?;
    let f_star = need(d.ctx.f_star, "optimal value f*")?;
    // the level-set hypothesis asks for D₀ > 1; any larger radius is valid
    let d0 = need(d.ctx.level_radius, "level-set radius D0")?.max(1.0);
    let p = d.p()?;
    let q = d.q_alpha()?;
    let cap = d.h_cap(eps)?;
    let rows = d.main_rows();
    let seg = segment(&rows, eps);
    let rows = &rows[..seg];
    let thr = 4.0 * (8.0 * factorial(p + 1)).powf(q - 1.0) * cap * d0.powf(q);
    let Some(m) = rows.iter().position(|r| r.f_value - f_star <= thr) else {
        return Ok(Vec::new());
    };
    let mut pts = Vec::new();
    let mut best = f64::INFINITY;
    for (t, r) in rows.iter().enumerate() {
        best = best.min(r.grad_norm);
        if t > m && (t - m) % 3 == 0 {
            let rhs = 2.0 * (288.0 * p as f64 * factorial(p + 1) * d0 / (t - m) as f64).powf(q - 1.0) * cap;
            pts.push(BoundPoint { index: t, lhs: best, rhs });
        }
    }
    Ok(pts)
}

fn accelerated_value_rate(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg2])?;
    let eps = d.epsilon_unit()?;
    let f_star = need(d.ctx.f_star, "optimal value f*")?;
    let dist = need(d.ctx.distance, "distance bound ‖x0 − x*‖")?;
    let p = d.p()?;
    let q = d.q_alpha()?;
    let tcap = d.htilde_cap(eps)?;
    let rows = d.main_rows();
    let seg = segment(&rows, eps);
    let c = 2f64.powi(3 * p as i32) * tcap * q.powf(q - 1.0) * dist.powf(q) / factorial(p - 1);
    Ok(rows[..seg]
        .iter()
        .enumerate()
        .skip(2)
        .map(|(t, r)| BoundPoint {
            index: t,
            lhs: r.f_value - f_star,
            rhs: c / ((t - 1) as f64).powf(q),
        })
        .collect())
}

/// `min_{0≤t≤T} ‖∇f̃(z_t)‖_*` against `K/(T−2)^{(q−1)(q+1)/q}` at even
/// `T ≥ 4` within `len` rows.
fn monitor_rate(mon: &[&TraceRecord], len: usize, q: f64, k: f64) -> Vec<BoundPoint> {
    let mut pts = Vec::new();
    let mut best = f64::INFINITY;
    for (t, r) in mon.iter().enumerate().take(len) {
        best = best.min(r.grad_norm);
        if t >= 4 && t % 2 == 0 {
            pts.push(BoundPoint {
                index: t,
                lhs: best,
                rhs: k / ((t - 2) as f64).powf((q - 1.0) * (q + 1.0) / q),
            });
        }
    }
    pts
}

fn two_phase_gradient_rate(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg2])?;
    let eps = d.epsilon_unit()?;
    let dist = need(d.ctx.distance, "distance bound ‖x0 − x*‖")?;
    let p = d.p()?;
    let q = d.q_alpha()?;
    let c = (2f64.powi(4 * p as i32 + 6) * d.htilde_cap(eps)? * d.h_cap(eps)?.powf(1.0 / (q - 1.0)))
        .powf((q - 1.0) / q);
    let main = d.main_rows();
    let mon = d.monitor_rows();
    let len = segment(&main, eps).min(segment(&mon, eps));
    let k = c * dist.powf(q - 1.0) * (p as f64 + 1.0).powf((q - 1.0) * (q + 1.0) / q);
    Ok(monitor_rate(&mon, len, q, k))
}

fn composite_iteration_count(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg3])?;
    let eps = d.epsilon_unit()?;
    let m = need(d.ctx.fixed_m, "fixed constant M")?;
    // a lower bound on f̃* only enlarges the right-hand side
    let f_low = d
        .ctx
        .f_star
        .or(d.ctx.f_star_lower)
        .ok_or("missing optimal value f* or a lower bound")?;
    let p = d.p()?;
    let q = d.q_nu()?;
    let rows = d.main_rows();
    let f0 = rows.first().ok_or("empty trace")?.f_value;
    let rhs = 8.0 * factorial(p + 1) * m.powf(1.0 / (q - 1.0)) * (f0 - f_low) * eps.powf(-q / (q - 1.0));
    let seg = segment(&rows, eps);
    Ok((0..seg)
        .map(|t| BoundPoint {
            index: t,
            lhs: t as f64,
            rhs,
        })
        .collect())
}

fn composite_two_phase_gradient_rate(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg4])?;
    let eps = need(d.ctx.epsilon, "epsilon")?;
    let dist = need(d.ctx.distance, "distance bound ‖x0 − x*‖")?;
    let m = need(d.ctx.fixed_m, "fixed constant M")?;
    let p = d.p()?;
    let q = d.q_nu()?;
    let mon = d.monitor_rows();
    let len = segment(&mon, eps);
    let k = 2f64.powi(4 * (p as i32 + 1)).powf((q - 1.0) / q) * m * dist.powf(q - 1.0);
    Ok(monitor_rate(&mon, len, q, k))
}

fn restart_count(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&[SchemeName::Alg6])?;
    let eps = d.epsilon_unit()?;
    let rc = d.ctx.restart.as_ref().ok_or("missing restart data")?;
    let p = d.p()?;
    let q = d.q_nu()?;
    let rhs = if let Some(r) = rc.distance_bound.or(d.ctx.distance) {
        restart_count_bound(p, q, rc.h_delta, rc.delta, r, eps)
    } else if let Some(s) = rc.residual_bound {
        1.0 + (16.0 * factorial(p + 1) * rc.h_delta.powf(1.0 / (q - 1.0)) * s / eps.powf(q / (q - 1.0))).log2()
    } else {
        return Err("missing distance bound R or residual bound S".into());
    };
    let rows: Vec<&TraceRecord> = d.records.iter().collect();
    let seg = segment(&rows, eps / 2.0);
    Ok((0..seg)
        .map(|k| BoundPoint {
            index: k,
            lhs: k as f64,
            rhs,
        })
        .collect())
}

const FIXED_M: [SchemeName; 3] = [SchemeName::AlgA, SchemeName::Alg4, SchemeName::Alg5];

fn estimating_value_rate(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&FIXED_M)?;
    let f_star = need(d.ctx.f_star, "optimal value f*")?;
    let dist = need(d.ctx.distance, "distance bound ‖x0 − x*‖")?;
    let m = need(d.ctx.fixed_m, "fixed constant M")?;
    let p = d.p()?;
    let q = d.q_nu()?;
    let c = 2f64.powi(3 * p as i32 - 1) * m * q.powf(q) * dist.powf(q) / factorial(p - 1);
    Ok(d
        .main_rows()
        .iter()
        .enumerate()
        .skip(2)
        .map(|(t, r)| BoundPoint {
            index: t,
            lhs: r.f_value - f_star,
            rhs: c / ((t - 1) as f64).powf(q),
        })
        .collect())
}

fn coefficient_growth(d: &Data) -> Need<Vec<BoundPoint>> {
    d.scheme(&FIXED_M)?;
    let m = need(d.ctx.fixed_m, "fixed constant M")?;
    let p = d.p()?;
    let q = d.q_nu()?;
    let lower = |t: usize| {
        factorial(p - 1) / (2f64.powi(3 * p as i32 - 1) * m)
            * ((1.0 / q) * 0.5f64.powf((q - 1.0) / q)).powf(q)
            * ((t - 1) as f64).powf(q)
    };
    let coeffs: Vec<(usize, f64)> = match d.accel {
        Some(acc) => acc.iter().map(|r| (r.t, r.big_a)).collect(),
        None => {
            let steps = d.main_rows().len().saturating_sub(1);
            let mut big_a = 0.0;
            (1..=steps)
                .map(|t| {
                    big_a += solve_at_coefficient(big_a, m, p, q);
                    (t, big_a)
                })
                .collect()
        }
    };
    Ok(coeffs
        .into_iter()
        .filter(|(t, _)| *t >= 2)
        .map(|(t, big_a)| BoundPoint {
            index: t,
            lhs: lower(t),
            rhs: big_a,
        })
        .collect())
}

fn estimating_minimum(d: &Data) -> Need<Vec<BoundPoint>> {
    let acc = d.accel.ok_or("missing estimating-function records")?;
    Ok(acc
        .iter()
        .filter_map(|r| {
            let fx = d.records.get(r.row)?.f_value;
            Some(BoundPoint {
                index: r.t,
                lhs: r.big_a * fx,
                rhs: r.psi_min,
            })
        })
        .collect())
}

fn estimating_majorant(d: &Data) -> Need<Vec<BoundPoint>> {
    let acc = d.accel.ok_or("missing estimating-function records")?;
    let f_star = need(d.ctx.f_star, "optimal value f*")?;
    let xs = DVector::from_vec(d.ctx.minimizer.clone().ok_or("missing minimizer x*")?);
    let phi = Some(&d.ctx.composite).filter(|c| !c.is_zero());
    Ok(acc
        .iter()
        .map(|r| {
            let space = MetricSpace::identity(xs.len());
            let q = r.psi.q;
            let dist = (&xs - &r.psi.anchor).norm();
            BoundPoint {
                index: r.t,
                lhs: r.psi.evaluate(&space, phi, &xs),
                rhs: r.big_a * f_star + dist.powf(q) / q,
            }
        })
        .collect())
}

/// Replays `tags` on a trace. `accel` holds the estimating-function records
/// of accelerated runs, when available.
pub fn replay_bounds(
    records: &[TraceRecord],
    accel: Option<&[AccelRow]>,
    ctx: &ReplayContext,
    tags: &[BoundTag],
) -> Vec<BoundReport> {
    let d = Data { records, accel, ctx };
    tags.iter()
        .map(|&tag| {
            let (res, mode) = match tag {
                BoundTag::OracleCalls => (oracle_calls(&d), Compare::Integer),
                BoundTag::RegularizationCap => (regularization_cap(&d), Compare::Real),
                BoundTag::GradientRate => (gradient_rate(&d), Compare::Real),
                BoundTag::AcceleratedValueRate => (accelerated_value_rate(&d), Compare::Real),
                BoundTag::TwoPhaseGradientRate => (two_phase_gradient_rate(&d), Compare::Real),
                BoundTag::CompositeIterationCount => (composite_iteration_count(&d), Compare::Integer),
                BoundTag::CompositeTwoPhaseGradientRate => {
                    (composite_two_phase_gradient_rate(&d), Compare::Real)
                }
                BoundTag::RestartCount => (restart_count(&d), Compare::Integer),
                BoundTag::EstimatingValueRate => (estimating_value_rate(&d), Compare::Real),
                BoundTag::CoefficientGrowth => (coefficient_growth(&d), Compare::Real),
                BoundTag::EstimatingMinimum => (estimating_minimum(&d), Compare::Real),
                BoundTag::EstimatingMajorant => (estimating_majorant(&d), Compare::Real),
            };
            match res {
                Ok(points) => finish(tag, points, mode),
                Err(reason) => BoundReport::skipped(tag, reason),
            }
        })
        .collect()
}

/// Converts core accelerated records.
pub fn accel_rows(records: &[AccelRecord]) -> Vec<AccelRow> {
    records.iter().map(AccelRow::from).collect()
}
