//! Empirical convergence rates from traces.

use std::collections::BTreeMap;

use tensormin::schemes::TraceRecord;

use crate::config::ConfigError;

/// Running minimum of the gradient norm per iteration index. Rows sharing an
/// index (main and monitor rows of the two-phase methods) are merged.
pub fn min_envelope(records: &[TraceRecord]) -> Vec<(usize, f64)> {
    let mut per_iter = BTreeMap::new();
    for r in records {
        let e = per_iter.entry(r.iter).or_insert(f64::INFINITY);
        *e = f64::min(*e, r.grad_norm);
    }
    let mut best = f64::INFINITY;
    per_iter
        .into_iter()
        .map(|(t, g)| {
            best = best.min(g);
            (t, best)
        })
        .collect()
}

/// Least-squares slope of `log(min-so-far ‖∇f‖_*)` against `log t` over the
/// iterations `from ≤ t ≤ to`.
pub fn slope_estimate(records: &[TraceRecord], from: usize, to: usize) -> Result<f64, ConfigError> {
    if from < 1 || to <= from {
        return Err(ConfigError::new(
            "window",
            format!("need 1 <= from < to, got [{from}, {to}]"),
        ));
    }
    let pts: Vec<(f64, f64)> = min_envelope(records)
        .into_iter()
        .filter(|(t, _)| (from..=to).contains(t))
        .map(|(t, g)| ((t as f64).ln(), g.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(ConfigError::new(
            "window",
            format!("[{from}, {to}] holds {} iteration(s) of the trace", pts.len()),
        ));
    }
    if pts.iter().any(|(_, y)| !y.is_finite()) {
        return Err(ConfigError::new("window", "gradient norms must be positive on the window"));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tensormin::schemes::AcceptTag;

    fn synthetic(g: impl Fn(f64) -> f64, n: usize) -> Vec<TraceRecord> {
        (1..=n)
            .map(|t| TraceRecord {
                iter: t,
                f_value: 0.0,
                grad_norm: g(t as f64),
                h: 1.0,
                htilde: None,
                inner_trials: 1,
                oracle_calls_cum: t as u64,
                tag: AcceptTag::SufficientDecrease,
                x: None,
            })
            .collect()
    }

    #[test]
    fn exact_power_law() {
        let recs = synthetic(|t| t.powi(-2), 100);
        assert!((slope_estimate(&recs, 10, 100).unwrap() + 2.0).abs() < 1e-9);
        assert!((slope_estimate(&synthetic(|t| 3.0 * t.powf(-8.0 / 3.0), 50), 1, 50).unwrap() + 8.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn envelope_flattens_increases() {
        let recs = synthetic(|t| if t as usize % 2 == 0 { 10.0 } else { 1.0 / t }, 6);
        let env = min_envelope(&recs);
        assert_eq!(env[1], (2, 1.0));
        assert_eq!(env[5], (6, 0.2));
    }

    #[test]
    fn degenerate_windows() {
        let recs = synthetic(|t| 1.0 / t, 10);
        assert!(slope_estimate(&recs, 5, 5).is_err());
        assert!(slope_estimate(&recs, 0, 5).is_err());
        assert!(slope_estimate(&recs, 10, 20).is_err());
        let zero = synthetic(|_| 0.0, 10);
        assert!(slope_estimate(&zero, 2, 8).is_err());
    }
}
