//! Worst-case caps implied by the hard chain instances: no method whose
//! iterates stay in the span of observed derivatives can beat them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundMode {
    /// Growth of `1/(f(x_t) − f*)` scaled by the residual constant.
    Residual,
    /// Growth with respect to the distance to the solution set.
    Distance,
}

impl FromStr for LowerBoundMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "residual" => Ok(LowerBoundMode::Residual),
            "distance" => Ok(LowerBoundMode::Distance),
            _ => Err(ConfigError::new("mode", format!("expected residual or distance, got `{s}`"))),
        }
    }
}

impl fmt::Display for LowerBoundMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LowerBoundMode::Residual => "residual",
            LowerBoundMode::Distance => "distance",
        })
    }
}

/// Exponent of `t` in the cap of `mode`.
pub fn lower_bound_exponent(p: usize, nu: f64, mode: LowerBoundMode) -> f64 {
    let q = p as f64 + nu;
    match mode {
        LowerBoundMode::Residual => (3.0 * q - 2.0) / (2.0 * q),
        LowerBoundMode::Distance => (3.0 * q - 2.0) / 2.0,
    }
}

/// `D·t^{(3q−2)/(2q)}` (residual) or `L·(t+1)^{(3q−2)/2}` (distance), with
/// `q = p + ν`,
/// `D = [2^{(2+ν)/2}∏_{i=1}^{p−1}(q−i)]^{1/q}·[(q−1)/q]^{(q−1)/q}` and
/// `L = 2^{(2+ν)/2}·3^{−(q−1)/2}∏_{i=0}^{p−1}(q−i)`.
pub fn lower_bound_evaluate(p: usize, nu: f64, t: usize, mode: LowerBoundMode) -> Result<f64, ConfigError> {
    if p < 1 {
        return Err(ConfigError::new("p", "must be at least 1"));
    }
    if !(0.0..=1.0).contains(&nu) {
        return Err(ConfigError::new("nu", format!("must lie in [0, 1], got {nu}")));
    }
    if t < 2 {
        return Err(ConfigError::new("t", format!("must be at least 2, got {t}")));
    }
    let q = p as f64 + nu;
    let two = 2f64.powf((2.0 + nu) / 2.0);
    let e = lower_bound_exponent(p, nu, mode);
    Ok(match mode {
        LowerBoundMode::Residual => {
            let prod: f64 = (1..p).map(|i| q - i as f64).product();
            let d = (two * prod).powf(1.0 / q) * ((q - 1.0) / q).powf((q - 1.0) / q);
            d * (t as f64).powf(e)
        }
        LowerBoundMode::Distance => {
            let prod: f64 = (0..p).map(|i| q - i as f64).product();
            let l = two * 3f64.powf(-(q - 1.0) / 2.0) * prod;
            l * (t as f64 + 1.0).powf(e)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponents() {
        assert!((lower_bound_exponent(2, 1.0, LowerBoundMode::Residual) - 7.0 / 6.0).abs() < 1e-15);
        assert_eq!(lower_bound_exponent(1, 1.0, LowerBoundMode::Distance), 2.0);
    }

    #[test]
    fn hand_values() {
        // p = 2, ν = 1: D = (2^{3/2}·2)^{1/3}(2/3)^{2/3}
        let d = (2f64.powf(1.5) * 2.0).cbrt() * (2.0f64 / 3.0).powf(2.0 / 3.0);
        let v = lower_bound_evaluate(2, 1.0, 8, LowerBoundMode::Residual).unwrap();
        assert!((v - d * 8f64.powf(7.0 / 6.0)).abs() < 1e-12 * v);
        // L = 2^{3/2}/3·3·2
        let l = 2f64.powf(1.5) / 3.0 * 6.0;
        let w = lower_bound_evaluate(2, 1.0, 3, LowerBoundMode::Distance).unwrap();
        assert!((w - l * 4f64.powf(3.5)).abs() < 1e-12 * w);
    }

    #[test]
    fn monotone_and_guarded() {
        for mode in [LowerBoundMode::Residual, LowerBoundMode::Distance] {
            let vals: Vec<f64> = (2..40).map(|t| lower_bound_evaluate(3, 0.5, t, mode).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] > w[0]));
            assert!(lower_bound_evaluate(2, 1.0, 1, mode).is_err());
        }
        assert!("up".parse::<LowerBoundMode>().is_err());
    }
}
