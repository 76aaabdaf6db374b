//! The chain function `f_k(x) = (1/q)[Σ_{i<k} |x_i − x_{i+1}|^q + Σ_{i≥k} |x_i|^q] − x_1`
//! with `q = p + ν`, whose gradients stay large on low-dimensional coordinate
//! subspaces.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::oracle::{
    check_action_order, check_dim, check_order, sample_on_sphere, Holder, OracleError,
    SmoothOracle,
};
use crate::schemes::RunTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardInstance {
    n: usize,
    k: usize,
    p: usize,
    nu: f64,
}

/// Radii of the sampling spheres used by the lower-bound checks.
pub const SAMPLE_RADII: [f64; 3] = [0.1, 1.0, 10.0];

impl HardInstance {
    pub fn new(n: usize, k: usize, p: usize, nu: f64) -> Result<Self, OracleError> {
        check_order(p)?;
        if k < 2 || k > n {
            return Err(OracleError::InvalidParameter(format!(
                "hard instance needs 2 <= k <= n (k={k}, n={n})"
            )));
        }
        if !(0.0..=1.0).contains(&nu) {
            return Err(OracleError::InvalidParameter(format!(
                "nu must lie in [0, 1], got {nu}"
            )));
        }
        if (p as f64) + nu <= 1.0 {
            return Err(OracleError::InvalidParameter(
                "exponent p + nu must exceed 1".into(),
            ));
        }
        Ok(Self { n, k, p, nu })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn exponent(&self) -> f64 {
        self.p as f64 + self.nu
    }

    /// `f*_k = −(q − 1)k/q`.
    pub fn optimal_value(&self) -> f64 {
        let q = self.exponent();
        -(q - 1.0) * self.k as f64 / q
    }

    /// `H_{f_k,p}(ν) = 2^{(2+ν)/2} ∏_{i=1}^{p−1}(p + ν − i)`.
    pub fn holder_constant_value(&self) -> f64 {
        let q = self.exponent();
        let prod: f64 = (1..self.p).map(|i| q - i as f64).product();
        2f64.powf((2.0 + self.nu) / 2.0) * prod
    }

    /// `(k + 1)^{3/2} / √3`, a strict upper bound on `‖x*_k‖`.
    pub fn minimizer_norm_bound(&self) -> f64 {
        (self.k as f64 + 1.0).powf(1.5) / 3f64.sqrt()
    }

    /// `u = A_k x`.
    fn apply_a(&self, x: &DVector<f64>) -> DVector<f64> {
        let k = self.k;
        DVector::from_fn(self.n, |i, _| {
            if i + 1 < k {
                x[i] - x[i + 1]
            } else {
                x[i]
            }
        })
    }

    /// `A_kᵀ v`.
    fn apply_at(&self, v: &DVector<f64>) -> DVector<f64> {
        let k = self.k;
        DVector::from_fn(self.n, |j, _| {
            if j >= 1 && j < k {
                v[j] - v[j - 1]
            } else {
                v[j]
            }
        })
    }
}

/// Value and gradient through the banded operator, `O(n)`.
pub fn hard_value_grad(
    inst: &HardInstance,
    x: &DVector<f64>,
) -> Result<(f64, DVector<f64>), OracleError> {
    check_dim(inst.n, x)?;
    let q = inst.exponent();
    let u = inst.apply_a(x);
    let value = u.iter().map(|ui| ui.abs().powf(q)).sum::<f64>() / q - x[0];
    let du = u.map(|ui| if ui == 0.0 { 0.0 } else { ui.abs().powf(q - 2.0) * ui });
    let mut g = inst.apply_at(&du);
    g[0] -= 1.0;
    Ok((value, g))
}

/// `D^i f_k(x)[h]^{i−1}` from coordinate derivatives of `|u|^q / q`.
pub fn hard_derivative_action(
    inst: &HardInstance,
    x: &DVector<f64>,
    h: &DVector<f64>,
    order: usize,
) -> Result<DVector<f64>, OracleError> {
    check_action_order(order, inst.p)?;
    check_dim(inst.n, x)?;
    check_dim(inst.n, h)?;
    let q = inst.exponent();
    let u = inst.apply_a(x);
    let ah = inst.apply_a(h);
    let mut w = DVector::zeros(inst.n);
    for i in 0..inst.n {
        let (ui, hi) = (u[i], ah[i]);
        if hi == 0.0 {
            continue;
        }
        w[i] = match order {
            2 => {
                if ui == 0.0 {
                    if q > 2.0 {
                        0.0
                    } else {
                        (q - 1.0) * hi
                    }
                } else {
                    (q - 1.0) * ui.abs().powf(q - 2.0) * hi
                }
            }
            _ => {
                if ui == 0.0 {
                    if q > 3.0 {
                        0.0
                    } else {
                        return Err(OracleError::Undefined { order });
                    }
                } else {
                    (q - 1.0) * (q - 2.0) * ui.abs().powf(q - 3.0) * ui.signum() * hi * hi
                }
            }
        };
    }
    Ok(inst.apply_at(&w))
}

impl SmoothOracle for HardInstance {
    fn dim(&self) -> usize {
        self.n
    }
    fn order(&self) -> usize {
        self.p
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        hard_value_grad(self, x).expect("dimension checked by caller").0
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        hard_value_grad(self, x).expect("dimension checked by caller").1
    }
    fn value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        hard_value_grad(self, x).expect("dimension checked by caller")
    }
    fn derivative_action(
        &self,
        x: &DVector<f64>,
        h: &DVector<f64>,
        order: usize,
    ) -> Result<DVector<f64>, OracleError> {
        hard_derivative_action(self, x, h, order)
    }
    fn holder(&self) -> Option<Holder> {
        Some(Holder {
            nu: self.nu,
            constant: self.holder_constant_value(),
        })
    }
    fn name(&self) -> String {
        "hard".into()
    }
}

/// Minimum gradient norm over seeded points of `ℝⁿ_{k_sub}` (coordinates
/// beyond `k_sub` are zero). The origin is always included; the remaining
/// points lie on spheres of radii 0.1, 1 and 10 in turn.
pub fn gradient_lower_bound_check(
    inst: &HardInstance,
    k_sub: usize,
    samples: usize,
    seed: u64,
) -> Result<f64, OracleError> {
    if k_sub < 1 || k_sub + 2 > inst.k || inst.k + 1 > inst.n {
        return Err(OracleError::InvalidParameter(format!(
            "need 1 <= k_sub <= k - 2 and k + 1 <= n (k_sub={k_sub}, k={}, n={})",
            inst.k, inst.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = hard_value_grad(inst, &DVector::zeros(inst.n))?.1.norm();
    for s in 0..samples {
        let r = SAMPLE_RADII[s % SAMPLE_RADII.len()];
        let head = sample_on_sphere(&mut rng, k_sub, r);
        let mut x = DVector::zeros(inst.n);
        x.rows_mut(0, k_sub).copy_from(&head);
        best = best.min(hard_value_grad(inst, &x)?.1.norm());
    }
    Ok(best)
}

/// Coordinate leakage of one trace point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceReport {
    /// Row index in the trace.
    pub row: usize,
    /// Oracle-query ordinal of the point (`0` for the starting point); a
    /// method whose steps stay in the span of observed derivatives keeps
    /// query `k` inside `ℝⁿ_k`.
    pub index: usize,
    /// `max |x⁽ʲ⁾|` over 1-based coordinates `j > index`.
    pub leakage: f64,
}

/// Leakage of every trace point that recorded its coordinates.
pub fn subspace_growth_report(inst: &HardInstance, trace: &RunTrace) -> Vec<SubspaceReport> {
    trace
        .records
        .iter()
        .enumerate()
        .filter_map(|(row, rec)| {
            let x = rec.x.as_ref()?;
            let index = rec.oracle_calls_cum as usize;
            let leakage = x
                .iter()
                .take(inst.n)
                .skip(index)
                .fold(0.0f64, |m, v| m.max(v.abs()));
            Some(SubspaceReport {
                row,
                index,
                leakage,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{derivative_action_check, gradient_check, MetricSpace, DEFAULT_FD_STEP};
    use crate::oracle::estimate_holder;
    use nalgebra::dvector;
    use rand_distr::{Distribution, StandardNormal};

    /// Direct evaluation of the defining sum, independent of `A_k`.
    fn direct_value(inst: &HardInstance, x: &DVector<f64>) -> f64 {
        let q = inst.exponent();
        let mut s = 0.0;
        for i in 1..inst.k {
            s += (x[i - 1] - x[i]).abs().powf(q);
        }
        for i in inst.k..=inst.n {
            s += x[i - 1].abs().powf(q);
        }
        s / q - x[0]
    }

    #[test]
    fn origin_and_hand_values() {
        let inst = HardInstance::new(2, 2, 2, 1.0).unwrap();
        let (v, g) = hard_value_grad(&inst, &dvector![0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, dvector![-1.0, 0.0]);
        let (v, _) = hard_value_grad(&inst, &dvector![1.0, 0.0]).unwrap();
        assert!((v + 2.0 / 3.0).abs() < 1e-15);
        let z = hard_derivative_action(&inst, &dvector![0.0, 0.0], &dvector![1.0, -1.0], 2).unwrap();
        assert_eq!(z, dvector![0.0, 0.0]);
        assert!(hard_value_grad(&inst, &dvector![1.0]).is_err());
    }

    #[test]
    fn constants() {
        let inst = HardInstance::new(32, 16, 2, 1.0).unwrap();
        assert!((inst.holder_constant_value() - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        assert!((HardInstance::new(8, 4, 2, 1.0).unwrap().optimal_value() + 8.0 / 3.0).abs() < 1e-15);
        assert!(HardInstance::new(4, 1, 2, 1.0).is_err());
        assert!(HardInstance::new(4, 5, 2, 1.0).is_err());
    }

    #[test]
    fn two_evaluations_agree_and_restriction_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x = DVector::from_fn(10, |_, _| StandardNormal.sample(&mut rng));
            for (k, nu) in [(3, 1.0), (7, 0.5), (10, 0.0)] {
                let inst = HardInstance::new(10, k, 2, nu).unwrap();
                let a = inst.value(&x);
                let b = direct_value(&inst, &x);
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
            // f_{k+q} = f_k on ℝⁿ_k
            let mut xk = x.clone();
            for j in 4..10 {
                xk[j] = 0.0;
            }
            let f4 = HardInstance::new(10, 4, 2, 1.0).unwrap();
            for kk in 4..=10 {
                let fk = HardInstance::new(10, kk, 2, 1.0).unwrap();
                assert_eq!(fk.value(&xk), f4.value(&xk));
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for p in [2, 3] {
            let inst = HardInstance::new(16, 16, p, 0.5).unwrap();
            for _ in 0..20 {
                let x = DVector::from_fn(16, |_, _| StandardNormal.sample(&mut rng));
                let h = DVector::from_fn(16, |_, _| StandardNormal.sample(&mut rng));
                assert!(gradient_check(&inst, &x, DEFAULT_FD_STEP) <= 1e-6);
                for order in 2..=p {
                    let d = derivative_action_check(&inst, &x, &h, order, DEFAULT_FD_STEP).unwrap();
                    assert!(d <= 1e-6, "order {order}: {d}");
                }
                let zero = hard_derivative_action(&inst, &x, &DVector::zeros(16), p).unwrap();
                assert_eq!(zero.norm(), 0.0);
            }
            assert!(hard_derivative_action(&inst, &DVector::zeros(16), &DVector::zeros(16), 4).is_err());
        }
    }

    #[test]
    fn sampled_holder_ratio_below_declared() {
        let inst = HardInstance::new(8, 8, 2, 1.0).unwrap();
        let est = estimate_holder(&inst, &MetricSpace::identity(8), 1.0, 300, 1.0, 17).unwrap();
        assert!(est.estimated_constant <= inst.holder_constant_value() + 1e-8);
    }

    #[test]
    fn lower_bound_check_contract() {
        let inst = HardInstance::new(32, 16, 2, 1.0).unwrap();
        let m = gradient_lower_bound_check(&inst, 1, 200, 1).unwrap();
        assert!(m >= 1.0 / 2f64.sqrt() - 1e-12);
        let m = gradient_lower_bound_check(&inst, 8, 1000, 1).unwrap();
        assert!(m >= 1.0 / 3.0 - 1e-12);
        assert!(gradient_lower_bound_check(&inst, 15, 10, 1).is_err());
        assert!(gradient_lower_bound_check(&inst, 0, 10, 1).is_err());
        let tight = HardInstance::new(16, 16, 2, 1.0).unwrap();
        assert!(gradient_lower_bound_check(&tight, 4, 10, 1).is_err());
    }
}
