//! Convex test functions with analytically known Hölder data.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::hard::HardInstance;
use crate::oracle::{
    check_action_order, check_dim, check_order, Holder, OracleError, SmoothOracle,
};
use crate::power_norm_constant;

/// `f(x) = ½⟨Qx, x⟩ − ⟨b, x⟩ + c₀`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    q: DMatrix<f64>,
    b: DVector<f64>,
    offset: f64,
    p: usize,
}

impl Quadratic {
    pub fn new(q: DMatrix<f64>, b: DVector<f64>, p: usize) -> Result<Self, OracleError> {
        check_order(p)?;
        if q.nrows() != q.ncols() || q.nrows() != b.len() {
            return Err(OracleError::DimensionMismatch {
                expected: q.nrows(),
                got: b.len(),
            });
        }
        let q = (&q + q.transpose()) * 0.5;
        Ok(Self {
            q,
            b,
            offset: 0.0,
            p,
        })
    }

    /// `½(x − x̄)ᵀQ(x − x̄)`, minimized at `x̄` with value 0.
    pub fn centered(q: DMatrix<f64>, center: DVector<f64>, p: usize) -> Result<Self, OracleError> {
        let b = &q * &center;
        let mut out = Self::new(q, b, p)?;
        out.offset = 0.5 * out.q.dot(&(&center * center.transpose()));
        Ok(out)
    }

    /// Random rotation of a diagonal with eigenvalues log-spaced in
    /// `[1, cond]`, centered at a seeded Gaussian point.
    pub fn random(n: usize, cond: f64, seed: u64, p: usize) -> Result<Self, OracleError> {
        if n == 0 || !(cond >= 1.0) {
            return Err(OracleError::InvalidParameter(format!(
                "quadratic needs n >= 1 and cond >= 1 (n={n}, cond={cond})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
        let rot = g.qr().q();
        let eig = DVector::from_fn(n, |i, _| {
            if n == 1 {
                1.0
            } else {
                cond.powf(i as f64 / (n - 1) as f64)
            }
        });
        let q = &rot * DMatrix::from_diagonal(&eig) * rot.transpose();
        let center = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        Self::centered(q, center, p)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn minimizer(&self) -> Option<DVector<f64>> {
        self.q.clone().cholesky().map(|c| c.solve(&self.b))
    }

    pub fn smallest_eigenvalue(&self) -> f64 {
        self.q.symmetric_eigenvalues().min()
    }
}

impl SmoothOracle for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn order(&self) -> usize {
        self.p
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.q * x).dot(x) - self.b.dot(x) + self.offset
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.q * x - &self.b
    }
    fn derivative_action(
        &self,
        _x: &DVector<f64>,
        h: &DVector<f64>,
        order: usize,
    ) -> Result<DVector<f64>, OracleError> {
        check_action_order(order, self.p)?;
        check_dim(self.dim(), h)?;
        Ok(match order {
            2 => &self.q * h,
            _ => DVector::zeros(self.dim()),
        })
    }
    fn hessian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>, OracleError> {
        Ok(self.q.clone())
    }
    fn holder(&self) -> Option<Holder> {
        Some(Holder {
            nu: 1.0,
            constant: 0.0,
        })
    }
    fn holder_constant(&self, nu: f64) -> Option<f64> {
        (0.0..=1.0).contains(&nu).then_some(0.0)
    }
    fn name(&self) -> String {
        "quadratic".into()
    }
}

/// `f(x) = (w/q)‖x − c‖^q` in the Euclidean norm.
#[derive(Debug, Clone)]
pub struct PowerNorm {
    center: DVector<f64>,
    q: f64,
    weight: f64,
    p: usize,
}

impl PowerNorm {
    pub fn new(center: DVector<f64>, q: f64, weight: f64, p: usize) -> Result<Self, OracleError> {
        check_order(p)?;
        if !(q >= p as f64 && q >= 2.0) {
            return Err(OracleError::InvalidParameter(format!(
                "power_norm degree {q} must be at least max(p, 2) = {}",
                p.max(2)
            )));
        }
        if !(weight > 0.0) {
            return Err(OracleError::InvalidParameter(format!(
                "power_norm weight must be positive, got {weight}"
            )));
        }
        Ok(Self {
            center,
            q,
            weight,
            p,
        })
    }

    pub fn degree(&self) -> f64 {
        self.q
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
}

impl SmoothOracle for PowerNorm {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn order(&self) -> usize {
        self.p
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.weight / self.q * (x - &self.center).norm().powf(self.q)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let u = x - &self.center;
        let r = u.norm();
        if r == 0.0 {
            return DVector::zeros(u.len());
        }
        u * (self.weight * r.powf(self.q - 2.0))
    }
    fn derivative_action(
        &self,
        x: &DVector<f64>,
        h: &DVector<f64>,
        order: usize,
    ) -> Result<DVector<f64>, OracleError> {
        check_action_order(order, self.p)?;
        check_dim(self.dim(), h)?;
        let q = self.q;
        let w = self.weight;
        let u = x - &self.center;
        let r = u.norm();
        let uh = u.dot(h);
        match order {
            2 => {
                if r == 0.0 {
                    return Ok(if q == 2.0 {
                        h * w
                    } else {
                        DVector::zeros(h.len())
                    });
                }
                Ok((h * r.powf(q - 2.0) + &u * ((q - 2.0) * r.powf(q - 4.0) * uh)) * w)
            }
            _ => {
                if r == 0.0 {
                    if q > 3.0 || h.norm() == 0.0 {
                        return Ok(DVector::zeros(h.len()));
                    }
                    return Err(OracleError::Undefined { order });
                }
                let hh = h.dot(h);
                let a = (q - 2.0) * r.powf(q - 4.0);
                let b = (q - 2.0) * (q - 4.0) * r.powf(q - 6.0) * uh * uh;
                Ok((h * (2.0 * a * uh) + &u * (a * hh + b)) * w)
            }
        }
    }
    fn holder(&self) -> Option<Holder> {
        let nu = self.q - self.p as f64;
        (0.0..=1.0).contains(&nu).then(|| Holder {
            nu,
            constant: self.weight * power_norm_constant(self.p, nu) / self.q,
        })
    }
    fn name(&self) -> String {
        "power_norm".into()
    }
}

/// Smoothed ℓ∞-type function
/// `f(x) = μ ln Σ_j (exp((x_j − c_j)/μ) + exp(−(x_j − c_j)/μ))`,
/// minimized at `c` with value `μ ln(2n)`.
#[derive(Debug, Clone)]
pub struct LogSumExp {
    center: DVector<f64>,
    mu: f64,
    p: usize,
}

impl LogSumExp {
    pub fn new(center: DVector<f64>, mu: f64, p: usize) -> Result<Self, OracleError> {
        check_order(p)?;
        if !(mu > 0.0) {
            return Err(OracleError::InvalidParameter(format!(
                "log_sum_exp scale must be positive, got {mu}"
            )));
        }
        Ok(Self { center, mu, p })
    }

    pub fn optimal_value(&self) -> f64 {
        self.mu * (2.0 * self.center.len() as f64).ln()
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }

    /// Softmax weights of the `2n` atoms `±e_j`, plus the log-normalizer.
    fn weights(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>, f64) {
        let u = (x - &self.center) / self.mu;
        let m = u.amax();
        let plus = u.map(|v| (v - m).exp());
        let minus = u.map(|v| (-v - m).exp());
        let s = plus.sum() + minus.sum();
        (plus / s, minus / s, m + s.ln())
    }
}

impl SmoothOracle for LogSumExp {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn order(&self) -> usize {
        self.p
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.mu * self.weights(x).2
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (pp, pm, _) = self.weights(x);
        pp - pm
    }
    fn value_grad(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (pp, pm, lse) = self.weights(x);
        (self.mu * lse, pp - pm)
    }
    fn derivative_action(
        &self,
        x: &DVector<f64>,
        h: &DVector<f64>,
        order: usize,
    ) -> Result<DVector<f64>, OracleError> {
        check_action_order(order, self.p)?;
        check_dim(self.dim(), h)?;
        let (pp, pm, _) = self.weights(x);
        let mean = &pp - &pm;
        let s = mean.dot(h);
        match order {
            2 => {
                let second = (&pp + &pm).component_mul(h);
                Ok((second - &mean * s) / self.mu)
            }
            _ => {
                let var = (&pp + &pm).dot(&h.component_mul(h)) - s * s;
                let v = DVector::from_fn(h.len(), |j, _| {
                    pp[j] * (h[j] - s).powi(2) - pm[j] * (h[j] + s).powi(2)
                });
                Ok((v - mean * var) / (self.mu * self.mu))
            }
        }
    }
    fn holder(&self) -> Option<Holder> {
        // third cumulant of atoms with |⟨a, h⟩| ≤ 1 is at most 2, fourth at most 4
        match self.p {
            2 => Some(Holder {
                nu: 1.0,
                constant: 2.0 / (self.mu * self.mu),
            }),
            3 => Some(Holder {
                nu: 1.0,
                constant: 4.0 / self.mu.powi(3),
            }),
            _ => None,
        }
    }
    fn name(&self) -> String {
        "log_sum_exp".into()
    }
}

/// Named catalog of the test functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ZooSpec {
    Quadratic { n: usize, cond: f64, seed: u64 },
    PowerNorm { n: usize, q: f64, weight: f64, seed: u64 },
    LogSumExp { n: usize, scale: f64, seed: u64 },
    Hard { n: usize, k: usize, nu: f64 },
}

/// A built catalog instance together with its analytic metadata.
#[derive(Clone)]
pub struct ZooInstance {
    pub spec: ZooSpec,
    pub oracle: Arc<dyn SmoothOracle>,
    /// Optimal value, when known in closed form.
    pub f_star: Option<f64>,
    /// Minimizer, when known in closed form.
    pub minimizer: Option<DVector<f64>>,
    /// Upper bound on `‖x*‖` when the minimizer itself is not exposed.
    pub minimizer_norm_bound: Option<f64>,
}

impl std::fmt::Debug for ZooInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ZooInstance")
            .field("spec", &self.spec)
            .field("f_star", &self.f_star)
            .finish()
    }
}

fn seeded_center(n: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng))
}

impl ZooSpec {
    pub fn dim(&self) -> usize {
        match self {
            ZooSpec::Quadratic { n, .. }
            | ZooSpec::PowerNorm { n, .. }
            | ZooSpec::LogSumExp { n, .. }
            | ZooSpec::Hard { n, .. } => *n,
        }
    }

    pub fn build(&self, p: usize) -> Result<ZooInstance, OracleError> {
        match self {
            ZooSpec::Quadratic { n, cond, seed } => {
                let q = Quadratic::random(*n, *cond, *seed, p)?;
                let xs = q.minimizer();
                Ok(ZooInstance {
                    spec: self.clone(),
                    f_star: Some(0.0),
                    minimizer_norm_bound: xs.as_ref().map(|x| x.norm()),
                    minimizer: xs,
                    oracle: Arc::new(q),
                })
            }
            ZooSpec::PowerNorm { n, q, weight, seed } => {
                let c = seeded_center(*n, *seed);
                let f = PowerNorm::new(c.clone(), *q, *weight, p)?;
                Ok(ZooInstance {
                    spec: self.clone(),
                    f_star: Some(0.0),
                    minimizer_norm_bound: Some(c.norm()),
                    minimizer: Some(c),
                    oracle: Arc::new(f),
                })
            }
            ZooSpec::LogSumExp { n, scale, seed } => {
                let c = seeded_center(*n, *seed);
                let f = LogSumExp::new(c.clone(), *scale, p)?;
                Ok(ZooInstance {
                    spec: self.clone(),
                    f_star: Some(f.optimal_value()),
                    minimizer_norm_bound: Some(c.norm()),
                    minimizer: Some(c),
                    oracle: Arc::new(f),
                })
            }
            ZooSpec::Hard { n, k, nu } => {
                let h = HardInstance::new(*n, *k, p, *nu)?;
                Ok(ZooInstance {
                    spec: self.clone(),
                    f_star: Some(h.optimal_value()),
                    minimizer: None,
                    minimizer_norm_bound: Some(h.minimizer_norm_bound()),
                    oracle: Arc::new(h),
                })
            }
        }
    }
}

impl ZooInstance {
    /// Upper bound on `‖x₀ − x*‖`.
    pub fn distance_bound(&self, x0: &DVector<f64>) -> Option<f64> {
        match &self.minimizer {
            Some(xs) => Some((x0 - xs).norm()),
            None => self.minimizer_norm_bound.map(|b| b + x0.norm()),
        }
    }

    /// Radius `max{‖x − x*‖ : f(x) ≤ f(x₀)}` of the initial level set, where
    /// it has a closed form.
    pub fn level_set_radius(&self, x0: &DVector<f64>) -> Option<f64> {
        let xs = self.minimizer.as_ref()?;
        match &self.spec {
            ZooSpec::PowerNorm { .. } => Some((x0 - xs).norm()),
            ZooSpec::Quadratic { n, cond, seed } => {
                let q = Quadratic::random(*n, *cond, *seed, 2).ok()?;
                let gap = self.oracle.value(x0) - self.f_star?;
                Some((2.0 * gap.max(0.0) / q.smallest_eigenvalue()).sqrt())
            }
            _ => None,
        }
    }
}

/// Builds a catalog function by name with default parameters:
/// `quadratic` (cond 10), `power_norm` (degree p+1), `log_sum_exp` (scale 1),
/// `hard` (k = n − 1, ν = 1).
pub fn zoo(name: &str, n: usize, p: usize) -> Result<ZooInstance, OracleError> {
    let spec = match name {
        "quadratic" => ZooSpec::Quadratic {
            n,
            cond: 10.0,
            seed: 0,
        },
        "power_norm" => ZooSpec::PowerNorm {
            n,
            q: p as f64 + 1.0,
            weight: 1.0,
            seed: 0,
        },
        "log_sum_exp" => ZooSpec::LogSumExp {
            n,
            scale: 1.0,
            seed: 0,
        },
        "hard" => ZooSpec::Hard {
            n,
            k: n.saturating_sub(1).max(2),
            nu: 1.0,
        },
        other => {
            return Err(OracleError::InvalidParameter(format!(
                "unknown instance name '{other}'"
            )))
        }
    };
    spec.build(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{derivative_action_check, gradient_check, MetricSpace, DEFAULT_FD_STEP};
    use crate::oracle::estimate_holder;
    use nalgebra::dvector;

    fn random_points(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng)))
            .collect()
    }

    #[test]
    fn identity_quadratic_is_exact() {
        let f = Quadratic::new(DMatrix::identity(3, 3), DVector::zeros(3), 2).unwrap();
        let x = dvector![1.0, -2.0, 0.5];
        assert_eq!(f.gradient(&x), x);
        assert_eq!(f.value(&x), 0.5 * x.norm_squared());
    }

    #[test]
    fn power_norm_degree_three_constant() {
        let f = PowerNorm::new(DVector::zeros(4), 3.0, 1.0, 2).unwrap();
        let h = f.holder().unwrap();
        assert_eq!(h.nu, 1.0);
        assert!((h.constant - 4.0).abs() < 1e-15);
        let est = estimate_holder(&f, &MetricSpace::identity(4), 1.0, 300, 1.0, 3).unwrap();
        assert!(est.estimated_constant <= h.constant + 1e-8);
        assert!(est.estimated_constant > 1.0);
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(zoo("rosenbrock", 4, 2).is_err());
        let h = zoo("hard", 8, 2).unwrap();
        assert!((h.oracle.holder().unwrap().constant - 4.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn derivative_checks_on_catalog() {
        let specs = [
            ZooSpec::Quadratic {
                n: 5,
                cond: 30.0,
                seed: 1,
            },
            ZooSpec::PowerNorm {
                n: 5,
                q: 4.0,
                weight: 1.0,
                seed: 2,
            },
            ZooSpec::PowerNorm {
                n: 5,
                q: 3.5,
                weight: 0.5,
                seed: 2,
            },
            ZooSpec::LogSumExp {
                n: 5,
                scale: 0.7,
                seed: 3,
            },
            ZooSpec::Hard { n: 6, k: 4, nu: 1.0 },
        ];
        for spec in &specs {
            for p in [2, 3] {
                let inst = spec.build(p).unwrap();
                let f = inst.oracle.as_ref();
                for x in random_points(5.max(spec.dim()), 8, 11) {
                    let x = x.rows(0, spec.dim()).into_owned();
                    assert!(gradient_check(f, &x, DEFAULT_FD_STEP) < 1e-5, "{spec:?}");
                    let h = random_points(spec.dim(), 1, 5)[0].clone();
                    for order in 2..=p {
                        let d = derivative_action_check(f, &x, &h, order, DEFAULT_FD_STEP).unwrap();
                        assert!(d < 1e-4, "{spec:?} p={p} order={order} d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn quartic_hessian_holder_estimate() {
        // (x⁽¹⁾)⁴/12: Hessian (x⁽¹⁾)², Lipschitz constant 2 on the unit ball
        struct Quartic;
        impl SmoothOracle for Quartic {
            fn dim(&self) -> usize {
                2
            }
            fn order(&self) -> usize {
                2
            }
            fn value(&self, x: &DVector<f64>) -> f64 {
                x[0].powi(4) / 12.0
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                dvector![x[0].powi(3) / 3.0, 0.0]
            }
            fn derivative_action(
                &self,
                x: &DVector<f64>,
                h: &DVector<f64>,
                order: usize,
            ) -> Result<DVector<f64>, OracleError> {
                check_action_order(order, 2)?;
                Ok(dvector![x[0] * x[0] * h[0], 0.0])
            }
        }
        let space = MetricSpace::identity(2);
        let small = estimate_holder(&Quartic, &space, 1.0, 50, 1.0, 9).unwrap();
        let large = estimate_holder(&Quartic, &space, 1.0, 2000, 1.0, 9).unwrap();
        assert!(small.estimated_constant <= large.estimated_constant);
        assert!(large.estimated_constant <= 2.0 + 1e-12);
        // pairs near (±1, 0) on the same side are rare in two dimensions
        assert!(large.estimated_constant > 1.2);
        let zero = Quadratic::random(3, 5.0, 1, 2).unwrap();
        let est = estimate_holder(&zero, &MetricSpace::identity(3), 0.5, 20, 1.0, 1).unwrap();
        assert!(est.estimated_constant < 1e-9);
        assert!(estimate_holder(&zero, &MetricSpace::identity(3), 0.5, 0, 1.0, 1).is_err());
    }

    #[test]
    fn convexity_witness() {
        for spec in [
            ZooSpec::Quadratic {
                n: 4,
                cond: 10.0,
                seed: 4,
            },
            ZooSpec::PowerNorm {
                n: 4,
                q: 3.0,
                weight: 1.0,
                seed: 4,
            },
            ZooSpec::LogSumExp {
                n: 4,
                scale: 1.0,
                seed: 4,
            },
            ZooSpec::Hard { n: 4, k: 3, nu: 0.5 },
        ] {
            let inst = spec.build(2).unwrap();
            let f = inst.oracle.as_ref();
            let pts = random_points(4, 20, 8);
            for x in &pts {
                for y in &pts {
                    let lin = f.value(x) + f.gradient(x).dot(&(y - x));
                    assert!(f.value(y) >= lin - 1e-10, "{spec:?}");
                }
            }
        }
    }

    #[test]
    fn log_sum_exp_minimum() {
        let c = dvector![0.5, -1.0, 2.0];
        let f = LogSumExp::new(c.clone(), 0.3, 2).unwrap();
        assert!((f.value(&c) - f.optimal_value()).abs() < 1e-12);
        assert!(f.gradient(&c).norm() < 1e-15);
    }
}
