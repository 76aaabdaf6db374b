//! Certificate-driven inner loop for any model: damped Newton steps on the
//! coordinates where `φ` is smooth, with a proximal-gradient fallback.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::{SubsolverConfig, SubsolverError};
use crate::metric::{MetricSpace, PrimalVector};
use crate::models::{Certificate, ModelSpec, RegularizedModel};
use crate::oracle::{CompositePart, SmoothOracle};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;

pub fn solve_model_generic(
    spec: &ModelSpec,
    f: &dyn SmoothOracle,
    phi: Option<&CompositePart>,
    space: &MetricSpace,
    cfg: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    let spec = match phi {
        Some(p) => spec.clone().with_composite(p),
        None => spec.clone(),
    };
    let model = RegularizedModel::new(spec, f, space)?;
    solve_built(&model, cfg)
}

/// Coordinates on which `φ` is locally smooth at `y`, with the slope of `φ`
/// there. Coordinates outside the set stay fixed during a Newton step.
fn free_set(phi: Option<&CompositePart>, y: &DVector<f64>, grad: &DVector<f64>) -> (Vec<usize>, DVector<f64>) {
    let n = y.len();
    let mut slope = DVector::zeros(n);
    let free = match phi {
        None | Some(CompositePart::Zero) => (0..n).collect(),
        Some(CompositePart::L1 { weight }) => {
            let mut idx = Vec::with_capacity(n);
            for i in 0..n {
                let s = if y[i] != 0.0 {
                    y[i].signum()
                } else if grad[i].abs() > *weight {
                    -grad[i].signum()
                } else {
                    continue;
                };
                slope[i] = weight * s;
                idx.push(i);
            }
            idx
        }
        Some(CompositePart::Box { lower, upper }) => (0..n)
            .filter(|&i| {
                let inward_lo = y[i] <= lower[i] && grad[i] >= 0.0;
                let inward_hi = y[i] >= upper[i] && grad[i] <= 0.0;
                !(inward_lo || inward_hi) && lower[i] < upper[i]
            })
            .collect(),
    };
    (free, slope)
}

/// Keeps a Newton trial inside the smooth piece it started from.
fn project_piece(phi: Option<&CompositePart>, y: &DVector<f64>, trial: &mut DVector<f64>, slope: &DVector<f64>) {
    match phi {
        Some(CompositePart::L1 { .. }) => {
            for i in 0..y.len() {
                if slope[i] != 0.0 && trial[i] * slope[i] < 0.0 {
                    trial[i] = 0.0;
                }
            }
        }
        Some(b @ CompositePart::Box { .. }) => *trial = b.project(trial),
        _ => {}
    }
}

pub(crate) fn solve_built(
    model: &RegularizedModel<'_>,
    cfg: &SubsolverConfig,
) -> Result<(PrimalVector, Certificate), SubsolverError> {
    let space = model.space();
    let phi = model.composite();
    if phi.is_some() && !space.is_identity() {
        return Err(SubsolverError::Unsupported(
            "composite models are solved in the identity metric only".into(),
        ));
    }
    let center = model.center().clone();
    let n = center.len();
    let b = space.operator();
    let mut y = center.clone();
    let mut val = model.increment(&y)?;
    let mut lipschitz = 1.0f64;
    let mut last = None;
    // increments are differences of values of this size; changes below the
    // tolerance are rounding noise, so a step is not rejected for them
    let noise = 16.0 * f64::EPSILON * (model.center_value().abs() + model.center_composite_value().abs());

    for _ in 0..cfg.max_inner_iterations {
        let h = &y - &center;
        let grad = model.smooth_gradient(&h)?;
        let g_phi = phi.map(|p| p.closest_subgradient(&y, &(-&grad)));
        let cert = model.certificate(&y, g_phi.as_ref(), cfg.theta)?;
        if cert.accepted {
            return Ok((y, cert));
        }
        last = Some((cert.residual, cert.residual_bound()));

        // Newton step on the free coordinates
        let (free, slope) = free_set(phi, &y, &grad);
        let mut moved = false;
        if !free.is_empty() {
            let hess = model.smooth_hessian(&h)?;
            let k = free.len();
            let hf = DMatrix::from_fn(k, k, |a, c| hess[(free[a], free[c])]);
            let bf = DMatrix::from_fn(k, k, |a, c| b[(free[a], free[c])]);
            let rf = DVector::from_fn(k, |a, _| grad[free[a]] + slope[free[a]]);
            let scale = hf.amax().max(1.0);
            let mut lambda = 0.0;
            let chol = loop {
                if let Some(c) = Cholesky::new(&hf + &bf * lambda) {
                    break Some(c);
                }
                lambda = if lambda == 0.0 { 1e-12 * scale } else { lambda * 100.0 };
                if lambda > 1e12 * scale {
                    break None;
                }
            };
            if let Some(chol) = chol {
                let df = -chol.solve(&rf);
                let slope_dir = rf.dot(&df);
                if slope_dir < 0.0 {
                    let mut d = DVector::zeros(n);
                    for (a, &i) in free.iter().enumerate() {
                        d[i] = df[a];
                    }
                    let mut s = 1.0;
                    for _ in 0..MAX_HALVINGS {
                        let mut trial = &y + &d * s;
                        project_piece(phi, &y, &mut trial, &slope);
                        let tv = model.increment(&trial)?;
                        if tv <= val + ARMIJO * s * slope_dir + noise {
                            moved = tv < val || trial != y;
                            y = trial;
                            val = tv;
                            break;
                        }
                        s *= 0.5;
                    }
                }
            }
        }
        if moved {
            continue;
        }

        // proximal-gradient fallback with backtracking on the smooth part
        let smooth_val = |p: &DVector<f64>| -> Result<f64, SubsolverError> {
            Ok(model.smooth_increment(&(p - &center))?)
        };
        let sv = smooth_val(&y)?;
        let gp = space.to_primal(&grad);
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = match phi {
                Some(p) => p.prox(&(&y - &gp / lipschitz), 1.0 / lipschitz),
                None => &y - &gp / lipschitz,
            };
            let d = &trial - &y;
            let dn = space.primal_norm(&d);
            if dn == 0.0 {
                break;
            }
            let tv = smooth_val(&trial)?;
            if tv <= sv + grad.dot(&d) + 0.5 * lipschitz * dn * dn {
                let inc = model.increment(&trial)?;
                if inc <= val + noise {
                    y = trial;
                    val = inc;
                    accepted = true;
                }
                lipschitz = (lipschitz * 0.5).max(1e-12);
                break;
            }
            lipschitz *= 2.0;
        }
        if !accepted {
            break;
        }
    }
    let (residual, bound) = last.unwrap_or((f64::NAN, f64::NAN));
    Err(SubsolverError::BudgetExhausted {
        iterations: cfg.max_inner_iterations,
        residual,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{PowerNorm, Quadratic};
    use crate::models::convexity_threshold;
    use crate::subsolver::solve_model_order2;
    use crate::SmoothOracle;
    use nalgebra::dvector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn huge_regularization_stays_near_center() {
        let f = Quadratic::random(4, 10.0, 1, 2).unwrap();
        let space = MetricSpace::identity(4);
        let x = dvector![1.0, 2.0, -1.0, 0.5];
        let spec = ModelSpec::new(x.clone(), 2, 1e8, 1.0).unwrap();
        let (xp, cert) = solve_model_generic(&spec, &f, None, &space, &SubsolverConfig::default()).unwrap();
        assert!(cert.accepted);
        assert!((xp - x).norm() < 1e-2);
    }

    #[test]
    fn agrees_with_radial_solver() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for seed in 0..10 {
            let f = Quadratic::random(6, 50.0, seed, 2).unwrap();
            let space = MetricSpace::identity(6);
            let x = DVector::from_fn(6, |_, _| StandardNormal.sample(&mut rng));
            let spec = ModelSpec::new(x, 2, 1.5, 1.0).unwrap();
            let cfg = SubsolverConfig {
                theta: 1e-9,
                ..Default::default()
            };
            let (a, _) = solve_model_generic(&spec, &f, None, &space, &cfg).unwrap();
            let (b, _) = solve_model_order2(&spec, &f, &space, &cfg).unwrap();
            assert!((a - b).amax() < 1e-6);
        }
    }

    #[test]
    fn third_order_model_matches_long_descent() {
        // f = ¼Σ x_i⁴ as a sum of one-dimensional power functions
        struct Quartic;
        impl SmoothOracle for Quartic {
            fn dim(&self) -> usize {
                4
            }
            fn order(&self) -> usize {
                3
            }
            fn value(&self, x: &DVector<f64>) -> f64 {
                x.iter().map(|v| v.powi(4)).sum::<f64>() / 4.0
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                x.map(|v| v.powi(3))
            }
            fn derivative_action(
                &self,
                x: &DVector<f64>,
                h: &DVector<f64>,
                order: usize,
            ) -> Result<DVector<f64>, crate::OracleError> {
                Ok(match order {
                    2 => x.zip_map(h, |a, b| 3.0 * a * a * b),
                    _ => x.zip_map(h, |a, b| 6.0 * a * b * b),
                })
            }
        }
        let space = MetricSpace::identity(4);
        let x = dvector![1.0, -0.5, 0.3, 2.0];
        let spec = ModelSpec::new(x.clone(), 3, 6.0, 1.0).unwrap();
        let cfg = SubsolverConfig {
            theta: 1e-10,
            ..Default::default()
        };
        let (xp, cert) = solve_model_generic(&spec, &Quartic, None, &space, &cfg).unwrap();
        assert!(cert.accepted);
        // plain gradient descent on the model, many small steps
        let m = RegularizedModel::new(spec, &Quartic, &space).unwrap();
        let mut y = x.clone();
        for _ in 0..400_000 {
            let g = m.gradient(&y).unwrap();
            y -= g * 2e-3;
        }
        assert!((xp - y).amax() < 1e-5);
    }

    #[test]
    fn box_composite_feasible_and_certified() {
        let f = PowerNorm::new(dvector![3.0, -2.0, 0.2], 3.0, 1.0, 2).unwrap();
        let space = MetricSpace::identity(3);
        let phi = CompositePart::uniform_box(3, -1.0, 1.0).unwrap();
        let h = convexity_threshold(&f, 1.0).unwrap().max(1.0);
        let spec = ModelSpec::new(dvector![0.5, 0.0, 0.0], 2, h, 1.0).unwrap();
        let (xp, cert) = solve_model_generic(&spec, &f, Some(&phi), &space, &SubsolverConfig::default()).unwrap();
        assert!(phi.contains(&xp));
        assert!(cert.accepted);
        let g = cert.g_phi.clone().unwrap();
        let m = RegularizedModel::new(spec.with_composite(&phi), &f, &space).unwrap();
        let res = (m.gradient(&xp).unwrap() + g).norm();
        assert!(res <= cert.residual_bound() + 1e-15);
        assert!(m.increment(&xp).unwrap() <= 0.0);
    }

    #[test]
    fn l1_composite_reaches_kink() {
        let f = Quadratic::centered(DMatrix::identity(3, 3), dvector![0.3, -2.0, 1.0], 2).unwrap();
        let space = MetricSpace::identity(3);
        let phi = CompositePart::l1(0.5).unwrap();
        let spec = ModelSpec::new(DVector::zeros(3), 2, 1e-3, 1.0).unwrap();
        let cfg = SubsolverConfig {
            theta: 1e-6,
            ..Default::default()
        };
        let (xp, cert) = solve_model_generic(&spec, &f, Some(&phi), &space, &cfg).unwrap();
        assert!(cert.accepted);
        // first coordinate is thresholded to zero
        assert_eq!(xp[0], 0.0);
        assert!((xp[1] + 1.5).abs() < 1e-2);
    }
}
