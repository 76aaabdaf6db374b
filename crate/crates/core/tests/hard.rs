use nalgebra::DVector;
use proptest::prelude::*;
use tensormin::instances::{gradient_lower_bound_check, HardInstance};
use tensormin::SmoothOracle;

/// `x* = (k, k−1, …, 1, 0, …, 0)`: every chain difference equals one.
fn chain_minimizer(inst: &HardInstance) -> DVector<f64> {
    let k = inst.k();
    DVector::from_fn(inst.n(), |i, _| if i < k { (k - i) as f64 } else { 0.0 })
}

#[test]
fn minimizer_in_closed_form() {
    for (p, nu) in [(2, 1.0), (2, 0.5), (3, 0.0), (3, 1.0)] {
        let inst = HardInstance::new(12, 7, p, nu).unwrap();
        let xs = chain_minimizer(&inst);
        assert!(inst.gradient(&xs).norm() < 1e-12);
        assert!((inst.value(&xs) - inst.optimal_value()).abs() < 1e-12);
        assert!(xs.norm() < inst.minimizer_norm_bound());
    }
}

#[test]
fn optimal_value_by_hand() {
    // q = 3, k = 4: −(2/3)·4
    let inst = HardInstance::new(6, 4, 2, 1.0).unwrap();
    assert!((inst.optimal_value() + 8.0 / 3.0).abs() < 1e-15);
}

#[test]
fn origin_gradient_is_first_unit_vector() {
    let inst = HardInstance::new(5, 3, 2, 1.0).unwrap();
    let g = inst.gradient(&DVector::zeros(5));
    assert_eq!(g, DVector::from_vec(vec![-1.0, 0.0, 0.0, 0.0, 0.0]));
}

#[test]
fn gradient_stays_large_on_coordinate_subspaces() {
    let inst = HardInstance::new(16, 12, 2, 1.0).unwrap();
    for k_sub in [1, 3, 6, 10] {
        let g = gradient_lower_bound_check(&inst, k_sub, 300, k_sub as u64).unwrap();
        assert!(g >= 1.0 / ((k_sub + 1) as f64).sqrt() - 1e-12, "k_sub={k_sub}: {g}");
    }
    assert!(gradient_lower_bound_check(&inst, 11, 10, 0).is_err());
}

#[test]
fn rejects_bad_parameters() {
    assert!(HardInstance::new(4, 5, 2, 1.0).is_err());
    assert!(HardInstance::new(4, 1, 2, 1.0).is_err());
    assert!(HardInstance::new(4, 3, 2, 1.5).is_err());
    assert!(HardInstance::new(4, 3, 4, 1.0).is_err());
}

proptest! {
    #[test]
    fn value_never_below_optimum(x in prop::collection::vec(-6.0..6.0f64, 9), nu in 0.0..1.0f64) {
        let inst = HardInstance::new(9, 6, 2, nu).unwrap();
        let x = DVector::from_vec(x);
        prop_assert!(inst.value(&x) >= inst.optimal_value() - 1e-9);
    }

    #[test]
    fn zero_tail_is_preserved(head in prop::collection::vec(-3.0..3.0f64, 3)) {
        // coordinates beyond k_sub + 1 of the gradient vanish on ℝⁿ_{k_sub}
        let inst = HardInstance::new(10, 8, 2, 1.0).unwrap();
        let mut x = DVector::zeros(10);
        x.rows_mut(0, 3).copy_from_slice(&head);
        let g = inst.gradient(&x);
        prop_assert!(g.rows(4, 6).iter().all(|v| *v == 0.0));
    }
}
