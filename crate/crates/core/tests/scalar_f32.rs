//! The generic core in single precision, checked at `f32`-appropriate tolerances.

use ultracalc_core::basis::delta;
use ultracalc_core::calculus::{build_d, ftc, ibp_defect};
use ultracalc_core::projection::{tilde, FunctionHandle};
use ultracalc_core::space::splitted_basis;
use ultracalc_core::{tol, GridF32, SpaceF32, UltrafunctionF32};

fn space(ell: usize, p: usize) -> SpaceF32 {
    SpaceF32::build(GridF32::build_uniform(1.0, ell).unwrap(), p)
}

fn member(s: &SpaceF32) -> UltrafunctionF32 {
    let coeffs = (0..s.dim()).map(|i| ((i * 7 + 3) % 11) as f32 / 11.0 - 0.5).collect();
    UltrafunctionF32::from_coeffs(s, coeffs).unwrap()
}

#[test]
fn tolerances_widen_for_f32() {
    assert!(tol::identity::<f32>() > 1e-5);
    assert_eq!(tol::identity::<f64>(), tol::IDENTITY);
}

#[test]
fn basis_is_orthonormal() {
    for p in 0..4 {
        assert!(splitted_basis(&space(4, p)).orthonormality_error() < 1e-5);
    }
}

#[test]
fn delta_and_identities() {
    let s = space(8, 2);
    let u = member(&s);
    for q in [-0.8f32, -0.25, 0.1, 0.5, 1.0] {
        let d = delta(&s, q).unwrap();
        assert!((u.inner(&d).unwrap() - u.eval(q)).abs() < 1e-4, "q={q}");
    }
    let d = build_d(&s);
    let v = UltrafunctionF32::from_cellwise_fn(&s, |x| x * x);
    assert!(ibp_defect(&d, &u, &v).unwrap().holds());
    assert!(ftc(&d, &u, 1, 7).unwrap().holds());
}

#[test]
fn projection() {
    let s = space(8, 2);
    let t = tilde(&s, &FunctionHandle::new(|x: f32| 1.0 - x * x)).unwrap();
    for x in [-0.9f32, 0.0, 0.3] {
        assert!((t.eval(x) - (1.0 - x * x)).abs() < 1e-5);
    }
}
