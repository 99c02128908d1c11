use num_complex::Complex64;
use proptest::prelude::*;
use std::sync::Arc;
use subslope::expr::TrigSeries;
use subslope::grid::{assemble_omega_u, complex_hessian, gradient_correction, GridGeometry, HermitianField, ScalarField};

/// Exact (∂∂̄u)_{ij̄} from analytic real second derivatives.
fn exact_complex_hessian(hess: &[f64], dims: usize, i: usize, j: usize) -> Complex64 {
    let h = |a: usize, b: usize| hess[a * dims + b];
    let (xi, yi, xj, yj) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
    Complex64::new(h(xi, xj) + h(yi, yj), h(xi, yj) - h(yi, xj)) * 0.25
}

fn hessian_error(u: &TrigSeries, n: usize, count: usize) -> f64 {
    let shape = vec![count; 2 * n];
    let geom = Arc::new(GridGeometry::new(n, shape).unwrap());
    let field = u.sample(&geom).unwrap();
    let hf = complex_hessian(&field, &geom).unwrap();
    let dims = 2 * n;
    let mut worst: f64 = 0.0;
    for p in 0..geom.len() {
        let x = geom.point(p);
        let hess = u.hessian(&x, dims);
        let m = hf.matrix(p);
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((m[(i, j)] - exact_complex_hessian(&hess, dims, i, j)).norm());
            }
        }
    }
    worst
}

#[test]
fn complex_hessian_is_second_order() {
    let u = TrigSeries::parse("0.4*cos(x1 + 2*y1) + 0.3*sin(x2 - y1) + 0.2*cos(y2)").unwrap();
    let coarse = hessian_error(&u, 2, 16);
    let fine = hessian_error(&u, 2, 32);
    let ratio = coarse / fine;
    assert!((3.0..=5.0).contains(&ratio), "ratio {ratio}, errors {coarse:e} {fine:e}");
}

#[test]
fn gradient_correction_vanishes_without_torsion_and_is_hermitian_with_it() {
    let geom = Arc::new(GridGeometry::new(2, vec![8, 8, 8, 8]).unwrap());
    let u = TrigSeries::parse("cos(x1) + sin(y2 + x2)").unwrap().sample(&geom).unwrap();
    let z0 = gradient_correction(&u, &geom).unwrap();
    assert!(z0.raw().iter().all(|z| z.norm() == 0.0));

    let mut z = vec![Complex64::new(0.0, 0.0); 8];
    z[1] = Complex64::new(0.5, -0.25);
    z[6] = Complex64::new(-0.1, 0.3);
    let tg = Arc::new(GridGeometry::with_z_tensor(2, vec![8, 8, 8, 8], z).unwrap());
    let u = ScalarField::new(tg.clone(), u.into_values()).unwrap();
    let zf = gradient_correction(&u, &tg).unwrap();
    assert!(zf.hermitian_defect() < 1e-14);
    assert!(zf.raw().iter().any(|z| z.norm() > 1e-3));
}

#[test]
fn assembled_form_of_zero_potential_is_background() {
    let geom = Arc::new(GridGeometry::new(1, vec![8, 8]).unwrap());
    let omega = HermitianField::identity(geom.clone());
    let g = assemble_omega_u(&omega, &ScalarField::zeros(geom.clone()), &geom).unwrap();
    assert_eq!(g.raw(), omega.raw());
}

fn arb_values(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn complex_hessian_is_linear(a in arb_values(64), b in arb_values(64), s in -3.0f64..3.0) {
        let geom = Arc::new(GridGeometry::new(1, vec![8, 8]).unwrap());
        let fa = ScalarField::new(geom.clone(), a).unwrap();
        let fb = ScalarField::new(geom.clone(), b).unwrap();
        let lhs = complex_hessian(&fa.add_scaled(&fb, s), &geom).unwrap();
        let ha = complex_hessian(&fa, &geom).unwrap();
        let hb = complex_hessian(&fb, &geom).unwrap();
        for ((l, x), y) in lhs.raw().iter().zip(ha.raw()).zip(hb.raw()) {
            prop_assert!((l - (x + y * s)).norm() < 1e-9 * (1.0 + l.norm()));
        }
    }

    #[test]
    fn complex_hessian_is_hermitian(v in arb_values(256)) {
        let geom = Arc::new(GridGeometry::new(2, vec![4, 4, 4, 4]).unwrap());
        let f = ScalarField::new(geom.clone(), v).unwrap();
        prop_assert!(complex_hessian(&f, &geom).unwrap().hermitian_defect() < 1e-12);
    }

    #[test]
    fn constants_have_zero_hessian(c in -100.0f64..100.0) {
        let geom = Arc::new(GridGeometry::new(2, vec![4, 4, 4, 1]).unwrap());
        let f = ScalarField::constant(geom.clone(), c);
        prop_assert!(complex_hessian(&f, &geom).unwrap().raw().iter().all(|z| z.norm() == 0.0));
    }
}
