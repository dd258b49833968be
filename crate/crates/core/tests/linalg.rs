use cocycle_lab::linalg::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-3.0f64..3.0, rows * cols).prop_map(move |v| Matrix::new(rows, cols, v).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn singular_values_are_roots_of_gram_eigenvalues(g in matrix(3, 3)) {
        let gram = to_na(&g).transpose() * to_na(&g);
        let mut eig: Vec<f64> = gram.symmetric_eigenvalues().iter().map(|v| v.max(0.0).sqrt()).collect();
        eig.sort_by(|a, b| b.total_cmp(a));
        let s = singular_profile(&g, 1e-12).unwrap().values;
        for (a, b) in s.iter().zip(&eig) {
            // a Gram eigenvalue carries absolute error ~ eps s1^2, so its root ~ eps s1^2 / s
            let slack = 1e-12 * s[0] + 8.0 * f64::EPSILON * s[0] * s[0] / b.max(f64::MIN_POSITIVE);
            prop_assert!((a - b).abs() <= slack, "{a} vs {b}");
        }
        prop_assert!(rel(s[0], to_na(&g).singular_values().max()) <= 1e-12);
    }

    #[test]
    fn pseudo_inverse_is_a_right_inverse_within_the_adjugate_bound(v in matrix(2, 4)) {
        let vvt = v.mul(&v.transpose());
        prop_assume!(det(&vvt) > 1e-3);
        let w = pseudo_inverse(&v).unwrap();
        let err = v.mul(&w).sub(&Matrix::identity(2)).norm();
        prop_assert!(err <= 1e-12 * v.norm() * w.norm());
        let upper = (adjugate(&vvt).unwrap().norm() / det(&vvt)).sqrt();
        prop_assert!(w.norm() <= upper * (1.0 + 1e-12));
        prop_assert!(w.norm() >= 1.0 / v.norm() * (1.0 - 1e-12));
        let na = to_na(&v).pseudo_inverse(1e-14).unwrap();
        prop_assert!((to_na(&w) - na).norm() <= 1e-10 * w.norm());
    }

    #[test]
    fn adjugate_is_det_times_inverse(g in matrix(3, 3)) {
        let d = det(&g);
        prop_assume!(d.abs() > 1e-2);
        let inv = to_na(&g).try_inverse().unwrap();
        let adj = to_na(&adjugate(&g).unwrap());
        prop_assert!((adj - inv * d).norm() <= 1e-10 * (d.abs() * to_na(&g).try_inverse().unwrap().norm()));
    }

    #[test]
    fn wedge_norm_is_product_of_top_two(g in matrix(3, 3), h in matrix(3, 3)) {
        let s = to_na(&g).singular_values();
        let mut s: Vec<f64> = s.iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        let w = exterior_square(&g).unwrap();
        prop_assert!(rel(w.norm(), s[0] * s[1]) <= 1e-10);
        let wh = exterior_square(&h).unwrap();
        let wgh = exterior_square(&g.mul(&h)).unwrap();
        prop_assert!(wgh.norm() <= w.norm() * wh.norm() * (1.0 + 1e-12) + 1e-300);
        // wedge is multiplicative
        prop_assert!((to_na(&wgh) - to_na(&w) * to_na(&wh)).norm() <= 1e-10 * (1.0 + wgh.norm()));
    }

    #[test]
    fn symmetric_eigenvalues_match_nalgebra(v in prop::collection::vec(-3.0f64..3.0, 16)) {
        let a = Matrix::new(4, 4, v).unwrap();
        let s = a.add(&a.transpose());
        let mut ours = symmetric_eigenvalues(&s);
        ours.sort_by(|x, y| x.total_cmp(y));
        let mut theirs: Vec<f64> = to_na(&s).symmetric_eigenvalues().iter().copied().collect();
        theirs.sort_by(|x, y| x.total_cmp(y));
        for (x, y) in ours.iter().zip(&theirs) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + s.norm()));
        }
    }
}

#[test]
fn rotation_has_unit_wedge_and_profile() {
    let (c, s) = (0.3f64.cos(), 0.3f64.sin());
    let r = Matrix::from_rows(&[vec![c, -s], vec![s, c]]).unwrap();
    assert!((exterior_square(&r).unwrap()[(0, 0)] - 1.0).abs() < 1e-15);
    let p = singular_profile(&r, 1e-12).unwrap();
    assert!(p.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
    assert_eq!(p.numerical_rank, 2);
}
