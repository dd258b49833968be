use cocycle_lab::avalanche::*;
use cocycle_lab::cocycle::iterate;
use cocycle_lab::linalg::Matrix;
use cocycle_lab::models::{schrodinger_cocycle, SchrodingerParams};
use cocycle_lab::rng::SeedStream;
use cocycle_lab::torus::{Frequency, TorusPoint};
use cocycle_lab::trig::TrigPoly;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

#[test]
fn exact_log_norm_matches_direct_product() {
    let mut rng = SeedStream::new(4).stream("test/short-chains");
    for m in 2..=4 {
        let chain = random_chain(m, 12, 1e-2, &mut rng).unwrap();
        let mut prod = DMatrix::<f64>::identity(m, m);
        for b in chain.blocks() {
            prod = to_na(&b.mat) * prod * b.log_scale.exp();
        }
        let direct = prod.singular_values().max().ln();
        assert!((chain.exact_log_norm() - direct).abs() < 1e-12, "m={m}");
    }
}

#[test]
fn rank_one_chains_are_exact() {
    // ||a_n b_n^T ... a_1 b_1^T|| = |a_n| |b_1| prod |b_(i+1) . a_i|
    let mut rng = SeedStream::new(11).stream("test/rank-one");
    use rand::Rng;
    let mut vecs = Vec::new();
    for _ in 0..40 {
        let a: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        vecs.push((a, b));
    }
    let blocks: Vec<Matrix> = vecs.iter().map(|(a, b)| Matrix::from_fn(3, 3, |i, j| a[i] * b[j])).collect();
    let chain = MatrixChain::new(blocks).unwrap();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    let mut want = norm(&vecs[39].0).ln() + norm(&vecs[0].1).ln();
    for i in 0..39 {
        want += dot(&vecs[i + 1].1, &vecs[i].0).abs().ln();
    }
    let rep = ap_apply(&chain, DEFAULT_AP_C).unwrap();
    assert!((rep.exact_log_norm - want).abs() < 1e-11);
    assert!(rep.residual < 1e-11, "{rep:?}");
    assert!(rep.kappa < 1e-12);
}

#[test]
fn schrodinger_chain_tiles_the_orbit() {
    let c = schrodinger_cocycle(SchrodingerParams::new(TrigPoly::cos1(1), 12.0, 0.3), Frequency::golden()).unwrap();
    let x = TorusPoint::scalar(0.2);
    let chain = schrodinger_chain(&c, &x, 40, 6, Some(55)).unwrap();
    assert_eq!(chain.lengths().unwrap(), &[40, 40, 40, 40, 40, 55]);
    let whole = iterate(&c, &x, 255).unwrap().log_norm();
    assert!((chain.exact_log_norm() - whole).abs() < 1e-10 * whole);
    let rep = ap_apply(&chain, DEFAULT_AP_C).unwrap();
    assert!(rep.hypotheses_met, "{rep:?}");
    // kappa is about exp(-2 n0 L) here, so rounding sets the floor
    assert!(rep.residual <= rep.bound + 1e-12 * rep.exact_log_norm, "{rep:?}");
    assert!(schrodinger_chain(&c, &x, 40, 6, Some(80)).is_err());
    assert!(schrodinger_chain(&c, &x, 40, 2, None).is_err());
}

#[test]
fn random_chains_meet_their_gap_target() {
    let mut rng = SeedStream::new(5).stream("test/gap");
    let chain = random_chain(3, 50, 1e-5, &mut rng).unwrap();
    for b in chain.blocks() {
        assert!(1.0 / gap_ratio(&b.mat).unwrap() <= 1e-5 * (1.0 + 1e-12));
    }
    let rep = ap_apply(&chain, DEFAULT_AP_C).unwrap();
    assert!(rep.hypotheses_met);
    assert!(rep.residual <= rep.bound);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn residual_is_invariant_under_block_scaling(seed in 0u64..1000, logs in prop::collection::vec(-30.0f64..30.0, 8)) {
        let mut rng = SeedStream::new(seed).stream("test/scaling");
        let chain = random_chain(3, 8, 1e-3, &mut rng).unwrap();
        let factors: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        let scaled = chain.rescaled(&factors).unwrap();
        let a = ap_apply(&chain, DEFAULT_AP_C).unwrap();
        let b = ap_apply(&scaled, DEFAULT_AP_C).unwrap();
        let shift: f64 = logs.iter().sum();
        prop_assert!((b.exact_log_norm - a.exact_log_norm - shift).abs() < 1e-9);
        prop_assert!((b.ap_estimate - a.ap_estimate - shift).abs() < 1e-9);
        prop_assert!((b.residual - a.residual).abs() < 1e-9);
        prop_assert!((b.kappa - a.kappa).abs() <= 1e-9 * a.kappa.max(1e-300));
        prop_assert!((b.epsilon - a.epsilon).abs() < 1e-9);
    }
}
