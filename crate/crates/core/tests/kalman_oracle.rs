mod common;

use common::{frobenius, inverse, matmul, OracleFilter};
use nalgebra::{Matrix4, Vector4};
use proptest::prelude::*;
use seedcount::kalman::{self, gating_distance, mahalanobis_sq, KalmanState, NoiseConfig};
use seedcount::BBox;

fn cfg(nsa: bool) -> NoiseConfig {
    NoiseConfig {
        nsa_enabled: nsa,
        ..NoiseConfig::default()
    }
}

fn arb_box() -> impl Strategy<Value = BBox> {
    (0.0..700.0f64, 0.0..1200.0f64, 4.0..90.0f64, 4.0..90.0f64)
        .prop_map(|(x, y, w, h)| BBox::new(x, y, w, h).unwrap())
}

fn dense_of(state: &KalmanState) -> (Vec<f64>, Vec<Vec<f64>>) {
    (
        state.mean.iter().copied().collect(),
        (0..8).map(|i| (0..8).map(|j| state.covariance[(i, j)]).collect()).collect(),
    )
}

fn relative(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn predict_only_matches_oracle(b in arb_box(), steps in 1usize..40) {
        let c = cfg(false);
        let mut s = kalman::initiate(&b, &c);
        let mut o = OracleFilter::initiate(b.to_xyah(), c.std_weight_position, c.std_weight_velocity);
        for _ in 0..steps {
            s = kalman::predict(&s, &c);
            o.predict();
        }
        let (m, p) = dense_of(&s);
        prop_assert!(relative(&m, &o.mean) < 1e-12);
        let flat: Vec<f64> = p.into_iter().flatten().collect();
        let oflat: Vec<f64> = o.cov.iter().flatten().copied().collect();
        prop_assert!(relative(&flat, &oflat) < 1e-12);
    }

    #[test]
    fn update_keeps_covariance_valid(b in arb_box(), z in arb_box(), conf in 0.0..1.0f64, nsa in any::<bool>()) {
        let c = cfg(nsa);
        let prior = kalman::predict(&kalman::initiate(&b, &c), &c);
        let post = kalman::update(&prior, &z, conf, &c).unwrap();
        let p = post.covariance;
        for i in 0..8 {
            prop_assert!(p[(i, i)] >= 0.0);
            for j in 0..8 {
                prop_assert!((p[(i, j)] - p[(j, i)]).abs() <= 1e-9);
            }
        }
        prop_assert!(post.aspect() > 0.0 && post.height() > 0.0);
    }

    #[test]
    fn higher_confidence_pulls_closer(b in arb_box(), dx in -20.0..20.0f64, dy in -20.0..20.0f64, c1 in 0.0..1.0f64, c2 in 0.0..1.0f64) {
        prop_assume!((c1 - c2).abs() > 1e-3);
        let (hi, lo) = if c1 > c2 { (c1, c2) } else { (c2, c1) };
        let c = cfg(true);
        let prior = kalman::predict(&kalman::initiate(&b, &c), &c);
        let z = b.translated(dx + 1.0, dy + 1.0);
        let zv = z.to_xyah();
        let dist = |s: &KalmanState| (0..4).map(|i| (s.mean[i] - zv[i]).powi(2)).sum::<f64>().sqrt();
        let d_hi = dist(&kalman::update(&prior, &z, hi, &c).unwrap());
        let d_lo = dist(&kalman::update(&prior, &z, lo, &c).unwrap());
        prop_assert!(d_hi < d_lo, "{} !< {}", d_hi, d_lo);
    }

    #[test]
    fn mahalanobis_matches_dense_inverse(v in prop::array::uniform4(-50.0..50.0f64), b in arb_box()) {
        let c = cfg(false);
        let s = kalman::predict(&kalman::initiate(&b, &c), &c);
        let (_, cov) = s.project(&c);
        let dense: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| cov[(i, j)]).collect()).collect();
        let inv = inverse(&dense);
        let col: Vec<Vec<f64>> = v.iter().map(|x| vec![*x]).collect();
        let q = matmul(&inv, &col);
        let want: f64 = v.iter().zip(&q).map(|(a, r)| a * r[0]).sum();
        let got = mahalanobis_sq(&Vector4::from(v), &cov).unwrap();
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0));
    }

    #[test]
    fn gating_ignores_confidence_scaling(b in arb_box(), z in arb_box()) {
        let s = kalman::predict(&kalman::initiate(&b, &cfg(false)), &cfg(false));
        prop_assert_eq!(
            gating_distance(&s, &z, &cfg(false)).unwrap(),
            gating_distance(&s, &z, &cfg(true)).unwrap()
        );
    }
}

#[test]
fn singular_innovation_is_an_error() {
    let mut s = kalman::initiate(&BBox::new(0.0, 0.0, 10.0, 10.0).unwrap(), &cfg(true));
    s.covariance.fill(0.0);
    let err = kalman::update(&s, &BBox::new(1.0, 1.0, 10.0, 10.0).unwrap(), 1.0, &cfg(true));
    assert!(matches!(err, Err(seedcount::Error::SingularCovariance)));
    assert!(mahalanobis_sq(&Vector4::zeros(), &Matrix4::zeros()).is_err());
}

#[test]
fn oracle_inverse_is_sane() {
    let a = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
    let prod = matmul(&a, &inverse(&a));
    let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    let diff: Vec<Vec<f64>> = prod.iter().zip(&id).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect()).collect();
    assert!(frobenius(&diff) < 1e-15);
}
