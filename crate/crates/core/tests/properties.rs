use proptest::prelude::*;

use sparsekern::baselines::{komp_path, KompConfig, KompStop};
use sparsekern::dual_field::{Integrator, QuadratureSpec};
use sparsekern::model::Term;
use sparsekern::multiclass::{ovo_predict, ovo_train};
use sparsekern::{AlphaField, DiscreteModel, DomainBox, KernelSpec, ProblemVariant, SampleSet};

fn samples(x: Vec<f64>) -> SampleSet {
    let y = x.iter().map(|v| (2.0 * v).cos()).collect();
    SampleSet::new(1, x, y, DomainBox::cube(1, 0.0, 4.0).unwrap()).unwrap()
}

fn kernel() -> KernelSpec {
    KernelSpec::gaussian(0.2, 1.2, DomainBox::cube(1, 0.0, 4.0).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn alpha_is_zero_or_beyond_threshold(
        lambda in prop::collection::vec(-4.0f64..4.0, 5),
        gamma in 0.0f64..3.0,
        z in 0.0f64..4.0,
        w in 0.2f64..1.2,
    ) {
        let s = samples(vec![0.3, 1.1, 2.0, 2.9, 3.7]);
        let f = AlphaField::new(s, lambda, gamma, kernel(), ProblemVariant::Full).unwrap();
        let a = f.alpha_d(&[z], w).unwrap();
        prop_assert!(a == 0.0 || a.abs() > (2.0 * gamma).sqrt());
        if a != 0.0 {
            prop_assert_eq!(a, f.abar(&[z], w).unwrap());
        }
    }

    #[test]
    fn zero_gamma_prediction_is_linear_in_lambda(
        lambda in prop::collection::vec(-2.0f64..2.0, 4),
        scale in 0.1f64..5.0,
    ) {
        let s = samples(vec![0.5, 1.5, 2.5, 3.5]);
        let q = Integrator::Quadrature(QuadratureSpec::new(64, 8));
        let scaled: Vec<f64> = lambda.iter().map(|l| l * scale).collect();
        let f1 = AlphaField::new(s.clone(), lambda, 0.0, kernel(), ProblemVariant::Full).unwrap();
        let f2 = AlphaField::new(s, scaled, 0.0, kernel(), ProblemVariant::Full).unwrap();
        for x in [0.0, 1.7, 3.9] {
            let a = f1.predict(&[x], &q).unwrap();
            let b = f2.predict(&[x], &q).unwrap();
            prop_assert!((b - scale * a).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn model_json_roundtrip_is_exact(
        terms in prop::collection::vec((-10.0f64..10.0, -5.0f64..5.0, 0.01f64..3.0), 0..6),
    ) {
        let m = DiscreteModel::new(terms.into_iter().map(|(a, z, w)| Term { a, z: vec![z], w }).collect());
        let back: DiscreteModel = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn komp_training_error_never_decreases(
        gaps in prop::collection::vec(0.3f64..0.45, 4..8),
        w in 0.2f64..0.6,
    ) {
        // unpenalized refits on well separated points, where the nesting argument is exact
        let x: Vec<f64> = gaps.iter().scan(0.0, |acc, g| { *acc += g; Some(*acc) }).collect();
        let s = samples(x);
        let cfg = KompConfig { ridge: 0.0, ..KompConfig::new(KompStop::KernelCount(1)) };
        let path = komp_path(&s, &kernel(), w, &cfg).unwrap();
        for p in path.mse.windows(2) {
            prop_assert!(p[1] >= p[0] - 1e-9 * (1.0 + p[0]));
        }
        prop_assert_eq!(path.survivors.len(), 1);
    }
}

#[test]
fn field_json_roundtrip_preserves_predictions() {
    let s = samples(vec![0.2, 1.4, 2.2, 3.1]);
    let f = AlphaField::new(s, vec![1.5, -0.7, 2.2, 0.4], 0.3, kernel(), ProblemVariant::Full).unwrap();
    let back: AlphaField = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
    let q = Integrator::Quadrature(QuadratureSpec::new(48, 12));
    let xs = [0.1, 1.0, 2.5, 3.9];
    assert_eq!(f.predict_many(&xs, &q).unwrap(), back.predict_many(&xs, &q).unwrap());
}

#[test]
fn monte_carlo_prediction_depends_only_on_seed() {
    let s = samples(vec![0.2, 1.4, 2.2, 3.1]);
    let f = AlphaField::new(s, vec![1.5, -0.7, 2.2, 0.4], 0.1, kernel(), ProblemVariant::Full).unwrap();
    let mc = |seed| Integrator::MonteCarlo { batch: 500, seed };
    let xs = [0.5, 2.0];
    assert_eq!(f.predict_many(&xs, &mc(9)).unwrap(), f.predict_many(&xs, &mc(9)).unwrap());
    assert_ne!(f.predict_many(&xs, &mc(9)).unwrap(), f.predict_many(&xs, &mc(10)).unwrap());
}

#[test]
fn ovo_recovers_separable_labels_with_exact_trainers() {
    // three classes on a line; each pair trainer is a step built from the pair's midpoint
    let x: Vec<f64> = (0..30).map(|i| i as f64 / 10.0).collect();
    let y: Vec<f64> = (0..30).map(|i| (i / 10) as f64 * 2.0 + 1.0).collect();
    let s = SampleSet::new(1, x, y, DomainBox::cube(1, 0.0, 3.0).unwrap()).unwrap();
    let ens = ovo_train(&s, |pair| {
        let (mut lo_max, mut hi_min) = (f64::NEG_INFINITY, f64::INFINITY);
        for (x, y) in pair.rows().zip(pair.y()) {
            if *y > 0.0 {
                lo_max = lo_max.max(x[0]);
            } else {
                hi_min = hi_min.min(x[0]);
            }
        }
        let mid = 0.5 * (lo_max + hi_min);
        // two wide opposite bumps form an odd function that changes sign at mid
        Ok(DiscreteModel::new(vec![
            Term { a: 1.0, z: vec![mid - 50.0], w: 50.0 },
            Term { a: -1.0, z: vec![mid + 50.0], w: 50.0 },
        ]))
    })
    .unwrap();
    for (row, y) in s.rows().zip(s.y()) {
        assert_eq!(ovo_predict(&ens, row), *y);
    }
}
