use instashap::gam::{
    instant_shap, io, select_frontier, train_fastshap, train_gam, train_gam_with, AdditiveModel, AxisBasis,
    FastShapConfig, FrontierSearch, GamTarget, HeadArch, Objective, SavedModel, Scorer, ShapeFunction, TrainConfig,
};
use instashap::data::InputEncoder;
use instashap::indices::{kernel_shap_ls, IndexFamily};
use instashap::masking::{ExactConditional, MaskedFunction};
use instashap::poly::Polynomial;
use instashap::synthetic::{exact_shapley_2d, purified_2d, target_2d, PairsGaussian, Sampler};
use instashap::{Error, FeatureSet};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn s(ix: &[usize]) -> FeatureSet {
    FeatureSet::from_indices(ix)
}

fn full_2d_frontier() -> Vec<FeatureSet> {
    vec![FeatureSet::EMPTY, s(&[0]), s(&[1]), s(&[0, 1])]
}

fn oracle_2d(rho: f64) -> ExactConditional {
    ExactConditional::polynomial(&target_2d(), PairsGaussian::new(2, rho).unwrap()).unwrap()
}

/// Data-density probe points inside `[−2, 2]²`.
fn probes(rho: f64, seed: u64) -> Vec<[f64; 2]> {
    let x = PairsGaussian::new(2, rho).unwrap().sample(4000, seed).unwrap();
    x.rows()
        .into_iter()
        .filter(|r| r[0].abs() <= 2.0 && r[1].abs() <= 2.0)
        .map(|r| [r[0], r[1]])
        .collect()
}

fn train_2d(rho: f64, objective: Objective) -> AdditiveModel {
    let world = PairsGaussian::new(2, rho).unwrap();
    let x = world.sample(20_000, 1).unwrap();
    let oracle = oracle_2d(rho);
    let cfg = TrainConfig { epochs: 100, learning_rate: 0.1, seed: 3, ..Default::default() };
    train_gam(GamTarget::Masked(&oracle), &x, None, &full_2d_frontier(), objective, &cfg).unwrap()
}

#[test]
fn masked_training_recovers_purified_components() {
    let rho = 0.5;
    let model = train_2d(rho, Objective::Instashap);
    assert!((model.intercept[0] - rho).abs() < 0.05, "intercept {}", model.intercept[0]);
    let pts = probes(rho, 9);
    let mut mse = [0.0; 3];
    for p in &pts {
        let truth = purified_2d(rho, p[0], p[1]);
        for (j, t) in [s(&[0]), s(&[1]), s(&[0, 1])].into_iter().enumerate() {
            let e = model.shape(t).unwrap().eval(p)[0] - truth[j + 1];
            mse[j] += e * e / pts.len() as f64;
        }
    }
    assert!(mse.iter().all(|m| *m < 0.01), "component MSE {mse:?}");
}

#[test]
fn independent_case_pair_shape_is_the_product() {
    let model = train_2d(0.0, Objective::Instashap);
    let pts = probes(0.0, 4);
    let mse: f64 = pts
        .iter()
        .map(|p| (model.shape(s(&[0, 1])).unwrap().eval(p)[0] - p[0] * p[1]).powi(2))
        .sum::<f64>()
        / pts.len() as f64;
    assert!(mse < 0.01, "pair MSE {mse}");
}

#[test]
fn instant_shapley_matches_closed_form() {
    let rho = 0.5;
    let model = train_2d(rho, Objective::Instashap);
    let pts = probes(rho, 10);
    let mut se = 0.0;
    for p in &pts {
        let res = instant_shap(&model, p, 1, IndexFamily::Faith).unwrap();
        let (px, _) = exact_shapley_2d(rho, p[0], p[1]);
        se += (res.value(s(&[0])) - px).powi(2);
        assert!(res.meta.efficiency_residual.unwrap() < 1e-8);
    }
    let rmse = (se / pts.len() as f64).sqrt();
    assert!(rmse < 0.05, "instant Shapley RMSE {rmse}");
}

#[test]
fn unmasked_training_fits_the_prediction() {
    let rho = 0.5;
    let model = train_2d(rho, Objective::Vanilla);
    let f = target_2d();
    let pts = probes(rho, 11);
    let mse: f64 = pts.iter().map(|p| (model.predict(p).unwrap()[0] - f.eval(p)).powi(2)).sum::<f64>() / pts.len() as f64;
    assert!(mse < 0.01, "prediction MSE {mse}");
    assert!(matches!(instant_shap(&model, &[0.0, 0.0], 1, IndexFamily::Sii), Err(Error::Incompatible(_))));
}

/// Mean square of `E[φ(x₀, X₁) | x₀]` and of its partner projection, plus `E[φ²]`.
fn pair_projections(pair: &ShapeFunction, world: &PairsGaussian) -> ([f64; 2], f64, Vec<([f64; 2], f64)>) {
    let xs = world.sample(300, 5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut var, mut proj, mut first) = (0.0, [0.0; 2], Vec::new());
    for row in xs.rows() {
        let x = [row[0], row[1]];
        var += pair.eval(&x)[0].powi(2) / 300.0;
        for (j, keep) in [s(&[0]), s(&[1])].into_iter().enumerate() {
            let mut m = 0.0;
            for _ in 0..400 {
                let mut z = x;
                world.sample_conditional(&mut z, keep, &mut rng);
                m += pair.eval(&z)[0] / 400.0;
            }
            proj[j] += m * m / 300.0;
            if j == 0 {
                first.push((x, m));
            }
        }
    }
    (proj, var, first)
}

#[test]
fn learned_pair_shape_is_purified_under_independence() {
    let model = train_2d(0.0, Objective::Instashap);
    let world = PairsGaussian::new(2, 0.0).unwrap();
    let (proj, var, _) = pair_projections(model.shape(s(&[0, 1])).unwrap(), &world);
    assert!(proj.iter().all(|p| *p <= 0.1 * var), "projections {proj:?} vs variance {var}");
}

/// Under correlation the purified pair is not conditionally centred; the learned shape must carry
/// the same projection `E[f̃_xy | x] = ρ³ − ρ²x − ρ³x²`.
#[test]
fn learned_pair_shape_keeps_correlated_projection() {
    let rho = 0.5;
    let model = train_2d(rho, Objective::Instashap);
    let world = PairsGaussian::new(2, rho).unwrap();
    let (_, _, first) = pair_projections(model.shape(s(&[0, 1])).unwrap(), &world);
    let mse: f64 = first
        .iter()
        .map(|(x, m)| (m - (rho.powi(3) - rho * rho * x[0] - rho.powi(3) * x[0] * x[0])).powi(2))
        .sum::<f64>()
        / first.len() as f64;
    assert!(mse < 0.01, "projection MSE {mse}");
}

#[test]
fn training_loss_falls_early() {
    let world = PairsGaussian::new(2, 0.5).unwrap();
    let x = world.sample(5000, 1).unwrap();
    let oracle = oracle_2d(0.5);
    let cfg = TrainConfig { epochs: 6, ..Default::default() };
    let mut seen = Vec::new();
    let model = train_gam_with(GamTarget::Masked(&oracle), &x, None, &full_2d_frontier(), Objective::Instashap, &cfg, &mut |e, _| {
        seen.push(e);
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, (0..=6).collect::<Vec<_>>());
    let h = &model.meta.loss_history;
    assert!(h[4] < h[0], "loss history {h:?}");
}

fn toy_model() -> AdditiveModel {
    let lin = |knots: Vec<f64>| AxisBasis::Linear { knots };
    let mut a = ShapeFunction::new(s(&[0]), vec![lin(vec![-1.0, 0.0, 1.0])], 1).unwrap();
    a.coefficients = vec![-1.0, 0.0, 1.0];
    let mut b = ShapeFunction::new(s(&[1]), vec![lin(vec![0.0, 2.0])], 1).unwrap();
    b.coefficients = vec![0.5, -0.25];
    let mut ab = ShapeFunction::new(s(&[0, 1]), vec![lin(vec![-1.0, 1.0]), lin(vec![0.0, 1.0])], 1).unwrap();
    ab.coefficients = vec![0.1, 0.2, 0.3, 0.4];
    let mut m = AdditiveModel::new(3, 1, vec![a, b, ab], Objective::Instashap).unwrap();
    m.intercept = vec![0.7];
    m
}

#[test]
fn masked_prediction_semantics() {
    let m = toy_model();
    let x = [0.3, 1.1, -4.0];
    let full = m.predict(&x).unwrap();
    assert_eq!(full, m.predict_masked(&x, FeatureSet::full(3)).unwrap());
    assert_eq!(m.predict_masked(&x, FeatureSet::EMPTY).unwrap(), vec![0.7]);
    let only_first = m.predict_masked(&x, s(&[0])).unwrap()[0];
    assert!((only_first - (0.7 + 0.3)).abs() < 1e-15);
    assert!(matches!(m.predict(&[0.0]), Err(Error::DimensionMismatch { .. })));
}

#[test]
fn instant_values_split_components_evenly() {
    let m = toy_model();
    let x = [0.3, 1.1, -4.0];
    let res = instant_shap(&m, &x, 1, IndexFamily::Faith).unwrap();
    let pair = m.shape(s(&[0, 1])).unwrap().eval(&x)[0];
    let a = m.shape(s(&[0])).unwrap().eval(&x)[0];
    assert!((res.value(s(&[0])) - (a + pair / 2.0)).abs() < 1e-14);
    assert_eq!(res.value(s(&[2])), 0.0);
    let total: f64 = res.total()[0];
    assert!((total - (m.predict(&x).unwrap()[0] - 0.7)).abs() < 1e-12);
    let faith2 = instant_shap(&m, &x, 2, IndexFamily::Faith).unwrap();
    assert!((faith2.value(s(&[0, 1])) - pair).abs() < 1e-14);
    assert!((faith2.value(s(&[0])) - a).abs() < 1e-14);
}

#[test]
fn serialization_round_trip_is_bit_exact() {
    let mut m = toy_model();
    m.meta.loss_history = vec![0.1 + 0.2, 1.0 / 3.0];
    let bytes = io::to_bytes(&SavedModel::Additive(m.clone())).unwrap();
    let SavedModel::Additive(back) = io::from_bytes(&bytes).unwrap() else { panic!("wrong kind") };
    assert_eq!(back, m);
    let x = [0.123, -0.77, 9.0];
    assert_eq!(back.predict(&x).unwrap()[0].to_bits(), m.predict(&x).unwrap()[0].to_bits());

    assert!(matches!(io::from_bytes(&bytes[..bytes.len() / 2]), Err(Error::Corrupt(_))));
    let text = String::from_utf8(bytes).unwrap().replace("\"format_version\": 1", "\"format_version\": 7");
    assert!(matches!(io::from_bytes(text.as_bytes()), Err(Error::VersionMismatch { found: 7, expected: 1 })));
}

#[test]
fn head_round_trip_is_bit_exact() {
    let oracle = oracle_2d(0.3);
    let x = PairsGaussian::new(2, 0.3).unwrap().sample(300, 2).unwrap();
    let cfg = FastShapConfig { epochs: 1, arch: HeadArch::Mlp { hidden: vec![8] }, ..Default::default() };
    let head = train_fastshap(&oracle, &x, InputEncoder::identity(2), &cfg, &mut |_, _| Ok(())).unwrap();
    let bytes = io::to_bytes(&SavedModel::Head(head.clone())).unwrap();
    assert_eq!(io::from_bytes(&bytes).unwrap(), SavedModel::Head(head));
}

#[test]
fn frontier_search_finds_the_pair() {
    let rho = 0.2;
    let oracle = oracle_2d(rho);
    let x = PairsGaussian::new(2, rho).unwrap().sample(1000, 3).unwrap();
    let cfg = FrontierSearch { rounds: 1, per_round: 1, ..Default::default() };
    let f = select_frontier(&oracle, &x, &cfg).unwrap();
    assert_eq!(f, full_2d_frontier());
    assert_eq!(f, select_frontier(&oracle, &x, &cfg).unwrap());
}

#[test]
fn frontier_search_ignores_additive_targets() {
    let world = PairsGaussian::new(4, 0.0).unwrap();
    let p = (0..4).fold(Polynomial::zero(4), |acc, i| acc.add(&Polynomial::var(4, i).scale(i as f64 + 1.0)));
    let oracle = ExactConditional::polynomial(&p, world).unwrap();
    let x = world.sample(500, 3).unwrap();
    let cfg = FrontierSearch { scorer: Scorer::Inclusion, threshold: 0.5, ..Default::default() };
    let f = select_frontier(&oracle, &x, &cfg).unwrap();
    assert!(f.iter().all(|t| t.len() <= 1), "{f:?}");
}

/// Game whose marginal contributions do not depend on `x`.
struct FixedGame;

impl MaskedFunction for FixedGame {
    fn dim(&self) -> usize {
        3
    }
    fn mode(&self) -> instashap::masking::RemovalMode {
        instashap::masking::RemovalMode::Table
    }
    fn eval_into(&self, _x: &[f64], s: FeatureSet, out: &mut [f64]) {
        let b = |i| if s.contains(i) { 1.0 } else { 0.0 };
        out[0] = 2.0 * b(0) - b(1) + 3.0 * b(0) * b(2);
    }
}

#[test]
fn constant_head_recovers_mean_shapley() {
    let x = Array2::from_shape_fn((2000, 3), |(i, j)| ((i * 7 + j * 3) % 11) as f64);
    let cfg = FastShapConfig { arch: HeadArch::Constant, epochs: 100, learning_rate: 5e-2, ..Default::default() };
    let head = train_fastshap(&FixedGame, &x, InputEncoder::identity(3), &cfg, &mut |_, _| Ok(())).unwrap();
    let got = head.explain(&FixedGame, &[0.0; 3]).unwrap();
    let exact = kernel_shap_ls(&FixedGame, &[0.0; 3]).unwrap();
    for i in 0..3 {
        assert!((got.value(s(&[i])) - exact.value(s(&[i]))).abs() < 0.05, "{i}: {got:?}");
    }
}

#[test]
fn pairwise_head_reconstructs_better_than_first_order() {
    let rho = 0.5;
    let oracle = oracle_2d(rho);
    let world = PairsGaussian::new(2, rho).unwrap();
    let x = world.sample(2000, 8).unwrap();
    let wide = |order| FastShapConfig { order, epochs: 15, arch: HeadArch::Mlp { hidden: vec![32, 32] }, ..Default::default() };
    let h1 = train_fastshap(&oracle, &x, InputEncoder::identity(2), &wide(1), &mut |_, _| Ok(())).unwrap();
    let h2 = train_fastshap(&oracle, &x, InputEncoder::identity(2), &wide(2), &mut |_, _| Ok(())).unwrap();
    let l1 = *h1.meta.loss_history.last().unwrap();
    let l2 = *h2.meta.loss_history.last().unwrap();
    assert!(l2 < l1, "k=2 loss {l2} vs k=1 loss {l1}");
}

#[test]
fn rejects_bad_inputs() {
    let oracle = oracle_2d(0.5);
    let x = PairsGaussian::new(2, 0.5).unwrap().sample(10, 1).unwrap();
    let cfg = TrainConfig::default();
    assert!(matches!(
        train_gam(GamTarget::Masked(&oracle), &x, None, &[FeatureSet::EMPTY], Objective::Instashap, &cfg),
        Err(Error::InvalidParameter(_))
    ));
    let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
    assert!(train_gam(GamTarget::Masked(&oracle), &x, None, &full_2d_frontier(), Objective::Instashap, &bad).is_err());
}
