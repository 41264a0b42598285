//! End-to-end experiment drivers shared by the command line and the acceptance suite.
//!
//! Each driver is deterministic given its config; artifacts are returned as data and the caller
//! decides where to write them.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::anova::{classify_interaction, sobol_covariances, InteractionKind, SobolReport};
use crate::data::{Dataset, InputEncoder, Labels, Task};
use crate::error::{check_dim, Error, Result};
use crate::eval::{accuracy, argmax_rows, frontier_indices, nmse, shap_mse, trust_gap, GamScore, MetricSeries, TrustGapReport};
use crate::gam::{
    instant_shap, select_frontier, train_fastshap, train_gam, train_gam_with, AdditiveModel, AmortizedHead, FastShapConfig,
    FrontierSearch, GamTarget, Objective, SavedModel, Scorer, TrainConfig,
};
use crate::indices::{mobius_to_index, purified_at, shapley_exact, shapley_from_purified, AttributionResult, IndexFamily};
use crate::masking::{train_surrogate, ExactConditional, MaskedFunction, SurrogateConfig, SurrogateModel};
use crate::par::map_indices;
use crate::subset::{FeatureSet, WeightTable, MAX_EXHAUSTIVE_D};
use crate::synthetic::{
    exact_shapley_2d, make_multilinear_target, pair_closure_frontier, purified_2d, sobol_covariances_2d, target_2d, CoeffDist,
    PairsGaussian, Sampler,
};

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must be in [-1, 1], got {rho}")));
    }
    Ok(())
}

/// Exact Shapley values of `f` at every row of `xs`.
pub fn exact_shapley_rows(f: &dyn MaskedFunction, xs: &Array2<f64>) -> Result<Vec<AttributionResult>> {
    check_dim(f.dim(), xs.ncols())?;
    map_indices(xs.nrows(), |r| shapley_exact(f, &xs.row(r).to_vec()))
        .into_iter()
        .collect()
}

/// Instant Shapley values of a masked-trained model at every row of `xs`.
pub fn instant_shapley_rows(model: &AdditiveModel, xs: &Array2<f64>) -> Result<Vec<AttributionResult>> {
    (0..xs.nrows())
        .map(|r| instant_shap(model, &xs.row(r).to_vec(), 1, IndexFamily::Faith))
        .collect()
}

// ---------------------------------------------------------------------------------------------
// two-feature world

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synth2dConfig {
    pub rho: f64,
    pub n_train: usize,
    /// Fresh points for the data-density error summary.
    pub n_probe: usize,
    /// Points per axis of the exported grids over `[-2, 2]`.
    pub grid: usize,
    pub sobol_samples: usize,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for Synth2dConfig {
    fn default() -> Self {
        Synth2dConfig {
            rho: 0.5,
            n_train: 20_000,
            n_probe: 5_000,
            grid: 41,
            sobol_samples: 100_000,
            train: TrainConfig { epochs: 100, learning_rate: 0.1, ..TrainConfig::default() },
            seed: 0,
        }
    }
}

/// Learned-vs-analytic error of one purified component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    pub subset: Vec<usize>,
    pub mse: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synth2dReport {
    pub rho: f64,
    /// `|ρ| = 1`: each feature determines the other, so conditioning on one is deterministic.
    pub degenerate: bool,
    pub notes: Vec<String>,
    pub learned_intercept: f64,
    pub analytic_intercept: f64,
    /// Data-density errors of the learned shapes against the analytic purified components.
    pub components: Vec<ComponentError>,
    pub max_component_mse: f64,
    /// Instant Shapley vs the closed form, per feature, over the probe points.
    pub shapley_rmse: [f64; 2],
    /// Largest gap between enumeration over the exact oracle and the closed form on the grid.
    pub oracle_shapley_max_error: f64,
    pub sobol: SobolReport,
    /// Closed-form `E[F · f̃_S]` for `∅, {x}, {y}, {x,y}`.
    pub analytic_uncentered_covariances: [f64; 4],
    pub pair_interaction: InteractionKind,
    /// Largest `|C_S − V_S|` in units of the combined standard error.
    pub max_cov_var_z: f64,
    pub final_loss: Option<f64>,
}

/// One point of the exported `[-2, 2]²` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synth2dGridRow {
    pub x: f64,
    pub y: f64,
    pub learned_x: f64,
    pub learned_y: f64,
    pub learned_xy: f64,
    pub analytic_x: f64,
    pub analytic_y: f64,
    pub analytic_xy: f64,
    pub instant_phi_x: f64,
    pub instant_phi_y: f64,
    pub exact_phi_x: f64,
    pub exact_phi_y: f64,
}

pub struct Synth2dOutcome {
    pub report: Synth2dReport,
    pub model: AdditiveModel,
    pub grid: Vec<Synth2dGridRow>,
}

/// Trains an InstaSHAP model on `f = x + xy` under the exact conditional oracle and compares
/// everything it yields against the closed forms.
pub fn synth2d(config: &Synth2dConfig) -> Result<Synth2dOutcome> {
    check_rho(config.rho)?;
    if config.n_train == 0 || config.n_probe == 0 || config.sobol_samples < 2 {
        return Err(Error::InvalidParameter("sample counts must be positive".into()));
    }
    let rho = config.rho;
    let world = PairsGaussian::new(2, rho)?;
    let poly = target_2d();
    let oracle = ExactConditional::polynomial(&poly, world)?;
    let x = world.sample(config.n_train, config.seed)?;
    let frontier = [FeatureSet::EMPTY, FeatureSet::singleton(0), FeatureSet::singleton(1), FeatureSet::full(2)];
    let train = TrainConfig { seed: config.seed, ..config.train.clone() };
    let model = train_gam(GamTarget::Masked(&oracle), &x, None, &frontier, Objective::Instashap, &train)?;

    let probe = world.sample(config.n_probe, config.seed.wrapping_add(1))?;
    let sets = [FeatureSet::singleton(0), FeatureSet::singleton(1), FeatureSet::full(2)];
    let mut se = [0.0; 3];
    let mut phi_se = [0.0; 2];
    for row in probe.rows() {
        let p = [row[0], row[1]];
        let truth = purified_2d(rho, p[0], p[1]);
        for (k, &t) in sets.iter().enumerate() {
            let v = model.shape(t).map_or(0.0, |s| s.eval(&p)[0]);
            se[k] += (v - truth[k + 1]).powi(2);
        }
        let phi = instant_shap(&model, &p, 1, IndexFamily::Faith)?;
        let (ex, ey) = exact_shapley_2d(rho, p[0], p[1]);
        phi_se[0] += (phi.value(FeatureSet::singleton(0)) - ex).powi(2);
        phi_se[1] += (phi.value(FeatureSet::singleton(1)) - ey).powi(2);
    }
    let n = config.n_probe as f64;
    let components: Vec<ComponentError> = sets
        .iter()
        .zip(se)
        .map(|(t, e)| ComponentError { subset: t.indices().collect(), mse: e / n, rmse: (e / n).sqrt() })
        .collect();

    let axis: Vec<f64> = (0..config.grid.max(2))
        .map(|i| -2.0 + 4.0 * i as f64 / (config.grid.max(2) - 1) as f64)
        .collect();
    let mut grid = Vec::with_capacity(axis.len() * axis.len());
    let mut oracle_err: f64 = 0.0;
    for &gx in &axis {
        for &gy in &axis {
            let p = [gx, gy];
            let truth = purified_2d(rho, gx, gy);
            let learned: Vec<f64> = sets.iter().map(|&t| model.shape(t).map_or(0.0, |s| s.eval(&p)[0])).collect();
            let inst = instant_shap(&model, &p, 1, IndexFamily::Faith)?;
            let enumerated = shapley_exact(&oracle, &p)?;
            let (ex, ey) = exact_shapley_2d(rho, gx, gy);
            oracle_err = oracle_err
                .max((enumerated.value(FeatureSet::singleton(0)) - ex).abs())
                .max((enumerated.value(FeatureSet::singleton(1)) - ey).abs());
            grid.push(Synth2dGridRow {
                x: gx,
                y: gy,
                learned_x: learned[0],
                learned_y: learned[1],
                learned_xy: learned[2],
                analytic_x: truth[1],
                analytic_y: truth[2],
                analytic_xy: truth[3],
                instant_phi_x: inst.value(FeatureSet::singleton(0)),
                instant_phi_y: inst.value(FeatureSet::singleton(1)),
                exact_phi_x: ex,
                exact_phi_y: ey,
            });
        }
    }

    let sobol = sobol_covariances(&poly, &oracle, &world, config.sobol_samples, config.seed.wrapping_add(2))?;
    let max_cov_var_z = sobol
        .entries
        .iter()
        .filter(|e| !e.subset.is_empty())
        .map(|e| {
            let se = (e.v_se.powi(2) + e.c_se.powi(2)).sqrt();
            if se > 0.0 { (e.c - e.v).abs() / se } else { (e.c - e.v).abs() / f64::EPSILON }
        })
        .fold(0.0, f64::max);
    let degenerate = rho.abs() == 1.0;
    let mut notes = Vec::new();
    if degenerate {
        notes.push(
            "degenerate conditional: the features are duplicated, so conditioning on either one fixes the other".into(),
        );
    }
    if rho != 0.0 {
        notes.push("correlated inputs: Sobol covariances C_S differ from the variances V_S".into());
    }
    let max_component_mse = components.iter().map(|c| c.mse).fold(0.0, f64::max);
    let report = Synth2dReport {
        rho,
        degenerate,
        notes,
        learned_intercept: model.intercept[0],
        analytic_intercept: purified_2d(rho, 0.0, 0.0)[0],
        components,
        max_component_mse,
        shapley_rmse: [(phi_se[0] / n).sqrt(), (phi_se[1] / n).sqrt()],
        oracle_shapley_max_error: oracle_err,
        pair_interaction: classify_interaction(sobol.entry(FeatureSet::full(2))),
        analytic_uncentered_covariances: sobol_covariances_2d(rho),
        sobol,
        max_cov_var_z,
        final_loss: model.meta.loss_history.last().copied(),
    };
    Ok(Synth2dOutcome { report, model, grid })
}

// ---------------------------------------------------------------------------------------------
// ten-feature benchmark

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Explainer {
    #[serde(rename = "fastshap")]
    FastShap,
    #[serde(rename = "instashap")]
    InstaShap,
}

impl Explainer {
    pub fn name(self) -> &'static str {
        match self {
            Explainer::FastShap => "fastshap",
            Explainer::InstaShap => "instashap",
        }
    }
}

/// What the explainers are trained to explain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Removal {
    /// A masked network fitted to noiseless labels; model-SHAP is its exact SHAP.
    Surrogate,
    /// The closed-form conditional expectation; model-SHAP and true-SHAP coincide.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synth10dConfig {
    pub d: usize,
    pub rho: f64,
    pub kstar: usize,
    pub dist: CoeffDist,
    pub removal: Removal,
    pub methods: Vec<Explainer>,
    pub n_train: usize,
    pub n_eval: usize,
    /// Training epochs of both explainers.
    pub epochs: usize,
    pub seed: u64,
    pub surrogate: SurrogateConfig,
    pub gam: TrainConfig,
    pub head: FastShapConfig,
}

impl Default for Synth10dConfig {
    fn default() -> Self {
        Synth10dConfig {
            d: 10,
            rho: 0.5,
            kstar: 1,
            dist: CoeffDist::Normal,
            removal: Removal::Surrogate,
            methods: vec![Explainer::FastShap, Explainer::InstaShap],
            n_train: 50_000,
            n_eval: 10_000,
            epochs: 30,
            seed: 0,
            surrogate: SurrogateConfig::default(),
            gam: TrainConfig { learning_rate: 0.01, ..TrainConfig::default() },
            head: FastShapConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Explainer,
    pub initial_model_mse: f64,
    pub final_model_mse: f64,
    pub final_model_mse_normalized: Option<f64>,
    pub final_true_mse: f64,
    pub final_true_mse_normalized: Option<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Synth10dReport {
    pub d: usize,
    pub rho: f64,
    pub kstar: usize,
    pub seed: u64,
    pub removal: Removal,
    /// `1 − MSE/Var` of the surrogate's full-mask prediction on the evaluation points.
    pub surrogate_r2: Option<f64>,
    /// Frontier of the InstaSHAP model (∅ omitted).
    pub frontier: Vec<Vec<usize>>,
    pub methods: Vec<MethodSummary>,
    pub oracle_seconds: f64,
}

pub struct Synth10dOutcome {
    pub report: Synth10dReport,
    /// `<method>_<model|true>_mse[_normalized]` per epoch, starting at epoch 0.
    pub series: Vec<MetricSeries>,
    pub surrogate: Option<SurrogateModel>,
    pub gam: Option<AdditiveModel>,
    pub head: Option<AmortizedHead>,
}

/// Per-epoch SHAP error tracker for one method.
struct Curves {
    model: MetricSeries,
    model_n: MetricSeries,
    truth: MetricSeries,
    truth_n: MetricSeries,
}

impl Curves {
    fn new(m: Explainer) -> Self {
        let n = m.name();
        Curves {
            model: MetricSeries::new(format!("{n}_model_mse")),
            model_n: MetricSeries::new(format!("{n}_model_mse_normalized")),
            truth: MetricSeries::new(format!("{n}_true_mse")),
            truth_n: MetricSeries::new(format!("{n}_true_mse_normalized")),
        }
    }

    fn record(&mut self, epoch: usize, pred: &[AttributionResult], model: &[AttributionResult], truth: &[AttributionResult]) -> Result<()> {
        let e = epoch as f64;
        let m = shap_mse(pred, model)?;
        let t = shap_mse(pred, truth)?;
        self.model.push(e, m.raw, None)?;
        self.truth.push(e, t.raw, None)?;
        if let Some(v) = m.normalized {
            self.model_n.push(e, v, None)?;
        }
        if let Some(v) = t.normalized {
            self.truth_n.push(e, v, None)?;
        }
        Ok(())
    }

    fn summary(self, method: Explainer, seconds: f64) -> (MethodSummary, Vec<MetricSeries>) {
        let s = MethodSummary {
            method,
            initial_model_mse: self.model.values.first().copied().unwrap_or(f64::NAN),
            final_model_mse: self.model.last().unwrap_or(f64::NAN),
            final_model_mse_normalized: self.model_n.last(),
            final_true_mse: self.truth.last().unwrap_or(f64::NAN),
            final_true_mse_normalized: self.truth_n.last(),
            seconds,
        };
        (s, vec![self.model, self.model_n, self.truth, self.truth_n])
    }
}

/// Trains FastSHAP and/or InstaSHAP explainers on the random multilinear benchmark and tracks
/// their SHAP error against the explained model and against the ground truth after every epoch.
pub fn synth10d(config: &Synth10dConfig) -> Result<Synth10dOutcome> {
    check_rho(config.rho)?;
    if config.d < 2 || config.d > MAX_EXHAUSTIVE_D {
        return Err(Error::DimensionOutOfRange(config.d));
    }
    if config.n_train < 2 || config.n_eval == 0 {
        return Err(Error::InvalidParameter("need at least two training rows and one evaluation row".into()));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidParameter("no explainer selected".into()));
    }
    let seed = config.seed;
    let world = PairsGaussian::new(config.d, config.rho)?;
    let target = make_multilinear_target(&world, config.kstar, config.dist, seed)?;
    let frontier: Vec<FeatureSet> = std::iter::once(FeatureSet::EMPTY).chain(pair_closure_frontier(&target)).collect();
    let truth = ExactConditional::multilinear(target.clone(), world)?;
    let x = world.sample(config.n_train, seed.wrapping_add(1))?;
    let xe = world.sample(config.n_eval, seed.wrapping_add(2))?;

    let clock = std::time::Instant::now();
    let surrogate = match config.removal {
        Removal::Oracle => None,
        Removal::Surrogate => {
            let y: Vec<f64> = x.rows().into_iter().map(|r| target.eval(r.as_slice().expect("contiguous"))).collect();
            let cfg = SurrogateConfig { seed: seed.wrapping_add(3), ..config.surrogate.clone() };
            Some(train_surrogate(&x, &Labels::Regression(y), InputEncoder::identity(config.d), None, &cfg)?)
        }
    };
    let explained: &dyn MaskedFunction = match &surrogate {
        Some(s) => s,
        None => &truth,
    };
    let truth_shap = exact_shapley_rows(&truth, &xe)?;
    let model_shap = if surrogate.is_some() { exact_shapley_rows(explained, &xe)? } else { truth_shap.clone() };
    let surrogate_r2 = surrogate.as_ref().and_then(|s| {
        let pred = s.eval_rows(xe.view(), &vec![FeatureSet::full(config.d); xe.nrows()]);
        let y: Vec<f64> = xe.rows().into_iter().map(|r| target.eval(r.as_slice().expect("contiguous"))).collect();
        nmse(&pred.column(0).to_vec(), &y).ok().map(|e| 1.0 - e)
    });
    let oracle_seconds = clock.elapsed().as_secs_f64();

    let mut series = Vec::new();
    let mut methods = Vec::new();
    let (mut gam, mut head) = (None, None);
    for &method in &config.methods {
        let clock = std::time::Instant::now();
        let mut curves = Curves::new(method);
        match method {
            Explainer::InstaShap => {
                let cfg = TrainConfig { epochs: config.epochs, seed: seed.wrapping_add(4), ..config.gam.clone() };
                let model = train_gam_with(GamTarget::Masked(explained), &x, None, &frontier, Objective::Instashap, &cfg, &mut |e, m| {
                    curves.record(e, &instant_shapley_rows(m, &xe)?, &model_shap, &truth_shap)
                })?;
                gam = Some(model);
            }
            Explainer::FastShap => {
                let cfg = FastShapConfig { order: 1, epochs: config.epochs, seed: seed.wrapping_add(5), ..config.head.clone() };
                let trained = train_fastshap(explained, &x, InputEncoder::identity(config.d), &cfg, &mut |e, h| {
                    curves.record(e, &h.explain_rows(explained, &xe)?, &model_shap, &truth_shap)
                })?;
                head = Some(trained);
            }
        }
        let (summary, s) = curves.summary(method, clock.elapsed().as_secs_f64());
        methods.push(summary);
        series.extend(s);
    }
    let report = Synth10dReport {
        d: config.d,
        rho: config.rho,
        kstar: config.kstar,
        seed,
        removal: config.removal,
        surrogate_r2,
        frontier: frontier_indices(&frontier),
        methods,
        oracle_seconds,
    };
    Ok(Synth10dOutcome { report, series, surrogate, gam, head })
}

// ---------------------------------------------------------------------------------------------
// tabular trust gap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularConfig {
    pub test_fraction: f64,
    /// Largest tuple size the interaction frontier may reach.
    pub max_order: usize,
    /// Tuples added per search round.
    pub tuples: usize,
    pub scorer: Scorer,
    pub probe_rows: usize,
    pub surrogate: SurrogateConfig,
    pub gam: TrainConfig,
    /// Allowed relative shortfall of the best additive model.
    pub margin: f64,
    /// Test rows exported with instant attributions.
    pub explain_rows: usize,
    pub seed: u64,
}

impl Default for TabularConfig {
    fn default() -> Self {
        TabularConfig {
            test_fraction: 0.2,
            max_order: 3,
            tuples: 10,
            scorer: Scorer::Archipelago,
            probe_rows: 512,
            surrogate: SurrogateConfig::default(),
            gam: TrainConfig::default(),
            margin: 0.1,
            explain_rows: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularReport {
    pub task: Task,
    pub n_train: usize,
    pub n_test: usize,
    pub d: usize,
    pub features: Vec<String>,
    pub frontier: Vec<Vec<usize>>,
    /// Test score of the masked surrogate at the full mask.
    pub surrogate_score: f64,
    pub trust: TrustGapReport,
    pub warnings: Vec<String>,
}

pub struct TabularOutcome {
    pub report: TabularReport,
    pub surrogate: SurrogateModel,
    pub gam1: AdditiveModel,
    pub gamk: AdditiveModel,
    pub reference: SurrogateModel,
    /// Instant Shapley values of GAM-k on the first test rows.
    pub attributions: Vec<AttributionResult>,
}

/// Rows below which scores are too noisy to read much into.
pub const SMALL_SAMPLE: usize = 200;

fn score_outputs(task: Task, pred: &Array2<f64>, y: &Labels) -> Result<f64> {
    match (task, y) {
        (Task::Regression, Labels::Regression(v)) => nmse(&pred.column(0).to_vec(), v),
        (Task::Classification, Labels::Classes { labels, .. }) => accuracy(&argmax_rows(pred), labels),
        _ => Err(Error::Data("labels do not match the task".into())),
    }
}

fn full_mask_rows(f: &dyn MaskedFunction, x: &Array2<f64>) -> Array2<f64> {
    f.eval_rows(x.view(), &vec![FeatureSet::full(f.dim()); x.nrows()])
}

/// Surrogate, frontier search, GAM-1 and GAM-k under the masked objective, and an unmasked
/// reference network, all scored on one seeded held-out split.
pub fn tabular(data: &Dataset, config: &TabularConfig) -> Result<TabularOutcome> {
    let d = data.d();
    if d == 0 || d > MAX_EXHAUSTIVE_D {
        return Err(Error::DimensionOutOfRange(d));
    }
    if config.max_order == 0 || config.tuples == 0 {
        return Err(Error::InvalidParameter("max order and tuples per round must be at least 1".into()));
    }
    let mut warnings = Vec::new();
    if data.len() < SMALL_SAMPLE {
        warnings.push(format!("only {} rows; scores and the selected frontier are unreliable", data.len()));
    }
    let (train, test) = data.split(config.test_fraction, config.seed)?;
    let task = data.y.task();
    let encoder = InputEncoder::fit(&train.features, &train.x)?;
    let sur_cfg = SurrogateConfig { seed: config.seed.wrapping_add(1), ..config.surrogate.clone() };
    let surrogate = train_surrogate(&train.x, &train.y, encoder.clone(), None, &sur_cfg)?;
    let ref_cfg = SurrogateConfig { seed: config.seed.wrapping_add(2), ..config.surrogate.clone() };
    let reference = train_surrogate(&train.x, &train.y, encoder, Some(&WeightTable::full_mask(d)), &ref_cfg)?;

    let search = FrontierSearch {
        rounds: config.max_order.saturating_sub(1).max(1),
        per_round: config.tuples,
        scorer: config.scorer,
        max_order: config.max_order,
        probe_rows: config.probe_rows,
        seed: config.seed.wrapping_add(3),
        ..FrontierSearch::default()
    };
    let frontier =
        if config.max_order >= 2 && d >= 2 { select_frontier(&surrogate, &train.x, &search)? } else { singletons(d) };
    let gam_cfg = TrainConfig { seed: config.seed.wrapping_add(4), ..config.gam.clone() };
    let feats = Some(train.features.as_slice());
    let gam1 = train_gam(GamTarget::Masked(&surrogate), &train.x, feats, &singletons(d), Objective::Instashap, &gam_cfg)?;
    let gamk = train_gam(GamTarget::Masked(&surrogate), &train.x, feats, &frontier, Objective::Instashap, &gam_cfg)?;

    let (metric, higher) = match task {
        Task::Regression => ("nmse", false),
        Task::Classification => ("accuracy", true),
    };
    let blackbox = score_outputs(task, &full_mask_rows(&reference, &test.x), &test.y)?;
    let surrogate_score = score_outputs(task, &full_mask_rows(&surrogate, &test.x), &test.y)?;
    let order = gamk.max_order();
    let gams = vec![
        GamScore {
            label: "gam-1".into(),
            frontier: frontier_indices(&singletons(d)),
            score: score_outputs(task, &full_mask_rows(&gam1, &test.x), &test.y)?,
        },
        GamScore {
            label: format!("gam-{order}"),
            frontier: frontier_indices(&frontier),
            score: score_outputs(task, &full_mask_rows(&gamk, &test.x), &test.y)?,
        },
    ];
    let trust = trust_gap(metric, higher, blackbox, &gams, config.margin)?;
    let n_explain = config.explain_rows.min(test.len());
    let attributions = (0..n_explain)
        .map(|r| instant_shap(&gamk, &test.x.row(r).to_vec(), 1, IndexFamily::Faith))
        .collect::<Result<Vec<_>>>()?;
    let report = TabularReport {
        task,
        n_train: train.len(),
        n_test: test.len(),
        d,
        features: data.features.iter().map(|f| f.name.clone()).collect(),
        frontier: frontier_indices(&frontier),
        surrogate_score,
        trust,
        warnings,
    };
    Ok(TabularOutcome { report, surrogate, gam1, gamk, reference, attributions })
}

fn singletons(d: usize) -> Vec<FeatureSet> {
    std::iter::once(FeatureSet::EMPTY).chain((0..d).map(FeatureSet::singleton)).collect()
}

// ---------------------------------------------------------------------------------------------
// explaining saved models

/// Attribution family requested from a saved model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainFamily {
    Shapley,
    Index(IndexFamily),
}

impl std::str::FromStr for ExplainFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "shapley" => ExplainFamily::Shapley,
            "faith" => ExplainFamily::Index(IndexFamily::Faith),
            "sii" => ExplainFamily::Index(IndexFamily::Sii),
            "taylor" => ExplainFamily::Index(IndexFamily::Taylor),
            "nshap" | "nshapley" => ExplainFamily::Index(IndexFamily::NShapley),
            _ => return Err(Error::InvalidParameter(format!("unknown attribution family {s:?}"))),
        })
    }
}

pub struct Explanation {
    pub attributions: Vec<AttributionResult>,
    pub warnings: Vec<String>,
}

/// Attributions of a saved model at each row of `points`.
///
/// InstaSHAP models answer from their shapes alone. Other additive models and surrogates fall
/// back to enumerating their masked predictions. Amortized heads need the model they explain for
/// the efficiency endpoints and only produce their own family and order.
pub fn explain(
    model: &SavedModel,
    target: Option<&dyn MaskedFunction>,
    points: &Array2<f64>,
    family: ExplainFamily,
    k: usize,
) -> Result<Explanation> {
    let mut warnings = Vec::new();
    let index = match family {
        ExplainFamily::Shapley => {
            if k != 1 {
                return Err(Error::InvalidParameter("Shapley values have order 1; use an interaction family for k > 1".into()));
            }
            IndexFamily::Faith
        }
        ExplainFamily::Index(f) => f,
    };
    let rows = |f: &dyn Fn(&[f64]) -> Result<AttributionResult>| -> Result<Vec<AttributionResult>> {
        points.axis_iter(Axis(0)).map(|r| f(r.to_vec().as_slice())).collect()
    };
    let enumerate = |f: &dyn MaskedFunction| -> Result<Vec<AttributionResult>> {
        check_dim(f.dim(), points.ncols())?;
        rows(&|x| {
            let p = purified_at(f, x)?;
            if k == 1 { Ok(shapley_from_purified(&p, x)) } else { mobius_to_index(&p, index, k, x) }
        })
    };
    let attributions = match model {
        SavedModel::Additive(m) if m.objective == Objective::Instashap => {
            check_dim(m.d, points.ncols())?;
            rows(&|x| instant_shap(m, x, k, index))?
        }
        SavedModel::Additive(m) => {
            warnings.push(format!(
                "model trained with {:?} is not purified; falling back to enumeration over its masked predictions",
                m.objective
            ));
            enumerate(m)?
        }
        SavedModel::Surrogate(s) => enumerate(s)?,
        SavedModel::Head(h) => {
            let f = target.ok_or_else(|| {
                Error::Incompatible("an amortized head needs the model it explains for the efficiency endpoints".into())
            })?;
            let head_family = if h.order == 1 { ExplainFamily::Shapley } else { ExplainFamily::Index(IndexFamily::Faith) };
            if k != h.order || (h.order > 1 && family != head_family) {
                return Err(Error::Incompatible(format!(
                    "this head produces {} attributions of order {}",
                    if h.order == 1 { "Shapley" } else { "Faith" },
                    h.order
                )));
            }
            h.explain_rows(f, points)?
        }
    };
    Ok(Explanation { attributions, warnings })
}
