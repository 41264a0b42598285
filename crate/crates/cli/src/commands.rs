//! One function per subcommand; each returns the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use instashap::data::{load_csv, CsvOptions, Task};
use instashap::experiments::{self, ExplainFamily, Explainer, Removal, Synth10dConfig, Synth2dConfig, TabularConfig};
use instashap::gam::{self, SavedModel};
use instashap::masking::{CountingMasked, MaskedFunction};
use instashap::synthetic::CoeffDist;
use instashap::{Error, Result};
use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{strip_timings, OutDir};
use crate::{ExplainArgs, Synth10dArgs, Synth2dArgs, TabularArgs};

/// Library defaults, overlaid by the optional JSON file (objects merge key by key).
fn base_config<T: Serialize + DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let mut v = serde_json::to_value(T::default())?;
    if let Some(p) = path {
        let patch: Value = serde_json::from_str(&fs::read_to_string(p)?)?;
        merge(&mut v, patch);
    }
    serde_json::from_value(v).map_err(|e| Error::InvalidParameter(format!("config file: {e}")))
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn write_report<T: Serialize>(out: &OutDir, report: &T) -> Result<()> {
    let mut v = serde_json::to_value(report)?;
    strip_timings(&mut v);
    out.json("report.json", &v)
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

pub fn synth2d(a: &Synth2dArgs) -> Result<PathBuf> {
    let mut cfg: Synth2dConfig = base_config(a.common.config.as_deref())?;
    set(&mut cfg.rho, a.rho);
    set(&mut cfg.grid, a.grid);
    set(&mut cfg.n_train, a.n_train);
    set(&mut cfg.train.epochs, a.epochs);
    set(&mut cfg.seed, a.common.seed);
    if cfg.grid < 2 {
        return Err(Error::InvalidParameter("grid needs at least 2 points per axis".into()));
    }
    let out = OutDir::create(&a.common.out)?;
    out.json("config.json", &json!({ "command": "synth2d", "config": cfg }))?;
    let o = experiments::synth2d(&cfg)?;

    out.history("training_loss", &o.model.meta.loss_history)?;
    out.shapes("instashap", &o.model, cfg.grid)?;
    let mut w = csv::Writer::from_path(out.path("shapes/purified_grid.csv"))?;
    w.write_record(["x", "y", "learned_x", "learned_y", "learned_xy", "analytic_x", "analytic_y", "analytic_xy"])?;
    for r in &o.grid {
        w.write_record([r.x, r.y, r.learned_x, r.learned_y, r.learned_xy, r.analytic_x, r.analytic_y, r.analytic_xy].map(fmt))?;
    }
    w.flush()?;
    let shapley: Vec<Value> = o
        .grid
        .iter()
        .map(|r| json!({ "point": [r.x, r.y], "instant": [r.instant_phi_x, r.instant_phi_y], "exact": [r.exact_phi_x, r.exact_phi_y] }))
        .collect();
    out.json("attributions/shapley_grid.json", &shapley)?;
    out.model("instashap", &SavedModel::Additive(o.model))?;
    write_report(&out, &o.report)?;
    Ok(a.common.out.clone())
}

fn parse_tag<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|_| Error::InvalidParameter(format!("unknown {what} {s:?}")))
}

pub fn synth10d(a: &Synth10dArgs) -> Result<PathBuf> {
    let mut cfg: Synth10dConfig = base_config(a.common.config.as_deref())?;
    set(&mut cfg.rho, a.rho);
    set(&mut cfg.kstar, a.kstar);
    set(&mut cfg.epochs, a.epochs);
    set(&mut cfg.d, a.d);
    set(&mut cfg.n_train, a.n_train);
    set(&mut cfg.n_eval, a.n_eval);
    set(&mut cfg.surrogate.epochs, a.surrogate_epochs);
    set(&mut cfg.seed, a.common.seed);
    if let Some(d) = &a.dist {
        cfg.dist = d.parse::<CoeffDist>()?;
    }
    if let Some(r) = &a.removal {
        cfg.removal = parse_tag::<Removal>("removal", r)?;
    }
    if !a.method.is_empty() {
        let mut methods = a.method.iter().map(|m| parse_tag::<Explainer>("method", m)).collect::<Result<Vec<_>>>()?;
        methods.dedup();
        cfg.methods = methods;
    }
    let out = OutDir::create(&a.common.out)?;
    out.json("config.json", &json!({ "command": "synth10d", "config": cfg }))?;
    let o = experiments::synth10d(&cfg)?;

    for s in &o.series {
        out.series(s)?;
    }
    if let Some(s) = o.surrogate {
        out.history("surrogate_train_loss", &s.train_loss)?;
        out.model("surrogate", &SavedModel::Surrogate(s))?;
    }
    if let Some(g) = o.gam {
        out.history("instashap_training_loss", &g.meta.loss_history)?;
        out.shapes("instashap", &g, 41)?;
        out.model("instashap", &SavedModel::Additive(g))?;
    }
    if let Some(h) = o.head {
        out.model("fastshap", &SavedModel::Head(h))?;
    }
    eprintln!("oracle SHAP: {:.1}s", o.report.oracle_seconds);
    for m in &o.report.methods {
        eprintln!("{}: {:.1}s, final model-SHAP MSE {:.3e}", m.method.name(), m.seconds, m.final_model_mse);
    }
    write_report(&out, &o.report)?;
    Ok(a.common.out.clone())
}

pub fn tabular(a: &TabularArgs) -> Result<PathBuf> {
    let mut cfg: TabularConfig = base_config(a.common.config.as_deref())?;
    set(&mut cfg.max_order, a.max_order);
    set(&mut cfg.tuples, a.tuples);
    set(&mut cfg.test_fraction, a.test_fraction);
    set(&mut cfg.gam.epochs, a.epochs);
    set(&mut cfg.surrogate.epochs, a.surrogate_epochs);
    set(&mut cfg.seed, a.common.seed);
    let task = match a.task.as_deref() {
        None => None,
        Some("reg" | "regression") => Some(Task::Regression),
        Some("clf" | "classification") => Some(Task::Classification),
        Some(t) => return Err(Error::InvalidParameter(format!("unknown task {t:?}; use reg or clf"))),
    };
    let opts = CsvOptions {
        target: a.target.clone(),
        task,
        categorical: a.categorical.clone(),
        drop: a.drop.clone(),
        collapse: a.collapse.clone(),
    };
    let out = OutDir::create(&a.common.out)?;
    out.json(
        "config.json",
        &json!({
            "command": "tabular",
            "data": a.data.display().to_string(),
            "target": a.target,
            "task": task,
            "categorical": a.categorical,
            "collapse": a.collapse,
            "drop": a.drop,
            "config": cfg,
        }),
    )?;
    let data = load_csv(&a.data, &opts)?;
    let o = experiments::tabular(&data, &cfg)?;
    for w in &o.report.warnings {
        eprintln!("warning: {w}");
    }

    out.history("surrogate_train_loss", &o.surrogate.train_loss)?;
    out.history("surrogate_validation_loss", &o.surrogate.validation_loss)?;
    out.history("reference_train_loss", &o.reference.train_loss)?;
    out.history("gam1_training_loss", &o.gam1.meta.loss_history)?;
    out.history("gamk_training_loss", &o.gamk.meta.loss_history)?;
    out.shapes("gam1", &o.gam1, 41)?;
    out.shapes("gamk", &o.gamk, 41)?;
    out.attributions("attributions/gamk_shapley.json", &o.attributions)?;
    out.json("trust_gap.json", &o.report.trust)?;
    out.model("surrogate", &SavedModel::Surrogate(o.surrogate))?;
    out.model("reference", &SavedModel::Surrogate(o.reference))?;
    out.model("gam1", &SavedModel::Additive(o.gam1))?;
    out.model("gamk", &SavedModel::Additive(o.gamk))?;
    write_report(&out, &o.report)?;
    Ok(a.common.out.clone())
}

/// Headered CSV of numeric feature values, one row per point.
fn read_points(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let d = rdr.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        for cell in rec?.iter() {
            let v = cell
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("row {} of {}: {cell:?} is not a number", i + 1, path.display())))?;
            values.push(v);
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::Data(format!("{} has no rows", path.display())));
    }
    Array2::from_shape_vec((rows, d), values).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn as_masked(model: &SavedModel) -> Result<&dyn MaskedFunction> {
    match model {
        SavedModel::Additive(m) => Ok(m),
        SavedModel::Surrogate(s) => Ok(s),
        SavedModel::Head(_) => Err(Error::Incompatible("an amortized head cannot serve as a masked target".into())),
    }
}

pub fn explain(a: &ExplainArgs) -> Result<PathBuf> {
    let family: ExplainFamily = a.family.parse()?;
    let model = gam::load(&a.model)?;
    let target_model = a.target_model.as_deref().map(gam::load).transpose()?;
    let counting = target_model.as_ref().map(as_masked).transpose()?.map(CountingMasked::new);
    let points = read_points(&a.points)?;

    let out = OutDir::create(&a.out)?;
    out.json(
        "config.json",
        &json!({
            "command": "explain",
            "model": a.model.display().to_string(),
            "target_model": a.target_model.as_ref().map(|p| p.display().to_string()),
            "points": a.points.display().to_string(),
            "family": a.family,
            "k": a.k,
        }),
    )?;
    let explanation =
        experiments::explain(&model, counting.as_ref().map(|c| c as &dyn MaskedFunction), &points, family, a.k)?;
    for w in &explanation.warnings {
        eprintln!("warning: {w}");
    }
    out.attributions(&format!("attributions/{}_k{}.json", a.family, a.k), &explanation.attributions)?;
    out.json(
        "report.json",
        &json!({
            "model_kind": model.kind(),
            "family": a.family,
            "k": a.k,
            "rows": points.nrows(),
            "target_queries": counting.as_ref().map_or(0, |c| c.calls()),
            "warnings": explanation.warnings,
        }),
    )?;
    Ok(a.out.clone())
}
