//! Output directory writer with the fixed layout: `config.json`, `report.json`, `metrics/`,
//! `shapes/`, `attributions/` and `models/`.

use std::fs;
use std::path::{Path, PathBuf};

use instashap::eval::MetricSeries;
use instashap::gam::{self, AdditiveModel, SavedModel};
use instashap::indices::AttributionResult;
use instashap::{FeatureSet, Result};
use serde::Serialize;
use serde_json::Value;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        for sub in ["metrics", "shapes", "attributions", "models"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(self.path(rel), text)?;
        Ok(())
    }

    pub fn series(&self, s: &MetricSeries) -> Result<()> {
        s.write_csv(fs::File::create(self.path(&format!("metrics/{}.csv", s.name)))?)
    }

    /// A plain per-epoch series such as a loss history.
    pub fn history(&self, name: &str, values: &[f64]) -> Result<()> {
        let mut s = MetricSeries::new(name);
        for (e, v) in values.iter().enumerate() {
            s.push((e + 1) as f64, *v, None)?;
        }
        self.series(&s)
    }

    /// One grid file per non-empty frontier set, named `<prefix>_x<i>_x<j>.csv` (1-based).
    ///
    /// `points` per axis for main effects; fewer for tensors so file sizes stay modest.
    pub fn shapes(&self, prefix: &str, model: &AdditiveModel, points: usize) -> Result<()> {
        for t in model.frontier().into_iter().filter(|t| !t.is_empty()) {
            let per_axis = match t.len() {
                1 => points,
                2 => points.div_ceil(2).max(2),
                _ => points.min(11),
            };
            let file = fs::File::create(self.path(&format!("shapes/{prefix}_{}.csv", set_label(t))))?;
            model.write_shape_grid(t, per_axis, file)?;
        }
        Ok(())
    }

    pub fn attributions(&self, rel: &str, rows: &[AttributionResult]) -> Result<()> {
        let docs = rows.iter().map(|a| Ok(serde_json::from_str::<Value>(&a.to_json()?)?)).collect::<Result<Vec<Value>>>()?;
        self.json(rel, &docs)
    }

    pub fn model(&self, name: &str, model: &SavedModel) -> Result<()> {
        gam::save(model, self.path(&format!("models/{name}.json")))
    }
}

pub fn set_label(t: FeatureSet) -> String {
    t.indices().map(|i| format!("x{}", i + 1)).collect::<Vec<_>>().join("_")
}

/// Removes wall-clock fields so reports are reproducible byte for byte.
pub fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.retain(|k, _| !k.ends_with("seconds"));
            map.values_mut().for_each(strip_timings);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}
