//! Browser demo bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page has a single code path.

use instashap::anova::{neumann_frontier_solve, NeumannConfig, PolynomialSpace};
use instashap::experiments::{synth2d, Synth2dConfig};
use instashap::gam::TrainConfig;
use instashap::indices::{index_coefficient, IndexFamily};
use instashap::synthetic::{exact_shapley_2d, purified_2d, target_2d};
use instashap::FeatureSet;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

fn respond(result: Result<Value, String>) -> String {
    match result {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn axis(points: usize) -> Vec<f64> {
    let n = points.clamp(2, 201);
    (0..n).map(|i| -2.0 + 4.0 * i as f64 / (n - 1) as f64).collect()
}

/// Trains an InstaSHAP model on `f = x + xy` at correlation `rho` and returns row-major grids
/// over `[-2, 2]²` of the learned and analytic purified effects and Shapley values.
#[wasm_bindgen]
pub fn train_2d(rho: f64, grid: usize, n_train: usize, epochs: usize) -> String {
    respond((|| {
        let cfg = Synth2dConfig {
            rho,
            grid: grid.clamp(2, 81),
            n_train: n_train.clamp(100, 50_000),
            n_probe: 2_000,
            sobol_samples: 20_000,
            train: TrainConfig { epochs: epochs.min(300), learning_rate: 0.1, ..TrainConfig::default() },
            seed: 0,
        };
        let o = synth2d(&cfg).map_err(|e| e.to_string())?;
        let col = |f: &dyn Fn(&instashap::experiments::Synth2dGridRow) -> f64| o.grid.iter().map(f).collect::<Vec<f64>>();
        Ok(json!({
            "axis": axis(cfg.grid),
            "learned": { "x": col(&|r| r.learned_x), "y": col(&|r| r.learned_y), "xy": col(&|r| r.learned_xy) },
            "analytic": { "x": col(&|r| r.analytic_x), "y": col(&|r| r.analytic_y), "xy": col(&|r| r.analytic_xy) },
            "instant_phi": { "x": col(&|r| r.instant_phi_x), "y": col(&|r| r.instant_phi_y) },
            "exact_phi": { "x": col(&|r| r.exact_phi_x), "y": col(&|r| r.exact_phi_y) },
            "component_rmse": o.report.components.iter().map(|c| c.rmse).collect::<Vec<_>>(),
            "shapley_rmse": o.report.shapley_rmse,
            "pair_interaction": o.report.pair_interaction,
            "notes": o.report.notes,
        }))
    })())
}

/// Closed-form purified effects and Shapley values without training.
#[wasm_bindgen]
pub fn analytic_2d(rho: f64, grid: usize) -> String {
    respond((|| {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(format!("rho must be in [-1, 1], got {rho}"));
        }
        let a = axis(grid);
        let (mut fx, mut fy, mut fxy, mut px, mut py) = (vec![], vec![], vec![], vec![], vec![]);
        for &x in &a {
            for &y in &a {
                let p = purified_2d(rho, x, y);
                let (sx, sy) = exact_shapley_2d(rho, x, y);
                fx.push(p[1]);
                fy.push(p[2]);
                fxy.push(p[3]);
                px.push(sx);
                py.push(sy);
            }
        }
        Ok(json!({ "axis": a, "analytic": { "x": fx, "y": fy, "xy": fxy }, "exact_phi": { "x": px, "y": py } }))
    })())
}

/// Best additive fit `g_x(x) + g_y(y)` of `f = x + xy` from the Neumann iteration, next to the
/// purified main effects it differs from under correlation.
#[wasm_bindgen]
pub fn neumann_curves(rho: f64, points: usize) -> String {
    respond((|| {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(format!("rho must be in [-1, 1], got {rho}"));
        }
        let space = PolynomialSpace { d: 2, rho };
        let frontier = [FeatureSet::singleton(0), FeatureSet::singleton(1)];
        let sol = neumann_frontier_solve(&space, &target_2d(), &frontier, &NeumannConfig::default()).map_err(|e| e.to_string())?;
        let (gx, gy) = (sol.component(frontier[0]).expect("frontier member"), sol.component(frontier[1]).expect("frontier member"));
        let a = axis(points);
        Ok(json!({
            "axis": a,
            "g_x": a.iter().map(|&v| gx.eval(&[v, 0.0])).collect::<Vec<_>>(),
            "g_y": a.iter().map(|&v| gy.eval(&[0.0, v])).collect::<Vec<_>>(),
            "purified_x": a.iter().map(|&v| purified_2d(rho, v, 0.0)[1]).collect::<Vec<_>>(),
            "purified_y": a.iter().map(|&v| purified_2d(rho, 0.0, v)[2]).collect::<Vec<_>>(),
            "intercept": sol.intercept,
            "residual_trace": sol.residual_trace,
            "converged": sol.converged,
        }))
    })())
}

/// Möbius coefficients `c(s, t)` for `s = 1..=k`, `t = 1..=t_max` as exact fractions.
#[wasm_bindgen]
pub fn coefficient_table(family: &str, k: u32, t_max: u32) -> String {
    respond((|| {
        let fam = match family {
            "sii" => IndexFamily::Sii,
            "taylor" => IndexFamily::Taylor,
            "nshapley" | "nshap" => IndexFamily::NShapley,
            "faith" => IndexFamily::Faith,
            other => return Err(format!("unknown family {other:?}")),
        };
        if k == 0 || k > 8 || t_max == 0 || t_max > 40 {
            return Err("need 1 <= k <= 8 and 1 <= t_max <= 40".into());
        }
        let rows = (1..=k)
            .map(|s| {
                (1..=t_max)
                    .map(|t| match index_coefficient(fam, s, t, k) {
                        Ok(c) => Ok(json!({ "t": t, "fraction": format!("{}/{}", c.numer(), c.denom()), "value": *c.numer() as f64 / *c.denom() as f64 })),
                        Err(_) if t < s => Ok(json!({ "t": t, "fraction": "0", "value": 0.0 })),
                        Err(e) => Err(e.to_string()),
                    })
                    .collect::<Result<Vec<Value>, String>>()
                    .map(|r| json!({ "s": s, "entries": r }))
            })
            .collect::<Result<Vec<Value>, String>>()?;
        Ok(json!({ "family": family, "k": k, "rows": rows }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn faith_table_matches_known_entries() {
        let v = parse(coefficient_table("faith", 3, 5));
        assert_eq!(v["rows"][1]["entries"][3]["fraction"], "-1/5");
        assert_eq!(v["rows"][0]["entries"][3]["fraction"], "1/20");
        assert_eq!(v["rows"][2]["entries"][0]["fraction"], "0");
        assert!(parse(coefficient_table("nope", 2, 3))["error"].is_string());
    }

    #[test]
    fn neumann_matches_closed_form() {
        let rho = 0.5;
        let v = parse(neumann_curves(rho, 5));
        let a = rho / (1.0 + rho * rho);
        for (i, x) in v["axis"].as_array().unwrap().iter().enumerate() {
            let x = x.as_f64().unwrap();
            assert!((v["g_x"][i].as_f64().unwrap() - (x + a * (x * x - 1.0))).abs() < 1e-6);
        }
        assert!(parse(neumann_curves(2.0, 5))["error"].is_string());
    }

    #[test]
    fn grids_have_square_shape() {
        let v = parse(analytic_2d(0.3, 7));
        assert_eq!(v["analytic"]["xy"].as_array().unwrap().len(), 49);
        let t = parse(train_2d(0.3, 5, 2_000, 5));
        assert_eq!(t["learned"]["x"].as_array().unwrap().len(), 25);
        assert!(t["component_rmse"].as_array().unwrap().len() == 3);
    }
}
