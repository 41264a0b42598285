//! Versioned JSON containers for trained models.
//!
//! Coefficient arrays are stored as base64 of little-endian `f64`s so a round trip is bit-exact.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::basis::{AxisBasis, ShapeFunction};
use super::fastshap::AmortizedHead;
use super::model::{AdditiveModel, Objective, TrainingMeta};
use crate::error::{Error, Result};
use crate::masking::SurrogateModel;
use crate::nn::Mlp;
use crate::subset::FeatureSet;

pub const FORMAT_VERSION: u32 = 1;

/// Any model the toolkit persists.
#[derive(Clone, Debug, PartialEq)]
pub enum SavedModel {
    Additive(AdditiveModel),
    Surrogate(SurrogateModel),
    Head(AmortizedHead),
}

impl SavedModel {
    pub fn kind(&self) -> &'static str {
        match self {
            SavedModel::Additive(_) => "additive",
            SavedModel::Surrogate(_) => "surrogate",
            SavedModel::Head(_) => "head",
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ShapeSpec {
    subset: u32,
    axes: Vec<AxisBasis>,
}

#[derive(Serialize, Deserialize)]
struct AdditiveFile {
    d: usize,
    c: usize,
    objective: Objective,
    frontier: Vec<u32>,
    intercept: String,
    basis: Vec<ShapeSpec>,
    coefficients: Vec<String>,
    meta: TrainingMeta,
}

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    sizes: Vec<usize>,
    params: Vec<String>,
}

fn encode_f64s(v: &[f64]) -> String {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f64s(s: &str, expected: usize) -> Result<Vec<f64>> {
    let bytes = STANDARD.decode(s).map_err(|e| Error::Corrupt(format!("bad base64: {e}")))?;
    if bytes.len() != 8 * expected {
        return Err(Error::Corrupt(format!("expected {expected} floats, found {} bytes", bytes.len())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

fn corrupt(e: serde_json::Error) -> Error {
    Error::Corrupt(e.to_string())
}

fn encode_network(net: &Mlp) -> NetworkFile {
    NetworkFile { sizes: net.sizes(), params: net.params().iter().map(|p| encode_f64s(p)).collect() }
}

fn decode_network(file: NetworkFile) -> Result<Mlp> {
    let mut net = Mlp::new(&file.sizes, 0).map_err(|e| Error::Corrupt(e.to_string()))?;
    let slots = net.params_mut();
    if slots.len() != file.params.len() {
        return Err(Error::Corrupt("network parameter blocks do not match layer sizes".into()));
    }
    for (slot, enc) in slots.into_iter().zip(&file.params) {
        let vals = decode_f64s(enc, slot.len())?;
        slot.copy_from_slice(&vals);
    }
    Ok(net)
}

/// Serde form of a network-backed model with its `net` field swapped for a base64 block.
fn network_value<T: Serialize>(model: &T, net: &Mlp) -> Result<Value> {
    let mut v = serde_json::to_value(model)?;
    v["net"] = serde_json::to_value(encode_network(net))?;
    Ok(v)
}

fn from_network_value<T: for<'de> Deserialize<'de>>(mut v: Value) -> Result<T> {
    let file: NetworkFile = serde_json::from_value(v["net"].take()).map_err(corrupt)?;
    v["net"] = serde_json::to_value(decode_network(file)?)?;
    serde_json::from_value(v).map_err(corrupt)
}

fn additive_value(m: &AdditiveModel) -> Result<Value> {
    let file = AdditiveFile {
        d: m.d,
        c: m.outputs,
        objective: m.objective,
        frontier: m.frontier().iter().map(|s| s.bits()).collect(),
        intercept: encode_f64s(&m.intercept),
        basis: m.shapes.iter().map(|s| ShapeSpec { subset: s.subset.bits(), axes: s.axes.clone() }).collect(),
        coefficients: m.shapes.iter().map(|s| encode_f64s(&s.coefficients)).collect(),
        meta: m.meta.clone(),
    };
    Ok(serde_json::to_value(file)?)
}

fn additive_from_value(v: Value) -> Result<AdditiveModel> {
    let file: AdditiveFile = serde_json::from_value(v).map_err(corrupt)?;
    if file.basis.len() != file.coefficients.len() {
        return Err(Error::Corrupt("basis and coefficient counts differ".into()));
    }
    let mut shapes = Vec::with_capacity(file.basis.len());
    for (spec, coef) in file.basis.into_iter().zip(&file.coefficients) {
        let mut shape = ShapeFunction::new(FeatureSet::from_bits(spec.subset), spec.axes, file.c)
            .map_err(|e| Error::Corrupt(e.to_string()))?;
        shape.coefficients = decode_f64s(coef, shape.coefficients.len())?;
        shapes.push(shape);
    }
    let mut model =
        AdditiveModel::new(file.d, file.c, shapes, file.objective).map_err(|e| Error::Corrupt(e.to_string()))?;
    let listed: Vec<u32> = model.frontier().iter().map(|s| s.bits()).collect();
    if listed != file.frontier {
        return Err(Error::Corrupt("frontier list disagrees with the stored shapes".into()));
    }
    model.intercept = decode_f64s(&file.intercept, file.c)?;
    model.meta = file.meta;
    Ok(model)
}

pub fn to_bytes(model: &SavedModel) -> Result<Vec<u8>> {
    let mut body = match model {
        SavedModel::Additive(m) => additive_value(m)?,
        SavedModel::Surrogate(m) => network_value(m, &m.net)?,
        SavedModel::Head(m) => network_value(m, &m.net)?,
    };
    let obj = body.as_object_mut().expect("struct serializes to an object");
    obj.insert("format_version".into(), FORMAT_VERSION.into());
    obj.insert("kind".into(), model.kind().into());
    Ok(serde_json::to_vec_pretty(&body)?)
}

pub fn from_bytes(bytes: &[u8]) -> Result<SavedModel> {
    let mut v: Value = serde_json::from_slice(bytes).map_err(corrupt)?;
    let obj = v.as_object_mut().ok_or_else(|| Error::Corrupt("top level is not an object".into()))?;
    let version = obj
        .remove("format_version")
        .and_then(|x| x.as_u64())
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
    if version != FORMAT_VERSION as u64 {
        return Err(Error::VersionMismatch { found: version.min(u32::MAX as u64) as u32, expected: FORMAT_VERSION });
    }
    let kind = obj.remove("kind").and_then(|k| k.as_str().map(String::from));
    match kind.as_deref() {
        Some("additive") => Ok(SavedModel::Additive(additive_from_value(v)?)),
        Some("surrogate") => Ok(SavedModel::Surrogate(from_network_value(v)?)),
        Some("head") => Ok(SavedModel::Head(from_network_value(v)?)),
        other => Err(Error::Corrupt(format!("unknown model kind {other:?}"))),
    }
}

pub fn save(model: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<SavedModel> {
    from_bytes(&std::fs::read(path)?)
}
