//! On-disk formats: tensor container, scene directories, PLY export, model
//! weights and JSON reports.

mod ply;
mod scene;
mod tensor;

pub use ply::*;
pub use scene::*;
pub use tensor::*;

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::neural::{Mat, ModelConfig, ModelWeights};

/// Pretty JSON in struct field order, floats in shortest round-trip form,
/// trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: "<report>".into(),
        source,
    })?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, to_json_string(value)?).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}

const WEIGHTS_CONFIG: &str = "config.json";

/// Writes `config.json` plus one f32 `rows × cols` tensor per parameter.
/// Parameters are stored in single precision.
pub fn save_weights(dir: &Path, w: &ModelWeights) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_json(&dir.join(WEIGHTS_CONFIG), &w.config)?;
    for (name, m) in w.named_tensors() {
        // nalgebra is column-major; the container is row-major.
        let data = m.transpose().iter().map(|v| *v as f32).collect();
        Tensor::new(vec![m.nrows(), m.ncols()], TensorData::F32(data))?
            .write(&dir.join(format!("{name}.mapt")))?;
    }
    Ok(())
}

pub fn load_weights(dir: &Path) -> Result<ModelWeights> {
    let config: ModelConfig = read_json(&dir.join(WEIGHTS_CONFIG))?;
    let mut w = ModelWeights::init(config, 0)?;
    w.load_named(|name| {
        let path = dir.join(format!("{name}.mapt"));
        let t = Tensor::read(&path)?;
        match (t.dims(), t.data()) {
            ([r, c], TensorData::F32(v)) => Ok(Mat::from_row_iterator(
                *r,
                *c,
                v.iter().map(|x| f64::from(*x)),
            )),
            _ => Err(Error::format(&path, "weights must be 2-D f32")),
        }
    })?;
    Ok(w)
}
