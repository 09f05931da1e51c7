//! On-disk formats.
//!
//! A dataset file is the 8-byte magic `USINDYD1`, the header length as a
//! little-endian `u64`, a JSON header, and then every state value as a
//! little-endian `f64` in `[time, space, variable]` order. Models are JSON.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::data::{Boundary, Dataset, SpatialGrid, TimeGrid};
use crate::error::{Error, Result};
use crate::model::DiscoveredModel;

pub const DATASET_MAGIC: &[u8; 8] = b"USINDYD1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    dims: Vec<usize>,
    spacings: Vec<f64>,
    boundary: Boundary,
    times: Vec<f64>,
    n_vars: usize,
    sigma: Option<f64>,
    seed: Option<u64>,
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> Result<()> {
    let header = Header {
        dims: dataset.grid().dims().to_vec(),
        spacings: dataset.grid().spacings().to_vec(),
        boundary: dataset.grid().boundary(),
        times: dataset.time().times().to_vec(),
        n_vars: dataset.n_vars(),
        sigma: dataset.noise_sigma,
        seed: dataset.seed,
    };
    let json = serde_json::to_vec(&header)?;
    out.write_all(DATASET_MAGIC)?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    let mut buf = Vec::with_capacity(dataset.states().len() * 8);
    for x in dataset.states().iter() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

pub fn read_dataset<R: Read>(mut input: R) -> Result<Dataset> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic).map_err(|_| Error::Format("truncated dataset file".into()))?;
    if &magic != DATASET_MAGIC {
        return Err(Error::Format("not a dataset file".into()));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len).map_err(|_| Error::Format("truncated dataset header".into()))?;
    let len = u64::from_le_bytes(len);
    if len > 1 << 32 {
        return Err(Error::Format(format!("implausible header length {len}")));
    }
    let mut json = vec![0u8; len as usize];
    input.read_exact(&mut json).map_err(|_| Error::Format("truncated dataset header".into()))?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| Error::Format(format!("dataset header: {e}")))?;
    let grid = SpatialGrid::new(header.dims, header.spacings, header.boundary)?;
    let time = TimeGrid::new(header.times)?;
    let shape = (time.len(), grid.size(), header.n_vars);
    let count = shape
        .0
        .checked_mul(shape.1)
        .and_then(|x| x.checked_mul(shape.2))
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let mut payload = Vec::new();
    input.read_to_end(&mut payload)?;
    if payload.len() != count * 8 {
        return Err(Error::Format(format!(
            "payload has {} bytes, header implies {}",
            payload.len(),
            count * 8
        )));
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let states = Array3::from_shape_vec(shape, values).map_err(|e| Error::Format(e.to_string()))?;
    let mut dataset = Dataset::new(grid, time, states)?;
    dataset.noise_sigma = header.sigma;
    dataset.seed = header.seed;
    Ok(dataset)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_dataset(dataset, BufWriter::new(File::create(path)?))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    read_dataset(BufReader::new(File::open(path)?))
}

pub fn model_to_json(model: &DiscoveredModel) -> Result<String> {
    Ok(serde_json::to_string_pretty(model)?)
}

pub fn model_from_json(text: &str) -> Result<DiscoveredModel> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("model file: {e}")))
}

pub fn save_model(model: &DiscoveredModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_json(model)? + "\n")?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DiscoveredModel> {
    model_from_json(&std::fs::read_to_string(path)?)
}
