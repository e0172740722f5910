//! Text formats: parameter files, grid files, path CSVs and run manifests.
//!
//! Floats are written with 17 significant digits so every value survives a
//! write/read round trip exactly.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{GfbmError, Result};
use crate::params::ModelParams;
use crate::simulation::{Grid, Method, TruncationDiagnostics};
use crate::special::normalization_c;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| GfbmError::Parse(format!("'{}' is not a number", s.trim())))?;
    if !v.is_finite() {
        return Err(GfbmError::Parse(format!("'{}' is not finite", s.trim())));
    }
    Ok(v)
}

/// Parameter file contents: the model parameters plus derived quantities
/// written for the reader's convenience. Derived fields are ignored on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    #[serde(flatten)]
    pub params: ModelParams,
    pub hurst: f64,
    pub c: f64,
}

/// JSON for `params` with its Hurst index and normalization constant.
pub fn params_to_json(params: &ModelParams) -> Result<String> {
    let file = ParamsFile {
        params: *params,
        hurst: params.hurst(),
        c: normalization_c(params)?,
    };
    serde_json::to_string_pretty(&file).map_err(|e| GfbmError::Parse(e.to_string()))
}

/// Reads `{"alpha": .., "gamma": .., "variant": "full"|"rl"}`; `variant` is
/// optional and unknown fields are ignored.
pub fn parse_params_json(text: &str) -> Result<ModelParams> {
    serde_json::from_str(text).map_err(|e| match e.classify() {
        serde_json::error::Category::Data => GfbmError::Parse(format!("invalid parameters: {e}")),
        _ => GfbmError::Parse(e.to_string()),
    })
}

/// Reads a grid file: times separated by whitespace, commas or newlines;
/// `#` starts a comment running to the end of the line.
pub fn parse_grid(text: &str) -> Result<Grid> {
    let mut times = Vec::new();
    for line in text.lines() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split(|c: char| c == ',' || c.is_whitespace()) {
            if !tok.is_empty() {
                times.push(parse_f64(tok)?);
            }
        }
    }
    Grid::new(times)
}

pub fn grid_to_text(grid: &Grid) -> String {
    let mut s = String::new();
    for t in grid.times() {
        s.push_str(&fmt_f64(*t));
        s.push('\n');
    }
    s
}

/// Writes a header row of times, then one row per path.
pub fn write_paths_csv<W: Write>(out: W, grid: &Grid, rows: impl IntoIterator<Item = impl AsRef<[f64]>>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| GfbmError::Parse(format!("csv write failed: {e}"));
    w.write_record(grid.times().iter().map(|t| fmt_f64(*t)))
        .map_err(io_err)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|v| fmt_f64(*v)))
            .map_err(io_err)?;
    }
    w.flush()
        .map_err(|e| GfbmError::Parse(format!("csv write failed: {e}")))?;
    Ok(())
}

/// Reads a CSV written by [`write_paths_csv`]: the grid and the rows.
pub fn read_paths_csv<R: Read>(input: R) -> Result<(Grid, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| GfbmError::Parse("empty csv".into()))?
        .map_err(|e| GfbmError::Parse(e.to_string()))?;
    let times: Vec<f64> = header.iter().map(parse_f64).collect::<Result<_>>()?;
    let grid = Grid::new(times)?;
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| GfbmError::Parse(e.to_string()))?;
        if rec.len() != grid.len() {
            return Err(GfbmError::Parse(format!(
                "row {} has {} fields, header has {}",
                rows.len() + 1,
                rec.len(),
                grid.len()
            )));
        }
        rows.push(rec.iter().map(parse_f64).collect::<Result<Vec<f64>>>()?);
    }
    Ok((grid, rows))
}

pub fn parse_paths_csv(text: &str) -> Result<(Grid, Vec<Vec<f64>>)> {
    read_paths_csv(text.as_bytes())
}

/// Sidecar written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Full argument list; running the tool with it again reproduces the outputs.
    pub argv: Vec<String>,
    pub params: ModelParams,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub timestamp: String,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationDiagnostics>,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| GfbmError::Parse(e.to_string()))
    }
}

pub fn parse_manifest(text: &str) -> Result<RunManifest> {
    let m: RunManifest = serde_json::from_str(text).map_err(|e| GfbmError::Parse(format!("invalid manifest: {e}")))?;
    if semver_parts(&m.tool_version).is_none() {
        return Err(GfbmError::Parse(format!(
            "tool_version '{}' is not a semantic version",
            m.tool_version
        )));
    }
    Ok(m)
}

fn semver_parts(v: &str) -> Option<(u64, u64, u64)> {
    let core = v.split(['-', '+']).next()?;
    let mut it = core.split('.').map(|p| p.parse::<u64>().ok());
    let parts = (it.next()??, it.next()??, it.next()??);
    it.next().is_none().then_some(parts)
}
