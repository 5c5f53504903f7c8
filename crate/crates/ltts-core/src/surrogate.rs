//! A deployable surrogate: the TT predictor together with its patch, as one
//! serializable bundle. This is the artifact the CLI writes and the C API
//! loads for classical inference.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PatchSpec;
use crate::tt::{EvalScratch, TTTensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surrogate {
    pub patch: PatchSpec,
    pub tt: TTTensor,
    /// Optional path of a binary core sidecar, relative to the JSON file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cores_file: Option<String>,
}

impl Surrogate {
    pub fn new(patch: PatchSpec, tt: TTTensor) -> Result<Self> {
        if tt.order() != patch.dim() {
            return Err(Error::ShapeMismatch(format!(
                "TT has {} modes, patch has {} dims",
                tt.order(),
                patch.dim()
            )));
        }
        if tt.mode_sizes().iter().any(|&m| m != patch.p + 1) {
            return Err(Error::ShapeMismatch(
                "TT mode sizes must equal p + 1".into(),
            ));
        }
        Ok(Surrogate {
            patch,
            tt,
            cores_file: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.patch.dim()
    }

    pub fn in_patch(&self, x: &[f64]) -> bool {
        self.patch.contains(x)
    }

    /// Evaluate at a point in input units. The prediction is computed even
    /// outside the patch (the TT is a polynomial); callers consult
    /// [`Surrogate::in_patch`] to flag extrapolation.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let xi = self.patch.normalize_unchecked(x);
        self.tt.eval(&xi)
    }

    pub fn eval_with_scratch(&self, x: &[f64], scratch: &mut EvalScratch) -> Result<f64> {
        let xi = self.patch.normalize_unchecked(x);
        self.tt.eval_with_scratch(&xi, scratch)
    }

    /// Inline JSON (cores embedded).
    pub fn save_json(&self, path: &Path) -> Result<()> {
        let mut bundle = self.clone();
        bundle.cores_file = None;
        std::fs::write(path, serde_json::to_vec_pretty(&bundle)?)?;
        Ok(())
    }

    /// JSON metadata plus a little-endian binary sidecar for the cores.
    pub fn save_with_sidecar(&self, json_path: &Path, sidecar_name: &str) -> Result<()> {
        let dir = json_path.parent().unwrap_or_else(|| Path::new("."));
        let sidecar_path = dir.join(sidecar_name);
        let file = std::fs::File::create(&sidecar_path)?;
        self.tt.write_binary(std::io::BufWriter::new(file))?;

        #[derive(Serialize)]
        struct Meta<'a> {
            patch: &'a PatchSpec,
            cores_file: &'a str,
        }
        let meta = Meta {
            patch: &self.patch,
            cores_file: sidecar_name,
        };
        std::fs::write(json_path, serde_json::to_vec_pretty(&meta)?)?;
        Ok(())
    }

    /// Load from JSON; a `cores_file` field redirects the cores to a binary
    /// sidecar next to the JSON file.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = std::fs::read(path)?;
        let value: serde_json::Value = serde_json::from_slice(&raw)?;
        if let Some(rel) = value.get("cores_file").and_then(|v| v.as_str()) {
            let patch: PatchSpec = serde_json::from_value(
                value
                    .get("patch")
                    .cloned()
                    .ok_or_else(|| Error::Serialization("missing patch".into()))?,
            )?;
            let dir = path.parent().unwrap_or_else(|| Path::new("."));
            let file = std::fs::File::open(dir.join(rel))?;
            let tt = TTTensor::read_binary(std::io::BufReader::new(file))?;
            let mut s = Surrogate::new(patch, tt)?;
            s.cores_file = Some(rel.to_string());
            Ok(s)
        } else {
            let s: Surrogate = serde_json::from_value(value)?;
            Surrogate::new(s.patch, s.tt)
        }
    }

    pub fn from_json_str(json: &str) -> Result<Self> {
        let s: Surrogate = serde_json::from_str(json)?;
        Surrogate::new(s.patch, s.tt)
    }
}
