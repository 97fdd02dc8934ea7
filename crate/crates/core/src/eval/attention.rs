//! Mean attention distance of vision transformer attention maps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of every attention row must be within this of 1.
pub const ROW_TOLERANCE: f64 = 1e-4;

/// `meta.json` of an attention dump directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionMeta {
    pub layers: usize,
    pub heads: usize,
    #[serde(rename = "T")]
    pub tokens: usize,
    #[serde(rename = "R")]
    pub rows: usize,
    #[serde(rename = "C")]
    pub cols: usize,
    /// Patch size in pixels.
    #[serde(rename = "P")]
    pub patch: f64,
    pub cls_present: bool,
    pub dtype: String,
}

/// Attention weights per layer, each stored `[head][query][key]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionDump {
    pub meta: AttentionMeta,
    pub layers: Vec<Vec<f32>>,
}

impl AttentionDump {
    pub fn new(meta: AttentionMeta, layers: Vec<Vec<f32>>) -> Result<Self> {
        let dump = Self { meta, layers };
        dump.validate()?;
        Ok(dump)
    }

    fn spatial_offset(&self) -> usize {
        usize::from(self.meta.cls_present)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.meta;
        if m.dtype != "f32le" {
            return Err(Error::invalid(format!("attention dtype {:?} is not supported, expected \"f32le\"", m.dtype)));
        }
        let expected_t = m.rows * m.cols + self.spatial_offset();
        if m.rows == 0 || m.cols == 0 || m.tokens != expected_t {
            return Err(Error::GeometryMismatch {
                expected: format!("T = R*C{} = {expected_t}", if m.cls_present { " + 1" } else { "" }),
                found: format!("T = {}", m.tokens),
            });
        }
        if m.patch.is_nan() || m.patch <= 0.0 {
            return Err(Error::invalid(format!("patch size {} must be positive", m.patch)));
        }
        if self.layers.len() != m.layers {
            return Err(Error::invalid(format!("meta lists {} layers, dump has {}", m.layers, self.layers.len())));
        }
        let t = m.tokens;
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.len() != m.heads * t * t {
                return Err(Error::invalid(format!(
                    "layer {l} holds {} weights, expected heads*T*T = {}",
                    layer.len(),
                    m.heads * t * t
                )));
            }
            for (r, row) in layer.chunks_exact(t).enumerate() {
                if let Some(w) = row.iter().find(|w| w.is_nan() || **w < 0.0) {
                    return Err(Error::invalid(format!("layer {l} head {} query {} has weight {w}", r / t, r % t)));
                }
                let sum: f64 = row.iter().map(|&w| f64::from(w)).sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "layer {l} head {} query {} sums to {sum}, not 1",
                        r / t,
                        r % t
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads `meta.json` and `layer_<i>.bin` files from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.json");
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta: AttentionMeta = serde_json::from_str(&text)
            .map_err(|e| Error::Parse { context: meta_path.display().to_string(), message: e.to_string() })?;
        let layers = (0..meta.layers)
            .map(|i| {
                let path = dir.join(format!("layer_{i}.bin"));
                let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
                if bytes.len() % 4 != 0 {
                    return Err(Error::Parse {
                        context: path.display().to_string(),
                        message: format!("{} bytes is not a whole number of f32 values", bytes.len()),
                    });
                }
                Ok(bytes.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect())
            })
            .collect::<Result<Vec<Vec<f32>>>>()?;
        Self::new(meta, layers)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes");
        crate::fsutil::write_atomic(&dir.join("meta.json"), meta.as_bytes())?;
        for (i, layer) in self.layers.iter().enumerate() {
            let bytes: Vec<u8> = layer.iter().flat_map(|v| v.to_le_bytes()).collect();
            crate::fsutil::write_atomic(&dir.join(format!("layer_{i}.bin")), &bytes)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionDistances {
    /// Pixels, indexed `[layer][head]`.
    pub per_head: Vec<Vec<f64>>,
    pub per_layer_mean: Vec<f64>,
}

impl AttentionDistances {
    /// `layer,head,distance_px` rows; the layer mean uses head `mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,head,distance_px\n");
        for (l, heads) in self.per_head.iter().enumerate() {
            for (h, d) in heads.iter().enumerate() {
                out.push_str(&format!("{l},{h},{d}\n"));
            }
            out.push_str(&format!("{l},mean,{}\n", self.per_layer_mean[l]));
        }
        out
    }
}

/// For each head: the mean over spatial queries of the attention-weighted
/// pixel distance to spatial keys. The class token is dropped from both
/// sides and each query row is renormalized over the spatial keys.
pub fn mean_attention_distance(dump: &AttentionDump) -> Result<AttentionDistances> {
    dump.validate()?;
    let m = &dump.meta;
    let (t, n, off) = (m.tokens, m.rows * m.cols, dump.spatial_offset());
    let dist: Vec<f64> = (0..n * n)
        .map(|i| {
            let (q, k) = (i / n, i % n);
            let dr = (q / m.cols) as f64 - (k / m.cols) as f64;
            let dc = (q % m.cols) as f64 - (k % m.cols) as f64;
            m.patch * (dr * dr + dc * dc).sqrt()
        })
        .collect();

    let mut per_head = Vec::with_capacity(m.layers);
    for (l, layer) in dump.layers.iter().enumerate() {
        let mut heads = Vec::with_capacity(m.heads);
        for h in 0..m.heads {
            let mut total = 0.0;
            for q in 0..n {
                let row = &layer[(h * t + q + off) * t + off..][..n];
                let mass: f64 = row.iter().map(|&w| f64::from(w)).sum();
                if mass <= 0.0 {
                    return Err(Error::invalid(format!(
                        "layer {l} head {h} query {q} puts no weight on spatial tokens"
                    )));
                }
                let weighted: f64 = row.iter().zip(&dist[q * n..][..n]).map(|(&w, d)| f64::from(w) * d).sum();
                total += weighted / mass;
            }
            heads.push(total / n as f64);
        }
        per_head.push(heads);
    }
    let per_layer_mean =
        per_head.iter().map(|h| if h.is_empty() { 0.0 } else { h.iter().sum::<f64>() / h.len() as f64 }).collect();
    Ok(AttentionDistances { per_head, per_layer_mean })
}
