//! Model predictions keyed by item id.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub pred: usize,
    /// True label as recorded alongside the prediction, if the file has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Prediction {
    pub fn new(pred: usize) -> Self {
        Self { pred, label: None, confidence: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub model_id: String,
    pub dataset_id: String,
    pub records: BTreeMap<String, Prediction>,
}

fn parse_err(context: &str, message: impl Into<String>) -> Error {
    Error::Parse { context: context.to_string(), message: message.into() }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return None;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

impl PredictionSet {
    pub fn new(model_id: impl Into<String>, dataset_id: impl Into<String>) -> Self {
        Self { model_id: model_id.into(), dataset_id: dataset_id.into(), records: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, prediction: Prediction) -> Result<()> {
        match self.records.entry(id.into()) {
            Entry::Occupied(e) => Err(Error::invalid(format!("duplicate prediction for item {:?}", e.key()))),
            Entry::Vacant(e) => {
                e.insert(prediction);
                Ok(())
            }
        }
    }

    /// Parses either `item_id,label,pred[,confidence]` rows (`label` and
    /// `confidence` columns optional, in any order) or `item_id,v0,v1,...`
    /// logits rows, which are reduced by argmax.
    pub fn from_csv(text: &str, context: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> =
            reader.headers().map_err(|e| parse_err(context, e.to_string()))?.iter().map(str::to_string).collect();
        if header.first().map(String::as_str) != Some("item_id") {
            return Err(parse_err(context, "first column must be `item_id`"));
        }
        let col = |name: &str| header.iter().position(|h| h == name);
        let is_logits = header.len() > 1
            && header[1..]
                .iter()
                .enumerate()
                .all(|(i, h)| h.strip_prefix('v').and_then(|n| n.parse::<usize>().ok()) == Some(i));

        let mut set = PredictionSet::new("", "");
        for (n, row) in reader.records().enumerate() {
            let line = n + 2;
            let row = row.map_err(|e| parse_err(context, e.to_string()))?;
            let at = |msg: String| parse_err(&format!("{context}:{line}"), msg);
            let id = row.get(0).unwrap_or_default().to_string();
            if id.is_empty() {
                return Err(at("empty item_id".into()));
            }
            let prediction = if is_logits {
                let logits: Vec<f64> = row
                    .iter()
                    .skip(1)
                    .map(|v| v.parse::<f64>().map_err(|_| at(format!("bad logit {v:?}"))))
                    .collect::<Result<_>>()?;
                Prediction::new(argmax(&logits).ok_or_else(|| at("NaN logit".into()))?)
            } else {
                let index = |name: &str| -> Result<Option<usize>> {
                    match col(name).map(|c| row.get(c).unwrap_or_default()) {
                        None | Some("") => Ok(None),
                        Some(v) => v.parse::<usize>().map(Some).map_err(|_| at(format!("bad {name} {v:?}"))),
                    }
                };
                let pred = index("pred")?.ok_or_else(|| parse_err(context, "missing `pred` column"))?;
                let confidence = col("confidence")
                    .map(|c| {
                        let v = row.get(c).unwrap_or_default();
                        v.parse::<f64>()
                            .ok()
                            .filter(|p| (0.0..=1.0).contains(p))
                            .ok_or_else(|| at(format!("confidence {v:?} not in [0, 1]")))
                    })
                    .transpose()?;
                Prediction { pred, label: index("label")?, confidence }
            };
            set.insert(id, prediction).map_err(|e| at(e.to_string()))?;
        }
        Ok(set)
    }

    /// Loads a prediction file; `model_id` defaults to the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut set = Self::from_csv(&text, &path.display().to_string())?;
        set.model_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Ok(set)
    }

    /// `item_id,label,pred` CSV; `label` is left empty when unknown.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("item_id,label,pred\n");
        for (id, p) in &self.records {
            let label = p.label.map(|l| l.to_string()).unwrap_or_default();
            out.push_str(&format!("{id},{label},{}\n", p.pred));
        }
        out
    }

    /// Checks that the set covers exactly the items of `manifest`, that
    /// predicted indices lie in its label space, and that any recorded true
    /// labels agree with it.
    pub fn check_coverage(&self, manifest: &DatasetManifest) -> Result<()> {
        let k = manifest.num_classes();
        let mut seen = 0usize;
        let mut missing = Vec::new();
        for item in &manifest.items {
            match self.records.get(&item.id) {
                None => missing.push(item.id.as_str()),
                Some(p) => {
                    seen += 1;
                    if p.pred >= k {
                        return Err(Error::LabelOutOfRange { id: item.id.clone(), label: p.pred, num_classes: k });
                    }
                    if p.label.is_some_and(|l| l != item.label) {
                        return Err(Error::Coverage(format!(
                            "prediction file labels item {:?} as {} but {} says {}",
                            item.id,
                            p.label.unwrap_or_default(),
                            manifest.name,
                            item.label
                        )));
                    }
                }
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage(format!(
                "{} item(s) of {} have no prediction, first {:?}",
                missing.len(),
                manifest.name,
                missing[0]
            )));
        }
        if seen != self.records.len() {
            let ids: std::collections::HashSet<&str> = manifest.items.iter().map(|i| i.id.as_str()).collect();
            let extra = self.records.keys().filter(|id| !ids.contains(id.as_str())).count();
            let first = self.records.keys().find(|id| !ids.contains(id.as_str())).cloned().unwrap_or_default();
            return Err(Error::Coverage(format!(
                "{extra} prediction(s) name items outside {}, first {first:?}",
                manifest.name
            )));
        }
        Ok(())
    }
}
