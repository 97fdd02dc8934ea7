//! Evaluation reports and before/after deltas.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{mce, CorruptionErrorMatrix};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

/// Rounds to one decimal, halves away from zero. Values within 1e-6 of a
/// tenth boundary are snapped first so that `44.1 - 50.3` renders as -6.2.
pub fn round1(x: f64) -> f64 {
    let scaled = ((x * 10.0) * 1e6).round() / 1e6;
    scaled.round() / 10.0
}

/// One-decimal display form; negative zero prints as `0.0`.
pub fn display1(x: f64) -> String {
    let r = round1(x);
    format!("{:.1}", if r == 0.0 { 0.0 } else { r })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<String>,
    pub clean_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<CorruptionErrorMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mce: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized_mce: Option<f64>,
    /// Error on additional shifted test sets, by name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub shifted: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn new(model: impl Into<String>, dataset: impl Into<String>, clean_error: f64) -> Self {
        Self {
            model: model.into(),
            dataset: dataset.into(),
            profile: None,
            clean_error,
            matrix: None,
            mce: None,
            normalized_mce: None,
            shifted: BTreeMap::new(),
        }
    }

    /// Attaches a corruption grid and fills in the mCE values from it.
    pub fn with_matrix(
        mut self,
        matrix: CorruptionErrorMatrix,
        baseline: Option<&CorruptionErrorMatrix>,
    ) -> Result<Self> {
        let (plain, normalized) = mce(&matrix, baseline)?;
        self.mce = Some(plain);
        self.normalized_mce = normalized;
        self.matrix = Some(matrix);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let pct = |name: &str, v: f64| {
            if (0.0..=100.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} = {v} is outside [0, 100]")))
            }
        };
        pct("clean_error", self.clean_error)?;
        for (name, &v) in &self.shifted {
            pct(name, v)?;
        }
        match (&self.matrix, self.mce) {
            (Some(m), Some(stored)) => {
                let (plain, _) = mce(m, None)?;
                if (plain - stored).abs() > 1e-9 * plain.abs().max(1.0) {
                    return Err(Error::invalid(format!("stored mce {stored} differs from the matrix mean {plain}")));
                }
            }
            (None, Some(_)) => return Err(Error::invalid("report has an mce but no matrix")),
            _ => {}
        }
        Ok(())
    }

    /// Headline metrics in a fixed order.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out = vec![("clean_error".to_string(), self.clean_error)];
        if let Some(v) = self.mce {
            out.push(("mce".into(), v));
        }
        if let Some(v) = self.normalized_mce {
            out.push(("normalized_mce".into(), v));
        }
        out.extend(self.shifted.iter().map(|(k, &v)| (format!("shifted:{k}"), v)));
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let report: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse { context: context.into(), message: e.to_string() })?;
        report.validate()?;
        Ok(report)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    /// `metric,value` rows at full precision.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in self.metrics() {
            out.push_str(&format!("{name},{v}\n"));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub metric: String,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
    /// Signed one-decimal delta: `-6.2`, `+1.0`, or `±0.0`.
    pub rendered: String,
    /// The rounded delta is negative (all metrics are errors).
    pub improved: bool,
}

/// Per-metric `after - before`. Both reports must carry the same metrics and
/// describe the same dataset.
pub fn delta_report(before: &EvalReport, after: &EvalReport) -> Result<Vec<DeltaRow>> {
    if before.dataset != after.dataset || before.profile != after.profile {
        return Err(Error::invalid(format!(
            "reports describe different test sets: {:?}/{:?} vs {:?}/{:?}",
            before.dataset, before.profile, after.dataset, after.profile
        )));
    }
    let (b, a) = (before.metrics(), after.metrics());
    let names = |m: &[(String, f64)]| m.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    if names(&b) != names(&a) {
        return Err(Error::invalid(format!("reports carry different metrics: {:?} vs {:?}", names(&b), names(&a))));
    }
    Ok(b.into_iter().zip(a).map(|((metric, before), (_, after))| delta_row(metric, before, after)).collect())
}

pub fn delta_row(metric: impl Into<String>, before: f64, after: f64) -> DeltaRow {
    let delta = after - before;
    let r = round1(delta);
    DeltaRow {
        metric: metric.into(),
        before,
        after,
        delta,
        rendered: if r == 0.0 { "±0.0".into() } else { format!("{r:+.1}") },
        improved: r < 0.0,
    }
}

/// Table in the `after (delta)` style, one metric per line.
pub fn render_delta_table(rows: &[DeltaRow]) -> String {
    let width = rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6);
    let mut out = format!("{:width$}  {:>6}  {:>14}\n", "metric", "before", "after");
    for r in rows {
        let mark = if r.improved { " *" } else { "" };
        out.push_str(&format!(
            "{:width$}  {:>6}  {:>14}{mark}\n",
            r.metric,
            display1(r.before),
            format!("{} ({})", display1(r.after), r.rendered)
        ));
    }
    out
}
