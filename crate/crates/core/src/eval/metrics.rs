//! Clean error, corruption error grids and mCE.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::predictions::PredictionSet;
use crate::corruptions::{CorruptedTree, CorruptionKind};
use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

/// Top-1 error in percent of `preds` against the labels of `manifest`.
pub fn clean_error(manifest: &DatasetManifest, preds: &PredictionSet) -> Result<f64> {
    preds.check_coverage(manifest)?;
    if manifest.is_empty() {
        return Err(Error::invalid(format!("{} has no items to evaluate", manifest.name)));
    }
    let wrong = manifest.items.iter().filter(|item| preds.records[&item.id].pred != item.label).count();
    Ok(100.0 * wrong as f64 / manifest.len() as f64)
}

/// Error percentages over a complete `kinds x severities` grid. Row `i`
/// holds kind `kinds[i]`, column `j` severity `severities[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorruptionErrorMatrix {
    pub kinds: Vec<CorruptionKind>,
    pub severities: Vec<u8>,
    pub errors: Vec<Vec<f64>>,
}

impl CorruptionErrorMatrix {
    pub fn new(kinds: Vec<CorruptionKind>, severities: Vec<u8>, errors: Vec<Vec<f64>>) -> Result<Self> {
        let m = Self { kinds, severities, errors };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kinds.is_empty() || self.severities.is_empty() {
            return Err(Error::invalid("error matrix needs at least one kind and one severity"));
        }
        if self.kinds.iter().collect::<BTreeSet<_>>().len() != self.kinds.len() {
            return Err(Error::invalid("error matrix lists a kind twice"));
        }
        if self.severities.iter().collect::<BTreeSet<_>>().len() != self.severities.len() {
            return Err(Error::invalid("error matrix lists a severity twice"));
        }
        if let Some(&s) = self.severities.iter().find(|s| !(1..=5).contains(*s)) {
            return Err(Error::InvalidSeverity(s));
        }
        if self.errors.len() != self.kinds.len() || self.errors.iter().any(|r| r.len() != self.severities.len()) {
            return Err(Error::invalid("error matrix rows do not match its kinds x severities grid"));
        }
        for (kind, row) in self.kinds.iter().zip(&self.errors) {
            for (s, e) in self.severities.iter().zip(row) {
                if !(0.0..=100.0).contains(e) {
                    return Err(Error::invalid(format!("error {e} for ({kind}, {s}) is outside [0, 100]")));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, kind: CorruptionKind, severity: u8) -> Option<f64> {
        let i = self.kinds.iter().position(|&k| k == kind)?;
        let j = self.severities.iter().position(|&s| s == severity)?;
        Some(self.errors[i][j])
    }

    pub fn entries(&self) -> impl Iterator<Item = (CorruptionKind, u8, f64)> + '_ {
        self.kinds
            .iter()
            .zip(&self.errors)
            .flat_map(move |(&k, row)| self.severities.iter().zip(row).map(move |(&s, &e)| (k, s, e)))
    }

    /// `kind,severity,error` rows in grid order, full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kind,severity,error\n");
        for (k, s, e) in self.entries() {
            out.push_str(&format!("{k},{s},{e}\n"));
        }
        out
    }

    /// Parses `kind,severity,error` rows; the rows must form a complete
    /// grid. Kinds and severities keep first-appearance order.
    pub fn from_csv(text: &str, context: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse { context: context.into(), message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ["kind", "severity", "error"] {
            return Err(Error::Parse {
                context: context.into(),
                message: "expected header `kind,severity,error`".into(),
            });
        }
        let mut kinds = Vec::new();
        let mut severities = Vec::new();
        let mut cells = BTreeMap::new();
        for (n, row) in reader.records().enumerate() {
            let at = |message: String| Error::Parse { context: format!("{context}:{}", n + 2), message };
            let row = row.map_err(|e| at(e.to_string()))?;
            let kind: CorruptionKind = row[0].parse()?;
            let severity: u8 = row[1].parse().map_err(|_| at(format!("bad severity {:?}", &row[1])))?;
            let error: f64 = row[2].parse().map_err(|_| at(format!("bad error {:?}", &row[2])))?;
            if !kinds.contains(&kind) {
                kinds.push(kind);
            }
            if !severities.contains(&severity) {
                severities.push(severity);
            }
            if cells.insert((kind, severity), error).is_some() {
                return Err(at(format!("duplicate cell ({kind}, {severity})")));
            }
        }
        let mut errors = Vec::with_capacity(kinds.len());
        for &k in &kinds {
            let mut row = Vec::with_capacity(severities.len());
            for &s in &severities {
                row.push(*cells.get(&(k, s)).ok_or(Error::MissingCell { kind: k.name().to_string(), severity: s })?);
            }
            errors.push(row);
        }
        Self::new(kinds, severities, errors)
    }

    fn same_grid(&self, other: &Self) -> bool {
        self.kinds.iter().collect::<BTreeSet<_>>() == other.kinds.iter().collect::<BTreeSet<_>>()
            && self.severities.iter().collect::<BTreeSet<_>>() == other.severities.iter().collect::<BTreeSet<_>>()
    }
}

/// Error grid from one prediction set per cell. `cell` supplies the manifest
/// of each `(kind, severity)` cell.
pub fn error_matrix_from_cells(
    kinds: &[CorruptionKind],
    severities: &[u8],
    mut cell: impl FnMut(CorruptionKind, u8) -> Result<DatasetManifest>,
    preds: &BTreeMap<(CorruptionKind, u8), PredictionSet>,
) -> Result<CorruptionErrorMatrix> {
    let mut errors = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let mut row = Vec::with_capacity(severities.len());
        for &severity in severities {
            let missing = || Error::MissingCell { kind: kind.name().to_string(), severity };
            let p = preds.get(&(kind, severity)).ok_or_else(missing)?;
            let manifest = cell(kind, severity)?;
            let e = clean_error(&manifest, p).map_err(|e| match e {
                Error::Coverage(msg) => Error::Coverage(format!("cell ({kind}, {severity}): {msg}")),
                other => other,
            })?;
            row.push(e);
        }
        errors.push(row);
    }
    let extra: Vec<_> = preds.keys().filter(|(k, s)| !kinds.contains(k) || !severities.contains(s)).collect();
    if let Some((k, s)) = extra.first() {
        return Err(Error::Coverage(format!("predictions given for ({k}, {s}), which is not in the grid")));
    }
    CorruptionErrorMatrix::new(kinds.to_vec(), severities.to_vec(), errors)
}

pub fn corruption_error_matrix(
    tree: &CorruptedTree,
    preds: &BTreeMap<(CorruptionKind, u8), PredictionSet>,
) -> Result<CorruptionErrorMatrix> {
    error_matrix_from_cells(&tree.kinds, &tree.severities, |k, s| tree.load_cell(k, s), preds)
}

/// Plain mCE (mean over all cells) and, with a baseline, the mean over kinds
/// of `sum_s E[k][s] / sum_s B[k][s]`.
pub fn mce(matrix: &CorruptionErrorMatrix, baseline: Option<&CorruptionErrorMatrix>) -> Result<(f64, Option<f64>)> {
    matrix.validate()?;
    let n = (matrix.kinds.len() * matrix.severities.len()) as f64;
    let plain = matrix.errors.iter().flatten().sum::<f64>() / n;
    let normalized = match baseline {
        None => None,
        Some(base) => {
            base.validate()?;
            if !matrix.same_grid(base) {
                return Err(Error::invalid("baseline error matrix covers a different kinds x severities grid"));
            }
            let mut total = 0.0;
            for &kind in &matrix.kinds {
                let num: f64 = matrix.severities.iter().map(|&s| matrix.get(kind, s).unwrap_or(0.0)).sum();
                let den: f64 = matrix.severities.iter().map(|&s| base.get(kind, s).unwrap_or(0.0)).sum();
                if den == 0.0 {
                    return Err(Error::invalid(format!("baseline errors for {kind} sum to zero")));
                }
                total += num / den;
            }
            Some(total / matrix.kinds.len() as f64)
        }
    };
    Ok((plain, normalized))
}
