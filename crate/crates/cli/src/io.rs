//! Reading observations from delimited text.

use std::path::Path;

use cfdist_core::{GroupedDataset, Observation};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnRoles {
    pub outcome: String,
    #[serde(default)]
    pub covariates: Vec<String>,
    #[serde(default)]
    pub weight: Option<String>,
    pub group: String,
    /// Binary union indicator; must also be listed among the covariates.
    #[serde(default)]
    pub union: Option<String>,
    /// Group labels in (0, 1) order. Defaults to the two distinct labels
    /// sorted numerically when both parse as numbers, else lexically.
    #[serde(default)]
    pub group_order: Option<[String; 2]>,
}

/// A role naming a column the input lacks is a config error.
fn column_index(headers: &csv::StringRecord, name: &str, field: &str) -> CliResult<usize> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| CliError::Config(format!("{field}: column `{name}` not found in input header")))
}

fn parse_cell(record: &csv::StringRecord, col: usize, name: &str, row: usize) -> CliResult<f64> {
    let raw = record.get(col).unwrap_or("").trim();
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Data(format!("row {row}, column `{name}`: cannot parse `{raw}` as a finite number")))
}

/// Loads a two-group dataset. Row numbers in errors count data rows from 1.
pub fn load_csv(path: &Path, roles: &ColumnRoles) -> CliResult<GroupedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(|e| CliError::Data(e.to_string()))?.clone();
    let outcome = column_index(&headers, &roles.outcome, "columns.outcome")?;
    let group = column_index(&headers, &roles.group, "columns.group")?;
    let weight = roles.weight.as_deref().map(|w| column_index(&headers, w, "columns.weight")).transpose()?;
    let covariates = roles
        .covariates
        .iter()
        .enumerate()
        .map(|(k, c)| column_index(&headers, c, &format!("columns.covariates[{k}]")))
        .collect::<CliResult<Vec<_>>>()?;

    let mut rows: Vec<(String, Observation)> = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| CliError::Data(format!("row {row}: {e}")))?;
        let y = parse_cell(&record, outcome, &roles.outcome, row)?;
        let x = covariates
            .iter()
            .zip(&roles.covariates)
            .map(|(&c, name)| parse_cell(&record, c, name, row))
            .collect::<CliResult<Vec<_>>>()?;
        let w = match (weight, &roles.weight) {
            (Some(c), Some(name)) => parse_cell(&record, c, name, row)?,
            _ => 1.0,
        };
        let label = record.get(group).unwrap_or("").trim().to_string();
        rows.push((label, Observation::new(y, x, w)));
    }

    let labels = group_labels(&rows, roles)?;
    let mut groups: [Vec<Observation>; 2] = [Vec::new(), Vec::new()];
    for (label, obs) in rows {
        let g = if label == labels[0] { 0 } else { 1 };
        groups[g].push(obs);
    }
    let [g0, g1] = groups;
    let dataset = GroupedDataset::from_samples(
        cfdist_core::GroupSample::new(g0)?,
        cfdist_core::GroupSample::new(g1)?,
        roles.covariates.clone(),
        labels,
    )?;
    Ok(dataset)
}

fn group_labels(rows: &[(String, Observation)], roles: &ColumnRoles) -> CliResult<[String; 2]> {
    let mut distinct: Vec<&str> = Vec::new();
    for (label, _) in rows {
        if !distinct.contains(&label.as_str()) {
            distinct.push(label);
        }
    }
    if distinct.len() > 2 {
        return Err(CliError::Data(format!(
            "group column `{}` has {} distinct values; exactly two are required",
            roles.group,
            distinct.len()
        )));
    }
    if let Some(order) = &roles.group_order {
        if let Some(missing) = distinct.iter().find(|l| !order.contains(&l.to_string())) {
            return Err(CliError::Config(format!("columns.group_order does not list group `{missing}`")));
        }
        return Ok(order.clone());
    }
    if distinct.len() < 2 {
        return Err(CliError::Data(format!("group column `{}` must have two distinct values", roles.group)));
    }
    match (distinct[0].parse::<f64>(), distinct[1].parse::<f64>()) {
        (Ok(a), Ok(b)) if b < a => distinct.swap(0, 1),
        (Ok(_), Ok(_)) => {}
        _ => distinct.sort(),
    }
    Ok([distinct[0].to_string(), distinct[1].to_string()])
}
