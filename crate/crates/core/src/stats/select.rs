use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use log::warn;
use serde::{Deserialize, Serialize};

use super::spearman::{spearman_p_value, spearman_rho, PValueMethod};
use super::sweep::TraversalSweep;
use crate::env::AttributeId;
use crate::error::{Error, Result};

/// How per-image sweeps are combined into one ρ per attribute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// One ρ over all (value, score) pairs of every image.
    #[default]
    Pooled,
    /// Mean of per-image ρ; the p-value uses one image's grid size.
    PerImageMean,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub min_abs_rho: f64,
    pub max_p_value: f64,
    pub aggregation: Aggregation,
    pub method: PValueMethod,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            min_abs_rho: 0.3,
            max_p_value: 0.01,
            aggregation: Aggregation::Pooled,
            method: PValueMethod::TApprox,
        }
    }
}

/// Correlation of one attribute with the score, and whether it is kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub attribute: AttributeId,
    pub rho: f64,
    pub p_value: f64,
    pub label: String,
    pub selected: bool,
    /// Set when |ρ| = 1 and the t-approximation was replaced by its limit 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub p_at_limit: bool,
}

impl CorrelationReport {
    pub fn new(attribute: AttributeId, rho: f64, p_value: f64, label: impl Into<String>) -> Self {
        Self {
            attribute,
            rho,
            p_value,
            label: label.into(),
            selected: false,
            p_at_limit: false,
        }
    }
}

/// Marks `selected` on every row: |ρ| above and p below the thresholds, and
/// among rows that pass and share a non-empty label only the largest |ρ|
/// (first one on exact ties) survives.
pub fn select(rows: &mut [CorrelationReport], t: &Thresholds) {
    let passes: Vec<bool> = rows
        .iter()
        .map(|r| r.rho.abs() > t.min_abs_rho && r.p_value < t.max_p_value)
        .collect();
    let mut best: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if !passes[i] || r.label.is_empty() {
            continue;
        }
        best.entry(r.label.as_str())
            .and_modify(|j| {
                if r.rho.abs() > rows[*j].rho.abs() {
                    *j = i;
                }
            })
            .or_insert(i);
    }
    let winners: BTreeSet<usize> = best.into_values().collect();
    for (i, r) in rows.iter_mut().enumerate() {
        r.selected = passes[i] && (r.label.is_empty() || winners.contains(&i));
    }
}

fn rho_or_zero(x: &[f64], y: &[f64], attr: AttributeId) -> Result<Option<f64>> {
    match spearman_rho(x, y) {
        Ok(r) => Ok(Some(r)),
        Err(Error::UndefinedCorrelation(_)) => {
            warn!("{attr}: constant scores along the sweep, treating as uncorrelated");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Correlation of every sweep with its grid, thresholded and deduplicated by
/// label. Attributes missing from `labels` get an empty label.
pub fn analyze(
    sweeps: &[TraversalSweep],
    labels: &BTreeMap<AttributeId, String>,
    t: &Thresholds,
) -> Result<Vec<CorrelationReport>> {
    if sweeps.is_empty() {
        return Err(Error::Input("analyze needs at least one sweep".into()));
    }
    let mut seen = BTreeSet::new();
    let mut rows = Vec::with_capacity(sweeps.len());
    for s in sweeps {
        if !seen.insert(s.attribute) {
            return Err(Error::Input(format!("duplicate attribute {}", s.attribute)));
        }
        let (rho, n) = match t.aggregation {
            Aggregation::Pooled => {
                let (x, y) = s.pooled();
                (rho_or_zero(&x, &y, s.attribute)?, x.len())
            }
            Aggregation::PerImageMean => {
                let mut sum = 0.0;
                for row in &s.scores {
                    sum += rho_or_zero(&s.grid, row, s.attribute)?.unwrap_or(0.0);
                }
                (Some(sum / s.scores.len() as f64), s.grid.len())
            }
        };
        let label = labels.get(&s.attribute).cloned().unwrap_or_default();
        let mut row = match rho {
            Some(r) => {
                let p = spearman_p_value(r, n, t.method)?;
                let mut row = CorrelationReport::new(s.attribute, r, p, label);
                row.p_at_limit = r.abs() >= 1.0 && t.method == PValueMethod::TApprox;
                row
            }
            None => CorrelationReport::new(s.attribute, 0.0, 1.0, label),
        };
        row.selected = false;
        rows.push(row);
    }
    select(&mut rows, t);
    Ok(rows)
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    attribute: String,
    layer: usize,
    dim: usize,
    rho: f64,
    p_value: f64,
    label: String,
    selected: bool,
}

/// Writes `attribute,layer,dim,rho,p_value,label,selected`.
pub fn write_report_csv<W: Write>(out: W, rows: &[CorrelationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(CsvRow {
            attribute: r.attribute.to_string(),
            layer: r.attribute.layer,
            dim: r.attribute.dim,
            rho: r.rho,
            p_value: r.p_value,
            label: r.label.clone(),
            selected: r.selected,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct PublishedRow {
    layer: usize,
    dim: usize,
    rho: f64,
    p_value: f64,
    #[serde(default)]
    label: String,
}

/// Reads a published `layer,dim,rho,p_value,label` table for replay.
pub fn read_published<R: Read>(input: R) -> Result<Vec<CorrelationReport>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in rdr.deserialize() {
        let r: PublishedRow = rec?;
        let attr = AttributeId::new(r.layer, r.dim);
        if !seen.insert(attr) {
            return Err(Error::Input(format!("duplicate attribute {attr}")));
        }
        if !(-1.0..=1.0).contains(&r.rho) || !(0.0..=1.0).contains(&r.p_value) {
            return Err(Error::Input(format!(
                "{attr}: rho {} or p-value {} out of range",
                r.rho, r.p_value
            )));
        }
        rows.push(CorrelationReport::new(attr, r.rho, r.p_value, r.label));
    }
    Ok(rows)
}

/// Applies the decision rule to already computed (ρ, p, label) rows.
pub fn replay(mut rows: Vec<CorrelationReport>, t: &Thresholds) -> Vec<CorrelationReport> {
    select(&mut rows, t);
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(l: usize, d: usize, rho: f64, p: f64, label: &str) -> CorrelationReport {
        CorrelationReport::new(AttributeId::new(l, d), rho, p, label)
    }

    #[test]
    fn weak_rows_are_never_selected() {
        let rows = replay(
            vec![row(1, 1, 0.2, 0.0, "a"), row(1, 2, -0.29, 0.0, "b")],
            &Thresholds::default(),
        );
        assert!(rows.iter().all(|r| !r.selected));
    }

    #[test]
    fn label_keeps_strongest_passing_row() {
        let rows = replay(
            vec![
                row(1, 1, 0.5, 0.0, "hair"),
                row(1, 2, -0.7, 0.0, "hair"),
                row(1, 3, 0.9, 0.5, "hair"),
                row(1, 4, 0.4, 0.0, ""),
                row(1, 5, 0.45, 0.0, ""),
            ],
            &Thresholds::default(),
        );
        let kept: Vec<bool> = rows.iter().map(|r| r.selected).collect();
        assert_eq!(kept, vec![false, true, false, true, true]);
    }

    #[test]
    fn csv_header_and_round_trip_of_published_rows() {
        let mut buf = Vec::new();
        write_report_csv(&mut buf, &[row(3, 4, -0.857, 0.0, "Bangs")]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("attribute,layer,dim,rho,p_value,label,selected\n"));
        assert!(text.contains("z3_4,3,4,-0.857,0.0,Bangs,false"));
        let back = read_published(text.as_bytes()).unwrap();
        assert_eq!(back[0].attribute, AttributeId::new(3, 4));
        assert_eq!(back[0].rho, -0.857);
    }

    #[test]
    fn analyze_rejects_duplicates() {
        let s = TraversalSweep::new(
            AttributeId::new(1, 1),
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.1, 0.2, 0.3, 0.4]],
        )
        .unwrap();
        let labels = BTreeMap::new();
        assert!(analyze(&[s.clone(), s.clone()], &labels, &Thresholds::default()).is_err());
        let out = analyze(&[s], &labels, &Thresholds::default()).unwrap();
        assert_eq!(out[0].rho, 1.0);
        assert!(out[0].p_at_limit);
    }

    #[test]
    fn constant_sweep_is_uncorrelated() {
        let s = TraversalSweep::new(
            AttributeId::new(2, 1),
            vec![0.0, 1.0, 2.0, 3.0],
            vec![vec![0.5; 4], vec![0.5; 4]],
        )
        .unwrap();
        let out = analyze(&[s], &BTreeMap::new(), &Thresholds::default()).unwrap();
        assert_eq!((out[0].rho, out[0].p_value, out[0].selected), (0.0, 1.0, false));
    }
}
