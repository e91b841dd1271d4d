use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MetricReport, Metrics};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurveAxis {
    K,
    Fraction,
}

impl fmt::Display for CurveAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurveAxis::K => "k",
            CurveAxis::Fraction => "fraction",
        })
    }
}

impl FromStr for CurveAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "k" => Ok(CurveAxis::K),
            "fraction" => Ok(CurveAxis::Fraction),
            other => Err(Error::Format(format!("unknown curve axis {other:?}"))),
        }
    }
}

/// Metrics of one method at one x position.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub method: String,
    pub axis: CurveAxis,
    pub x: f64,
    pub metrics: Metrics,
}

impl CurvePoint {
    /// One point per cutoff of `report`.
    pub fn over_k(report: &MetricReport) -> Vec<CurvePoint> {
        report
            .at
            .iter()
            .map(|(&k, m)| CurvePoint {
                method: report.meta.method.clone(),
                axis: CurveAxis::K,
                x: k as f64,
                metrics: *m,
            })
            .collect()
    }
}

/// A long-format row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: String,
    pub axis: CurveAxis,
    pub x: f64,
    pub metric: String,
    pub value: f64,
}

const HEADER: &str = "method\taxis\tx\tmetric\tvalue";

fn rows(points: &[CurvePoint], metrics: &[&str]) -> Result<Vec<CurveRow>> {
    if points.is_empty() {
        return Err(Error::Config("no curve points to emit".into()));
    }
    let selected: Vec<usize> = metrics
        .iter()
        .map(|m| {
            Metrics::NAMES
                .iter()
                .position(|n| n == m)
                .ok_or_else(|| Error::Config(format!("unknown metric {m:?}")))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for p in points {
        if p.method.contains(['\t', '\n']) {
            return Err(Error::Format(format!("method name {:?} contains a separator", p.method)));
        }
        let values = p.metrics.values();
        for &m in &selected {
            out.push(CurveRow {
                method: p.method.clone(),
                axis: p.axis,
                x: p.x,
                metric: Metrics::NAMES[m].to_owned(),
                value: values[m],
            });
        }
    }
    Ok(out)
}

/// Tab-separated long table: `method, axis, x, metric, value`.
pub fn emit_curves(points: &[CurvePoint], metrics: &[&str]) -> Result<String> {
    let mut out = format!("{HEADER}\n");
    for r in rows(points, metrics)? {
        out.push_str(&format!("{}\t{}\t{}\t{}\t{}\n", r.method, r.axis, r.x, r.metric, r.value));
    }
    Ok(out)
}

/// Same rows as [`emit_curves`], one JSON object per line.
pub fn emit_curves_jsonl(points: &[CurvePoint], metrics: &[&str]) -> Result<String> {
    let mut out = String::new();
    for r in rows(points, metrics)? {
        out.push_str(&serde_json::to_string(&r).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_curves(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h == HEADER => {}
        _ => return Err(Error::Format("missing curve table header".into())),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| {
            let bad = |what: &str| Error::Parse {
                line: n + 1,
                message: format!("bad {what}"),
            };
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() != 5 {
                return Err(bad("field count"));
            }
            Ok(CurveRow {
                method: f[0].to_owned(),
                axis: f[1].parse()?,
                x: f[2].parse().map_err(|_| bad("x"))?,
                metric: f[3].to_owned(),
                value: f[4].parse().map_err(|_| bad("value"))?,
            })
        })
        .collect()
}
