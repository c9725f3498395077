use std::collections::BTreeMap;
use std::io::Write;

use ats_core::stats::MeanSe;
use ats_core::{Error, Result};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// One cell of a results table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    /// Comma-free description of the cell, e.g. `BA/1000/thompson/10`.
    pub group: String,
    pub metric: String,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    /// `mean (se)`, as printed in tables.
    pub display: String,
}

/// `0.123 (0.004)` with the given number of decimals.
pub fn mean_se_display(m: &MeanSe, decimals: usize) -> String {
    format!("{:.*} ({:.*})", decimals, m.mean, decimals, m.se)
}

/// Aggregates `(group, metric, value)` observations, keeping groups and metrics
/// in order of first appearance.
pub fn aggregate(values: &[(String, String, f64)], decimals: usize) -> Vec<AggregateRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut cells: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (g, m, v) in values {
        let key = (g.clone(), m.clone());
        let cell = cells.entry(key.clone()).or_default();
        if cell.is_empty() {
            order.push(key);
        }
        cell.push(*v);
    }
    order
        .into_iter()
        .map(|key| {
            let s = MeanSe::of(&cells[&key]);
            AggregateRow {
                display: mean_se_display(&s, decimals),
                group: key.0,
                metric: key.1,
                n: s.n,
                mean: s.mean,
                se: s.se,
            }
        })
        .collect()
}

pub fn write_rows<W: Write, R: Serialize>(rows: &[R], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Paired comparison of `a` against `b` on the same replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_difference: f64,
    pub se: f64,
    pub t: f64,
    /// One-sided p-value for `mean(a - b) < 0`.
    pub p_less: f64,
}

pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Domain(format!(
            "paired test needs two equal samples of size >= 2, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = MeanSe::of(&d);
    let t = if s.se > 0.0 {
        s.mean / s.se
    } else if s.mean < 0.0 {
        f64::NEG_INFINITY
    } else if s.mean > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let dist = StudentsT::new(0.0, 1.0, (d.len() - 1) as f64).map_err(|e| Error::Numeric(e.to_string()))?;
    let p_less = if t.is_finite() {
        dist.cdf(t)
    } else if t < 0.0 {
        0.0
    } else {
        1.0
    };
    Ok(PairedTest {
        mean_difference: s.mean,
        se: s.se,
        t,
        p_less,
    })
}
