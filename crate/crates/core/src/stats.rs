//! Cross-run statistics: descriptives, unique-value counts and Spearman rank
//! correlation with p-values.

use std::collections::HashSet;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// Largest sample size for which p-values are computed by enumerating every
/// permutation.
pub const EXACT_P_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); 0 when n = 1.
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

pub fn descriptives(values: &[f64]) -> Result<Descriptives> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("descriptives of an empty list".into()));
    }
    let n = values.len();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = (values.iter().sum::<f64>() / n as f64).clamp(min, max);
    let sd = if n == 1 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Ok(Descriptives { n, mean, sd, min, max })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniqueCounts {
    pub total: usize,
    pub unique: usize,
    /// `round(100 * unique / total)`.
    pub pct: f64,
}

/// Counts distinct values after rounding to `precision` decimals.
pub fn unique_counts(values: &[f64], precision: u32) -> UniqueCounts {
    let scale = 10f64.powi(precision as i32);
    let distinct: HashSet<u64> = values
        .iter()
        .map(|v| {
            let r = (v * scale).round() / scale;
            // fold -0.0 into 0.0
            (r + 0.0).to_bits()
        })
        .collect();
    let total = values.len();
    let unique = distinct.len();
    let pct = if total == 0 {
        0.0
    } else {
        (100.0 * unique as f64 / total as f64).round()
    };
    UniqueCounts { total, unique, pct }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueMethod {
    TApprox,
    ExactPermutation,
}

impl PValueMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PValueMethod::TApprox => "t_approx",
            PValueMethod::ExactPermutation => "exact_permutation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n: usize,
    pub method: PValueMethod,
}

/// 1-based ranks with ties given their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rho with a two-sided p-value: exact permutation enumeration for
/// `n <= 10`, otherwise the Student-t approximation with `n - 2` degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::UndefinedCorrelation(format!("need at least 3 observations, got {n}")));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::UndefinedCorrelation("non-finite input".into()));
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    if rx.iter().all(|&r| r == rx[0]) || ry.iter().all(|&r| r == ry[0]) {
        return Err(Error::UndefinedCorrelation("constant input".into()));
    }
    let rho = pearson(&rx, &ry);
    if n <= EXACT_P_MAX_N {
        Ok(CorrelationResult {
            rho,
            p_value: exact_p_value(&rx, &ry),
            n,
            method: PValueMethod::ExactPermutation,
        })
    } else {
        Ok(CorrelationResult {
            rho,
            p_value: t_p_value(rho, n),
            n,
            method: PValueMethod::TApprox,
        })
    }
}

fn t_p_value(rho: f64, n: usize) -> f64 {
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Share of the `n!` pairings of the two rank vectors whose statistic is at
/// least as extreme as the observed one.
///
/// Average ranks are multiples of one half, so `2r - (n + 1)` is an integer
/// and the centred cross-product is compared exactly.
fn exact_p_value(rx: &[f64], ry: &[f64]) -> f64 {
    let n = rx.len();
    let centre = |r: &f64| (2.0 * r) as i64 - (n as i64 + 1);
    let cx: Vec<i64> = rx.iter().map(centre).collect();
    let mut cy: Vec<i64> = ry.iter().map(centre).collect();
    let mut dot: i64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum();
    let observed = dot.abs();

    // Heap's algorithm, iterative; each swap changes the dot product by a
    // single cross term.
    let mut extreme = 1u64;
    let mut total = 1u64;
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let j = if i % 2 == 0 { 0 } else { c[i] };
            dot += (cx[j] - cx[i]) * (cy[i] - cy[j]);
            cy.swap(j, i);
            total += 1;
            if dot.abs() >= observed {
                extreme += 1;
            }
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    extreme as f64 / total as f64
}

/// Four-decimal rendering that never prints a bare `0.0000`.
pub fn format_p_value(p: f64) -> String {
    if p < 1e-4 {
        "<1e-4".to_string()
    } else {
        format!("{p:.4}")
    }
}

/// Spearman correlation of two report columns.
pub fn correlate_runs(reports: &[MetricReport], x_field: &str, y_field: &str) -> Result<CorrelationResult> {
    let column = |field: &str| -> Result<Vec<f64>> {
        reports
            .iter()
            .map(|r| {
                r.field(field)
                    .ok_or_else(|| Error::Config(format!("unknown metric field {field:?}")))
            })
            .collect()
    };
    let (x, y) = (column(x_field)?, column(y_field)?);
    if reports.len() < 3 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 3 runs, got {}",
            reports.len()
        )));
    }
    spearman(&x, &y)
}

pub fn write_correlation_csv<W: Write>(out: W, rows: &[(String, CorrelationResult)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<csv>", e.into());
    w.write_record(["pair", "rho", "p_value", "n", "method"]).map_err(io)?;
    for (pair, c) in rows {
        w.write_record([
            pair.clone(),
            format!("{:.4}", c.rho),
            format_p_value(c.p_value),
            c.n.to_string(),
            c.method.as_str().to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}

/// Descriptives table with one row per metric: `index,mean,sd,min,max`.
pub fn write_descriptives_csv<W: Write>(out: W, rows: &[(String, Descriptives)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<csv>", e.into());
    w.write_record(["index", "n", "mean", "sd", "min", "max"]).map_err(io)?;
    for (name, d) in rows {
        w.write_record([
            name.clone(),
            d.n.to_string(),
            format!("{:.2}", d.mean),
            format!("{:.2}", d.sd),
            format!("{:.2}", d.min),
            format!("{:.2}", d.max),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))
}
