//! Analytic-versus-simulation summary of a results CSV.

use std::fmt::Write as _;
use std::path::Path;

use super::table::{read_csv, ResultRow};
use crate::coverage::Quantity;
use crate::error::{Error, Result};

/// Absolute disagreement always tolerated on top of the MC band, covering
/// the independence approximation of the two-hop model.
pub const ABSOLUTE_BUDGET: f64 = 0.02;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityStats {
    pub quantity: Quantity,
    pub rows: usize,
    pub max_abs_diff: f64,
    pub mean_abs_diff: f64,
    /// Fraction with `|analytic - mc| <= 3 half-widths`.
    pub within_3hw: f64,
    /// Fraction with `|analytic - mc| <= max(0.02, 3 half-widths)`.
    pub within_budget: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticTrend {
    pub lambda_t: f64,
    pub rows: usize,
    pub same_tbs_model: Option<f64>,
    pub same_tbs_mc: Option<f64>,
    /// Mean `analytic - mc` of the total coverage.
    pub total_bias: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub compared: usize,
    pub failed: usize,
    pub per_quantity: Vec<QuantityStats>,
    pub trend: Vec<DiagnosticTrend>,
}

pub fn within_budget(row: &ResultRow) -> Option<bool> {
    let (a, m, hw) = (row.analytic?, row.mc?, row.mc_half_width?);
    Some((a - m).abs() <= ABSOLUTE_BUDGET.max(3.0 * hw))
}

pub fn compare(rows: &[ResultRow]) -> Result<Comparison> {
    let paired: Vec<&ResultRow> = rows
        .iter()
        .filter(|r| r.analytic.is_some() && r.mc.is_some() && r.mc_half_width.is_some())
        .collect();
    if paired.is_empty() {
        return Err(Error::Format(
            "no row carries both an analytic and an MC value; compare needs a run with engine = both".into(),
        ));
    }
    let mut per_quantity = Vec::new();
    for q in Quantity::ALL {
        let rs: Vec<&&ResultRow> = paired.iter().filter(|r| r.quantity == q).collect();
        if rs.is_empty() {
            continue;
        }
        let diffs: Vec<f64> = rs
            .iter()
            .map(|r| (r.analytic.unwrap() - r.mc.unwrap()).abs())
            .collect();
        let n = rs.len() as f64;
        let in_band = rs
            .iter()
            .zip(&diffs)
            .filter(|(r, d)| **d <= 3.0 * r.mc_half_width.unwrap())
            .count();
        let in_budget = rs.iter().filter(|r| within_budget(r) == Some(true)).count();
        per_quantity.push(QuantityStats {
            quantity: q,
            rows: rs.len(),
            max_abs_diff: diffs.iter().copied().fold(0.0, f64::max),
            mean_abs_diff: diffs.iter().sum::<f64>() / n,
            within_3hw: in_band as f64 / n,
            within_budget: in_budget as f64 / n,
        });
    }

    let mut lambdas: Vec<f64> = paired.iter().map(|r| r.lambda_t).collect();
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
    let trend = lambdas
        .into_iter()
        .map(|lt| {
            let rs: Vec<&&ResultRow> = paired.iter().filter(|r| r.lambda_t == lt).collect();
            let totals: Vec<f64> = rs
                .iter()
                .filter(|r| r.quantity == Quantity::Total)
                .map(|r| r.analytic.unwrap() - r.mc.unwrap())
                .collect();
            DiagnosticTrend {
                lambda_t: lt,
                rows: rs.len(),
                same_tbs_model: mean(rs.iter().filter_map(|r| r.same_tbs_model).collect()),
                same_tbs_mc: mean(rs.iter().filter_map(|r| r.same_tbs_mc).collect()),
                total_bias: mean(totals),
            }
        })
        .collect();

    Ok(Comparison {
        compared: paired.len(),
        failed: rows.iter().filter(|r| r.failed()).count(),
        per_quantity,
        trend,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "-".into())
}

impl Comparison {
    /// Plain-text rendering; identical inputs give identical bytes.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "analytic vs Monte-Carlo");
        let _ = writeln!(s, "rows compared: {}", self.compared);
        let _ = writeln!(s, "rows with errors: {}", self.failed);
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:<12} {:>6} {:>12} {:>12} {:>10} {:>14}",
            "quantity", "rows", "max|diff|", "mean|diff|", "within3hw", "within_budget"
        );
        for q in &self.per_quantity {
            let _ = writeln!(
                s,
                "{:<12} {:>6} {:>12.6} {:>12.6} {:>9.1}% {:>13.1}%",
                q.quantity.as_str(),
                q.rows,
                q.max_abs_diff,
                q.mean_abs_diff,
                100.0 * q.within_3hw,
                100.0 * q.within_budget
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "same-TBS diagnostic vs lambda_t (budget: max({ABSOLUTE_BUDGET}, 3 half-widths))"
        );
        let _ = writeln!(
            s,
            "{:>12} {:>6} {:>15} {:>12} {:>16}",
            "lambda_t", "rows", "same_tbs_model", "same_tbs_mc", "total_bias"
        );
        for t in &self.trend {
            let _ = writeln!(
                s,
                "{:>12.4e} {:>6} {:>15} {:>12} {:>16}",
                t.lambda_t,
                t.rows,
                opt(t.same_tbs_model),
                opt(t.same_tbs_mc),
                opt(t.total_bias)
            );
        }
        s
    }
}

/// Reads a results CSV and renders its comparison summary.
pub fn compare_report(csv: &Path) -> Result<String> {
    Ok(compare(&read_csv(csv)?)?.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::MobilityScheme;

    fn row(quantity: Quantity, analytic: Option<f64>, mc: Option<f64>) -> ResultRow {
        ResultRow {
            index: 0,
            scheme: MobilityScheme::TowardUser,
            v: 40.0,
            t: 0.0,
            t_over_tbar: Some(0.0),
            h_r: 1000.0,
            lambda_r: 1e-7,
            lambda_t: 5e-8,
            beta_db: Some(0.0),
            quantity,
            analytic,
            mc,
            mc_half_width: mc.map(|_| 0.004),
            mc_drops: mc.map(|_| 50_000),
            seed: mc.map(|_| 1),
            regions: None,
            same_tbs_model: Some(0.6),
            same_tbs_mc: Some(0.7),
            error: None,
        }
    }

    #[test]
    fn statistics() {
        let rows = vec![
            row(Quantity::Association, Some(0.570), Some(0.569)),
            row(Quantity::Total, Some(0.375), Some(0.337)),
            row(Quantity::Total, Some(0.300), Some(0.305)),
        ];
        let c = compare(&rows).unwrap();
        assert_eq!(c.compared, 3);
        let total = c
            .per_quantity
            .iter()
            .find(|q| q.quantity == Quantity::Total)
            .unwrap();
        assert_eq!(total.rows, 2);
        assert!((total.max_abs_diff - 0.038).abs() < 1e-12);
        assert_eq!(total.within_3hw, 0.5);
        assert_eq!(total.within_budget, 0.5);
        let assoc = c
            .per_quantity
            .iter()
            .find(|q| q.quantity == Quantity::Association)
            .unwrap();
        assert_eq!(assoc.within_3hw, 1.0);
        assert_eq!(c.trend.len(), 1);
        assert!((c.trend[0].total_bias.unwrap() - 0.0165).abs() < 1e-12);
        assert_eq!(c.render(), compare(&rows).unwrap().render());
    }

    #[test]
    fn analytic_only_rows_are_rejected() {
        let rows = vec![row(Quantity::Total, Some(0.3), None)];
        assert!(matches!(compare(&rows), Err(Error::Format(_))));
    }
}
