//! Long-format result rows and their CSV/JSON encodings.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::config::OutputFormat;

/// Readout strategy a row describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// `λ = 0`, majority vote over `rounds`.
    Simple,
    /// `λ` from the configured policy, one round.
    Improved,
    Homodyne,
    Helstrom,
    /// One round at a fixed `λ`.
    FixedLambda,
    /// One round at the optimal `λ` (the envelope of the fixed-λ curves).
    OptimizedLambda,
}

/// One output row. CSV columns follow the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub strategy: Strategy,
    pub delta_db: f64,
    pub delta: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub purity: Option<f64>,
    pub delta_eff_db: Option<f64>,
    pub lambda_used: Option<f64>,
    pub rounds: Option<usize>,
    pub p_err_simulated: Option<f64>,
    pub p_err_formula: Option<f64>,
    pub p_err_homodyne_formula: Option<f64>,
    pub p_err_helstrom: Option<f64>,
    #[serde(rename = "cutoff_N")]
    pub cutoff_n: usize,
    pub converged_flag: bool,
}

fn opt_cmp<T: PartialOrd>(a: Option<T>, b: Option<T>) -> Ordering {
    match (a, b) {
        (None, None) => Ordering::Equal,
        (None, Some(_)) => Ordering::Less,
        (Some(_), None) => Ordering::Greater,
        (Some(x), Some(y)) => x.partial_cmp(&y).unwrap_or(Ordering::Equal),
    }
}

impl SweepRow {
    /// Emission order: strategy, then parameters, with `delta_db` fastest.
    pub fn order(&self, other: &Self) -> Ordering {
        self.strategy
            .cmp(&other.strategy)
            .then(self.kappa.total_cmp(&other.kappa))
            .then(self.sigma.total_cmp(&other.sigma))
            .then(opt_cmp(self.lambda_used, other.lambda_used))
            .then(opt_cmp(self.rounds, other.rounds))
            .then(self.delta_db.total_cmp(&other.delta_db))
    }
}

/// Sorts rows into emission order. Ties keep their input order.
pub fn sort_rows(rows: &mut [SweepRow]) {
    rows.sort_by(SweepRow::order);
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

pub fn write_json<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)
}

pub fn write_rows<W: Write>(rows: &[SweepRow], format: OutputFormat, out: W) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => write_csv(rows, out),
        OutputFormat::Json => write_json(rows, out),
    }
}

pub fn read_csv(text: &str) -> csv::Result<Vec<SweepRow>> {
    csv::Reader::from_reader(text.as_bytes()).deserialize().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: Strategy, delta_db: f64, rounds: Option<usize>) -> SweepRow {
        SweepRow {
            strategy,
            delta_db,
            delta: 10f64.powf(-delta_db / 20.0),
            kappa: 3.0,
            sigma: 0.0,
            purity: Some(1.0),
            delta_eff_db: Some(delta_db),
            lambda_used: rounds.map(|_| 0.0),
            rounds,
            p_err_simulated: Some(0.01),
            p_err_formula: None,
            p_err_homodyne_formula: Some(1e-3),
            p_err_helstrom: Some(1e-4),
            cutoff_n: 150,
            converged_flag: true,
        }
    }

    #[test]
    fn header_follows_field_order() {
        let mut buf = Vec::new();
        write_csv(&[row(Strategy::Simple, 10.0, Some(1))], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "strategy,delta_db,delta,kappa,sigma,purity,delta_eff_db,lambda_used,rounds,p_err_simulated,p_err_formula,\
             p_err_homodyne_formula,p_err_helstrom,cutoff_N,converged_flag"
        );
        let data = lines.next().unwrap();
        assert!(data.starts_with("simple,10.0,"));
        assert!(data.contains(",,"), "missing value is an empty field: {data}");
        assert_eq!(read_csv(&text).unwrap(), vec![row(Strategy::Simple, 10.0, Some(1))]);
    }

    #[test]
    fn json_uses_null_for_missing() {
        let mut buf = Vec::new();
        write_json(&[row(Strategy::Homodyne, 9.0, None)], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["strategy"], "homodyne");
        assert!(v[0]["rounds"].is_null());
        assert_eq!(v[0]["cutoff_N"], 150);
    }

    #[test]
    fn ordering_is_by_strategy_then_parameters() {
        let mut rows = vec![
            row(Strategy::Homodyne, 8.0, None),
            row(Strategy::Simple, 9.0, Some(3)),
            row(Strategy::Simple, 8.0, Some(3)),
            row(Strategy::Simple, 9.0, Some(1)),
        ];
        sort_rows(&mut rows);
        let keys: Vec<(Strategy, f64, Option<usize>)> = rows.iter().map(|r| (r.strategy, r.delta_db, r.rounds)).collect();
        assert_eq!(
            keys,
            vec![
                (Strategy::Simple, 9.0, Some(1)),
                (Strategy::Simple, 8.0, Some(3)),
                (Strategy::Simple, 9.0, Some(3)),
                (Strategy::Homodyne, 8.0, None),
            ]
        );
    }
}
