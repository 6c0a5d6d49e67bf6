//! Experiment records and their CSV form.

use std::io::Write;

use crate::BenchError;

/// Base CSV columns.
pub const HEADER: [&str; 8] = [
    "sweep", "method", "order", "error", "delta_ag", "delta_a", "delta_g", "chosen_j",
];

/// Extra columns written when any record has a second sweep coordinate.
pub const HEATMAP_COLUMNS: [&str; 2] = ["sweep2", "gap_ok"];

/// One error measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    /// Sweep parameter: `eps`, `alpha_1` or `M`.
    pub sweep: f64,
    pub method: String,
    pub order: usize,
    /// Relative energy distance to the exact projector.
    pub error: f64,
    pub deltas: Option<[f64; 3]>,
    /// 1-based index of the reference point (standard methods).
    pub chosen_j: Option<usize>,
    pub sweep2: Option<f64>,
    pub gap_ok: Option<bool>,
}

impl ExperimentRecord {
    pub fn new(sweep: f64, method: impl Into<String>, order: usize, error: f64) -> Self {
        Self {
            sweep,
            method: method.into(),
            order,
            error,
            deltas: None,
            chosen_j: None,
            sweep2: None,
            gap_ok: None,
        }
    }

    pub fn with_deltas(mut self, deltas: Option<[f64; 3]>) -> Self {
        self.deltas = deltas;
        self
    }

    pub fn with_chosen(mut self, j: usize) -> Self {
        self.chosen_j = Some(j);
        self
    }

    pub fn with_grid(mut self, sweep2: f64, gap_ok: bool) -> Self {
        self.sweep2 = Some(sweep2);
        self.gap_ok = Some(gap_ok);
        self
    }
}

/// 17 significant digits.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

/// Writes `records` as CSV with the fixed header.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<(), BenchError> {
    let grid = records.iter().any(|r| r.sweep2.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = HEADER.to_vec();
    if grid {
        header.extend(HEATMAP_COLUMNS);
    }
    w.write_record(&header)?;
    for r in records {
        let d = r.deltas;
        let mut row = vec![
            format_number(r.sweep),
            r.method.clone(),
            r.order.to_string(),
            format_number(r.error),
            opt(d.map(|d| d[0])),
            opt(d.map(|d| d[1])),
            opt(d.map(|d| d[2])),
            r.chosen_j.map(|j| j.to_string()).unwrap_or_default(),
        ];
        if grid {
            row.push(opt(r.sweep2));
            row.push(r.gap_ok.map(|b| u8::from(b).to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(sweep, error)` pairs of one method, in record order.
pub fn series(records: &[ExperimentRecord], method: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| (r.sweep, r.error))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let recs = vec![
            ExperimentRecord::new(0.5, "P0", 0, 1.0 / 3.0).with_chosen(2),
            ExperimentRecord::new(0.5, "D1", 1, 2e-7).with_deltas(Some([0.1, 0.0, 0.0])),
        ];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "sweep,method,order,error,delta_ag,delta_a,delta_g,chosen_j");
        assert_eq!(lines[1], "5.0000000000000000e-1,P0,0,3.3333333333333331e-1,,,,2");
        assert!(lines[2].starts_with("5.0000000000000000e-1,D1,1,1.9999999999999999e-7,1.0000000000000001e-1,"));
        // 17 significant digits round-trip
        let back: f64 = "3.3333333333333331e-1".parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    #[test]
    fn heatmap_columns() {
        let recs = vec![ExperimentRecord::new(1.0, "D0", 0, 0.0).with_grid(0.0, true)];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep,method,order,error,delta_ag,delta_a,delta_g,chosen_j,sweep2,gap_ok\n"));
        assert!(text.trim_end().ends_with(",0.0000000000000000e0,1"));
        assert_eq!(series(&recs, "D0"), vec![(1.0, 0.0)]);
    }
}
