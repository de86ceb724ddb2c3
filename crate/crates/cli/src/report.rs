use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Outcome of one reduction run. Distances are in normalized units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub method: String,
    pub time_ms: f64,
    pub space_distance: f64,
    pub moment_distance: f64,
    pub lambda_moment: f64,
    pub combined_objective: f64,
    pub size: usize,
    pub reduced_size: usize,
    pub horizon: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub reports: Vec<ReductionReport>,
    /// HS time over DCNN time.
    pub speedup: f64,
    pub repeats: usize,
}

impl BenchReport {
    pub fn report(&self, method: &str) -> Option<&ReductionReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    /// Aligned text table with one column per method.
    pub fn to_table(&self) -> String {
        let width = self.reports.iter().map(|r| r.method.len()).max().unwrap_or(0).max(12);
        let mut out = String::new();
        let _ = write!(out, "{:<22}", "");
        for r in &self.reports {
            let _ = write!(out, " {:>width$}", r.method.to_uppercase());
        }
        out.push('\n');
        let rows: [(&str, fn(&ReductionReport) -> f64); 3] = [
            ("Time consumed (s)", |r| r.time_ms / 1e3),
            ("Space distance", |r| r.space_distance),
            ("Moment distance", |r| r.moment_distance),
        ];
        for (label, value) in rows {
            let _ = write!(out, "{label:<22}");
            for r in &self.reports {
                let _ = write!(out, " {:>width$.4e}", value(r));
            }
            out.push('\n');
        }
        let _ = writeln!(out, "speedup (hs / dcnn): {:.1}x", self.speedup);
        out
    }
}

/// Per-set comparison of the surrogate against its teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub file: String,
    pub dcnn_space: f64,
    pub dcnn_moment: f64,
    pub teacher_space: f64,
    pub teacher_moment: f64,
    pub dcnn_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub median_dcnn_space: f64,
    pub median_teacher_space: f64,
    pub median_dcnn_moment: f64,
    pub median_teacher_moment: f64,
    pub bce: f64,
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// `epoch,train_loss,test_loss` rows; the test column is empty without a split.
pub fn loss_csv(train: &[f64], test: &[f64]) -> String {
    let mut out = String::from("epoch,train_loss,test_loss\n");
    for (epoch, tr) in train.iter().enumerate() {
        match test.get(epoch) {
            Some(te) => {
                let _ = writeln!(out, "{epoch},{tr:?},{te:?}");
            }
            None => {
                let _ = writeln!(out, "{epoch},{tr:?},");
            }
        }
    }
    out
}
