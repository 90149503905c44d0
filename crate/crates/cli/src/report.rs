//! Plain-text tables and CSV writers for diagnostic reports.

use serde::{Deserialize, Serialize};

/// One row of a trend table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendRow {
    pub radius: f64,
    pub samples: usize,
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    /// Free-form notes (hypothesis choices, window indices, and similar).
    pub notes: Vec<String>,
    pub rows: Vec<TrendRow>,
    pub pass: bool,
}

impl LemmaReport {
    pub fn csv(&self) -> String {
        let mut out = String::from("radius,samples,worst,threshold,pass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:e},{},{:e},{:e},{}\n",
                r.radius, r.samples, r.worst, r.threshold, r.pass
            ));
        }
        out
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("lemma: {}\n", self.lemma));
        for n in &self.notes {
            out.push_str(&format!("note: {n}\n"));
        }
        out.push_str(&format!(
            "{:>12} {:>8} {:>13} {:>13} {:>6}\n",
            "radius", "samples", "worst", "threshold", "pass"
        ));
        for r in &self.rows {
            out.push_str(&format!(
                "{:>12.3e} {:>8} {:>13.6e} {:>13.6e} {:>6}\n",
                r.radius, r.samples, r.worst, r.threshold, r.pass
            ));
        }
        out.push_str(&format!("overall: {}\n", if self.pass { "PASS" } else { "FAIL" }));
        out
    }
}
