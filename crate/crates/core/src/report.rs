//! Report types emitted by norms, distances and verification sweeps,
//! serializable to JSON and CSV rows.

use serde::{Deserialize, Serialize};

/// Result of a single named numerical check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    /// The measured quantity (max residual, margin, ratio...).
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Grid / sample-count description, e.g. "64x64x64" or "n=500".
    pub resolution: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Wall time of the check, when measured.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl VerificationReport {
    /// Pass iff `value < tolerance`.
    pub fn residual(
        check: impl Into<String>,
        value: f64,
        tolerance: f64,
        resolution: impl Into<String>,
    ) -> Self {
        VerificationReport {
            check: check.into(),
            value,
            tolerance,
            pass: value < tolerance,
            resolution: resolution.into(),
            seed: None,
            seconds: None,
        }
    }

    /// Pass iff `value > tolerance` (margins, minima).
    pub fn lower_bound(
        check: impl Into<String>,
        value: f64,
        tolerance: f64,
        resolution: impl Into<String>,
    ) -> Self {
        VerificationReport {
            check: check.into(),
            value,
            tolerance,
            pass: value > tolerance,
            resolution: resolution.into(),
            seed: None,
            seconds: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_seconds(mut self, seconds: f64) -> Self {
        self.seconds = Some(seconds);
        self
    }

    pub const CSV_HEADER: &'static str = "check,value,tolerance,pass,resolution,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.12e},{:.3e},{},{},{}",
            self.check,
            self.value,
            self.tolerance,
            self.pass,
            self.resolution,
            self.seed.map_or(String::new(), |s| s.to_string())
        )
    }
}

/// Breakdown of a contact-norm evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub osc_part: f64,
    pub c_part: f64,
    /// `osc_part + |c_part|`, maintained by construction.
    pub total: f64,
    pub grid_resolution: Vec<usize>,
    pub time_resolution: usize,
}

impl NormReport {
    pub fn new(
        osc_part: f64,
        c_part: f64,
        grid_resolution: Vec<usize>,
        time_resolution: usize,
    ) -> Self {
        NormReport {
            osc_part,
            c_part,
            total: osc_part + c_part.abs(),
            grid_resolution,
            time_resolution,
        }
    }
}

/// Breakdown of a contact-distance evaluation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceReport {
    pub name: String,
    pub value: f64,
    /// `sup_t` of the C0 part, when applicable.
    pub c0_part: f64,
    /// Generator-length part (L1 or Linf aggregate).
    pub length_part: f64,
    pub resolution: String,
}

pub fn reports_to_json(reports: &[VerificationReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}

pub fn reports_to_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from(VerificationReport::CSV_HEADER);
    for r in reports {
        out.push('\n');
        out.push_str(&r.csv_row());
    }
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_report_total_invariant() {
        let r = NormReport::new(0.5, -1.2, vec![64, 64, 64], 9);
        assert_eq!(r.total, 0.5 + 1.2);
    }

    #[test]
    fn csv_and_json_round() {
        let r = VerificationReport::residual("alpha(xi)=1", 1e-12, 1e-9, "100x10x10").with_seed(7);
        assert!(r.pass);
        let csv = reports_to_csv(&[r.clone()]);
        assert!(csv.starts_with("check,value"));
        assert!(csv.contains("alpha(xi)=1"));
        let json = reports_to_json(&[r]);
        let parsed: Vec<VerificationReport> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed[0].seed, Some(7));
    }
}
