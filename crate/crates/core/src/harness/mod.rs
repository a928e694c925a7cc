//! End-to-end experiment orchestration: sample → build tokenizer →
//! vectorize (timed) → fit → evaluate, with reports shaped as
//! tokenizer/classifier/error tables.

mod config;
mod pipeline;

pub use config::{parse_grid, ClassifierChoice, PipelineConfig, TokenizerChoice};
pub use pipeline::{
    run_pipeline, ClassifierModel, FittedPipeline, TokenizerArtifact, CONFIG_FILE,
    DICTIONARY_FILE, LR_MODEL_FILE, META_FILE, MNB_MODEL_FILE, REPORT_CSV_FILE, REPORT_TEXT_FILE,
    SAMPLED_TEST_FILE, SAMPLED_TRAIN_FILE, SUBWORD_MODEL_FILE, TFIDF_MODEL_FILE,
};

use crate::corpus::Label;
use crate::error::{Error, Result};

/// One pipeline run's results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Report name of the tokenizer ("Lattice" / "SP").
    pub tokenizer: String,
    /// Report name of the classifier ("MNB" / "LR").
    pub classifier: String,
    pub error_train: f64,
    pub error_test: f64,
    pub vectorize_elapsed_seconds: f64,
    pub train_records: usize,
    pub test_records: usize,
    /// Resolved configuration in config-file form.
    pub config_echo: String,
    pub timestamp_unix: u64,
}

impl EvalReport {
    /// Everything except the timestamp and wall-clock timing; two runs of
    /// the same config must agree on these.
    pub fn deterministic_fields(&self) -> (String, String, f64, f64, usize, usize, String) {
        (
            self.tokenizer.clone(),
            self.classifier.clone(),
            self.error_train,
            self.error_test,
            self.train_records,
            self.test_records,
            self.config_echo.clone(),
        )
    }
}

/// Error percentage: `100 × mismatches / total`.
pub fn evaluate_error(predicted: &[Label], gold: &[Label]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot evaluate error on zero predictions".into(),
        ));
    }
    if predicted.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions vs {} gold labels",
            predicted.len(),
            gold.len()
        )));
    }
    let mismatches = predicted.iter().zip(gold).filter(|(p, g)| p != g).count();
    Ok(100.0 * mismatches as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

const REPORT_COLUMNS: [&str; 5] = [
    "Tokenizer",
    "Classifier",
    "Error-Train",
    "Error-Test",
    "Vectorize-s",
];

/// Renders reports as an aligned text table or RFC-4180 CSV. Errors and
/// elapsed seconds are printed with 2 decimals.
pub fn emit_report(reports: &[EvalReport], format: ReportFormat) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to emit".into()));
    }
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            [
                r.tokenizer.clone(),
                r.classifier.clone(),
                format!("{:.2}", r.error_train),
                format!("{:.2}", r.error_test),
                format!("{:.2}", r.vectorize_elapsed_seconds),
            ]
        })
        .collect();
    match format {
        ReportFormat::Text => {
            let mut widths: Vec<usize> = REPORT_COLUMNS.iter().map(|c| c.len()).collect();
            for row in &rows {
                for (w, cell) in widths.iter_mut().zip(row) {
                    *w = (*w).max(cell.len());
                }
            }
            let mut out = String::new();
            let render = |cells: &[String; 5], out: &mut String, widths: &[usize]| {
                for (i, (cell, &width)) in cells.iter().zip(widths).enumerate() {
                    if i > 0 {
                        out.push_str("  ");
                    }
                    if i < 2 {
                        out.push_str(&format!("{cell:<width$}"));
                    } else {
                        out.push_str(&format!("{cell:>width$}"));
                    }
                }
                while out.ends_with(' ') {
                    out.pop();
                }
                out.push('\n');
            };
            let header: [String; 5] = REPORT_COLUMNS.map(str::to_string);
            render(&header, &mut out, &widths);
            for row in &rows {
                render(row, &mut out, &widths);
            }
            Ok(out)
        }
        ReportFormat::Csv => {
            let mut writer = csv::Writer::from_writer(Vec::new());
            writer
                .write_record(REPORT_COLUMNS)
                .and_then(|_| {
                    for row in &rows {
                        writer.write_record(row)?;
                    }
                    Ok(())
                })
                .map_err(Error::from)?;
            let bytes = writer
                .into_inner()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn label(c: char) -> Label {
        if c == '+' {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    fn labels(s: &str) -> Vec<Label> {
        s.chars().map(label).collect()
    }

    #[test]
    fn error_percentage_basics() {
        assert_eq!(
            evaluate_error(&labels("++--"), &labels("++--")).unwrap(),
            0.0
        );
        assert_eq!(
            evaluate_error(&labels("++--"), &labels("+---")).unwrap(),
            25.0
        );
        assert_eq!(
            evaluate_error(&labels("++"), &labels("--")).unwrap(),
            100.0
        );
    }

    #[test]
    fn error_rejects_empty_and_mismatched() {
        assert!(evaluate_error(&[], &[]).is_err());
        assert!(evaluate_error(&labels("+"), &labels("++")).is_err());
    }

    fn sample_report() -> EvalReport {
        EvalReport {
            tokenizer: "SP".into(),
            classifier: "LR".into(),
            error_train: 6.54,
            error_test: 8.02,
            vectorize_elapsed_seconds: 25.84,
            train_records: 340_000,
            test_records: 40_000,
            config_echo: String::new(),
            timestamp_unix: 0,
        }
    }

    #[test]
    fn text_report_renders_aligned_columns() {
        let text = emit_report(&[sample_report()], ReportFormat::Text).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("Tokenizer  Classifier"));
        assert!(lines[0].contains("Error-Train"));
        assert!(lines[0].contains("Vectorize-s"));
        let row = lines[1];
        assert!(row.starts_with("SP"));
        assert!(row.contains("LR"));
        assert!(row.contains("6.54"));
        assert!(row.contains("8.02"));
        assert!(row.contains("25.84"));
    }

    #[test]
    fn csv_report_has_header_plus_one_line_per_report() {
        let mut second = sample_report();
        second.tokenizer = "Lattice".into();
        let text = emit_report(&[sample_report(), second], ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "Tokenizer,Classifier,Error-Train,Error-Test,Vectorize-s");
        assert_eq!(lines[1], "SP,LR,6.54,8.02,25.84");
        assert!(lines[2].starts_with("Lattice,LR"));
    }

    #[test]
    fn empty_report_list_is_an_error() {
        assert!(emit_report(&[], ReportFormat::Text).is_err());
        assert!(emit_report(&[], ReportFormat::Csv).is_err());
    }
}
