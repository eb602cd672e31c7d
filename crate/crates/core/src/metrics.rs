//! Confusion matrix, one-vs-rest rates with macro averaging, and reports.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Square count matrix; rows are actual classes, columns predicted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: Vec<String>) -> Self {
        let k = classes.len();
        Self {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::Validation(format!(
                "confusion matrix must be {0}x{0}",
                classes.len()
            )));
        }
        Ok(Self { classes, counts })
    }

    pub fn size(&self) -> usize {
        self.classes.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.size()).map(|i| self.counts[i][i]).sum()
    }

    /// Reorders classes so that new index `i` is old index `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            classes: perm.iter().map(|&p| self.classes[p].clone()).collect(),
            counts: perm
                .iter()
                .map(|&r| perm.iter().map(|&c| self.counts[r][c]).collect())
                .collect(),
        }
    }
}

pub fn confusion_matrix(
    actual: &[usize],
    predicted: &[usize],
    classes: Vec<String>,
) -> Result<ConfusionMatrix> {
    if actual.len() != predicted.len() {
        return Err(Error::Validation(format!(
            "{} actual labels but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    let k = cm.size();
    for (&a, &p) in actual.iter().zip(predicted) {
        if a >= k || p >= k {
            return Err(Error::Validation(format!(
                "label pair ({a}, {p}) outside {k} classes"
            )));
        }
        cm.counts[a][p] += 1;
    }
    Ok(cm)
}

/// A ratio whose denominator may be zero; such rates are 0 and flagged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rate {
    pub value: f64,
    pub undefined: bool,
}

impl Rate {
    fn of(num: f64, den: f64) -> Self {
        if den == 0.0 {
            Self {
                value: 0.0,
                undefined: true,
            }
        } else {
            Self {
                value: num / den,
                undefined: false,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: String,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: Rate,
    pub sensitivity: Rate,
    pub specificity: Rate,
    pub f1: Rate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_sensitivity: f64,
    pub macro_specificity: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub total: u64,
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Precondition("confusion matrix is empty".into()));
    }
    let k = cm.size();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.counts[c][c];
            let fn_ = cm.counts[c].iter().sum::<u64>() - tp;
            let fp = (0..k).map(|r| cm.counts[r][c]).sum::<u64>() - tp;
            let tn = total - tp - fn_ - fp;
            let precision = Rate::of(tp as f64, (tp + fp) as f64);
            let sensitivity = Rate::of(tp as f64, (tp + fn_) as f64);
            let specificity = Rate::of(tn as f64, (tn + fp) as f64);
            let f1 = Rate::of(
                2.0 * precision.value * sensitivity.value,
                precision.value + sensitivity.value,
            );
            ClassMetrics {
                class: cm.classes[c].clone(),
                tp,
                fp,
                fn_,
                tn,
                precision,
                sensitivity,
                specificity,
                f1,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        macro_precision: mean(|m| m.precision.value),
        macro_sensitivity: mean(|m| m.sensitivity.value),
        macro_specificity: mean(|m| m.specificity.value),
        macro_f1: mean(|m| m.f1.value),
        accuracy: cm.trace() as f64 / total as f64,
        total,
        per_class,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

pub const REPORT_COLUMNS: [&str; 9] = [
    "class",
    "tp",
    "fp",
    "fn",
    "tn",
    "precision",
    "sensitivity",
    "specificity",
    "f1",
];

fn rate_cell(r: Rate) -> String {
    if r.undefined {
        format!("{:.4}*", r.value)
    } else {
        format!("{:.4}", r.value)
    }
}

pub fn emit_report(report: &MetricsReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&REPORT_COLUMNS.join(","));
            out.push('\n');
            for m in &report.per_class {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
                    m.class,
                    m.tp,
                    m.fp,
                    m.fn_,
                    m.tn,
                    m.precision.value,
                    m.sensitivity.value,
                    m.specificity.value,
                    m.f1.value
                );
            }
            let _ = writeln!(
                out,
                "macro,,,,,{:.4},{:.4},{:.4},{:.4}",
                report.macro_precision,
                report.macro_sensitivity,
                report.macro_specificity,
                report.macro_f1
            );
            let _ = writeln!(out, "accuracy,{:.4}", report.accuracy);
        }
        ReportFormat::Text => {
            let width = report
                .per_class
                .iter()
                .map(|m| m.class.len())
                .max()
                .unwrap_or(0)
                .max(8);
            let _ = write!(out, "{:<width$}", REPORT_COLUMNS[0]);
            for col in &REPORT_COLUMNS[1..5] {
                let _ = write!(out, " {col:>6}");
            }
            for col in &REPORT_COLUMNS[5..] {
                let _ = write!(out, " {col:>12}");
            }
            out.push('\n');
            for m in &report.per_class {
                let _ = write!(out, "{:<width$}", m.class);
                for v in [m.tp, m.fp, m.fn_, m.tn] {
                    let _ = write!(out, " {v:>6}");
                }
                for r in [m.precision, m.sensitivity, m.specificity, m.f1] {
                    let _ = write!(out, " {:>12}", rate_cell(r));
                }
                out.push('\n');
            }
            let _ = write!(out, "{:<width$}", "macro");
            out.push_str(&" ".repeat(28));
            for v in [
                report.macro_precision,
                report.macro_sensitivity,
                report.macro_specificity,
                report.macro_f1,
            ] {
                let _ = write!(out, " {v:>12.4}");
            }
            out.push('\n');
            let _ = writeln!(
                out,
                "accuracy {:.4} ({} samples)",
                report.accuracy, report.total
            );
            if report.per_class.iter().any(|m| {
                [m.precision, m.sensitivity, m.specificity, m.f1]
                    .iter()
                    .any(|r| r.undefined)
            }) {
                out.push_str("* zero denominator, reported as 0\n");
            }
        }
    }
    out
}

/// A CSV report read back: per-class rows, the macro row and accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub rows: Vec<(String, [u64; 4], [f64; 4])>,
    pub macro_rates: [f64; 4],
    pub accuracy: f64,
}

pub fn parse_report_csv(text: &str) -> Result<ParsedReport> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(REPORT_COLUMNS) {
        return Err(Error::Validation(format!(
            "unexpected report header {header:?}"
        )));
    }
    let bad = |what: &str| Error::Validation(format!("malformed report row: {what}"));
    let num = |s: &str| s.parse::<f64>().map_err(|_| bad(s));
    let mut rows = Vec::new();
    let mut macro_rates = None;
    let mut accuracy = None;
    for record in reader.records() {
        let record = record?;
        match (record.get(0), record.len()) {
            (Some("accuracy"), 2) => accuracy = Some(num(&record[1])?),
            (Some("macro"), 9) => {
                macro_rates = Some([
                    num(&record[5])?,
                    num(&record[6])?,
                    num(&record[7])?,
                    num(&record[8])?,
                ])
            }
            (Some(class), 9) => {
                let mut counts = [0u64; 4];
                for (slot, s) in counts.iter_mut().zip(record.iter().skip(1)) {
                    *slot = s.parse().map_err(|_| bad(s))?;
                }
                let mut rates = [0.0; 4];
                for (slot, s) in rates.iter_mut().zip(record.iter().skip(5)) {
                    *slot = num(s)?;
                }
                rows.push((class.to_string(), counts, rates));
            }
            _ => return Err(bad(&format!("{record:?}"))),
        }
    }
    Ok(ParsedReport {
        rows,
        macro_rates: macro_rates.ok_or_else(|| bad("missing macro row"))?,
        accuracy: accuracy.ok_or_else(|| bad("missing accuracy row"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        ["AMD", "Cataract", "Diabetes", "Normal"]
            .map(String::from)
            .to_vec()
    }

    fn published() -> ConfusionMatrix {
        ConfusionMatrix::from_counts(
            names(),
            vec![
                vec![98, 1, 1, 0],
                vec![1, 99, 0, 0],
                vec![3, 0, 93, 4],
                vec![1, 0, 3, 96],
            ],
        )
        .unwrap()
    }

    #[test]
    fn published_matrix_macro_rates() {
        let r = compute_metrics(&published()).unwrap();
        assert!((r.accuracy - 0.965).abs() < 1e-12);
        assert!((r.macro_precision - 0.9651).abs() < 5e-5);
        assert!((r.macro_sensitivity - 0.9650).abs() < 5e-5);
        assert!((r.macro_f1 - 0.9649).abs() < 5e-5);
        assert!((r.macro_specificity - 1186.0 / 1200.0).abs() < 1e-12);
        let tp: u64 = r.per_class.iter().map(|m| m.tp).sum();
        assert_eq!(tp, 386);
        for m in &r.per_class {
            assert_eq!(m.tp + m.fp + m.fn_ + m.tn, 400);
        }
    }

    #[test]
    fn csv_footer_and_roundtrip() {
        let r = compute_metrics(&published()).unwrap();
        let csv = emit_report(&r, ReportFormat::Csv);
        assert_eq!(csv.lines().last(), Some("accuracy,0.9650"));
        let parsed = parse_report_csv(&csv).unwrap();
        assert_eq!(parsed.rows.len(), 4);
        assert_eq!(parsed.rows[0].1, [98, 5, 2, 295]);
        assert_eq!(parsed.accuracy, 0.965);
        assert_eq!(emit_report(&r, ReportFormat::Csv), csv);
    }

    #[test]
    fn degenerate_single_class() {
        let cm = confusion_matrix(&[1, 1, 1], &[1, 1, 1], names()).unwrap();
        let r = compute_metrics(&cm).unwrap();
        assert_eq!(r.per_class[1].sensitivity.value, 1.0);
        assert!(r.per_class[0].sensitivity.undefined);
        assert_eq!(r.per_class[0].precision.value, 0.0);
        assert!(emit_report(&r, ReportFormat::Text).contains('*'));
    }

    #[test]
    fn empty_and_invalid() {
        let cm = confusion_matrix(&[], &[], names()).unwrap();
        assert_eq!(cm.total(), 0);
        assert!(matches!(compute_metrics(&cm), Err(Error::Precondition(_))));
        assert!(confusion_matrix(&[4], &[0], names()).is_err());
        assert!(confusion_matrix(&[0, 1], &[0], names()).is_err());
    }

    #[test]
    fn permutation_invariance() {
        let cm = published();
        let a = compute_metrics(&cm).unwrap();
        let b = compute_metrics(&cm.permuted(&[2, 0, 3, 1])).unwrap();
        assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
        assert_eq!(a.accuracy, b.accuracy);
        let amd = b.per_class.iter().find(|m| m.class == "AMD").unwrap();
        assert_eq!(amd, &a.per_class[0]);
    }
}
