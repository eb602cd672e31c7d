//! Macro metrics from a 4-class confusion matrix, in text and CSV form.
//!
//! `cargo run --example confusion_metrics`

use amdnet::data::ClassLabel;
use amdnet::metrics::{
    compute_metrics, emit_report, parse_report_csv, ConfusionMatrix, ReportFormat,
};

fn main() -> amdnet::Result<()> {
    let cm = ConfusionMatrix::from_counts(
        ClassLabel::names(),
        vec![
            vec![98, 1, 1, 0],
            vec![1, 99, 0, 0],
            vec![3, 0, 93, 4],
            vec![1, 0, 3, 96],
        ],
    )?;
    let report = compute_metrics(&cm)?;
    print!("{}", emit_report(&report, ReportFormat::Text));

    let csv = emit_report(&report, ReportFormat::Csv);
    println!("\n{csv}");
    let parsed = parse_report_csv(&csv)?;
    println!("re-parsed accuracy {:.4}", parsed.accuracy);
    Ok(())
}
