//! Plain-text (markdown) rendering of grid reports.

use std::fmt::Write;

use super::grid::GridReport;

fn pct(v: f64) -> String {
    format!("{:.2}", v * 100.0)
}

/// Markdown table with one `Prec / Rec / F1` group per dataset and a final
/// `Avg.F1` column. Ablation rows are indented under their full model.
/// Cells where every seed failed show `fail`.
pub fn render_grid_table(report: &GridReport) -> String {
    let mut out = String::new();
    let mut header = String::from("| Model |");
    let mut rule = String::from("|---|");
    for d in &report.datasets {
        write!(header, " {d} Prec | {d} Rec | {d} F1 |").unwrap();
        rule.push_str("---:|---:|---:|");
    }
    header.push_str(" Avg.F1 |");
    rule.push_str("---:|");
    writeln!(out, "{header}\n{rule}").unwrap();
    for row in &report.rows {
        let label = match row.row.ablation {
            Some(_) => format!("&nbsp;&nbsp;{}", row.row.label),
            None => row.row.label.clone(),
        };
        let mut line = format!("| {label} |");
        for cell in &row.cells {
            match &cell.mean {
                Some(m) => write!(line, " {} | {} | {} |", pct(m.precision), pct(m.recall), pct(m.f1)),
                None => write!(line, " fail | fail | fail |"),
            }
            .unwrap();
        }
        match row.avg_f1 {
            Some(f) => write!(line, " {} |", pct(f)),
            None => write!(line, " - |"),
        }
        .unwrap();
        writeln!(out, "{line}").unwrap();
    }
    let failures: Vec<String> = report
        .rows
        .iter()
        .flat_map(|r| {
            r.cells.iter().flat_map(move |c| {
                c.failures
                    .iter()
                    .map(move |f| format!("- {} on {} (seed {}): {}", r.row.label, c.dataset, f.seed, f.message))
            })
        })
        .collect();
    if !failures.is_empty() {
        writeln!(out, "\nFailed runs:").unwrap();
        for f in failures {
            writeln!(out, "{f}").unwrap();
        }
    }
    out
}
