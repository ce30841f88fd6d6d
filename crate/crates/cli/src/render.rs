use clap::ValueEnum;
use icnn::AttributionReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RenderMode {
    Ansi,
    Html,
    Json,
}

pub const LEVELS: usize = 5;

// 256-colour backgrounds, lightest first.
const WARM: [u8; LEVELS] = [224, 217, 210, 203, 196];
const COOL: [u8; LEVELS] = [189, 153, 117, 75, 33];

/// Token values for one category with padding removed, plus the largest
/// magnitude among them.
fn visible(report: &AttributionReport<f32>, category: usize) -> (Vec<(&str, f64)>, f64) {
    let values = report.category_values(category);
    let cells: Vec<(&str, f64)> = report
        .tokens
        .iter()
        .zip(&values)
        .zip(&report.pad_mask)
        .filter(|(_, &pad)| !pad)
        .map(|((t, &v), _)| (t.as_str(), v as f64))
        .collect();
    let max = cells.iter().fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    (cells, max)
}

/// Heat level in `0..=LEVELS`: zero only for an exactly zero value.
pub fn level(value: f64, max_abs: f64) -> usize {
    if value == 0.0 || max_abs <= 0.0 {
        return 0;
    }
    ((value.abs() / max_abs * LEVELS as f64).ceil() as usize).clamp(1, LEVELS)
}

fn header(report: &AttributionReport<f32>, category: usize) -> String {
    format!(
        "category {} (p = {:.4}), predicted {} (p = {:.4})\n",
        report.labels[category],
        report.probs[category],
        report.labels[report.predicted],
        report.probs[report.predicted]
    )
}

pub fn ansi(report: &AttributionReport<f32>, category: usize) -> String {
    let (cells, max) = visible(report, category);
    let mut out = header(report, category);
    let words: Vec<String> = cells
        .iter()
        .map(|&(tok, v)| match level(v, max) {
            0 => tok.to_string(),
            l => {
                let bg = if v > 0.0 { WARM[l - 1] } else { COOL[l - 1] };
                format!("\x1b[48;5;{bg}m\x1b[38;5;16m{tok}\x1b[0m")
            }
        })
        .collect();
    out.push_str(&words.join(" "));
    out.push('\n');
    out
}

/// Colourless rendering: negative tokens carry a leading `*`, followed by a
/// per-token table with the heat level drawn as a bar.
pub fn plain(report: &AttributionReport<f32>, category: usize) -> String {
    let (cells, max) = visible(report, category);
    let marked: Vec<String> = cells
        .iter()
        .map(|&(tok, v)| if v < 0.0 { format!("*{tok}") } else { tok.to_string() })
        .collect();
    let width = marked.iter().map(|m| m.chars().count()).max().unwrap_or(0);
    let mut out = header(report, category);
    out.push_str(&marked.join(" "));
    out.push('\n');
    for (m, &(_, v)) in marked.iter().zip(&cells) {
        out.push_str(&format!("  {m:<width$}  {v:>+10.4}  {}\n", "#".repeat(level(v, max))));
    }
    out
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn html(report: &AttributionReport<f32>, category: usize) -> String {
    let (cells, max) = visible(report, category);
    let mut spans = String::new();
    for &(tok, v) in &cells {
        let alpha = level(v, max) as f64 / LEVELS as f64;
        let rgb = if v >= 0.0 { "214, 39, 40" } else { "31, 119, 180" };
        let mark = if v < 0.0 { "*" } else { "" };
        spans.push_str(&format!(
            "<span class=\"tok\" style=\"background: rgba({rgb}, {alpha:.2})\" title=\"{v:+.5}\">{mark}{}</span>\n",
            escape(tok)
        ));
    }
    let mut rows = String::new();
    for (i, label) in report.labels.iter().enumerate() {
        let class = if i == category { " class=\"sel\"" } else { "" };
        rows.push_str(&format!(
            "<tr{class}><td>{}</td><td>{:.4}</td><td>{:+.4}</td></tr>\n",
            escape(label),
            report.probs[i],
            report.scores[i]
        ));
    }
    format!(
        r#"<!DOCTYPE html>
<html lang="en">
<head>
<meta charset="utf-8">
<title>icnn: {title}</title>
<style>
body {{ font-family: sans-serif; max-width: 48rem; margin: 2rem auto; color: #222; }}
.text {{ font-size: 1.4rem; line-height: 2.4rem; }}
.tok {{ padding: 0.15rem 0.3rem; border-radius: 0.2rem; }}
table {{ border-collapse: collapse; margin-top: 1.5rem; }}
td, th {{ padding: 0.2rem 0.8rem; text-align: left; }}
tr.sel {{ font-weight: bold; }}
.note {{ color: #666; font-size: 0.9rem; }}
</style>
</head>
<body>
<h1>{title}</h1>
<p class="note">Red tokens support the category, blue tokens (marked *) count against it. Shading is relative to the strongest token.</p>
<div class="text">
{spans}</div>
<table>
<tr><th>label</th><th>probability</th><th>score</th></tr>
{rows}</table>
</body>
</html>
"#,
        title = escape(&format!(
            "{} (predicted {})",
            report.labels[category], report.labels[report.predicted]
        )),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use icnn::Matrix;

    fn report() -> AttributionReport<f32> {
        AttributionReport {
            tokens: vec!["how".into(), "long".into(), "<b>".into(), "<pad>".into()],
            labels: vec!["NUM".into(), "LOC".into()],
            values: Matrix::from_rows(&[vec![0.5, 0.0], vec![1.0, 0.1], vec![-0.2, 0.3], vec![0.0, 0.0]]).unwrap(),
            probs: vec![0.8, 0.2],
            scores: vec![1.3, 0.4],
            bias: vec![0.0, 0.0],
            predicted: 0,
            pad_mask: vec![false, false, false, true],
        }
    }

    #[test]
    fn levels() {
        assert_eq!(level(0.0, 1.0), 0);
        assert_eq!(level(1.0, 1.0), 5);
        assert_eq!(level(-1.0, 1.0), 5);
        assert_eq!(level(0.01, 1.0), 1);
        assert_eq!(level(0.5, 1.0), 3);
        assert_eq!(level(0.3, 0.0), 0);
    }

    #[test]
    fn plain_marks_negative_and_hides_padding() {
        let out = plain(&report(), 0);
        let line = out.lines().nth(1).unwrap();
        assert_eq!(line, "how long *<b>");
        assert!(!out.contains("<pad>"));
        assert!(out.contains("#####"));
    }

    #[test]
    fn ansi_uses_distinct_hues() {
        let out = ansi(&report(), 0);
        assert!(out.contains("\x1b[48;5;196mlong") || out.contains("48;5;196m\x1b[38;5;16mlong"));
        assert!(out.contains("48;5;189m") || out.contains("48;5;153m"));
    }

    #[test]
    fn html_is_escaped_and_self_contained() {
        let out = html(&report(), 0);
        assert!(out.starts_with("<!DOCTYPE html>"));
        assert!(out.contains("*&lt;b&gt;"));
        assert!(!out.contains("<script"));
        assert!(!out.contains("http"));
    }
}
