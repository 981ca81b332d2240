use super::ResultTable;

pub const TRUNCATION_MARKER: &str = "\n...[truncated]";

const MAX_CELL_CHARS: usize = 60;

fn cell(text: String) -> String {
    if text.chars().count() > MAX_CELL_CHARS {
        let mut s: String = text.chars().take(MAX_CELL_CHARS - 3).collect();
        s.push_str("...");
        s
    } else {
        text.replace('\n', " ")
    }
}

/// Headered text table, clipped to its first `char_cap` characters with
/// [`TRUNCATION_MARKER`] appended when clipped.
pub fn format_result(result: &ResultTable, char_cap: usize) -> String {
    let header: Vec<String> = result.column_names.iter().map(|c| cell(c.clone())).collect();
    let body: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| r.iter().map(|v| cell(v.to_string())).collect())
        .collect();

    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in &body {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }

    let line = |cells: &[String]| -> String {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}", w = *w))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };

    let mut out = String::new();
    out.push_str(&line(&header));
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for row in &body {
        out.push_str(&line(row));
        out.push('\n');
    }
    let shown = result.rows.len();
    if result.truncated {
        out.push_str(&format!("({shown} rows shown, {} scanned, result clipped)", result.row_count));
    } else if shown == 1 {
        out.push_str("(1 row)");
    } else {
        out.push_str(&format!("({shown} rows)"));
    }

    if out.chars().count() > char_cap {
        let mut clipped: String = out.chars().take(char_cap).collect();
        clipped.push_str(TRUNCATION_MARKER);
        clipped
    } else {
        out
    }
}
