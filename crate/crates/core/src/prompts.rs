//! Helpers shared by prompt builders and reply parsers.

use serde_json::Value;

/// The first balanced `{...}` in `text` that parses as a JSON object.
pub fn extract_json_object(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(open) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        if let Ok(v @ Value::Object(_)) = serde_json::from_str::<Value>(&text[open..=i]) {
                            return Some(v);
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        start = open + 1;
    }
    None
}

/// Collapses whitespace runs (including newlines) to single spaces.
pub fn one_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// At most `max` characters of `text`, with "..." appended when cut.
pub fn clip(text: &str, max: usize) -> String {
    if text.chars().count() <= max {
        return text.to_string();
    }
    let mut s: String = text.chars().take(max.saturating_sub(3)).collect();
    s.push_str("...");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn object_inside_prose() {
        let v = extract_json_object("sure: {\"a\": \"}\", \"b\": {\"c\": 1}} done").unwrap();
        assert_eq!(v["b"]["c"], 1);
        assert_eq!(v["a"], "}");
    }

    #[test]
    fn skips_non_json_braces() {
        let v = extract_json_object("{not json} then {\"ok\": true}").unwrap();
        assert_eq!(v["ok"], true);
        assert!(extract_json_object("no braces").is_none());
    }

    #[test]
    fn clipping() {
        assert_eq!(clip("abcdef", 10), "abcdef");
        assert_eq!(clip("abcdefghijkl", 6), "abc...");
        assert_eq!(one_line("a\n  b\tc"), "a b c");
    }
}
