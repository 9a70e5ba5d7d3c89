//! Deterministic output documents: an indented key-value tree for `compute`
//! and `verify`, and CSV rows for `table`. All floats are printed at 17
//! significant digits so identical runs produce byte-identical files.

use std::fmt::Display;

/// 17-significant-digit float formatting used everywhere a float reaches an
/// output document.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Indented key-value tree builder.
#[derive(Debug, Default)]
pub struct Report {
    buf: String,
    indent: usize,
}

impl Report {
    pub fn new() -> Report {
        Report::default()
    }

    pub fn open(&mut self, key: &str) -> &mut Self {
        self.line(&format!("{key}:"));
        self.indent += 1;
        self
    }

    pub fn close(&mut self) -> &mut Self {
        assert!(self.indent > 0, "close without matching open");
        self.indent -= 1;
        self
    }

    pub fn field(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.line(&format!("{key}: {value}"));
        self
    }

    pub fn float(&mut self, key: &str, v: f64) -> &mut Self {
        self.line(&format!("{key}: {}", fmt_float(v)));
        self
    }

    pub fn list(&mut self, key: &str, values: impl IntoIterator<Item = impl Display>) -> &mut Self {
        let joined: Vec<String> = values.into_iter().map(|v| v.to_string()).collect();
        self.line(&format!("{key}: [{}]", joined.join(", ")));
        self
    }

    fn line(&mut self, text: &str) {
        for _ in 0..self.indent {
            self.buf.push_str("  ");
        }
        self.buf.push_str(text);
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        assert!(self.indent == 0, "unclosed section in report");
        self.buf
    }
}

/// One CSV line; fields containing commas or quotes are quoted.
pub fn csv_line(fields: &[String]) -> String {
    let escaped: Vec<String> = fields
        .iter()
        .map(|f| {
            if f.contains(',') || f.contains('"') {
                format!("\"{}\"", f.replace('"', "\"\""))
            } else {
                f.clone()
            }
        })
        .collect();
    escaped.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_nesting_and_formatting() {
        let mut r = Report::new();
        r.field("tool", "ope");
        r.open("result");
        r.float("value", 0.5);
        r.list("points", [1, 2, 3]);
        r.close();
        assert_eq!(
            r.finish(),
            "tool: ope\nresult:\n  value: 5.0000000000000000e-1\n  points: [1, 2, 3]\n"
        );
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(
            csv_line(&["a".into(), "b,c".into(), "d\"e".into()]),
            "a,\"b,c\",\"d\"\"e\""
        );
    }
}
