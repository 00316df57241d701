use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub point: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// One CSV-able report per lemma: sweep rows, extremes, cross-check quality and verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    pub lemma: String,
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub argmax: Option<usize>,
    /// worst relative disagreement of the half-step quadrature cross-check
    pub cross_check: f64,
    pub summary: Vec<(String, String)>,
    pub failures: Vec<String>,
}

impl LemmaReport {
    pub(crate) fn new(lemma: &str, columns: &[&str], rows: Vec<ReportRow>) -> Self {
        let mut max_ratio = f64::NEG_INFINITY;
        let mut min_ratio = f64::INFINITY;
        let mut argmax = None;
        for (i, r) in rows.iter().enumerate() {
            if r.ratio > max_ratio || (r.ratio.is_nan() && argmax.is_none()) {
                max_ratio = r.ratio;
                argmax = Some(i);
            }
            min_ratio = min_ratio.min(r.ratio);
        }
        LemmaReport {
            lemma: lemma.to_string(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows,
            max_ratio,
            min_ratio,
            argmax,
            cross_check: 0.0,
            summary: Vec::new(),
            failures: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub(crate) fn note(&mut self, key: &str, value: impl ToString) {
        self.summary.push((key.to_string(), value.to_string()));
    }

    pub(crate) fn require(&mut self, ok: bool, msg: impl Into<String>) {
        if !ok {
            self.failures.push(msg.into());
        }
    }

    pub fn argmax_point(&self) -> Option<&[f64]> {
        self.argmax.map(|i| self.rows[i].point.as_slice())
    }

    pub fn summary_line(&self) -> String {
        let mut s = format!(
            "{}: {} | max ratio {:.6e} | min ratio {:.6e} | cross-check {:.2e}",
            self.lemma,
            if self.passed() { "PASS" } else { "FAIL" },
            self.max_ratio,
            self.min_ratio,
            self.cross_check
        );
        for f in &self.failures {
            let _ = write!(s, " | {f}");
        }
        s
    }

    /// Comment lines with the summary, a header, the rows and a closing summary row.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# lemma={}", self.lemma);
        let _ = writeln!(out, "# passed={}", self.passed());
        let _ = writeln!(out, "# cross_check={:e}", self.cross_check);
        for (k, v) in &self.summary {
            let _ = writeln!(out, "# {k}={v}");
        }
        for f in &self.failures {
            let _ = writeln!(out, "# failure={f}");
        }
        let mut header = self.columns.join(",");
        header.push_str(",lhs,rhs,ratio");
        let _ = writeln!(out, "{header}");
        for r in &self.rows {
            let pts: Vec<String> = r.point.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "{},{:e},{:e},{:e}", pts.join(","), r.lhs, r.rhs, r.ratio);
        }
        let blanks = vec![""; self.columns.len().saturating_sub(1)];
        let lead = if self.columns.is_empty() {
            "summary".to_string()
        } else {
            std::iter::once("summary").chain(blanks).collect::<Vec<_>>().join(",")
        };
        let _ = writeln!(out, "{lead},,,{:e}", self.max_ratio);
        out
    }
}
