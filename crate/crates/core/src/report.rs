//! Line-oriented `key=value` run reports.

use std::fmt::Display;
use std::time::Duration;

/// Report of one CLI invocation. Everything except the duration is a pure
/// function of the command's inputs and seed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String)>,
    failed_checks: Vec<String>,
    pub duration: Option<Duration>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut r = Report::default();
        r.push("command", command);
        r
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.lines.push((key.into(), value.to_string()));
        self
    }

    /// Records a named assertion as `check.<name>=pass|fail`.
    pub fn check(&mut self, name: &str, ok: bool) -> bool {
        self.push(format!("check.{name}"), if ok { "pass" } else { "fail" });
        if !ok {
            self.failed_checks.push(name.to_string());
        }
        ok
    }

    pub fn passed(&self) -> bool {
        self.failed_checks.is_empty()
    }

    pub fn failed_checks(&self) -> &[String] {
        &self.failed_checks
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn lines(&self) -> &[(String, String)] {
        &self.lines
    }

    /// All lines except the duration.
    pub fn render_stable(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out.push_str(&format!("passed={}\n", self.passed()));
        out
    }

    pub fn render(&self) -> String {
        let mut out = self.render_stable();
        if let Some(d) = self.duration {
            out.push_str(&format!("duration_ms={:.3}\n", d.as_secs_f64() * 1e3));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_rendering_omits_duration() {
        let mut r = Report::new("demo x");
        r.push("seed", 3);
        r.check("ok", true);
        r.duration = Some(Duration::from_millis(12));
        assert_eq!(
            r.render_stable(),
            "command=demo x\nseed=3\ncheck.ok=pass\npassed=true\n"
        );
        assert!(r.render().ends_with("duration_ms=12.000\n"));
    }

    #[test]
    fn failed_check_fails_report() {
        let mut r = Report::new("t");
        assert!(!r.check("bad", false));
        assert!(!r.passed());
        assert_eq!(r.get("check.bad"), Some("fail"));
    }
}
