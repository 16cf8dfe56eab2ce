//! Reference values and verdict reporting for the acceptance suite.

use std::fmt;
use std::time::Duration;

/// One reference sensitivity sweep: the varied parameter and its rows.
#[derive(Debug, Clone, Copy)]
pub struct RefTable {
    pub name: &'static str,
    pub param: &'static str,
    /// `(value, x0, x1, x2)`.
    pub rows: [(f64, f64, f64, f64); 5],
    /// Tolerance on the x0 column.
    pub x0_tol: f64,
}

/// Tolerance on every entry that has no tighter pin.
pub const TABLE_TOL: f64 = 0.002;

pub const TABLES: [RefTable; 4] = [
    RefTable {
        name: "a sweep",
        param: "a",
        rows: [
            (0.6, -0.124, -0.089, 0.089),
            (0.8, -0.135, -0.083, 0.083),
            (1.0, -0.142, -0.077, 0.077),
            (1.2, -0.147, -0.073, 0.073),
            (1.4, -0.151, -0.069, 0.069),
        ],
        x0_tol: TABLE_TOL,
    },
    RefTable {
        name: "sigma sweep",
        param: "sigma",
        rows: [
            (0.36, -0.164, -0.057, 0.057),
            (0.46, -0.153, -0.067, 0.067),
            (0.56, -0.142, -0.077, 0.077),
            (0.66, -0.130, -0.086, 0.086),
            (0.76, -0.117, -0.095, 0.095),
        ],
        x0_tol: TABLE_TOL,
    },
    RefTable {
        name: "rho sweep",
        param: "rho",
        rows: [
            (0.06, -0.1412, -0.078, 0.078),
            (0.08, -0.1416, -0.078, 0.078),
            (0.10, -0.1420, -0.077, 0.077),
            (0.12, -0.1426, -0.077, 0.077),
            (0.14, -0.1430, -0.076, 0.076),
        ],
        x0_tol: 0.0005,
    },
    RefTable {
        name: "M sweep",
        param: "M",
        rows: [
            (-0.16, -0.091, -0.077, 0.077),
            (-0.18, -0.118, -0.078, 0.078),
            (-0.20, -0.142, -0.077, 0.077),
            (-0.22, -0.166, -0.077, 0.077),
            (-0.24, -0.189, -0.077, 0.077),
        ],
        x0_tol: TABLE_TOL,
    },
];

pub const HEADLINE: (f64, f64, f64) = (-0.142, -0.077, 0.077);

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} [{}] {} ({:.1} s): {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }
}

/// Collects failure messages while a criterion runs.
#[derive(Debug, Default)]
pub struct Checks {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Checks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `msg` as a failure unless `ok`.
    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn failures(&self) -> &[String] {
        &self.failures
    }

    /// Notes on success, otherwise the failures with the notes after them.
    pub fn summary(&self) -> String {
        if self.failures.is_empty() {
            self.notes.join("; ")
        } else {
            let mut parts = self.failures.clone();
            parts.extend(self.notes.iter().cloned());
            parts.join("; ")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows_are_ordered() {
        for t in TABLES {
            for (_, x0, x1, x2) in t.rows {
                assert!(x0 < x1 && x1 < x2, "{}", t.name);
            }
        }
    }

    #[test]
    fn checks_collect_failures() {
        let mut c = Checks::new();
        c.check(true, || "unused".into());
        c.note("n");
        assert!(c.passed());
        assert_eq!(c.summary(), "n");
        c.check(false, || "bad".into());
        assert!(!c.passed());
        assert_eq!(c.summary(), "bad; n");
    }

    #[test]
    fn verdict_line() {
        let v = Verdict {
            id: 3,
            title: "kernel",
            pass: true,
            detail: "ok".into(),
            elapsed: Duration::from_millis(300),
        };
        assert_eq!(v.to_string(), "PASS [3] kernel (0.3 s): ok");
    }
}
