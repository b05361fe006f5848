//! Reporting helpers for the acceptance checks in `tests/`.

use std::io::Write;
use std::sync::{Mutex, MutexGuard};
use std::time::Duration;

static EXCLUSIVE: Mutex<()> = Mutex::new(());

/// Run one check at a time so that wall-clock budgets are not shared.
pub fn exclusive() -> MutexGuard<'static, ()> {
    EXCLUSIVE.lock().unwrap_or_else(|e| e.into_inner())
}

/// Outcome of one acceptance criterion.
#[derive(Debug)]
pub struct Verdict {
    pub id: u32,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl Verdict {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {:<34} {}  [{:.1} s] {}",
            self.id,
            self.title,
            if self.passed { "PASS" } else { "FAIL" },
            self.elapsed.as_secs_f64(),
            self.detail
        )
    }

    /// Print the verdict line, bypassing the test harness's output capture,
    /// then fail the test if the criterion failed.
    pub fn report(self) {
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{}", self.line());
        drop(err);
        assert!(self.passed, "{}", self.line());
    }
}
