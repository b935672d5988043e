//! Progress reporting and cooperative cancellation for long-running loops.
//!
//! Slice-wise operations call [`Monitor::checkpoint`] once per finished
//! slice. A monitor that reports cancellation makes the operation return
//! [`Error::Cancelled`](crate::Error::Cancelled) at that boundary; work is
//! never interrupted in the middle of a slice.

use crate::error::{Error, Result};

pub trait Monitor: Sync {
    /// Fraction of the current operation that is done, in `[0, 1]`.
    fn report(&self, fraction: f64);

    fn is_cancelled(&self) -> bool;

    /// Reports `done / total` and fails with `Cancelled` if a stop was requested.
    fn checkpoint(&self, done: usize, total: usize) -> Result<()> {
        if total > 0 {
            self.report(done as f64 / total as f64);
        }
        if self.is_cancelled() {
            Err(Error::Cancelled)
        } else {
            Ok(())
        }
    }
}

/// A monitor that ignores progress and never cancels.
#[derive(Debug, Default, Clone, Copy)]
pub struct Silent;

impl Monitor for Silent {
    fn report(&self, _fraction: f64) {}

    fn is_cancelled(&self) -> bool {
        false
    }
}

/// Maps a sub-operation's progress into the `[start, start + span]` window of a parent.
pub struct Scaled<'a> {
    pub inner: &'a dyn Monitor,
    pub start: f64,
    pub span: f64,
}

impl Monitor for Scaled<'_> {
    fn report(&self, fraction: f64) {
        self.inner.report(self.start + self.span * fraction.clamp(0.0, 1.0));
    }

    fn is_cancelled(&self) -> bool {
        self.inner.is_cancelled()
    }
}
