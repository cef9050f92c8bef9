//! Exit-code classification.

use dldl_core::Error as CoreError;

/// Success.
pub const EXIT_OK: i32 = 0;
/// Bad input, configuration or files.
pub const EXIT_VALIDATION: i32 = 1;
/// Numerical failure: non-finite values, log-domain errors, failed gradient checks.
pub const EXIT_NUMERICAL: i32 = 2;

/// Raised by `gradcheck` when any configuration exceeds the tolerance.
#[derive(Debug)]
pub struct GradcheckFailed {
    pub failures: usize,
    pub total: usize,
}

impl std::fmt::Display for GradcheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} of {} gradient checks failed", self.failures, self.total)
    }
}

impl std::error::Error for GradcheckFailed {}

pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.is::<GradcheckFailed>() {
            return EXIT_NUMERICAL;
        }
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_VALIDATION };
        }
    }
    EXIT_VALIDATION
}
