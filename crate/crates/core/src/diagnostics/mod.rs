//! Cross-checks of numerical solutions against exact identities, a priori
//! bounds and the asymptotic predictions.

mod inequalities;
mod measures;
mod pohozaev;
mod report;

pub use inequalities::{
    inequality_grid, inequality_suite, GridEntry, InequalityCheck, InequalityLedger,
    INEQUALITY_SLACK,
};
pub use measures::{
    capacitance_numeric, delta_weight_estimate, fit_slope, gradient_norm, norm_decay_fit,
    DeltaTarget, NormFit,
};
pub use pohozaev::{pohozaev_check, PohozaevReport};
pub use report::{
    report_from_solutions, validate_report, CheckResult, Tolerances, ValidationOptions,
    ValidationReport, ValidationRow,
};
