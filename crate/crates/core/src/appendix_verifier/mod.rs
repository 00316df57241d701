//! Numerical checks of the kernel inequalities and identities behind the main estimates.

mod checks;
mod report;

pub use checks::{
    check_identity, check_kphi, check_l1phi, check_lem1, check_phivarphi, check_xi, indicator_term, lem1_lhs, lem1_rhs,
    verify_all, SweepGrid, VerifierOptions, KPHI_LIMIT, L1PHI_LIMIT,
};
pub use report::{LemmaReport, ReportRow};
