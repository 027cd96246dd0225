//! Admissibility: certificates for the constant-map (C), all-maps (U) and
//! probability-one (G) preference orders, constructive improvements, and an
//! exact search for strictly preferable competitors.
//!
//! Every `Inadmissible` verdict carries a competitor that has been re-checked
//! independently: type-I risk at most `1 + 1e-9`, and strict preference under
//! the certificate's adversary class. Verdicts never go beyond the hypotheses
//! of the characterization being applied. When a hypothesis is missing, the
//! verdict degrades to [`Verdict::NecessaryConditionsOnly`] and the missing
//! hypothesis is named in the notes.

mod certify;
mod improve;
pub mod lp;
mod search;
mod stringent;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use certify::{
    certify_c_admissible_binary, certify_c_admissible_randomized, certify_g_admissible, certify_u_admissible,
    loss_density_proxy, CertifyOptions,
};
pub use improve::{improve, Strategy};
pub use lp::{lp_solve, LinearProgram, LpSolution, Sense};
pub use search::{
    affordable_raise, binary_threshold_competitor, exhaustive_binary_competitor, lp_search_c, saturate_binary,
    verify_c_improvement, verify_u_improvement, EXHAUSTIVE_MAX_CELLS, LP_MAX_CELLS, LP_STRICT_TOL,
    STRICT_TOL,
};
pub use stringent::{demo_stringent_emptiness, StringentReport};

use crate::error::Result;
use crate::problem::{LossFamily, TestingProblem};
use crate::testfam::TestFamily;

/// Default tolerance of the Condition C1 proxy.
pub const C1_TOL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Admissible,
    Inadmissible,
    NecessaryConditionsOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GammaClass {
    U,
    C,
    G,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityCertificate {
    pub verdict: Verdict,
    pub gamma_class: GammaClass,
    pub checks: BTreeMap<String, bool>,
    pub counterexample: Option<TestFamily>,
    pub notes: Vec<String>,
}

impl AdmissibilityCertificate {
    pub fn check(&self, name: &str) -> Option<bool> {
        self.checks.get(name).copied()
    }
}

/// Finite-grid proxy for `liminf L_b(1,0)/L_b(0,1) = 0`: the smallest ratio over
/// the top decile of scenarios is at most `tol`.
pub fn check_condition_c1(l: &LossFamily, tol: f64) -> bool {
    let m = l.len();
    let k = m.div_ceil(10).max(1);
    (m - k..m).map(|b| l.type2()[b] / l.type1()[b]).fold(f64::INFINITY, f64::min) <= tol
}

/// Whether `phi` has type-II loss no larger than `delta` at every
/// `Q`-positive cell, and strictly smaller at one.
pub fn check_g_admissibility_pair(phi: &TestFamily, delta: &TestFamily, p: &TestingProblem) -> Result<bool> {
    phi.check_shape(p)?;
    delta.check_shape(p)?;
    let l2 = p.losses().type2();
    let mut strict = false;
    for (x, q) in p.alt().mass().iter().enumerate() {
        if *q <= 0.0 {
            continue;
        }
        for (b, l) in l2.iter().enumerate() {
            let loss_phi = l * (1.0 - phi.entry(x, b));
            let loss_delta = l * (1.0 - delta.entry(x, b));
            if loss_phi > loss_delta {
                return Ok(false);
            }
            strict |= loss_phi < loss_delta;
        }
    }
    Ok(strict)
}
