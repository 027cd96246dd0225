use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evar::{np_calibrate, np_test, NPCalibration};
use crate::problem::TestingProblem;

/// Two per-loss Neyman-Pearson tests that no single test family can match at
/// both losses at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringentReport {
    pub losses: [f64; 2],
    pub calibrations: [NPCalibration; 2],
    /// Rejection probability of each test per support point.
    pub tests: [Vec<f64>; 2],
    /// Points of positive alternative mass where the two tests differ.
    pub differing_points: Vec<String>,
    pub differing_alt_mass: f64,
    pub explanation: String,
}

/// Builds the most powerful test at the smallest and at the largest loss
/// level. A stringent-admissible family would have to match the power of each
/// at its own loss, which pins it to both tests; when they differ on a set of
/// positive alternative mass, no such family exists.
pub fn demo_stringent_emptiness(p: &TestingProblem) -> Result<StringentReport> {
    let span = p.losses().span();
    if span.len() < 2 {
        return Err(Error::DegenerateLosses(format!("{} distinct type-I loss", span.len())));
    }
    let losses = [span[0], span[span.len() - 1]];
    let calibrations = [np_calibrate(p, (1.0 / losses[0]).min(1.0))?, np_calibrate(p, (1.0 / losses[1]).min(1.0))?];
    let tests = [np_test(p, calibrations[0]), np_test(p, calibrations[1])];
    let q = p.alt().mass();
    let diff: Vec<usize> =
        (0..p.len()).filter(|&x| q[x] > 0.0 && (tests[0][x] - tests[1][x]).abs() > 1e-12).collect();
    if diff.is_empty() {
        return Err(Error::DegenerateLosses("the two Neyman-Pearson tests coincide on this problem".into()));
    }
    let differing_alt_mass = diff.iter().map(|&x| q[x]).sum();
    let explanation = format!(
        "a stringent-admissible family must act as the most powerful test at loss {} (kappa {}, gamma {}) and at loss {} \
         (kappa {}, gamma {}); these tests differ on alternative mass {differing_alt_mass}, so no family does both",
        losses[0], calibrations[0].kappa, calibrations[0].gamma, losses[1], calibrations[1].kappa, calibrations[1].gamma
    );
    Ok(StringentReport {
        losses,
        calibrations,
        tests,
        differing_points: diff.iter().map(|&x| p.labels()[x].clone()).collect(),
        differing_alt_mass,
        explanation,
    })
}
