use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evar::{compatibilize, rao_blackwellize, sharpen};
use crate::problem::{lr_tied, TestingProblem};
use crate::risk::{power_curve, type1_risk};
use crate::testfam::{binary_from_evariable, canonical_from_evariable, Mode, TestFamily};

use super::search::{induced, saturate_binary, RISK_TOL, WEAK_TOL};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Rebuild the family from its induced e-variable.
    Canonicalize,
    /// Spend the unused type-I budget on the highest likelihood ratios.
    Sharpen,
    /// Round the induced e-variable onto the loss span and return the binary family.
    Compatibilize,
    /// Condition the induced e-variable on a sufficient statistic, one label per point.
    RaoBlackwell(Vec<String>),
}

fn check_sufficient(labels: &[String], p: &TestingProblem) -> Result<()> {
    let mut first: HashMap<&str, f64> = HashMap::new();
    for (label, &lr) in labels.iter().zip(p.lr()) {
        let seen = *first.entry(label.as_str()).or_insert(lr);
        if !lr_tied(seen, lr) {
            return Err(Error::NotSufficient(label.clone()));
        }
    }
    Ok(())
}

/// Applies `strategy` and checks that the result is type-I risk safe and has
/// at least the input's power at every scenario. The power check is skipped
/// when compatibilizing a randomized family, whose binary output trades
/// power for determinism.
pub fn improve(t: &TestFamily, p: &TestingProblem, strategy: &Strategy) -> Result<TestFamily> {
    t.check_shape(p)?;
    let e = induced(t, p)?;
    let out = match strategy {
        Strategy::Canonicalize => match t.mode() {
            Mode::Randomized => canonical_from_evariable(&e, p)?,
            Mode::Binary => binary_from_evariable(&e, p)?,
        },
        Strategy::Sharpen => match t.mode() {
            Mode::Randomized => canonical_from_evariable(&sharpen(&e, p, true), p)?,
            Mode::Binary => binary_from_evariable(&saturate_binary(&e, p), p)?,
        },
        Strategy::Compatibilize => binary_from_evariable(&compatibilize(&e, p), p)?,
        Strategy::RaoBlackwell(labels) => {
            if labels.len() != p.len() {
                return Err(Error::DimensionMismatch { expected: p.len(), found: labels.len() });
            }
            check_sufficient(labels, p)?;
            canonical_from_evariable(&rao_blackwellize(&e, labels, p)?, p)?
        }
    };
    let risk = type1_risk(&out, p)?.type1_risk;
    let input_risk = type1_risk(t, p)?.type1_risk;
    if risk > input_risk.max(1.0) + RISK_TOL {
        return Err(Error::ImprovementCheckFailed(format!("type-I risk rose to {risk}")));
    }
    let skip_power = *strategy == Strategy::Compatibilize && t.mode() == Mode::Randomized;
    if !skip_power {
        let before = power_curve(t, p.alt())?;
        let after = power_curve(&out, p.alt())?;
        if let Some(b) = (0..before.len()).find(|&b| after[b] < before[b] - WEAK_TOL) {
            return Err(Error::ImprovementCheckFailed(format!(
                "power at scenario index {b} fell from {} to {}",
                before[b], after[b]
            )));
        }
    }
    Ok(out)
}
