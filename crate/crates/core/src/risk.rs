//! Type-I and type-II risk of test families under adversarial scenario choice.
//!
//! On a finite support the supremum over adversary maps `B: X → B` decomposes
//! pointwise, so the worst case is attained by choosing, at every point, a
//! scenario maximizing `L_b(0,1)·δ(x, b)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{weighted_sum, FiniteDistribution, LossFamily, TestingProblem};
use crate::testfam::TestFamily;

/// Scenario index chosen at each support point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Adversary {
    pub choice: Vec<usize>,
}

impl Adversary {
    pub fn new(choice: Vec<usize>, scenarios: usize) -> Result<Self> {
        if let Some(&index) = choice.iter().find(|&&b| b >= scenarios) {
            return Err(Error::ScenarioOutOfRange { index, count: scenarios });
        }
        Ok(Self { choice })
    }

    pub fn len(&self) -> usize {
        self.choice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choice.is_empty()
    }
}

/// The map sending every point to scenario `b`.
pub fn constant_adversary(l: &LossFamily, b: f64, n: usize) -> Result<Adversary> {
    let index = l.index_of(b)?;
    Ok(Adversary { choice: vec![index; n] })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub type1_risk: f64,
    pub witness: Adversary,
    pub per_point_contribution: Vec<f64>,
}

fn check_points(t: &TestFamily, n: usize) -> Result<()> {
    if t.n_points() != n {
        return Err(Error::DimensionMismatch { expected: n, found: t.n_points() });
    }
    Ok(())
}

fn check_scenarios(t: &TestFamily, l: &LossFamily) -> Result<()> {
    if t.n_points() > 0 && t.n_scenarios() != l.len() {
        return Err(Error::DimensionMismatch { expected: l.len(), found: t.n_scenarios() });
    }
    Ok(())
}

fn check_adversary(a: &Adversary, t: &TestFamily, l: &LossFamily) -> Result<()> {
    check_points(t, a.len())?;
    if let Some(&index) = a.choice.iter().find(|&&b| b >= l.len()) {
        return Err(Error::ScenarioOutOfRange { index, count: l.len() });
    }
    Ok(())
}

fn worst_case(t: &TestFamily, l: &LossFamily) -> (Vec<f64>, Vec<usize>) {
    t.matrix()
        .iter()
        .map(|row| {
            let mut best = (0.0, 0);
            for (b, (d, lb)) in row.iter().zip(l.type1()).enumerate() {
                if lb * d > best.0 {
                    best = (lb * d, b);
                }
            }
            best
        })
        .unzip()
}

/// `E_P[max_b L_b(0,1)·δ(X, b)]` with a witness adversary (ties go to the smallest `b`).
pub fn type1_risk(t: &TestFamily, p: &TestingProblem) -> Result<RiskReport> {
    t.check_shape(p)?;
    let (contribution, witness) = worst_case(t, p.losses());
    Ok(RiskReport {
        type1_risk: weighted_sum(p.null().mass(), &contribution),
        witness: Adversary { choice: witness },
        per_point_contribution: contribution,
    })
}

/// Worst type-I risk over a finite list of null distributions.
pub fn type1_risk_composite(t: &TestFamily, nulls: &[FiniteDistribution], l: &LossFamily) -> Result<f64> {
    check_scenarios(t, l)?;
    let (contribution, _) = worst_case(t, l);
    let mut worst: f64 = 0.0;
    for null in nulls {
        check_points(t, null.len())?;
        worst = worst.max(weighted_sum(null.mass(), &contribution));
    }
    Ok(worst)
}

pub fn risk_under_adversary(t: &TestFamily, a: &Adversary, p: &TestingProblem) -> Result<f64> {
    t.check_shape(p)?;
    check_adversary(a, t, p.losses())?;
    let l = p.losses().type1();
    let per_point: Vec<f64> = a.choice.iter().enumerate().map(|(x, &b)| l[b] * t.entry(x, b)).collect();
    Ok(weighted_sum(p.null().mass(), &per_point))
}

/// `E_Q[L_{B(X)}(1,0)·(1 − δ(X, B(X)))]`.
pub fn type2_risk(t: &TestFamily, a: &Adversary, q: &FiniteDistribution, l: &LossFamily) -> Result<f64> {
    check_scenarios(t, l)?;
    check_adversary(a, t, l)?;
    check_points(t, q.len())?;
    let per_point: Vec<f64> =
        a.choice.iter().enumerate().map(|(x, &b)| l.type2()[b] * (1.0 - t.entry(x, b))).collect();
    Ok(weighted_sum(q.mass(), &per_point))
}

/// `E_Q[δ(X, b)]` for every scenario.
pub fn power_curve(t: &TestFamily, q: &FiniteDistribution) -> Result<Vec<f64>> {
    check_points(t, q.len())?;
    Ok((0..t.n_scenarios()).map(|b| weighted_sum(q.mass(), &t.column(b))).collect())
}

/// Margins by which `phi` beats `delta` in type-II risk: the worst case and
/// the best case over all adversary maps.
pub fn u_preference_margins(
    phi: &TestFamily,
    delta: &TestFamily,
    q: &FiniteDistribution,
    l: &LossFamily,
) -> Result<(f64, f64)> {
    check_scenarios(phi, l)?;
    check_scenarios(delta, l)?;
    check_points(phi, q.len())?;
    check_points(delta, q.len())?;
    let (weak, strict): (Vec<f64>, Vec<f64>) = (0..q.len())
        .map(|x| {
            let gains = l.type2().iter().enumerate().map(|(b, l2)| l2 * (phi.entry(x, b) - delta.entry(x, b)));
            gains.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)))
        })
        .map(|(lo, hi)| if l.is_empty() { (0.0, 0.0) } else { (lo, hi) })
        .unzip();
    Ok((weighted_sum(q.mass(), &weak), weighted_sum(q.mass(), &strict)))
}
