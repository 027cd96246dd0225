//! E-variables: nonnegative statistics with null expectation at most one.
//!
//! Values are aligned with the support order of a [`TestingProblem`]. A value
//! of `+inf` is allowed at points of zero null mass, where it costs nothing.

use std::collections::HashMap;
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{lr_cmp, weighted_sum, FiniteDistribution, LossFamily, TestingProblem};

/// Default tolerance for sharpness, compatibility and monotonicity checks.
pub const CHECK_TOL: f64 = 1e-9;

/// Slack used when snapping values onto the loss span.
pub const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Option<f64>>", into = "Vec<Option<f64>>")]
pub struct EVariable(Vec<f64>);

impl TryFrom<Vec<Option<f64>>> for EVariable {
    type Error = Error;
    fn try_from(v: Vec<Option<f64>>) -> Result<Self> {
        EVariable::new(v.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

impl From<EVariable> for Vec<Option<f64>> {
    fn from(e: EVariable) -> Self {
        e.0.into_iter().map(|x| x.is_finite().then_some(x)).collect()
    }
}

impl EVariable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0) {
            return Err(Error::InvalidEVariable(format!("value {v} is negative or NaN")));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    /// The likelihood ratio `Λ = Q/P`, the log-optimal sharp e-variable.
    pub fn likelihood_ratio(p: &TestingProblem) -> Self {
        Self(p.lr().to_vec())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v >= 0.0));
        Self(values)
    }
}

/// Rejection threshold `κ` and tie randomization `γ` of a Neyman-Pearson test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NPCalibration {
    pub kappa: f64,
    pub gamma: f64,
}

pub fn ev_mean(e: &EVariable, d: &FiniteDistribution) -> Result<f64> {
    d.expect(e.values())
}

fn check_len(e: &EVariable, p: &TestingProblem) -> Result<()> {
    if e.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: e.len() });
    }
    Ok(())
}

pub fn is_sharp(e: &EVariable, p: &TestingProblem, tol: f64) -> bool {
    ev_mean(e, p.null()).is_ok_and(|m| (m - 1.0).abs() <= tol)
}

/// `E_P[e] ≤ 1 + tol`.
pub fn is_valid(e: &EVariable, p: &TestingProblem, tol: f64) -> bool {
    ev_mean(e, p.null()).is_ok_and(|m| m <= 1.0 + tol)
}

/// Neyman-Pearson calibration for a null rejection probability `target`.
///
/// `κ` is the largest attained likelihood ratio with `P(Λ ≥ κ) ≥ target`, so
/// `P(Λ > κ) < target ≤ P(Λ ≥ κ)` and `γ ∈ (0, 1]`.
pub fn np_calibrate(p: &TestingProblem, target: f64) -> Result<NPCalibration> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(Error::InvalidTarget(target));
    }
    let mass = p.null().mass();
    let mut above = 0.0;
    let mut last = None;
    for group in p.lr_groups().iter().rev() {
        let at: f64 = group.iter().map(|&i| mass[i]).sum();
        if at == 0.0 {
            continue;
        }
        let kappa = p.lr()[group[0]];
        last = Some((kappa, above, at));
        if above + at >= target - SNAP_TOL {
            let gamma = ((target - above) / at).clamp(0.0, 1.0);
            return Ok(NPCalibration { kappa, gamma });
        }
        above += at;
    }
    let (kappa, _, _) = last.ok_or(Error::EmptySupport)?;
    Ok(NPCalibration { kappa, gamma: 1.0 })
}

/// Per-point rejection probability `φ^NP(x)` of the calibrated test.
pub fn np_test(p: &TestingProblem, cal: NPCalibration) -> Vec<f64> {
    p.lr()
        .iter()
        .map(|&l| match lr_cmp(l, cal.kappa) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Equal => cal.gamma,
            std::cmp::Ordering::Less => 0.0,
        })
        .collect()
}

/// `L·φ^NP` for the test with null rejection probability `1/L`.
pub fn np_evariable_for_loss(p: &TestingProblem, loss: f64) -> Result<EVariable> {
    if !(loss >= 1.0 && loss.is_finite()) {
        return Err(Error::InvalidTarget(1.0 / loss));
    }
    let cal = np_calibrate(p, 1.0 / loss)?;
    Ok(EVariable(np_test(p, cal).into_iter().map(|phi| loss * phi).collect()))
}

/// Neyman-Pearson e-variable at scenario `b_star`.
pub fn np_evariable(p: &TestingProblem, b_star: f64) -> Result<EVariable> {
    let i = p.losses().index_of(b_star)?;
    np_evariable_for_loss(p, p.losses().type1()[i])
}

pub fn mixture_evariable(parts: &[EVariable], weights: &[f64]) -> Result<EVariable> {
    if parts.is_empty() {
        return Err(Error::BadWeights("no components".into()));
    }
    if parts.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: parts.len(), found: weights.len() });
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::BadWeights("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SNAP_TOL {
        return Err(Error::BadWeights(format!("weights sum to {total}, not 1")));
    }
    let n = parts[0].len();
    if let Some(bad) = parts.iter().find(|e| e.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: bad.len() });
    }
    let values = (0..n)
        .map(|x| parts.iter().zip(weights).filter(|(_, w)| **w > 0.0).map(|(e, w)| w * e.0[x]).sum())
        .collect();
    Ok(EVariable(values))
}

/// Null-conditional expectation of `e` given the statistic `t`.
pub fn rao_blackwellize<T: Hash + Eq + Debug>(e: &EVariable, t: &[T], p: &TestingProblem) -> Result<EVariable> {
    check_len(e, p)?;
    if t.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: t.len() });
    }
    let mass = p.null().mass();
    let mut classes: HashMap<&T, (f64, f64)> = HashMap::new();
    for (x, label) in t.iter().enumerate() {
        let entry = classes.entry(label).or_insert((0.0, 0.0));
        if mass[x] > 0.0 {
            entry.0 += mass[x] * e.0[x];
            entry.1 += mass[x];
        }
    }
    if let Some((label, _)) = classes.iter().find(|(_, (_, m))| *m == 0.0) {
        return Err(Error::EmptyClass(format!("{label:?}")));
    }
    Ok(EVariable(
        t.iter()
            .map(|label| {
                let (num, den) = classes[label];
                num / den
            })
            .collect(),
    ))
}

/// Raises `e` until its null mean is one, spending the slack on the
/// highest-likelihood-ratio points first. With `capped`, no value is raised
/// above the largest type-I loss and the result may stay below one when every
/// point is saturated.
pub fn sharpen(e: &EVariable, p: &TestingProblem, capped: bool) -> EVariable {
    let mass = p.null().mass();
    let mut out = e.0.clone();
    let mut slack = 1.0 - weighted_sum(mass, &out);
    let cap = if capped { p.losses().max_type1() } else { f64::INFINITY };
    for group in p.lr_groups().iter().rev() {
        if slack <= 0.0 {
            break;
        }
        let members: Vec<usize> = group.iter().copied().filter(|&x| mass[x] > 0.0).collect();
        if members.is_empty() {
            continue;
        }
        let level = water_level(&members, mass, &out, cap, slack);
        for &x in &members {
            let target = level.min(cap);
            if target > out[x] {
                slack -= mass[x] * (target - out[x]);
                out[x] = target;
            }
        }
    }
    EVariable(out)
}

// Level `h` with `Σ P(x)·(min(h, cap) − e(x))⁺ = slack`, or `cap` when the
// group cannot absorb the slack.
fn water_level(members: &[usize], mass: &[f64], e: &[f64], cap: f64, slack: f64) -> f64 {
    let mut vals: Vec<(f64, f64)> =
        members.iter().filter(|&&x| e[x] < cap).map(|&x| (e[x], mass[x])).collect();
    if vals.is_empty() {
        return cap;
    }
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut level, mut active, mut spent) = (vals[0].0, 0.0, 0.0);
    for (v, m) in vals.into_iter().chain(std::iter::once((cap, 0.0))) {
        let need = active * (v - level);
        if active > 0.0 && spent + need >= slack {
            return level + (slack - spent) / active;
        }
        spent += need;
        level = v;
        active += m;
    }
    cap
}

fn round_down(v: f64, span: &[f64]) -> f64 {
    if v == f64::INFINITY {
        return *span.last().expect("nonempty span");
    }
    span.iter().rev().copied().find(|l| *l <= v + SNAP_TOL).unwrap_or(0.0)
}

/// Moving every point of likelihood-ratio group `group` up to `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Raise {
    pub group: usize,
    pub level: f64,
    pub cost: f64,
    pub gain: f64,
}

/// The highest-likelihood-ratio group, constant on its members, whose value
/// can step up to the next loss level without exceeding the values of the
/// next higher group, at a null cost of at most `budget + slack_tol` and an
/// alternative-mass gain above `min_gain`.
pub(crate) fn next_raise(values: &[f64], p: &TestingProblem, budget: f64, slack_tol: f64, min_gain: f64) -> Option<Raise> {
    let span = p.losses().span();
    let (pm, qm) = (p.null().mass(), p.alt().mass());
    let groups = p.lr_groups();
    let range = |g: &[usize]| {
        g.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(values[x]), hi.max(values[x])))
    };
    for (gi, group) in groups.iter().enumerate().rev() {
        let (lo, hi) = range(group);
        if hi - lo > SNAP_TOL {
            continue;
        }
        let Some(&level) = span.iter().find(|l| **l > hi + SNAP_TOL) else { continue };
        let ceiling = groups.get(gi + 1).map_or(f64::INFINITY, |g| range(g).0);
        if level > ceiling + SNAP_TOL {
            continue;
        }
        let cost = group.iter().map(|&x| pm[x]).sum::<f64>() * (level - hi);
        let gain: f64 = group.iter().map(|&x| qm[x]).sum();
        if cost <= budget + slack_tol && gain > min_gain {
            return Some(Raise { group: gi, level, cost, gain });
        }
    }
    None
}

/// Projects `e` onto values in the loss span or zero without raising its null
/// mean by more than [`SNAP_TOL`].
///
/// Values are first rounded down. The freed budget is then spent in full loss
/// steps, highest likelihood ratio first, taking a step only when it keeps the
/// values nondecreasing in the likelihood ratio; what cannot be spent that way
/// is discarded.
pub fn compatibilize(e: &EVariable, p: &TestingProblem) -> EVariable {
    let span = p.losses().span();
    let mass = p.null().mass();
    let mut out: Vec<f64> = e.0.iter().map(|&v| round_down(v, &span)).collect();
    let mut budget: f64 = (0..out.len())
        .filter(|&x| mass[x] > 0.0)
        .map(|x| mass[x] * (e.0[x] - out[x]).max(0.0))
        .sum();
    while let Some(r) = next_raise(&out, p, budget, SNAP_TOL, -1.0) {
        for &x in &p.lr_groups()[r.group] {
            out[x] = r.level;
        }
        budget -= r.cost;
    }
    EVariable(out)
}

pub fn is_compatible(e: &EVariable, l: &LossFamily, tol: f64) -> bool {
    let span = l.span();
    e.0.iter().all(|&v| v.abs() <= tol || span.iter().any(|s| (v - s).abs() <= tol))
}

/// Nondecreasing across strictly increasing `Λ` groups and constant within
/// tie groups, both up to `tol`.
pub fn is_monotone_in_lr(e: &EVariable, p: &TestingProblem, tol: f64) -> bool {
    if e.len() != p.len() {
        return false;
    }
    let mut prev_max = f64::NEG_INFINITY;
    for group in p.lr_groups() {
        let (lo, hi) = group
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(e.0[x]), hi.max(e.0[x])));
        if hi - lo > tol || lo < prev_max - tol {
            return false;
        }
        prev_max = prev_max.max(hi);
    }
    true
}
