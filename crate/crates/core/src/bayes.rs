//! Bayes post-hoc decisions over a finite parameter set split into null
//! parameters `Θ0` and alternative parameters `Θ1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::{LossFamily, TestingProblem};
use crate::risk::Adversary;
use crate::testfam::{Mode, TestFamily};

const PRIOR_TOL: f64 = 1e-9;

/// Largest tilt tried before calibration gives up.
pub const LAMBDA_CAP: f64 = 1_099_511_627_776.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BayesDoc")]
pub struct BayesProblem {
    pub thetas: Vec<String>,
    pub theta0: Vec<usize>,
    pub prior: Vec<f64>,
    /// `likelihood[θ][x] = P_θ(x)`.
    pub likelihood: Vec<Vec<f64>>,
    pub losses: LossFamily,
}

#[derive(Deserialize)]
struct BayesDoc {
    thetas: Vec<serde_json::Value>,
    theta0: Vec<usize>,
    prior: Vec<f64>,
    likelihood: Vec<Vec<f64>>,
    losses: LossFamily,
}

impl TryFrom<BayesDoc> for BayesProblem {
    type Error = Error;
    fn try_from(d: BayesDoc) -> Result<Self> {
        let thetas = d.thetas.into_iter().map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string)).collect();
        BayesProblem::new(thetas, d.theta0, d.prior, d.likelihood, d.losses)
    }
}

impl BayesProblem {
    pub fn new(
        thetas: Vec<String>,
        theta0: Vec<usize>,
        prior: Vec<f64>,
        likelihood: Vec<Vec<f64>>,
        losses: LossFamily,
    ) -> Result<Self> {
        let k = thetas.len();
        if prior.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: prior.len() });
        }
        if likelihood.len() != k {
            return Err(Error::DimensionMismatch { expected: k, found: likelihood.len() });
        }
        if prior.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (prior.iter().sum::<f64>() - 1.0).abs() > PRIOR_TOL {
            return Err(Error::InvalidDistribution("prior must be nonnegative and sum to 1".into()));
        }
        let n = likelihood.first().map_or(0, Vec::len);
        for row in &likelihood {
            if row.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: row.len() });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || (row.iter().sum::<f64>() - 1.0).abs() > PRIOR_TOL {
                return Err(Error::InvalidDistribution("each likelihood row must be a probability vector".into()));
            }
        }
        let mut sorted = theta0.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != theta0.len() || sorted.iter().any(|&i| i >= k) {
            return Err(Error::InvalidConfig("theta0 must list distinct valid parameter indices".into()));
        }
        if theta0.is_empty() || theta0.len() == k {
            return Err(Error::InvalidConfig("both theta0 and its complement must be nonempty".into()));
        }
        Ok(Self { thetas, theta0: sorted, prior, likelihood, losses })
    }

    /// Two parameters: the problem's null (in `Θ0`) and its alternative.
    pub fn point_hypotheses(p: &TestingProblem, prior_null: f64) -> Result<Self> {
        Self::new(
            vec!["null".into(), "alt".into()],
            vec![0],
            vec![prior_null, 1.0 - prior_null],
            vec![p.null().mass().to_vec(), p.alt().mass().to_vec()],
            p.losses().clone(),
        )
    }

    pub fn n_points(&self) -> usize {
        self.likelihood.first().map_or(0, Vec::len)
    }

    pub fn is_null(&self, theta: usize) -> bool {
        self.theta0.binary_search(&theta).is_ok()
    }

    pub fn null_prior_mass(&self) -> f64 {
        self.theta0.iter().map(|&t| self.prior[t]).sum()
    }

    // Unnormalized posterior masses of Θ0 and Θ1 at `x`.
    fn split_weights(&self, x: usize) -> (f64, f64) {
        let mut w = (0.0, 0.0);
        for (t, row) in self.likelihood.iter().enumerate() {
            let v = self.prior[t] * row[x];
            if self.is_null(t) {
                w.0 += v;
            } else {
                w.1 += v;
            }
        }
        w
    }

    fn check_adversary(&self, a: &Adversary) -> Result<()> {
        if a.len() != self.n_points() {
            return Err(Error::DimensionMismatch { expected: self.n_points(), found: a.len() });
        }
        if let Some(&index) = a.choice.iter().find(|&&b| b >= self.losses.len()) {
            return Err(Error::ScenarioOutOfRange { index, count: self.losses.len() });
        }
        Ok(())
    }
}

/// `π(θ | x)` for every parameter.
pub fn posterior(bp: &BayesProblem, x: usize) -> Result<Vec<f64>> {
    if x >= bp.n_points() {
        return Err(Error::DimensionMismatch { expected: bp.n_points(), found: x + 1 });
    }
    let joint: Vec<f64> = bp.likelihood.iter().zip(&bp.prior).map(|(row, w)| row[x] * w).collect();
    let marginal: f64 = joint.iter().sum();
    if marginal <= 0.0 {
        return Err(Error::ZeroMarginal(x));
    }
    Ok(joint.into_iter().map(|j| j / marginal).collect())
}

/// Posterior-expected-loss minimizing decision at the scenario `a(x)`;
/// ties go to rejection.
pub fn bayes_posthoc_decision(bp: &BayesProblem, a: &Adversary) -> Result<Vec<f64>> {
    bp.check_adversary(a)?;
    (0..bp.n_points())
        .map(|x| {
            let (w0, w1) = bp.split_weights(x);
            if w0 + w1 <= 0.0 {
                return Err(Error::ZeroMarginal(x));
            }
            let b = a.choice[x];
            Ok(if w1 * bp.losses.type2()[b] >= w0 * bp.losses.type1()[b] { 1.0 } else { 0.0 })
        })
        .collect()
}

/// `E_{θ∼π} E_{X∼P_θ} L_{a(X)}(θ, δ(X))` for per-point rejection probabilities `decision`.
pub fn bayes_risk(bp: &BayesProblem, decision: &[f64], a: &Adversary) -> Result<f64> {
    bp.check_adversary(a)?;
    if decision.len() != bp.n_points() {
        return Err(Error::DimensionMismatch { expected: bp.n_points(), found: decision.len() });
    }
    let (l1, l2) = (bp.losses.type1(), bp.losses.type2());
    let mut total = 0.0;
    for (t, row) in bp.likelihood.iter().enumerate() {
        let null = bp.is_null(t);
        let inner: f64 = (0..decision.len())
            .map(|x| {
                let b = a.choice[x];
                let loss = if null { l1[b] * decision[x] } else { l2[b] * (1.0 - decision[x]) };
                row[x] * loss
            })
            .sum();
        total += bp.prior[t] * inner;
    }
    Ok(total)
}

/// Worst-case type-I risk when `θ` is drawn from the prior restricted to `Θ0`.
///
/// A single map `B` serves every null parameter, but the objective is linear
/// in each point's choice with weight `Σ_{θ∈Θ0} π0(θ)·P_θ(x)`, so the
/// supremum is attained pointwise.
pub fn bayes_type1_risk(bp: &BayesProblem, family: &TestFamily) -> Result<f64> {
    if family.n_points() != bp.n_points() {
        return Err(Error::DimensionMismatch { expected: bp.n_points(), found: family.n_points() });
    }
    if family.n_scenarios() != bp.losses.len() {
        return Err(Error::DimensionMismatch { expected: bp.losses.len(), found: family.n_scenarios() });
    }
    let mass0 = bp.null_prior_mass();
    if mass0 <= 0.0 {
        return Err(Error::BadWeights("prior mass of the null parameters is zero".into()));
    }
    let l1 = bp.losses.type1();
    Ok((0..bp.n_points())
        .map(|x| {
            let weight: f64 = bp.theta0.iter().map(|&t| bp.prior[t] / mass0 * bp.likelihood[t][x]).sum();
            let worst = (0..l1.len()).map(|b| l1[b] * family.entry(x, b)).fold(0.0, f64::max);
            weight * worst
        })
        .sum())
}

/// Bayes decisions for every scenario under type-I losses tilted by
/// `(π(Θ0) + λ)/π(Θ0)`.
pub fn tilted_bayes_family(bp: &BayesProblem, lambda: f64) -> TestFamily {
    let mass0 = bp.null_prior_mass();
    let tilt = (mass0 + lambda) / mass0;
    let (l1, l2) = (bp.losses.type1(), bp.losses.type2());
    let matrix = (0..bp.n_points())
        .map(|x| {
            let (w0, w1) = bp.split_weights(x);
            (0..l1.len()).map(|b| if w1 * l2[b] >= tilt * w0 * l1[b] { 1.0 } else { 0.0 }).collect()
        })
        .collect();
    TestFamily::new(Mode::Binary, matrix).expect("binary entries")
}

/// Smallest tilt `λ` (to within `tol`) whose Bayes family has Bayesian
/// type-I risk at most one, found by doubling and bisection. The risk is
/// checked to be nonincreasing at every evaluated `λ`.
pub fn lambda_calibrated_decision(bp: &BayesProblem, tol: f64) -> Result<(f64, TestFamily)> {
    if bp.null_prior_mass() <= 0.0 {
        return Err(Error::BadWeights("prior mass of the null parameters is zero".into()));
    }
    let mut path: Vec<(f64, f64)> = vec![];
    let mut eval = |lambda: f64| -> Result<(f64, TestFamily)> {
        let fam = tilted_bayes_family(bp, lambda);
        let s = bayes_type1_risk(bp, &fam)?;
        let pos = path.partition_point(|(l, _)| *l < lambda);
        let below = pos.checked_sub(1).map(|i| path[i]);
        let above = path.get(pos).copied();
        for (lo, hi) in [below.map(|b| (b, (lambda, s))), above.map(|a| ((lambda, s), a))].into_iter().flatten() {
            if hi.1 > lo.1 + 1e-12 {
                return Err(Error::NonMonotoneCalibration { lo: lo.0, hi: hi.0, risk_lo: lo.1, risk_hi: hi.1 });
            }
        }
        path.insert(pos, (lambda, s));
        Ok((s, fam))
    };
    let (s0, fam0) = eval(0.0)?;
    if s0 <= 1.0 {
        return Ok((0.0, fam0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut best = loop {
        let (s, fam) = eval(hi)?;
        if s <= 1.0 {
            break fam;
        }
        if hi >= LAMBDA_CAP {
            return Err(Error::CannotCalibrate(s));
        }
        lo = hi;
        hi *= 2.0;
    };
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let (s, fam) = eval(mid)?;
        if s <= 1.0 {
            hi = mid;
            best = fam;
        } else {
            lo = mid;
        }
    }
    Ok((hi, best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evar::EVariable;
    use crate::fixtures::{losses, tp1};
    use crate::risk::{constant_adversary, type1_risk};
    use crate::testfam::canonical_from_evariable;

    fn two_point(prior0: f64, l1: f64) -> BayesProblem {
        BayesProblem::new(
            vec!["a".into(), "b".into()],
            vec![0],
            vec![prior0, 1.0 - prior0],
            vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            losses(&[l1]).clone(),
        )
        .unwrap()
    }

    #[test]
    fn posteriors() {
        let bp = BayesProblem::new(
            vec!["a".into(), "b".into()],
            vec![0],
            vec![0.5, 0.5],
            vec![vec![0.2, 0.8], vec![0.8, 0.2]],
            losses(&[2.0]),
        )
        .unwrap();
        let post = posterior(&bp, 0).unwrap();
        assert!((post[0] - 0.2).abs() < 1e-15 && (post[1] - 0.8).abs() < 1e-15);
        let point = BayesProblem { prior: vec![1.0, 0.0], ..bp.clone() };
        assert_eq!(posterior(&point, 1).unwrap(), [1.0, 0.0]);
        let flat = BayesProblem { likelihood: vec![vec![0.5, 0.5], vec![0.5, 0.5]], ..bp };
        assert_eq!(posterior(&flat, 0).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn decisions() {
        let l = losses(&[4.0]);
        let mk = |like: Vec<Vec<f64>>, prior: Vec<f64>| {
            BayesProblem::new(vec!["a".into(), "b".into()], vec![0], prior, like, l.clone()).unwrap()
        };
        let a = Adversary { choice: vec![0, 0] };
        let bp = mk(vec![vec![1.0, 0.0], vec![0.5, 0.5]], vec![0.5, 0.5]);
        assert_eq!(bayes_posthoc_decision(&bp, &a).unwrap(), [0.0, 1.0]);
        let even = mk(vec![vec![0.5, 0.5], vec![0.5, 0.5]], vec![0.5, 0.5]);
        assert_eq!(bayes_posthoc_decision(&even, &a).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn risks() {
        let bp = two_point(1.0, 2.0);
        let a = Adversary { choice: vec![0, 0] };
        assert_eq!(bayes_risk(&bp, &[1.0, 1.0], &a).unwrap(), 2.0);
        let separated = BayesProblem::new(
            vec!["a".into(), "b".into()],
            vec![0],
            vec![0.5, 0.5],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            losses(&[2.0]),
        )
        .unwrap();
        assert_eq!(bayes_risk(&separated, &[0.0, 1.0], &a).unwrap(), 0.0);
    }

    #[test]
    fn single_null_matches_frequentist_risk() {
        let p = tp1();
        let bp = BayesProblem::point_hypotheses(&p, 1.0).unwrap();
        let t = canonical_from_evariable(&EVariable::likelihood_ratio(&p), &p).unwrap();
        let freq = type1_risk(&t, &p).unwrap().type1_risk;
        assert!((bayes_type1_risk(&bp, &t).unwrap() - freq).abs() < 1e-12);
        let never = TestFamily::constant(Mode::Binary, 2, 2, 0.0).unwrap();
        assert_eq!(bayes_type1_risk(&bp, &never).unwrap(), 0.0);
    }

    #[test]
    fn calibration_at_origin() {
        let bp = two_point(0.5, 4.0);
        let (lambda, fam) = lambda_calibrated_decision(&bp, 1e-6).unwrap();
        assert_eq!(lambda, 0.0);
        assert!(bayes_type1_risk(&bp, &fam).unwrap() <= 1.0);
    }

    #[test]
    fn calibration_needs_tilt() {
        // Untilted, the alternative-heavy prior rejects everywhere at L = 4.
        let bp = BayesProblem { likelihood: vec![vec![0.8, 0.2], vec![0.2, 0.8]], ..two_point(0.05, 4.0) };
        assert!(bayes_type1_risk(&bp, &tilted_bayes_family(&bp, 0.0)).unwrap() > 1.0);
        let (lambda, fam) = lambda_calibrated_decision(&bp, 1e-6).unwrap();
        assert!(lambda > 0.0);
        assert!(bayes_type1_risk(&bp, &fam).unwrap() <= 1.0 + 1e-6);
        assert_eq!(fam.column(0), [0.0, 1.0]);
        let adv = constant_adversary(&bp.losses, 1.0, 2).unwrap();
        let best = bayes_risk(&bp, &fam.column(0), &adv).unwrap();
        for mask in 0..4u32 {
            let rule: Vec<f64> = (0..2).map(|x| f64::from(mask >> x & 1)).collect();
            let fam = TestFamily::new(Mode::Binary, rule.iter().map(|r| vec![*r]).collect()).unwrap();
            if bayes_type1_risk(&bp, &fam).unwrap() <= 1.0 {
                assert!(best <= bayes_risk(&bp, &rule, &adv).unwrap() + 1e-6);
            }
        }
    }

    #[test]
    fn json_document() {
        let doc = r#"{"thetas":["a","b"],"theta0":[0],"prior":[0.5,0.5],
            "likelihood":[[0.5,0.5],[0.2,0.8]],"losses":{"b":[1],"type1":[4],"type2":[1]}}"#;
        let bp: BayesProblem = serde_json::from_str(doc).unwrap();
        assert_eq!(bp, two_point(0.5, 4.0));
    }
}
