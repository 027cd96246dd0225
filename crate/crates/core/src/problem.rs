//! Testing problems: a point null `P` against a point alternative `Q` on a
//! shared finite support, together with a family of loss functions indexed by
//! scenarios `b`.
//!
//! Every quantity downstream (e-variables, test families, risks) is a vector
//! aligned with the support order of a [`TestingProblem`]. Continuous problems
//! enter only through [`discretize_continuous`], which replaces each density by
//! per-cell masses on a grid. The discretized problem approximates the
//! continuous one with an error that vanishes as the grid is refined; every
//! statement about continuous `P`, `Q` is exercised on such grids.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a distribution.
pub const MASS_SUM_TOL: f64 = 1e-12;

/// Default absolute tolerance for equality of probabilities and expectations.
pub const PROB_TOL: f64 = 1e-9;

/// Relative tolerance under which two likelihood-ratio values count as tied.
pub const TIE_TOL: f64 = 1e-12;

/// Probability mass function on an indexed finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    labels: Vec<String>,
    mass: Vec<f64>,
}

impl FiniteDistribution {
    pub fn new(labels: Vec<String>, mass: Vec<f64>) -> Result<Self> {
        if labels.len() != mass.len() {
            return Err(Error::DimensionMismatch { expected: labels.len(), found: mass.len() });
        }
        let mut seen = std::collections::HashSet::new();
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidDistribution(format!("duplicate support label `{label}`")));
            }
        }
        if let Some(m) = mass.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
            return Err(Error::InvalidDistribution(format!("mass entry {m} is not a finite nonnegative number")));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::InvalidDistribution(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { labels, mass })
    }

    /// Distribution over the default labels `x1, x2, ...`.
    pub fn from_masses(mass: Vec<f64>) -> Result<Self> {
        Self::new(default_labels(mass.len()), mass)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// `Σ_x d(x)·v(x)`. Points of zero mass contribute nothing, even where
    /// `v(x)` is infinite.
    pub fn expect(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.mass.len() {
            return Err(Error::DimensionMismatch { expected: self.mass.len(), found: values.len() });
        }
        Ok(weighted_sum(&self.mass, values))
    }
}

pub(crate) fn weighted_sum(weights: &[f64], values: &[f64]) -> f64 {
    weights
        .iter()
        .zip(values)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, v)| w * v)
        .sum()
}

pub(crate) fn default_labels(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Scenarios `b` with type-I losses `L_b(0,1)` and type-II losses `L_b(1,0)`.
///
/// `L_b(0,0) = L_b(1,1) = 0` throughout, so only the two off-diagonal entries
/// are stored. Scenarios are strictly ascending and the type-I losses are
/// nondecreasing along them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossDoc", into = "LossDoc")]
pub struct LossFamily {
    scenarios: Vec<f64>,
    type1: Vec<f64>,
    type2: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LossDoc {
    b: Vec<f64>,
    type1: Vec<f64>,
    type2: Vec<f64>,
}

impl TryFrom<LossDoc> for LossFamily {
    type Error = Error;
    fn try_from(d: LossDoc) -> Result<Self> {
        LossFamily::new(d.b, d.type1, d.type2)
    }
}

impl From<LossFamily> for LossDoc {
    fn from(l: LossFamily) -> Self {
        LossDoc { b: l.scenarios, type1: l.type1, type2: l.type2 }
    }
}

impl LossFamily {
    pub fn new(scenarios: Vec<f64>, type1: Vec<f64>, type2: Vec<f64>) -> Result<Self> {
        let n = scenarios.len();
        if n == 0 {
            return Err(Error::InvalidLosses("at least one scenario is required".into()));
        }
        if type1.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: type1.len() });
        }
        if type2.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: type2.len() });
        }
        if scenarios.iter().any(|b| !b.is_finite()) || scenarios.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidLosses("scenarios must be finite and strictly ascending".into()));
        }
        if type1.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidLosses("type-I losses must be finite and positive".into()));
        }
        if type1.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidLosses("type-I losses must be nondecreasing in b".into()));
        }
        if !type1.iter().any(|l| *l > 1.0) {
            return Err(Error::InvalidLosses("at least one type-I loss must exceed 1".into()));
        }
        if type2.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
            return Err(Error::InvalidLosses("type-II losses must be finite and nonnegative".into()));
        }
        Ok(Self { scenarios, type1, type2 })
    }

    /// Scenarios `b = 1, 2, ...` carrying the given losses.
    pub fn from_losses(type1: Vec<f64>, type2: Vec<f64>) -> Result<Self> {
        let scenarios = (1..=type1.len()).map(|b| b as f64).collect();
        Self::new(scenarios, type1, type2)
    }

    /// Scenarios `b = 1..=n` with `L_b(0,1) = b` and `L_b(1,0) = 1`.
    pub fn linear_grid(n: usize) -> Result<Self> {
        let type1: Vec<f64> = (1..=n).map(|b| b as f64).collect();
        Self::new(type1.clone(), type1, vec![1.0; n])
    }

    /// A single scenario with `L(0,1) = 1/α` and `L(1,0) = 1`: the classical
    /// level-α setting.
    pub fn single_level(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidLosses(format!("level must lie in (0, 1), got {alpha}")));
        }
        Self::new(vec![1.0], vec![1.0 / alpha], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[f64] {
        &self.scenarios
    }

    pub fn type1(&self) -> &[f64] {
        &self.type1
    }

    pub fn type2(&self) -> &[f64] {
        &self.type2
    }

    pub fn max_type1(&self) -> f64 {
        *self.type1.last().expect("nonempty")
    }

    /// Position of scenario `b` in the family.
    pub fn index_of(&self, b: f64) -> Result<usize> {
        self.scenarios.iter().position(|s| *s == b).ok_or(Error::ScenarioNotFound(b))
    }

    /// Sorted, deduplicated type-I losses.
    pub fn span(&self) -> Vec<f64> {
        loss_span(self)
    }
}

/// The set of attainable type-I losses, sorted ascending without duplicates.
pub fn loss_span(l: &LossFamily) -> Vec<f64> {
    let mut span = l.type1.clone();
    span.sort_by(f64::total_cmp);
    span.dedup();
    span
}

/// How the problem was produced. Grid problems stand in for continuous
/// distributions, so certificates that assume continuity apply to them
/// as grid-approximate verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Discrete,
    Grid,
}

/// Point null against point alternative on a shared finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct TestingProblem {
    null: FiniteDistribution,
    alt: FiniteDistribution,
    losses: LossFamily,
    lr: Vec<f64>,
    groups: Vec<Vec<usize>>,
    origin: Origin,
}

impl TestingProblem {
    /// Builds a problem, silently trimming points where both masses vanish.
    pub fn new(null: FiniteDistribution, alt: FiniteDistribution, losses: LossFamily) -> Result<Self> {
        Self::with_origin(null, alt, losses, Origin::Discrete)
    }

    pub fn with_origin(
        null: FiniteDistribution,
        alt: FiniteDistribution,
        losses: LossFamily,
        origin: Origin,
    ) -> Result<Self> {
        if null.labels != alt.labels {
            return Err(Error::InvalidDistribution("null and alternative must share support labels".into()));
        }
        let keep: Vec<usize> = (0..null.len()).filter(|&i| null.mass[i] + alt.mass[i] > 0.0).collect();
        if keep.is_empty() {
            return Err(Error::EmptySupport);
        }
        let (null, alt) = if keep.len() == null.len() {
            (null, alt)
        } else {
            let labels: Vec<String> = keep.iter().map(|&i| null.labels[i].clone()).collect();
            let p = keep.iter().map(|&i| null.mass[i]).collect();
            let q = keep.iter().map(|&i| alt.mass[i]).collect();
            (
                FiniteDistribution { labels: labels.clone(), mass: p },
                FiniteDistribution { labels, mass: q },
            )
        };
        let lr: Vec<f64> = null
            .mass
            .iter()
            .zip(&alt.mass)
            .map(|(p, q)| if *p > 0.0 { q / p } else { f64::INFINITY })
            .collect();
        let groups = tie_groups(&lr);
        Ok(Self { null, alt, losses, lr, groups, origin })
    }

    pub fn null(&self) -> &FiniteDistribution {
        &self.null
    }

    pub fn alt(&self) -> &FiniteDistribution {
        &self.alt
    }

    pub fn losses(&self) -> &LossFamily {
        &self.losses
    }

    pub fn labels(&self) -> &[String] {
        &self.null.labels
    }

    pub fn len(&self) -> usize {
        self.lr.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lr.is_empty()
    }

    /// `Λ(x) = Q(x)/P(x)` per point; `+inf` where `P(x) = 0`.
    pub fn lr(&self) -> &[f64] {
        &self.lr
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    /// Indices grouped by tied likelihood ratio, groups in ascending `Λ`.
    pub fn lr_groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// The same distributions under a different loss family.
    pub fn with_losses(&self, losses: LossFamily) -> Self {
        Self { losses, ..self.clone() }
    }

    pub fn index_of_label(&self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| l == label)
    }
}

fn tie_groups(lr: &[f64]) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lr.len()).collect();
    order.sort_by(|&a, &b| lr[a].total_cmp(&lr[b]).then(a.cmp(&b)));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if lr_tied(lr[g[0]], lr[i]) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

pub(crate) fn lr_tied(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if !(a.is_finite() && b.is_finite()) {
        return false;
    }
    (a - b).abs() <= TIE_TOL * a.abs().max(b.abs())
}

/// Compares two likelihood ratios, treating ties within [`TIE_TOL`] as equal.
pub(crate) fn lr_cmp(a: f64, b: f64) -> Ordering {
    if lr_tied(a, b) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}

/// Points whose decision is forced by a one-sided zero, plus the common support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// `P(x) = 0 < Q(x)`: every admissible test rejects here for all `b`.
    pub forced_reject: Vec<String>,
    /// `Q(x) = 0 < P(x)`: rejecting here only spends type-I budget.
    pub forced_sustain: Vec<String>,
    /// Points with both masses positive.
    pub common_support: Vec<String>,
}

pub fn validate_problem(p: &TestingProblem) -> ValidationReport {
    let mut report = ValidationReport { forced_reject: vec![], forced_sustain: vec![], common_support: vec![] };
    for (i, label) in p.labels().iter().enumerate() {
        let (pm, qm) = (p.null.mass[i], p.alt.mass[i]);
        let bucket = if pm == 0.0 {
            &mut report.forced_reject
        } else if qm == 0.0 {
            &mut report.forced_sustain
        } else {
            &mut report.common_support
        };
        bucket.push(label.clone());
    }
    report
}

pub fn likelihood_ratio(p: &TestingProblem, x: usize) -> Result<f64> {
    let pm = *p.null.mass.get(x).ok_or(Error::DimensionMismatch { expected: p.len(), found: x + 1 })?;
    if pm == 0.0 {
        return Err(Error::ZeroNullMass(p.labels()[x].clone()));
    }
    Ok(p.alt.mass[x] / pm)
}

/// Midpoint-rule discretization of two densities over the cells delimited by
/// `grid`. Per-cell masses are renormalized to sum to one, and cells empty
/// under both densities are dropped.
pub fn discretize_continuous(
    density_null: impl Fn(f64) -> f64,
    density_alt: impl Fn(f64) -> f64,
    grid: &[f64],
    losses: LossFamily,
) -> Result<TestingProblem> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|g| !g.is_finite()) {
        return Err(Error::InvalidConfig("grid needs at least two finite, strictly ascending boundaries".into()));
    }
    let cell_masses = |f: &dyn Fn(f64) -> f64| -> Result<Vec<f64>> {
        let raw: Vec<f64> = grid
            .windows(2)
            .map(|w| {
                let d = f(0.5 * (w[0] + w[1]));
                if d.is_finite() && d >= 0.0 {
                    Ok(d * (w[1] - w[0]))
                } else {
                    Err(Error::InvalidDistribution(format!("density value {d} is not finite and nonnegative")))
                }
            })
            .collect::<Result<_>>()?;
        let total: f64 = raw.iter().sum();
        if !(total > 1e-300) {
            return Err(Error::NonpositiveTotalMass);
        }
        Ok(raw.into_iter().map(|m| m / total).collect())
    };
    let p = cell_masses(&density_null)?;
    let q = cell_masses(&density_alt)?;
    let labels: Vec<String> = (0..p.len()).map(|i| format!("cell{i}")).collect();
    // Renormalized masses can miss 1 by a few ulps; rebuild without the strict check.
    let null = FiniteDistribution { labels: labels.clone(), mass: p };
    let alt = FiniteDistribution { labels, mass: q };
    TestingProblem::with_origin(null, alt, losses, Origin::Grid)
}

/// `n + 1` equally spaced boundaries on `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let h = (hi - lo) / cells as f64;
    (0..=cells).map(|i| if i == cells { hi } else { lo + h * i as f64 }).collect()
}
