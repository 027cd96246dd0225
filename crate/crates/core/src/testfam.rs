//! Test families: rejection probabilities indexed by support point and scenario.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evar::{np_calibrate, np_test, EVariable, SNAP_TOL};
use crate::problem::{lr_cmp, LossFamily, TestingProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Randomized,
    Binary,
}

/// Dense matrix of rejection probabilities, one row per support point and
/// one column per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FamilyDoc")]
pub struct TestFamily {
    mode: Mode,
    matrix: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct FamilyDoc {
    mode: Mode,
    matrix: Vec<Vec<f64>>,
}

impl TryFrom<FamilyDoc> for TestFamily {
    type Error = Error;
    fn try_from(d: FamilyDoc) -> Result<Self> {
        TestFamily::new(d.mode, d.matrix)
    }
}

impl TestFamily {
    pub fn new(mode: Mode, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let cols = matrix.first().map_or(0, Vec::len);
        if let Some(row) = matrix.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch { expected: cols, found: row.len() });
        }
        for &v in matrix.iter().flatten() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidFamily(format!("entry {v} outside [0, 1]")));
            }
            if mode == Mode::Binary && v != 0.0 && v != 1.0 {
                return Err(Error::InvalidFamily(format!("binary entry {v} is not 0 or 1")));
            }
        }
        Ok(Self { mode, matrix })
    }

    pub fn constant(mode: Mode, points: usize, scenarios: usize, value: f64) -> Result<Self> {
        Self::new(mode, vec![vec![value; scenarios]; points])
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn is_binary(&self) -> bool {
        self.mode == Mode::Binary
    }

    pub fn n_points(&self) -> usize {
        self.matrix.len()
    }

    pub fn n_scenarios(&self) -> usize {
        self.matrix.first().map_or(0, Vec::len)
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.matrix[x]
    }

    pub fn entry(&self, x: usize, b: usize) -> f64 {
        self.matrix[x][b]
    }

    pub fn column(&self, b: usize) -> Vec<f64> {
        self.matrix.iter().map(|r| r[b]).collect()
    }

    /// The same entries viewed as a randomized family.
    pub fn as_randomized(&self) -> Self {
        Self { mode: Mode::Randomized, matrix: self.matrix.clone() }
    }

    pub(crate) fn from_raw(mode: Mode, matrix: Vec<Vec<f64>>) -> Self {
        Self { mode, matrix }
    }

    pub fn check_shape(&self, p: &TestingProblem) -> Result<()> {
        if self.n_points() != p.len() {
            return Err(Error::DimensionMismatch { expected: p.len(), found: self.n_points() });
        }
        if self.n_scenarios() != p.losses().len() {
            return Err(Error::DimensionMismatch { expected: p.losses().len(), found: self.n_scenarios() });
        }
        Ok(())
    }
}

fn check_len(e: &EVariable, p: &TestingProblem) -> Result<()> {
    if e.len() != p.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), found: e.len() });
    }
    Ok(())
}

/// `δ_E(x, b) = min(1, E(x)/L_b(0,1))`.
pub fn canonical_from_evariable(e: &EVariable, p: &TestingProblem) -> Result<TestFamily> {
    check_len(e, p)?;
    let l = p.losses().type1();
    let matrix = e.values().iter().map(|&v| l.iter().map(|&lb| (v / lb).min(1.0)).collect()).collect();
    Ok(TestFamily::from_raw(Mode::Randomized, matrix))
}

/// `φ_E(x, b) = 1{E(x) ≥ L_b(0,1)}`, with slack toward rejection.
pub fn binary_from_evariable(e: &EVariable, p: &TestingProblem) -> Result<TestFamily> {
    check_len(e, p)?;
    let l = p.losses().type1();
    let matrix = e
        .values()
        .iter()
        .map(|&v| l.iter().map(|&lb| if v >= lb - SNAP_TOL { 1.0 } else { 0.0 }).collect())
        .collect();
    Ok(TestFamily::from_raw(Mode::Binary, matrix))
}

/// `E_δ(x) = max_b L_b(0,1)·δ(x, b)`.
pub fn induced_evariable(t: &TestFamily, l: &LossFamily) -> Result<EVariable> {
    if t.n_points() > 0 && t.n_scenarios() != l.len() {
        return Err(Error::DimensionMismatch { expected: l.len(), found: t.n_scenarios() });
    }
    let values = t
        .matrix
        .iter()
        .map(|row| row.iter().zip(l.type1()).map(|(d, lb)| lb * d).fold(0.0, f64::max))
        .collect();
    Ok(EVariable::from_raw(values))
}

/// Post-hoc Neyman-Pearson family anchored at scenario `b_star`.
pub fn np_posthoc_family(p: &TestingProblem, b_star: f64, mode: Mode) -> Result<TestFamily> {
    let star = p.losses().index_of(b_star)?;
    let loss = p.losses().type1()[star];
    match mode {
        Mode::Randomized => canonical_from_evariable(&crate::evar::np_evariable_for_loss(p, loss)?, p),
        Mode::Binary => {
            if !(loss >= 1.0) {
                return Err(Error::InvalidTarget(1.0 / loss));
            }
            let cal = np_calibrate(p, 1.0 / loss)?;
            if (cal.gamma - 1.0).abs() > 1e-9 {
                return Err(Error::RandomizationRequired(cal.gamma));
            }
            let phi = np_test(p, crate::evar::NPCalibration { gamma: 1.0, ..cal });
            let m = p.losses().len();
            let matrix = phi.iter().map(|&f| (0..m).map(|b| if b <= star { f } else { 0.0 }).collect()).collect();
            Ok(TestFamily::from_raw(Mode::Binary, matrix))
        }
    }
}

/// Likelihood-ratio thresholds `t(b)` of a monotone binary family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionCurve {
    pub thresholds: Vec<f64>,
}

impl DecisionCurve {
    pub fn is_nondecreasing(&self) -> bool {
        self.thresholds.windows(2).all(|w| w[0] <= w[1])
    }
}

/// `t(b) = min{Λ(x) : φ(x, b) = 1}`, or `+inf` for a column that never rejects.
pub fn decision_curve(t: &TestFamily, p: &TestingProblem) -> Result<DecisionCurve> {
    if !t.is_binary() {
        return Err(Error::NotBinary);
    }
    t.check_shape(p)?;
    let thresholds = (0..t.n_scenarios())
        .map(|b| {
            let mut threshold = f64::INFINITY;
            for group in p.lr_groups() {
                let rejects = group.iter().filter(|&&x| t.matrix[x][b] == 1.0).count();
                if rejects > 0 && rejects < group.len() {
                    return Err(Error::NotMonotoneInLR(b));
                }
                if rejects == 0 && threshold.is_finite() {
                    return Err(Error::NotMonotoneInLR(b));
                }
                if rejects > 0 && !threshold.is_finite() {
                    threshold = p.lr()[group[0]];
                }
            }
            Ok(threshold)
        })
        .collect::<Result<_>>()?;
    Ok(DecisionCurve { thresholds })
}

/// The binary family `φ(x, b) = 1{Λ(x) ≥ t(b)}`.
pub fn from_decision_curve(curve: &DecisionCurve, p: &TestingProblem) -> Result<TestFamily> {
    if curve.thresholds.len() != p.losses().len() {
        return Err(Error::DimensionMismatch { expected: p.losses().len(), found: curve.thresholds.len() });
    }
    let matrix = p
        .lr()
        .iter()
        .map(|&l| {
            curve
                .thresholds
                .iter()
                .map(|&t| if t < f64::INFINITY && lr_cmp(l, t) != Ordering::Less { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    Ok(TestFamily::from_raw(Mode::Binary, matrix))
}

/// Draws `D ~ Ber(δ(x, b))` from a generator seeded with `rng_seed`.
pub fn sample_decision(t: &TestFamily, x: usize, b: usize, rng_seed: u64) -> u8 {
    sample_decision_with(t, x, b, &mut ChaCha8Rng::seed_from_u64(rng_seed))
}

pub fn sample_decision_with<R: Rng + ?Sized>(t: &TestFamily, x: usize, b: usize, rng: &mut R) -> u8 {
    u8::from(rng.gen::<f64>() < t.matrix[x][b])
}

/// Whether rebuilding the family from its induced e-variable reproduces it.
pub fn is_canonical(t: &TestFamily, p: &TestingProblem, tol: f64) -> bool {
    if t.check_shape(p).is_err() {
        return false;
    }
    let Ok(e) = induced_evariable(t, p.losses()) else { return false };
    let rebuilt = match t.mode {
        Mode::Randomized => canonical_from_evariable(&e, p),
        Mode::Binary => binary_from_evariable(&e, p),
    };
    let Ok(rebuilt) = rebuilt else { return false };
    t.matrix.iter().flatten().zip(rebuilt.matrix.iter().flatten()).all(|(a, b)| (a - b).abs() <= tol)
}
