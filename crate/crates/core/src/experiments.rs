//! Experiment drivers behind the `simulate` subcommand.

use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admiss::{certify_c_admissible_binary, CertifyOptions, Verdict};
use crate::doc::{label_text, problem_from_value};
use crate::error::{Error, Result};
use crate::evar::{compatibilize, ev_mean, np_evariable_for_loss, rao_blackwellize, EVariable};
use crate::fixtures;
use crate::problem::{LossFamily, TestingProblem, TIE_TOL};
use crate::risk::{constant_adversary, type1_risk, type2_risk};
use crate::rng::replication_rng;
use crate::table::{Cell, Format, Table};
use crate::testfam::{binary_from_evariable, canonical_from_evariable, induced_evariable};

/// Replications summed serially inside one parallel task.
const BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    RovingAlpha,
    NpRecovery,
    LrReport,
    RbGain,
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| Error::InvalidConfig(format!("unknown experiment `{s}`")))
    }
}

/// Inline problem document or a path to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSource {
    Path(PathBuf),
    Inline(serde_json::Value),
}

impl ProblemSource {
    pub fn load(&self) -> Result<TestingProblem> {
        match self {
            ProblemSource::Path(path) => problem_from_value(serde_json::from_str(&std::fs::read_to_string(path)?)?),
            ProblemSource::Inline(v) => problem_from_value(v.clone()),
        }
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub problem: Option<ProblemSource>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    /// Largest level the roving analyst will report.
    #[serde(default)]
    pub alpha_max: Option<f64>,
    /// Replaces the problem's losses with the single level `1/alpha`.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Cells of the default normal-shift grid.
    #[serde(default)]
    pub cells: Option<usize>,
    #[serde(default)]
    pub evariable: Option<EVariable>,
    /// Per-point class labels of the conditioning statistic.
    #[serde(default)]
    pub statistic: Option<Vec<serde_json::Value>>,
    /// Concave functionals: `identity`, `sqrt`, `log1p`, or `min:c`.
    #[serde(default)]
    pub concave: Option<Vec<String>>,
    /// Support labels to report; all points when absent.
    #[serde(default)]
    pub observed: Option<Vec<String>>,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            problem: None,
            seed: 0,
            replications: 1,
            out: None,
            format: Format::Csv,
            alpha_max: None,
            alpha: None,
            cells: None,
            evariable: None,
            statistic: None,
            concave: None,
            observed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        Ok(())
    }

    fn problem_or_default(&self) -> Result<TestingProblem> {
        match &self.problem {
            Some(src) => src.load(),
            None => Ok(fixtures::normal_shift(self.cells.unwrap_or(400), fixtures::grid_losses())),
        }
    }

    fn require_problem(&self) -> Result<TestingProblem> {
        self.problem
            .as_ref()
            .ok_or_else(|| Error::InvalidConfig(format!("experiment {:?} needs a problem", self.experiment)))?
            .load()
    }
}

/// An inequality the experiment asserts about its own output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: Table,
    pub checks: Vec<Check>,
}

impl ExperimentOutput {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.holds)
    }
}

fn check(name: &str, holds: bool, detail: String) -> Check {
    Check { name: name.into(), holds, detail }
}

pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::RovingAlpha => run_roving_alpha(cfg),
        Experiment::NpRecovery => run_np_recovery(cfg),
        Experiment::LrReport => run_lr_report(cfg),
        Experiment::RbGain => run_rao_blackwell_gain(cfg),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    rejections: u64,
    e_sum: f64,
    e_sq: f64,
}

/// Monte Carlo estimates of both arms of the roving-alpha experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RovingAlphaSummary {
    pub alpha_max: f64,
    pub replications: u64,
    pub roving_rate: f64,
    pub roving_se: f64,
    pub e_risk: f64,
    pub e_se: f64,
}

/// Simulates the roving analyst, who reports a uniform null p-value as its
/// own level whenever it is at most `alpha_max`, alongside the realized
/// type-I loss `sup_b L_b·δ(X, b)` of the canonical likelihood-ratio family
/// with `X` drawn from the null.
pub fn roving_alpha(p: &TestingProblem, alpha_max: f64, replications: u64, seed: u64) -> Result<RovingAlphaSummary> {
    if !(0.0..=1.0).contains(&alpha_max) {
        return Err(Error::InvalidConfig(format!("alpha_max must lie in [0, 1], got {alpha_max}")));
    }
    if replications == 0 {
        return Err(Error::InvalidConfig("replications must be at least 1".into()));
    }
    let family = canonical_from_evariable(&EVariable::likelihood_ratio(p), p)?;
    let loss = induced_evariable(&family, p.losses())?.into_values();
    let mut cdf: Vec<f64> = p
        .null()
        .mass()
        .iter()
        .scan(0.0, |acc, m| {
            *acc += m;
            Some(*acc)
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = f64::INFINITY;
    }
    let blocks = replications.div_ceil(BLOCK);
    let partials: Vec<Tally> = (0..blocks)
        .into_par_iter()
        .map(|k| {
            let mut t = Tally::default();
            for i in k * BLOCK..((k + 1) * BLOCK).min(replications) {
                let mut rng = replication_rng(seed, i);
                let pvalue: f64 = rng.gen();
                if pvalue <= alpha_max && alpha_max > 0.0 {
                    t.rejections += 1;
                }
                let u: f64 = rng.gen();
                let v = loss[cdf.partition_point(|&c| c <= u)];
                t.e_sum += v;
                t.e_sq += v * v;
            }
            t
        })
        .collect();
    let total = partials.iter().fold(Tally::default(), |a, b| Tally {
        rejections: a.rejections + b.rejections,
        e_sum: a.e_sum + b.e_sum,
        e_sq: a.e_sq + b.e_sq,
    });
    let n = replications as f64;
    let rate = total.rejections as f64 / n;
    let mean = total.e_sum / n;
    let var = (total.e_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(RovingAlphaSummary {
        alpha_max,
        replications,
        roving_rate: rate,
        roving_se: (rate * (1.0 - rate) / n).sqrt(),
        e_risk: mean,
        e_se: (var / n).sqrt(),
    })
}

pub fn run_roving_alpha(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.problem_or_default()?;
    let s = roving_alpha(&p, cfg.alpha_max.unwrap_or(0.10), cfg.replications, cfg.seed)?;
    let mut table = Table::new(&["arm", "estimate", "std_error", "lower_3sigma", "upper_3sigma", "reference", "replications"]);
    let mut row = |arm: &str, est: f64, se: f64, reference: f64| {
        table.push(vec![
            arm.into(),
            est.into(),
            se.into(),
            (est - 3.0 * se).into(),
            (est + 3.0 * se).into(),
            reference.into(),
            Cell::Int(s.replications as i64),
        ])
    };
    row("roving-alpha", s.roving_rate, s.roving_se, s.alpha_max);
    row("e-value", s.e_risk, s.e_se, 1.0);
    let bound = 1.0 + 3.0 * s.e_se;
    let checks = vec![check(
        "e_value_risk_within_3sigma_of_one",
        s.e_risk <= bound,
        format!("empirical risk {} against bound {}", s.e_risk, bound),
    )];
    Ok(ExperimentOutput { table, checks })
}

/// The binary test certified for a single level set beside the classical
/// likelihood-ratio test of the same level.
#[derive(Debug, Clone, PartialEq)]
pub struct NpRecovery {
    pub alpha: f64,
    pub certified: Vec<bool>,
    pub classical: Vec<bool>,
    pub verdict: Verdict,
    pub certified_size: f64,
    pub certified_power: f64,
    pub classical_power: f64,
    /// Null mass of the first likelihood-ratio level left out of the classical test.
    pub boundary_mass: f64,
}

/// Classical nonrandomized level-`alpha` test: reject the largest upper set
/// of likelihood-ratio levels whose null mass stays within `alpha`.
pub fn classical_lr_reject(p: &TestingProblem, alpha: f64) -> (Vec<bool>, f64) {
    let (pm, lr) = (p.null().mass(), p.lr());
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| lr[b].total_cmp(&lr[a]));
    let mut reject = vec![false; p.len()];
    let mut size = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut level_mass = 0.0;
        while j < order.len() && (lr[order[j]] == lr[order[i]] || (lr[order[i]] - lr[order[j]]).abs() <= TIE_TOL * lr[order[i]].abs()) {
            level_mass += pm[order[j]];
            j += 1;
        }
        if size + level_mass > alpha + 1e-12 {
            return (reject, level_mass);
        }
        size += level_mass;
        for &x in &order[i..j] {
            reject[x] = true;
        }
        i = j;
    }
    (reject, 0.0)
}

pub fn np_recovery(p: &TestingProblem) -> Result<NpRecovery> {
    let l = p.losses();
    let mut levels: Vec<f64> = l.type1().to_vec();
    levels.dedup();
    if levels.len() != 1 {
        return Err(Error::MultipleEffectiveLosses(levels.len()));
    }
    let loss = levels[0];
    let alpha = 1.0 / loss;
    let e = compatibilize(&np_evariable_for_loss(p, loss)?, p);
    let family = binary_from_evariable(&e, p)?;
    let cert = certify_c_admissible_binary(&family, p, CertifyOptions::default())?;
    let certified: Vec<bool> = (0..p.len()).map(|x| family.entry(x, 0) == 1.0).collect();
    let (classical, boundary_mass) = classical_lr_reject(p, alpha);
    let mass_where = |set: &[bool], m: &[f64]| set.iter().zip(m).filter(|(r, _)| **r).map(|(_, v)| v).sum::<f64>();
    Ok(NpRecovery {
        alpha,
        verdict: cert.verdict,
        certified_size: mass_where(&certified, p.null().mass()),
        certified_power: mass_where(&certified, p.alt().mass()),
        classical_power: mass_where(&classical, p.alt().mass()),
        certified,
        classical,
        boundary_mass,
    })
}

pub fn run_np_recovery(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let mut p = cfg.problem_or_default()?;
    if let Some(alpha) = cfg.alpha {
        p = p.with_losses(LossFamily::single_level(alpha)?);
    }
    let r = np_recovery(&p)?;
    let mut table = Table::new(&[
        "alpha",
        "verdict",
        "certified_size",
        "certified_power",
        "classical_power",
        "power_difference",
        "reject_sets_equal",
    ]);
    let verdict = serde_json::to_value(r.verdict)?;
    let same = r.certified == r.classical;
    table.push(vec![
        r.alpha.into(),
        label_text(&verdict).into(),
        r.certified_size.into(),
        r.certified_power.into(),
        r.classical_power.into(),
        (r.certified_power - r.classical_power).into(),
        same.into(),
    ]);
    let checks = vec![
        check("reject_sets_equal", same, "certified and classical reject sets".into()),
        check(
            "size_within_boundary_mass",
            r.certified_size <= r.alpha + 1e-12 && r.alpha - r.certified_size <= r.boundary_mass + 1e-12,
            format!("size {} at level {} with boundary mass {}", r.certified_size, r.alpha, r.boundary_mass),
        ),
        check("certified", r.verdict == Verdict::Admissible, format!("verdict {verdict}")),
    ];
    Ok(ExperimentOutput { table, checks })
}

/// Scenarios at which `1{Λ ≥ L_b(0,1)}` rejects, as a `;`-separated list.
fn rejected_scenarios(lr: f64, l: &LossFamily) -> Vec<f64> {
    l.scenarios().iter().zip(l.type1()).filter(|(_, &loss)| lr >= loss).map(|(b, _)| *b).collect()
}

pub fn run_lr_report(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.problem_or_default()?;
    let family = binary_from_evariable(&EVariable::likelihood_ratio(&p), &p)?;
    let risk = type1_risk(&family, &p)?.type1_risk;
    let points: Vec<usize> = match &cfg.observed {
        None => (0..p.len()).collect(),
        Some(obs) => obs
            .iter()
            .map(|o| p.index_of_label(o).ok_or_else(|| Error::InvalidConfig(format!("unknown support point `{o}`"))))
            .collect::<Result<_>>()?,
    };
    let mut table = Table::new(&["point", "Lambda", "n_rejected", "max_rejected_b", "rejected_b", "type1_risk"]);
    for x in points {
        let lr = p.lr()[x];
        let rejected = rejected_scenarios(lr, p.losses());
        let list: Vec<String> = rejected.iter().map(|b| format!("{b}")).collect();
        table.push(vec![
            p.labels()[x].clone().into(),
            lr.into(),
            rejected.len().into(),
            rejected.last().map_or(Cell::Text(String::new()), |b| Cell::Real(*b)),
            list.join(";").into(),
            risk.into(),
        ]);
    }
    let checks = vec![check("type1_risk_at_most_one", risk <= 1.0 + 1e-9, format!("type-I risk {risk}"))];
    Ok(ExperimentOutput { table, checks })
}

/// A concave nondecreasing functional on `[0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Concave {
    Identity,
    Sqrt,
    Log1p,
    Min(f64),
}

impl std::str::FromStr for Concave {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(Concave::Identity),
            "sqrt" => Ok(Concave::Sqrt),
            "log1p" => Ok(Concave::Log1p),
            _ => s
                .strip_prefix("min:")
                .and_then(|c| c.parse::<f64>().ok())
                .filter(|c| *c > 0.0)
                .map(Concave::Min)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown concave function `{s}`"))),
        }
    }
}

impl Concave {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Concave::Identity => v,
            Concave::Sqrt => v.sqrt(),
            Concave::Log1p => v.ln_1p(),
            Concave::Min(c) => v.min(c),
        }
    }
}

impl std::fmt::Display for Concave {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Concave::Identity => write!(f, "identity"),
            Concave::Sqrt => write!(f, "sqrt"),
            Concave::Log1p => write!(f, "log1p"),
            Concave::Min(c) => write!(f, "min:{c}"),
        }
    }
}

/// `E_Q[f(e)]`.
pub fn concave_value(f: Concave, e: &EVariable, p: &TestingProblem) -> Result<f64> {
    let mapped: Vec<f64> = e.values().iter().map(|v| f.apply(*v)).collect();
    p.alt().expect(&mapped)
}

pub fn run_rao_blackwell_gain(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.require_problem()?;
    let labels: Vec<String> = cfg
        .statistic
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("rb-gain needs a `statistic`".into()))?
        .iter()
        .map(label_text)
        .collect();
    let e = cfg.evariable.clone().unwrap_or_else(|| EVariable::likelihood_ratio(&p));
    let s = rao_blackwellize(&e, &labels, &p)?;
    let concave: Vec<Concave> = match &cfg.concave {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_>>()?,
        None => vec![Concave::Identity, Concave::Sqrt, Concave::Log1p],
    };
    let (before, after) = (canonical_from_evariable(&e, &p)?, canonical_from_evariable(&s, &p)?);
    let mut table = Table::new(&["kind", "key", "original", "rao_blackwell", "difference"]);
    let mut checks = vec![];
    for &b in p.losses().scenarios() {
        let adv = constant_adversary(p.losses(), b, p.len())?;
        let r0 = type2_risk(&before, &adv, p.alt(), p.losses())?;
        let r1 = type2_risk(&after, &adv, p.alt(), p.losses())?;
        table.push(vec!["type2_risk".into(), format!("b={b}").into(), r0.into(), r1.into(), (r1 - r0).into()]);
        checks.push(check(
            &format!("type2_risk_not_worse_b={b}"),
            r1 <= r0 + 1e-9,
            format!("type-II risk {r1} after against {r0} before"),
        ));
    }
    for f in concave {
        let v0 = concave_value(f, &e, &p)?;
        let v1 = concave_value(f, &s, &p)?;
        table.push(vec!["concave".into(), f.to_string().into(), v0.into(), v1.into(), (v1 - v0).into()]);
        checks.push(check(
            &format!("concave_gain_{f}"),
            v1 >= v0 - 1e-9,
            format!("E_Q[f(S)] = {v1} against E_Q[f(E)] = {v0}"),
        ));
    }
    let mean = ev_mean(&e, p.null())?;
    checks.push(check("input_is_e_variable", mean <= 1.0 + 1e-9, format!("null mean {mean}")));
    Ok(ExperimentOutput { table, checks })
}
