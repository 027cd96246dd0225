use crate::error::{Error, Result};
use crate::evar::{next_raise, EVariable, Raise};
use crate::problem::{weighted_sum, TestingProblem};
use crate::risk::{power_curve, type1_risk, u_preference_margins};
use crate::testfam::{induced_evariable, Mode, TestFamily};

use super::lp::{lp_solve, LinearProgram, Sense};

/// Total power gain a competitor needs to count as strictly preferable.
pub const STRICT_TOL: f64 = 1e-7;
/// Objective threshold of the linear-programming search.
pub const LP_STRICT_TOL: f64 = 1e-7;
/// Allowed power loss per scenario for a weakly preferable competitor.
pub const WEAK_TOL: f64 = 1e-9;
/// Allowed type-I risk excess of a competitor.
pub const RISK_TOL: f64 = 1e-9;
/// Largest number of free (point, scenario) cells handed to the simplex.
pub const LP_MAX_CELLS: usize = 400;
/// Largest number of cells for exhaustive enumeration of binary families.
pub const EXHAUSTIVE_MAX_CELLS: usize = 16;

fn safe(phi: &TestFamily, p: &TestingProblem) -> bool {
    type1_risk(phi, p).is_ok_and(|r| r.type1_risk <= 1.0 + RISK_TOL)
}

/// Re-checks that `phi` is type-I risk safe and strictly preferable to `t`
/// under every constant adversary.
pub fn verify_c_improvement(phi: &TestFamily, t: &TestFamily, p: &TestingProblem) -> bool {
    let (Ok(a), Ok(b)) = (power_curve(phi, p.alt()), power_curve(t, p.alt())) else { return false };
    let gains: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
    phi.check_shape(p).is_ok()
        && safe(phi, p)
        && gains.iter().all(|g| *g >= -WEAK_TOL)
        && gains.iter().sum::<f64>() > STRICT_TOL
}

/// Re-checks that `phi` is type-I risk safe and strictly preferable to `t`
/// under every adversary map.
pub fn verify_u_improvement(phi: &TestFamily, t: &TestFamily, p: &TestingProblem) -> bool {
    phi.check_shape(p).is_ok()
        && safe(phi, p)
        && u_preference_margins(phi, t, p.alt(), p.losses())
            .is_ok_and(|(weak, strict)| weak >= -WEAK_TOL && strict > STRICT_TOL)
}

/// The highest-likelihood-ratio group whose e-value can move up to the next
/// loss level without breaking monotonicity, within the remaining type-I
/// budget, for an alternative-mass gain above [`STRICT_TOL`].
pub fn affordable_raise(e: &EVariable, p: &TestingProblem) -> Option<Raise> {
    let slack = 1.0 - weighted_sum(p.null().mass(), e.values());
    next_raise(e.values(), p, slack, RISK_TOL, STRICT_TOL)
}

/// Applies affordable raises until none is left.
pub fn saturate_binary(e: &EVariable, p: &TestingProblem) -> EVariable {
    let mut values = e.values().to_vec();
    loop {
        let current = EVariable::from_raw(values.clone());
        let Some(r) = affordable_raise(&current, p) else { return current };
        for &x in &p.lr_groups()[r.group] {
            values[x] = r.level;
        }
    }
}

fn group_index(p: &TestingProblem) -> Vec<usize> {
    let mut index = vec![0; p.len()];
    for (g, members) in p.lr_groups().iter().enumerate() {
        for &x in members {
            index[x] = g;
        }
    }
    index
}

// Group index `k` such that column `b` rejects exactly the groups `≥ k`.
fn threshold_index(t: &TestFamily, b: usize, p: &TestingProblem) -> Option<usize> {
    let groups = p.lr_groups();
    let rejects = |g: &Vec<usize>| -> Option<bool> {
        let ones = g.iter().filter(|&&x| t.entry(x, b) == 1.0).count();
        let zeros = g.iter().filter(|&&x| t.entry(x, b) == 0.0).count();
        if ones == g.len() {
            Some(true)
        } else if zeros == g.len() {
            Some(false)
        } else {
            None
        }
    };
    let flags: Vec<bool> = groups.iter().map(rejects).collect::<Option<_>>()?;
    let k = flags.iter().position(|f| *f).unwrap_or(groups.len());
    flags[k..].iter().all(|f| *f).then_some(k)
}

struct GroupView {
    p: Vec<f64>,
    q: Vec<f64>,
    q_suffix: Vec<f64>,
}

impl GroupView {
    fn new(p: &TestingProblem) -> Self {
        let sum = |mass: &[f64], g: &Vec<usize>| g.iter().map(|&x| mass[x]).sum::<f64>();
        let pg: Vec<f64> = p.lr_groups().iter().map(|g| sum(p.null().mass(), g)).collect();
        let qg: Vec<f64> = p.lr_groups().iter().map(|g| sum(p.alt().mass(), g)).collect();
        let mut q_suffix = vec![0.0; qg.len() + 1];
        for g in (0..qg.len()).rev() {
            q_suffix[g] = q_suffix[g + 1] + qg[g];
        }
        Self { p: pg, q: qg, q_suffix }
    }

    fn risk(&self, ks: &[usize], type1: &[f64]) -> f64 {
        (0..self.p.len())
            .filter(|&g| self.p[g] > 0.0)
            .map(|g| {
                let e = ks.iter().zip(type1).filter(|(k, _)| **k <= g).map(|(_, l)| *l).fold(0.0, f64::max);
                self.p[g] * e
            })
            .sum()
    }
}

fn family_from_indices(ks: &[usize], p: &TestingProblem) -> TestFamily {
    let gi = group_index(p);
    let matrix = gi.iter().map(|&g| ks.iter().map(|&k| if g >= k { 1.0 } else { 0.0 }).collect()).collect();
    TestFamily::from_raw(Mode::Binary, matrix)
}

/// Searches binary likelihood-ratio threshold families for a type-I risk safe
/// competitor strictly preferable to `t` under every constant adversary.
///
/// Power falls and risk falls as thresholds rise, so the highest thresholds
/// matching `t`'s power are the cheapest weakly preferable competitor, and
/// lowering a single threshold by one group is the cheapest strict gain on
/// top of it. Checking those candidates decides the question exactly.
pub fn binary_threshold_competitor(t: &TestFamily, p: &TestingProblem) -> Result<Option<TestFamily>> {
    t.check_shape(p)?;
    let view = GroupView::new(p);
    let powers = power_curve(t, p.alt())?;
    let g_count = view.p.len();
    let ks: Vec<usize> = (0..t.n_scenarios())
        .map(|b| {
            let own = if t.is_binary() { threshold_index(t, b, p) } else { None };
            own.unwrap_or_else(|| (0..=g_count).rev().find(|&k| view.q_suffix[k] >= powers[b] - WEAK_TOL).unwrap_or(0))
        })
        .collect();
    let type1 = p.losses().type1();
    if view.risk(&ks, type1) > 1.0 + RISK_TOL {
        return Ok(None);
    }
    let gain: f64 = ks.iter().zip(&powers).map(|(&k, pw)| view.q_suffix[k] - pw).sum();
    let accept = |ks: &[usize]| {
        let phi = family_from_indices(ks, p);
        verify_c_improvement(&phi, t, p).then_some(phi)
    };
    if gain > STRICT_TOL {
        if let Some(phi) = accept(&ks) {
            return Ok(Some(phi));
        }
    }
    for b in 0..ks.len() {
        if ks[b] == 0 || view.q[ks[b] - 1] <= STRICT_TOL {
            continue;
        }
        let mut lowered = ks.clone();
        lowered[b] -= 1;
        if view.risk(&lowered, type1) <= 1.0 + RISK_TOL {
            if let Some(phi) = accept(&lowered) {
                return Ok(Some(phi));
            }
        }
    }
    Ok(None)
}

/// Enumerates every binary family on a small problem and returns the
/// strictly preferable competitor with the largest total power gain.
pub fn exhaustive_binary_competitor(t: &TestFamily, p: &TestingProblem) -> Result<Option<TestFamily>> {
    t.check_shape(p)?;
    let (n, m) = (t.n_points(), t.n_scenarios());
    if n * m > EXHAUSTIVE_MAX_CELLS {
        return Err(Error::InvalidConfig(format!("{} cells exceed the enumeration limit", n * m)));
    }
    let base = power_curve(t, p.alt())?;
    let (pm, qm, l1) = (p.null().mass(), p.alt().mass(), p.losses().type1());
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..(1 << (n * m)) {
        let on = |x: usize, b: usize| mask >> (x * m + b) & 1 == 1;
        let risk: f64 = (0..n)
            .filter(|&x| pm[x] > 0.0)
            .map(|x| pm[x] * (0..m).filter(|&b| on(x, b)).map(|b| l1[b]).fold(0.0, f64::max))
            .sum();
        if risk > 1.0 + RISK_TOL {
            continue;
        }
        let gains: Vec<f64> = (0..m).map(|b| (0..n).filter(|&x| on(x, b)).map(|x| qm[x]).sum::<f64>() - base[b]).collect();
        let total: f64 = gains.iter().sum();
        if gains.iter().all(|g| *g >= -WEAK_TOL) && total > STRICT_TOL && best.is_none_or(|(v, _)| total > v) {
            best = Some((total, mask));
        }
    }
    Ok(best.map(|(_, mask)| {
        let matrix = (0..n).map(|x| (0..m).map(|b| f64::from(mask >> (x * m + b) & 1)).collect()).collect();
        TestFamily::from_raw(Mode::Binary, matrix)
    }))
}

/// Linear program over randomized competitors `φ` that are type-I risk safe
/// and weakly preferable to `t` under every constant adversary, maximizing the
/// total power gain. Returns the optimizer when the gain exceeds
/// [`LP_STRICT_TOL`]; `None` means no strictly preferable randomized
/// competitor exists on this instance.
///
/// Points with `P(x) = 0` reject and points with `Q(x) = 0` sustain in every
/// competitor; only the remaining cells are LP variables.
pub fn lp_search_c(t: &TestFamily, p: &TestingProblem) -> Result<Option<TestFamily>> {
    t.check_shape(p)?;
    let (pm, qm) = (p.null().mass(), p.alt().mass());
    let l1 = p.losses().type1();
    let m = l1.len();
    let free: Vec<usize> = (0..p.len()).filter(|&x| pm[x] > 0.0 && qm[x] > 0.0).collect();
    if free.len() * m > LP_MAX_CELLS {
        return Err(Error::InvalidConfig(format!("{} cells exceed the linear-program limit", free.len() * m)));
    }
    let base = power_curve(t, p.alt())?;
    let fixed: Vec<f64> = (0..m).map(|_| (0..p.len()).filter(|&x| pm[x] == 0.0).map(|x| qm[x]).sum()).collect();
    let n_phi = free.len() * m;
    let n_vars = n_phi + free.len();
    let mut objective = vec![0.0; n_vars];
    for (f, &x) in free.iter().enumerate() {
        for b in 0..m {
            objective[f * m + b] = qm[x];
        }
    }
    let mut lp = LinearProgram::unit_box(objective);
    for f in 0..free.len() {
        lp.upper[n_phi + f] = p.losses().max_type1();
    }
    for (f, _) in free.iter().enumerate() {
        for (b, lb) in l1.iter().enumerate() {
            let mut row = vec![0.0; n_vars];
            row[f * m + b] = *lb;
            row[n_phi + f] = -1.0;
            lp.push(row, Sense::Le, 0.0);
        }
    }
    let mut budget = vec![0.0; n_vars];
    for (f, &x) in free.iter().enumerate() {
        budget[n_phi + f] = pm[x];
    }
    lp.push(budget, Sense::Le, 1.0);
    for b in 0..m {
        let mut row = vec![0.0; n_vars];
        for (f, &x) in free.iter().enumerate() {
            row[f * m + b] = qm[x];
        }
        lp.push(row, Sense::Ge, base[b] - fixed[b] - 1e-12);
    }
    let sol = lp_solve(&lp)?;
    let gain = sol.value + fixed.iter().sum::<f64>() - base.iter().sum::<f64>();
    if gain <= LP_STRICT_TOL {
        return Ok(None);
    }
    let mut matrix = vec![vec![0.0; m]; p.len()];
    for x in 0..p.len() {
        if pm[x] == 0.0 {
            matrix[x] = vec![1.0; m];
        }
    }
    for (f, &x) in free.iter().enumerate() {
        for b in 0..m {
            matrix[x][b] = sol.x[f * m + b].clamp(0.0, 1.0);
        }
    }
    let phi = TestFamily::from_raw(Mode::Randomized, matrix);
    if !verify_c_improvement(&phi, t, p) {
        return Err(Error::ImprovementCheckFailed("linear-program witness failed re-verification".into()));
    }
    Ok(Some(phi))
}

/// Induced e-variable of `t` under the problem's losses.
pub(crate) fn induced(t: &TestFamily, p: &TestingProblem) -> Result<EVariable> {
    induced_evariable(t, p.losses())
}
