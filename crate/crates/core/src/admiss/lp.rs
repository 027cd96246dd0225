//! Dense two-phase tableau simplex with Bland's anti-cycling rule.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// `maximize c·x` subject to `rows·x (sense) rhs` and `lower ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub senses: Vec<Sense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `n` variables boxed in `[0, 1]` with no rows yet.
    pub fn unit_box(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self { objective, rows: vec![], senses: vec![], rhs: vec![], lower: vec![0.0; n], upper: vec![1.0; n] }
    }

    pub fn push(&mut self, row: Vec<f64>, sense: Sense, rhs: f64) {
        self.rows.push(row);
        self.senses.push(sense);
        self.rhs.push(rhs);
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        let bad = |what: &str| Err(Error::InvalidConfig(format!("linear program: {what}")));
        if self.lower.len() != n || self.upper.len() != n {
            return bad("bounds do not match the number of variables");
        }
        if self.rows.len() != self.senses.len() || self.rows.len() != self.rhs.len() {
            return bad("rows, senses and right-hand sides differ in length");
        }
        if self.rows.iter().any(|r| r.len() != n) {
            return bad("row width does not match the number of variables");
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.rhs) || self.rows.iter().any(|r| !finite(r)) {
            return bad("non-finite coefficient");
        }
        if self.lower.iter().any(|l| !l.is_finite()) {
            return bad("lower bounds must be finite");
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Infeasible);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    // m constraint rows followed by the objective row; last column is the rhs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        for v in self.t[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn set_objective(&mut self, cost: &[f64]) {
        let m = self.m();
        let mut z = vec![0.0; self.cols + 1];
        z[..self.cols].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                for (zj, a) in z.iter_mut().zip(&self.t[i]) {
                    *zj -= cb * a;
                }
            }
        }
        self.t[m] = z;
    }

    // Maximizes the objective row over columns accepted by `allowed`.
    fn optimize(&mut self, allowed: impl Fn(usize) -> bool) -> Result<()> {
        let m = self.m();
        loop {
            let Some(c) = (0..self.cols).find(|&j| allowed(j) && self.t[m][j] > PIVOT_EPS) else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.t[i][self.cols] / a;
                    leave = match leave {
                        Some((r, best))
                            if ratio > best + 1e-12
                                || (ratio >= best - 1e-12 && self.basis[i] > self.basis[r]) =>
                        {
                            Some((r, best))
                        }
                        _ => Some((i, ratio)),
                    };
                }
            }
            let (r, _) = leave.ok_or(Error::Unbounded)?;
            self.pivot(r, c);
        }
    }
}

/// Solves `lp` to optimality.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.objective.len();
    // Shift to y = x − lower ≥ 0 and add explicit rows for finite upper bounds.
    let mut rows: Vec<(Vec<f64>, Sense, f64)> = lp
        .rows
        .iter()
        .zip(&lp.senses)
        .zip(&lp.rhs)
        .map(|((row, &s), &b)| {
            let shift: f64 = row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum();
            (row.clone(), s, b - shift)
        })
        .collect();
    for j in 0..n {
        if lp.upper[j].is_finite() {
            let mut row = vec![0.0; n];
            row[j] = 1.0;
            rows.push((row, Sense::Le, lp.upper[j] - lp.lower[j]));
        }
    }
    for (row, sense, b) in rows.iter_mut() {
        if *b < 0.0 {
            row.iter_mut().for_each(|a| *a = -*a);
            *b = -*b;
            *sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }
    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let cols = n + n_slack + n_art;
    let art_start = n + n_slack;
    let mut t = vec![vec![0.0; cols + 1]; m + 1];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n, art_start);
    for (i, (row, sense, b)) in rows.iter().enumerate() {
        t[i][..n].copy_from_slice(row);
        t[i][cols] = *b;
        match sense {
            Sense::Le => {
                t[i][s] = 1.0;
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -1.0;
                s += 1;
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t[i][a] = 1.0;
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, cols };

    if n_art > 0 {
        let phase1: Vec<f64> = (0..cols).map(|j| if j >= art_start { -1.0 } else { 0.0 }).collect();
        tab.set_objective(&phase1);
        tab.optimize(|_| true)?;
        if tab.t[m][cols] > FEAS_EPS {
            return Err(Error::Infeasible);
        }
        for i in 0..m {
            if tab.basis[i] >= art_start {
                if let Some(c) = (0..art_start).find(|&j| tab.t[i][j].abs() > PIVOT_EPS) {
                    tab.pivot(i, c);
                }
            }
        }
    }

    let mut cost = vec![0.0; cols];
    cost[..n].copy_from_slice(&lp.objective);
    tab.set_objective(&cost);
    tab.optimize(|j| j < art_start)?;

    let mut y = vec![0.0; cols];
    for (i, &b) in tab.basis.iter().enumerate() {
        y[b] = tab.t[i][cols];
    }
    let x: Vec<f64> = (0..n).map(|j| (lp.lower[j] + y[j]).clamp(lp.lower[j], lp.upper[j])).collect();
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { value, x })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_variable() {
        let lp = LinearProgram::unit_box(vec![1.0]);
        assert_eq!(lp_solve(&lp).unwrap().value, 1.0);
    }

    #[test]
    fn two_variables() {
        let mut lp = LinearProgram::unit_box(vec![1.0, 1.0]);
        lp.push(vec![1.0, 1.0], Sense::Le, 1.0);
        assert!((lp_solve(&lp).unwrap().value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows() {
        let mut lp = LinearProgram::unit_box(vec![1.0, -1.0, 0.5]);
        lp.push(vec![1.0, 1.0, 1.0], Sense::Eq, 1.5);
        lp.push(vec![0.0, 1.0, 0.0], Sense::Ge, 0.25);
        let sol = lp_solve(&lp).unwrap();
        assert!((sol.value - 0.875).abs() < 1e-12, "{sol:?}");
    }

    #[test]
    fn infeasible() {
        let mut lp = LinearProgram::unit_box(vec![1.0]);
        lp.push(vec![1.0], Sense::Ge, 2.0);
        assert_eq!(lp_solve(&lp), Err(Error::Infeasible));
    }

    #[test]
    fn unbounded() {
        let mut lp = LinearProgram::unit_box(vec![1.0]);
        lp.upper = vec![f64::INFINITY];
        assert_eq!(lp_solve(&lp), Err(Error::Unbounded));
    }

    fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for c in 0..n {
            let r = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
            if a[r][c].abs() < 1e-10 {
                return None;
            }
            a.swap(r, c);
            b.swap(r, c);
            for i in 0..n {
                if i != c {
                    let f = a[i][c] / a[c][c];
                    for k in 0..n {
                        a[i][k] -= f * a[c][k];
                    }
                    b[i] -= f * b[c];
                }
            }
        }
        Some((0..n).map(|i| b[i] / a[i][i]).collect())
    }

    // Best objective over all basic solutions satisfying every constraint.
    fn vertex_oracle(lp: &LinearProgram) -> Option<f64> {
        let n = lp.objective.len();
        let mut planes: Vec<(Vec<f64>, f64)> = lp.rows.iter().cloned().zip(lp.rhs.iter().copied()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            planes.push((e.clone(), lp.lower[j]));
            planes.push((e, lp.upper[j]));
        }
        let feasible = |x: &[f64]| {
            let dot = |r: &[f64]| r.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
            lp.rows.iter().zip(&lp.senses).zip(&lp.rhs).all(|((r, s), b)| match s {
                Sense::Le => dot(r) <= b + 1e-9,
                Sense::Ge => dot(r) >= b - 1e-9,
                Sense::Eq => (dot(r) - b).abs() <= 1e-9,
            }) && x.iter().zip(&lp.lower).zip(&lp.upper).all(|((v, l), u)| *v >= l - 1e-9 && *v <= u + 1e-9)
        };
        let mut best: Option<f64> = None;
        let k = planes.len();
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
            let b = idx.iter().map(|&i| planes[i].1).collect();
            if let Some(x) = solve_square(a, b) {
                if feasible(&x) {
                    let v: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                    best = Some(best.map_or(v, |w: f64| w.max(v)));
                }
            }
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < k - n + i {
                    idx[i] += 1;
                    for j in i + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn random_lp() -> impl Strategy<Value = LinearProgram> {
        (1usize..=4, 0usize..=4).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(-3.0..3.0f64, n),
                prop::collection::vec(prop::collection::vec(-2.0..2.0f64, n), m),
                prop::collection::vec(0usize..3, m),
                prop::collection::vec(-1.0..3.0f64, m),
                prop::collection::vec((-1.0..1.0f64, 0.1..2.0f64), n),
            )
                .prop_map(|(objective, rows, senses, rhs, bounds)| LinearProgram {
                    objective,
                    rows,
                    senses: senses.into_iter().map(|s| [Sense::Le, Sense::Ge, Sense::Eq][s]).collect(),
                    rhs,
                    lower: bounds.iter().map(|b| b.0).collect(),
                    upper: bounds.iter().map(|b| b.0 + b.1).collect(),
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn matches_vertex_enumeration(lp in random_lp()) {
            match (lp_solve(&lp), vertex_oracle(&lp)) {
                (Ok(sol), Some(best)) => prop_assert!((sol.value - best).abs() <= 1e-8, "{} vs {}", sol.value, best),
                (Err(Error::Infeasible), None) => {}
                (got, want) => prop_assert!(false, "solver {:?}, oracle {:?}", got, want),
            }
        }
    }
}
