//! Small named problems used across tests, examples and the guide.

use crate::problem::{discretize_continuous, uniform_grid, FiniteDistribution, LossFamily, TestingProblem};
use crate::density::Density;

/// Scenarios `{1, 2}` with `L(0,1) = (2, 4)` and `L(1,0) = (1, 1)`.
pub fn tp1_losses() -> LossFamily {
    LossFamily::from_losses(vec![2.0, 4.0], vec![1.0, 1.0]).expect("valid losses")
}

/// Two points, `P = (0.5, 0.5)`, `Q = (0.2, 0.8)`, so `Λ = (0.4, 1.6)`.
pub fn tp1() -> TestingProblem {
    let p = FiniteDistribution::from_masses(vec![0.5, 0.5]).expect("valid masses");
    let q = FiniteDistribution::from_masses(vec![0.2, 0.8]).expect("valid masses");
    TestingProblem::new(p, q, tp1_losses()).expect("valid problem")
}

/// Losses with the given type-I values and unit type-II losses.
pub fn losses(type1: &[f64]) -> LossFamily {
    LossFamily::from_losses(type1.to_vec(), vec![1.0; type1.len()]).expect("valid losses")
}

/// Four points, uniform `P`, `Q = (0.1, 0.2, 0.3, 0.4)`, so `Λ = (0.4, 0.8, 1.2, 1.6)`.
pub fn u4(losses: LossFamily) -> TestingProblem {
    let labels: Vec<String> = (1..=4).map(|i| i.to_string()).collect();
    let p = FiniteDistribution::new(labels.clone(), vec![0.25; 4]).expect("valid masses");
    let q = FiniteDistribution::new(labels, vec![0.1, 0.2, 0.3, 0.4]).expect("valid masses");
    TestingProblem::new(p, q, losses).expect("valid problem")
}

/// Scenarios `b = 1..=100` with `L_b(0,1) = b` and `L_b(1,0) = 1`.
pub fn grid_losses() -> LossFamily {
    LossFamily::linear_grid(100).expect("valid losses")
}

/// Two fair-coin flips under `P`, two `0.8`-coins under `Q`.
pub fn rb1(losses: LossFamily) -> TestingProblem {
    let labels: Vec<String> = ["(0,0)", "(0,1)", "(1,0)", "(1,1)"].iter().map(|s| s.to_string()).collect();
    let p = FiniteDistribution::new(labels.clone(), vec![0.25; 4]).expect("valid masses");
    let q = FiniteDistribution::new(labels, vec![0.04, 0.16, 0.16, 0.64]).expect("valid masses");
    TestingProblem::new(p, q, losses).expect("valid problem")
}

/// Number of heads in each RB1 outcome.
pub fn rb1_sum() -> Vec<u32> {
    vec![0, 1, 1, 2]
}

/// `N(0, 1)` against `N(1, 1)`, discretized on `cells` equal cells of `[-6, 7]`.
pub fn normal_shift(cells: usize, losses: LossFamily) -> TestingProblem {
    let null = Density::Normal { mean: 0.0, sd: 1.0 };
    let alt = Density::Normal { mean: 1.0, sd: 1.0 };
    discretize_continuous(|x| null.pdf(x), |x| alt.pdf(x), &uniform_grid(-6.0, 7.0, cells), losses)
        .expect("valid grid problem")
}
