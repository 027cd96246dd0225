//! JSON problem documents.

use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::problem::{discretize_continuous, uniform_grid, FiniteDistribution, LossFamily, TestingProblem};

/// `{"support": [...], "p": [...], "q": [...], "losses": {...}}`.
///
/// Support labels may be strings or any other JSON value, which is kept in
/// its compact JSON spelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<serde_json::Value>>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<LossFamily>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

/// `{"null": density, "alt": density, "grid": {"lo", "hi", "cells"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousDoc {
    pub null: Density,
    pub alt: Density,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub losses: Option<LossFamily>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnyProblemDoc {
    Discrete(ProblemDoc),
    Continuous(ContinuousDoc),
}

/// Renders a label value: strings verbatim, anything else as compact JSON.
pub fn label_text(v: &serde_json::Value) -> String {
    v.as_str().map_or_else(|| v.to_string(), str::to_string)
}

fn losses_or_default(l: &Option<LossFamily>) -> Result<LossFamily> {
    l.clone().map_or_else(|| LossFamily::linear_grid(100), Ok)
}

impl ProblemDoc {
    /// Missing losses default to the scenarios `b = 1..=100` with `L_b(0,1) = b`.
    pub fn build(&self) -> Result<TestingProblem> {
        let losses = losses_or_default(&self.losses)?;
        let (p, q) = match &self.support {
            Some(labels) => {
                let labels: Vec<String> = labels.iter().map(label_text).collect();
                (
                    FiniteDistribution::new(labels.clone(), self.p.clone())?,
                    FiniteDistribution::new(labels, self.q.clone())?,
                )
            }
            None => (FiniteDistribution::from_masses(self.p.clone())?, FiniteDistribution::from_masses(self.q.clone())?),
        };
        TestingProblem::new(p, q, losses)
    }

    pub fn from_problem(p: &TestingProblem) -> Self {
        Self {
            support: Some(p.labels().iter().map(|l| l.clone().into()).collect()),
            p: p.null().mass().to_vec(),
            q: p.alt().mass().to_vec(),
            losses: Some(p.losses().clone()),
        }
    }
}

impl ContinuousDoc {
    pub fn build(&self) -> Result<TestingProblem> {
        self.null.validate()?;
        self.alt.validate()?;
        let g = self.grid;
        if g.cells == 0 || !(g.lo < g.hi) {
            return Err(Error::InvalidConfig("grid needs lo < hi and at least one cell".into()));
        }
        let (null, alt) = (self.null, self.alt);
        discretize_continuous(|x| null.pdf(x), |x| alt.pdf(x), &uniform_grid(g.lo, g.hi, g.cells), losses_or_default(&self.losses)?)
    }
}

impl AnyProblemDoc {
    pub fn build(&self) -> Result<TestingProblem> {
        match self {
            AnyProblemDoc::Discrete(d) => d.build(),
            AnyProblemDoc::Continuous(c) => c.build(),
        }
    }
}

/// Parses either document shape and builds the problem.
pub fn parse_problem(json: &str) -> Result<TestingProblem> {
    let value: serde_json::Value = serde_json::from_str(json)?;
    problem_from_value(value)
}

pub fn problem_from_value(value: serde_json::Value) -> Result<TestingProblem> {
    let is_continuous = value.get("null").is_some();
    let doc = if is_continuous {
        AnyProblemDoc::Continuous(serde_json::from_value(value)?)
    } else {
        AnyProblemDoc::Discrete(serde_json::from_value(value)?)
    };
    doc.build()
}

pub fn read_problem(path: &std::path::Path) -> Result<TestingProblem> {
    parse_problem(&std::fs::read_to_string(path)?)
}
