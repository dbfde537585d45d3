//! Analytic results checked against Monte Carlo estimates.

use std::fmt;

use crate::error::Result;
use crate::model::MapModel;
use crate::montecarlo::{estimate_classical, estimate_reach, estimate_survival, within};
use crate::ruin::RuinEngine;

#[derive(Debug, Clone)]
pub struct AgreementConfig {
    pub paths: usize,
    pub seed: u64,
    /// Number of standard errors allowed.
    pub k: f64,
    pub reach_levels: Vec<f64>,
    pub survival_capitals: Vec<f64>,
    /// Level at which survival is truncated in simulation.
    pub x_max: f64,
    /// Extra allowance for the truncation bias.
    pub truncation: f64,
    /// `(u, x)` of the classical exit check.
    pub classical_exit: (f64, f64),
}

impl Default for AgreementConfig {
    fn default() -> Self {
        AgreementConfig {
            paths: 100_000,
            seed: 42,
            k: 3.0,
            reach_levels: vec![1.0, 5.0],
            survival_capitals: vec![0.0, 2.0],
            x_max: 40.0,
            truncation: 0.002,
            classical_exit: (1.0, 4.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub analytic: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub allowance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: String, analytic: f64, estimate: f64, stderr: f64, k: f64, slack: f64) -> Self {
        Check {
            name,
            analytic,
            estimate,
            stderr,
            allowance: k * stderr + slack,
            passed: within(analytic, estimate, stderr, k, slack),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: analytic {:.6} mc {:.6} se {:.6} |diff| {:.6} <= {:.6}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.analytic,
            self.estimate,
            self.stderr,
            (self.analytic - self.estimate).abs(),
            self.allowance
        )
    }
}

/// Run every check that applies to `model`.
///
/// Survival checks need positive drift and all states observed; they are
/// omitted otherwise.
pub fn run_agreement(model: &MapModel, config: &AgreementConfig) -> Result<Vec<Check>> {
    let engine = RuinEngine::new(model.clone())?;
    let n = model.states();
    let (paths, seed, k) = (config.paths, config.seed, config.k);
    let mut checks = Vec::new();

    for &x in &config.reach_levels {
        let exact = engine.reach_matrix(x)?.column_sum();
        let mc = estimate_reach(model, 0.0, x, paths, seed)?;
        for i in 0..n {
            checks.push(Check::new(
                format!("reach x={x} state={}", i + 1),
                exact[i],
                mc.rows.value[i],
                mc.rows.stderr[i],
                k,
                0.0,
            ));
        }
    }

    let observed = model.omega().iter().all(|&w| w > 0.0);
    if engine.drift().mu > 0.0 && observed {
        for &u in &config.survival_capitals {
            let exact = engine.survival(u)?;
            let mc = estimate_survival(model, u, config.x_max, paths, seed)?;
            for i in 0..n {
                checks.push(Check::new(
                    format!("survival u={u} state={}", i + 1),
                    exact[i],
                    mc.value[i],
                    mc.stderr[i],
                    k,
                    config.truncation,
                ));
            }
        }
    }

    let (u, x) = config.classical_exit;
    let exact = engine.classical_exit(u, x)?;
    let mc = estimate_classical(model, u, x, paths, seed)?;
    for i in 0..n {
        for j in 0..n {
            checks.push(Check::new(
                format!("classical exit u={u} x={x} entry=({},{})", i + 1, j + 1),
                exact[(i, j)],
                mc.matrix[(i, j)],
                mc.matrix_stderr[(i, j)],
                k,
                0.0,
            ));
        }
    }

    if engine.drift().mu > 0.0 {
        let exact = engine.classical_survival_at_zero()?;
        let mc = estimate_classical(model, 0.0, config.x_max, paths, seed)?;
        for i in 0..n {
            checks.push(Check::new(
                format!("classical survival u=0 state={}", i + 1),
                exact[i],
                mc.rows.value[i],
                mc.rows.stderr[i],
                k,
                0.0,
            ));
        }
    }
    Ok(checks)
}
