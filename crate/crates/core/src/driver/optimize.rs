//! Optimization loop and finite-difference gradient check.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::LoadTerm;
use crate::darcy::PressureState;
use crate::elasticity::ElasticState;
use crate::error::{Error, Result};
use crate::fields::DesignField;
use crate::mma::{mma_update, MmaState};

use super::problem::Problem;

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub compliance: f64,
    /// Volume measures `g_k` of the design evaluated at this iteration.
    pub volumes: Vec<f64>,
    /// Largest raw-variable change from the previous iterate (0 at the start).
    pub max_change: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunLog {
    pub records: Vec<IterationRecord>,
    pub wall_time: Duration,
}

/// Final state of a run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub log: RunLog,
    pub design: DesignField,
    pub pressure: PressureState,
    pub elastic: ElasticState,
}

/// Runs `max_iters` analyses starting from `start` (or the uniform initial
/// design). The design is updated between analyses, never after the last, so
/// the returned fields belong to the last logged record.
pub fn run_optimization_from(
    problem: &Problem,
    start: Option<DesignField>,
    max_iters: usize,
    mut observer: impl FnMut(&IterationRecord, &DesignField),
) -> Result<RunResult> {
    let clock = Instant::now();
    let n = problem.num_elements();
    let m = problem.num_vars();
    let mut design = match start {
        Some(d) => d,
        None => problem.initial_design()?,
    };
    let mut mma = MmaState::new(n * m, m, problem.config.optimizer.mma_settings())?;
    let mut log = RunLog::default();
    let mut scale = None;
    let mut max_change = 0.0;
    let mut last = None;
    for iteration in 1..=max_iters {
        let ev = problem
            .evaluate(&design, LoadTerm::Include)
            .map_err(|e| e.at_iteration(iteration))?;
        if !(ev.compliance.is_finite() && ev.compliance >= 0.0) {
            return Err(Error::SolverFailure {
                message: format!("compliance {} is not a finite non-negative value", ev.compliance),
                residual: f64::NAN,
            }
            .at_iteration(iteration));
        }
        let record = IterationRecord {
            iteration,
            compliance: ev.compliance,
            volumes: ev.volumes.clone(),
            max_change,
        };
        observer(&record, &design);
        log.records.push(record);
        let converged = problem
            .config
            .optimizer
            .change_tolerance
            .is_some_and(|t| iteration > 1 && max_change < t);
        if iteration == max_iters || converged {
            last = Some((ev.pressure, ev.elastic));
            break;
        }

        // objective normalized by its first value
        let c0 = *scale.get_or_insert(if ev.compliance > 0.0 { ev.compliance } else { 1.0 });
        let x = design.raw_flat();
        let df0: Vec<f64> = ev.d_compliance.iter().flatten().map(|v| v / c0).collect();
        let dg: Vec<Vec<f64>> = ev
            .d_constraints
            .iter()
            .map(|per_var| per_var.iter().flatten().copied().collect())
            .collect();
        let x_new = mma_update(&x, ev.compliance / c0, &df0, &ev.constraints, &dg, &mut mma)
            .map_err(|e| e.at_iteration(iteration))?;
        max_change = x
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        design
            .set_raw_flat(&x_new, &problem.filter)
            .map_err(|e| e.at_iteration(iteration))?;
    }
    let (pressure, elastic) = last.expect("at least one iteration");
    log.wall_time = clock.elapsed();
    Ok(RunResult {
        log,
        design,
        pressure,
        elastic,
    })
}

/// Runs the configured number of iterations from the default start.
pub fn run_optimization(problem: &Problem) -> Result<RunResult> {
    run_optimization_from(problem, None, problem.config.optimizer.max_iters, |_, _| {})
}

/// One compared gradient component.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub variable: usize,
    pub element: usize,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradientReport {
    pub samples: Vec<GradientSample>,
    /// Components at or below the noise floor, skipped.
    pub skipped: usize,
    pub max_relative_error: f64,
    /// Relative difference between the gradients with and without the load term.
    pub load_term_effect: f64,
}

/// Random feasible design with variables in `[0.2, 0.8]`.
pub fn random_design(problem: &Problem, seed: u64) -> Result<DesignField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.num_elements();
    let raw = (0..problem.num_vars())
        .map(|_| (0..n).map(|_| rng.random_range(0.2..0.8)).collect())
        .collect();
    problem.design_from_raw(raw)
}

/// Compares adjoint compliance gradients with central differences of the
/// full pipeline. `components` limits the number of checked entries
/// (randomly chosen); `None` checks all of them.
pub fn gradient_check(
    problem: &Problem,
    design: &DesignField,
    step: f64,
    components: Option<usize>,
    seed: u64,
) -> Result<GradientReport> {
    let ev = problem.evaluate(design, LoadTerm::Include)?;
    let fixed = problem.evaluate(design, LoadTerm::Exclude)?;
    let n = problem.num_elements();
    let m = problem.num_vars();
    let total = n * m;
    let flat: Vec<f64> = ev.d_compliance.iter().flatten().copied().collect();
    let gmax = flat.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let floor = 1e-12 * gmax;
    let indices: Vec<usize> = match components {
        Some(k) if k < total => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = sample(&mut rng, total, k).into_vec();
            v.sort_unstable();
            v
        }
        _ => (0..total).collect(),
    };
    let mut samples = Vec::new();
    let mut skipped = 0;
    for idx in indices {
        let (j, e) = (idx / n, idx % n);
        let adjoint = ev.d_compliance[j][e];
        if adjoint.abs() <= floor {
            skipped += 1;
            continue;
        }
        let shifted = |delta: f64| -> Result<f64> {
            let mut raw = design.raw().to_vec();
            raw[j][e] += delta;
            problem.compliance(&problem.design_from_raw(raw)?)
        };
        let fd = (shifted(step)? - shifted(-step)?) / (2.0 * step);
        samples.push(GradientSample {
            variable: j,
            element: e,
            adjoint,
            finite_difference: fd,
            relative_error: (fd - adjoint).abs() / adjoint.abs(),
        });
    }
    let max_relative_error = samples.iter().map(|s| s.relative_error).fold(0.0, f64::max);
    let diff: f64 = ev
        .d_compliance
        .iter()
        .flatten()
        .zip(fixed.d_compliance.iter().flatten())
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(GradientReport {
        samples,
        skipped,
        max_relative_error,
        load_term_effect: diff / norm,
    })
}
