//! Parameter regression: recover model rates and the unobserved initial
//! exposed/infectious pools from an observed window.
//!
//! The objective is the same normalized three-term squared error used for
//! scenario scoring, evaluated over the fit window: simulated (C, Q, D)
//! against observed (T, A, K), each term normalized by the observed series'
//! squared deviation from its window mean. Minimization is multi-start
//! Nelder-Mead over a 10-dimensional box; restarts are seeded from a Halton
//! sequence so the whole fit is deterministic for a given seed.

pub mod nelder_mead;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DailyRecord, ObservedSeries};
use crate::error::FitError;
use crate::model::{integrate, CompartmentState, ModelParams};
use nelder_mead::{halton_point, minimize, NmOptions, NmOutcome};

/// Number of regressed quantities: eight rate parameters plus E0 and I0.
pub const DIM: usize = 10;

pub const PARAM_NAMES: [&str; DIM] = [
    "alpha", "beta", "gamma", "delta", "lambda0", "lambda1", "kappa0", "kappa1", "e0", "i0",
];

/// Minimum number of observed days a window must hold to be fitted.
pub const MIN_FIT_DAYS: usize = 4;

/// Box bounds for the regression vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBounds {
    pub lo: [f64; DIM],
    pub hi: [f64; DIM],
}

impl ParamBounds {
    /// Default bounds: every rate in [0, 1]/day except beta in [0, 3];
    /// E0 and I0 capped at 1% of the resident population.
    pub fn default_for_population(population: f64) -> Self {
        let seed_cap = 0.01 * population;
        ParamBounds {
            lo: [0.0; DIM],
            hi: [1.0, 3.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, seed_cap, seed_cap],
        }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        for j in 0..DIM {
            if self.lo[j] > self.hi[j] {
                return Err(FitError::InvertedBound {
                    name: PARAM_NAMES[j],
                    lo: self.lo[j],
                    hi: self.hi[j],
                });
            }
        }
        Ok(())
    }

    fn midpoint(&self) -> Vec<f64> {
        (0..DIM).map(|j| 0.5 * (self.lo[j] + self.hi[j])).collect()
    }

    fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        (0..DIM)
            .map(|j| self.lo[j] + unit[j] * (self.hi[j] - self.lo[j]))
            .collect()
    }

    fn contains(&self, x: &[f64]) -> bool {
        (0..DIM).all(|j| x[j] >= self.lo[j] && x[j] <= self.hi[j])
    }
}

/// Settings for one regression run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub bounds: ParamBounds,
    /// Quasi-random multi-start count.
    pub restarts: usize,
    /// Extra simplex passes restarted from the best point found.
    pub refinements: usize,
    pub max_iter: usize,
    pub tol: f64,
    /// Integration step in days.
    pub dt: f64,
    /// Offsets the Halton sequence; same seed, same fit, bit for bit.
    pub seed: u64,
}

impl FitOptions {
    pub fn for_population(population: f64) -> Self {
        FitOptions {
            bounds: ParamBounds::default_for_population(population),
            restarts: 16,
            refinements: 2,
            max_iter: 2000,
            tol: 1e-8,
            dt: 0.1,
            seed: 0,
        }
    }
}

/// Outcome of a regression: fitted rates, fitted initial latent pools and
/// bookkeeping about the optimization itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub region: String,
    pub population: f64,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub params: ModelParams,
    /// Fitted initial exposed pool at window start, persons.
    pub e0: f64,
    /// Fitted initial infectious pool at window start, persons.
    pub i0: f64,
    pub loss: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Build the full compartment state for the first window day.
///
/// Q, R, D come from the observation; E and I are the (fitted) latent pools;
/// P starts at zero and S absorbs the remainder of the population.
pub fn initial_state(
    first_day: &DailyRecord,
    population: f64,
    e0: f64,
    i0: f64,
) -> Result<CompartmentState, FitError> {
    let occupied = e0 + i0 + first_day.active + first_day.recovered + first_day.deaths;
    let s = population - occupied;
    if s < 0.0 {
        return Err(FitError::InfeasibleInitialState { excess: -s });
    }
    Ok(CompartmentState {
        s,
        e: e0,
        i: i0,
        q: first_day.active,
        r: first_day.recovered,
        d: first_day.deaths,
        p: 0.0,
        t: 0.0,
    })
}

/// Squared-deviation normalizers of the observed window.
#[derive(Debug, Clone, Copy)]
struct WindowNorms {
    nt: f64,
    na: f64,
    nk: f64,
}

fn window_norms(observed: &ObservedSeries) -> Result<WindowNorms, FitError> {
    let n = observed.records.len() as f64;
    let (mut mt, mut ma, mut mk) = (0.0, 0.0, 0.0);
    for r in &observed.records {
        mt += r.total;
        ma += r.active;
        mk += r.deaths;
    }
    let (mt, ma, mk) = (mt / n, ma / n, mk / n);
    let (mut nt, mut na, mut nk) = (0.0, 0.0, 0.0);
    for r in &observed.records {
        nt += (r.total - mt).powi(2);
        na += (r.active - ma).powi(2);
        nk += (r.deaths - mk).powi(2);
    }
    for (name, v) in [("totale_casi", nt), ("totale_positivi", na), ("deceduti", nk)] {
        if v <= 0.0 {
            return Err(FitError::DegenerateWindow { series: name });
        }
    }
    Ok(WindowNorms { nt, na, nk })
}

fn objective(
    params: &ModelParams,
    e0: f64,
    i0: f64,
    observed: &ObservedSeries,
    norms: &WindowNorms,
    dt: f64,
) -> f64 {
    let first = &observed.records[0];
    let init = match initial_state(first, observed.population, e0, i0) {
        Ok(state) => state,
        Err(_) => return f64::INFINITY,
    };
    let days = observed.records.len() - 1;
    let traj = match integrate(&init, params, first.date, days, dt) {
        Ok(t) => t,
        Err(_) => return f64::INFINITY,
    };
    let (mut et, mut ea, mut ek) = (0.0, 0.0, 0.0);
    for ((_, state), rec) in traj.points.iter().zip(&observed.records) {
        et += (state.confirmed() - rec.total).powi(2);
        ea += (state.q - rec.active).powi(2);
        ek += (state.d - rec.deaths).powi(2);
    }
    et / norms.nt + ea / norms.na + ek / norms.nk
}

/// Normalized squared-error loss of a candidate parameterization over an
/// observed window. Infeasible initializations yield +inf rather than an
/// error so optimizers can probe freely.
pub fn loss(params: &ModelParams, e0: f64, i0: f64, observed: &ObservedSeries, dt: f64) -> f64 {
    match window_norms(observed) {
        Ok(norms) => objective(params, e0, i0, observed, &norms, dt),
        Err(_) => f64::INFINITY,
    }
}

fn params_from_vector(x: &[f64]) -> ModelParams {
    ModelParams {
        alpha: x[0],
        beta: x[1],
        gamma: x[2],
        delta: x[3],
        lambda0: x[4],
        lambda1: x[5],
        kappa0: x[6],
        kappa1: x[7],
    }
}

/// Regress model parameters and initial latent pools from an observed window.
///
/// Runs `restarts` independent simplex searches from low-discrepancy start
/// points (plus the bound-box midpoint), keeps the best, then re-polishes it.
/// The returned result is deterministic for fixed inputs and seed.
pub fn fit(observed: &ObservedSeries, opts: &FitOptions) -> Result<FitResult, FitError> {
    if observed.records.len() < MIN_FIT_DAYS {
        return Err(FitError::WindowTooShort(observed.records.len(), MIN_FIT_DAYS));
    }
    opts.bounds.validate()?;
    let norms = window_norms(observed)?;

    let f = |x: &[f64]| {
        objective(
            &params_from_vector(x),
            x[8],
            x[9],
            observed,
            &norms,
            opts.dt,
        )
    };
    let nm_opts = NmOptions {
        max_iter: opts.max_iter,
        tol: opts.tol,
        ..NmOptions::default()
    };

    // Start points: bounds midpoint, then Halton points offset by the seed.
    let halton_offset = opts.seed.wrapping_mul(2_654_435_761) % 65_536;
    let starts: Vec<Vec<f64>> = std::iter::once(opts.bounds.midpoint())
        .chain(
            (1..opts.restarts.max(1))
                .map(|i| opts.bounds.from_unit(&halton_point(halton_offset + i as u64, DIM))),
        )
        .collect();

    let runs: Vec<NmOutcome> = starts
        .par_iter()
        .map(|x0| minimize(&f, x0, &opts.bounds.lo, &opts.bounds.hi, &nm_opts))
        .collect();

    // Pure reduction: min by loss, ties to the earliest restart.
    let mut best = runs
        .into_iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))
        .expect("at least one restart");
    let mut iterations: usize = best.iterations;
    let mut evaluations: usize = best.evaluations;

    for _ in 0..opts.refinements {
        let polished = minimize(&f, &best.x, &opts.bounds.lo, &opts.bounds.hi, &nm_opts);
        iterations += polished.iterations;
        evaluations += polished.evaluations;
        if polished.value <= best.value {
            best = polished;
        }
    }

    if !best.value.is_finite() {
        return Err(FitError::NoFeasibleStart);
    }
    debug_assert!(opts.bounds.contains(&best.x));

    Ok(FitResult {
        region: observed.region.clone(),
        population: observed.population,
        window_start: observed.records[0].date,
        window_end: observed.records[observed.records.len() - 1].date,
        params: params_from_vector(&best.x),
        e0: best.x[8],
        i0: best.x[9],
        loss: best.value,
        iterations,
        evaluations,
        converged: best.converged,
    })
}

impl FitResult {
    /// Re-simulate the fitted trajectory over its own window.
    pub fn fitted_trajectory(
        &self,
        observed: &ObservedSeries,
        dt: f64,
    ) -> Result<crate::model::Trajectory, FitError> {
        let first = &observed.records[0];
        let init = initial_state(first, self.population, self.e0, self.i0)?;
        let days = (self.window_end - self.window_start).num_days() as usize;
        Ok(integrate(&init, &self.params, first.date, days, dt)?)
    }
}
