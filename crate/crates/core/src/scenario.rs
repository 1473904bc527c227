//! Counterfactual scenario machinery: forecast instances, traveler
//! injection, NMSE scoring and the sweep over injected case counts.
//!
//! Three instances are compared per region. The `without-travelers` instance
//! forecasts the evaluation window from parameters regressed on the fit
//! window alone. The `with-travelers(k)` instance is the same forecast after
//! k extra active cases are placed into the region at the forecast start.
//! The `ground-truth` instance regresses on the full period covering the
//! evaluation window and bounds the achievable error.

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ObservedSeries;
use crate::error::ScenarioError;
use crate::fit::FitResult;
use crate::model::{integrate, CompartmentState, Trajectory};

/// Which of the paper-style model instances produced an outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "travelers")]
pub enum InstanceKind {
    WithoutTravelers,
    WithTravelers(u32),
    GroundTruth,
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InstanceKind::WithoutTravelers => write!(f, "without-travelers"),
            InstanceKind::WithTravelers(k) => write!(f, "with-travelers({k})"),
            InstanceKind::GroundTruth => write!(f, "ground-truth"),
        }
    }
}

/// Compartment the injected travelers are placed into.
///
/// Travelers fleeing ahead of a lockdown are infected people who have not
/// entered the destination region's confirmed-case ledger, so the default is
/// the undetected infectious pool, which both seeds onward transmission and
/// surfaces in the confirmed counts as cases get detected. `Quarantined`
/// models arrivals that are immediately confirmed and isolated: they add to
/// the counts but never transmit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InjectionPool {
    Exposed,
    Infectious,
    Quarantined,
}

/// How injected cases enter the region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionSpec {
    pub pool: InjectionPool,
    /// Travelers are newcomers: the regional population grows by k. When
    /// false, the injected mass is debited from the susceptible pool instead.
    pub newcomers: bool,
}

impl Default for InjectionSpec {
    fn default() -> Self {
        InjectionSpec {
            pool: InjectionPool::Infectious,
            newcomers: true,
        }
    }
}

/// NMSE of a prediction against observations: three normalized squared-error
/// terms (total cases, active cases, deaths) and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nmse {
    pub total_cases: f64,
    pub active_cases: f64,
    pub deaths: f64,
    pub total: f64,
}

/// Normalized mean square error between a simulated trajectory and observed
/// data over the observation's date range.
///
/// Per-day errors compare simulated C = Q+R+D against T, simulated Q against
/// A and simulated D against K. Each term is normalized by the observed
/// series' squared deviation from its mean over the same window, so a
/// predictor pinned at the observed mean scores exactly 1 per term.
pub fn nmse(predicted: &Trajectory, actual: &ObservedSeries) -> Result<Nmse, ScenarioError> {
    let (start, end) = match (actual.first_date(), actual.last_date()) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(ScenarioError::DateMismatch {
                start: NaiveDate::MIN,
                end: NaiveDate::MIN,
            })
        }
    };

    let n = actual.records.len() as f64;
    let mean_t = actual.records.iter().map(|r| r.total).sum::<f64>() / n;
    let mean_a = actual.records.iter().map(|r| r.active).sum::<f64>() / n;
    let mean_k = actual.records.iter().map(|r| r.deaths).sum::<f64>() / n;

    let norm_t: f64 = actual.records.iter().map(|r| (r.total - mean_t).powi(2)).sum();
    let norm_a: f64 = actual.records.iter().map(|r| (r.active - mean_a).powi(2)).sum();
    let norm_k: f64 = actual.records.iter().map(|r| (r.deaths - mean_k).powi(2)).sum();
    for (name, norm) in [
        ("totale_casi", norm_t),
        ("totale_positivi", norm_a),
        ("deceduti", norm_k),
    ] {
        if norm <= 0.0 {
            return Err(ScenarioError::ConstantSeries { series: name });
        }
    }

    let (mut err_t, mut err_a, mut err_k) = (0.0, 0.0, 0.0);
    for rec in &actual.records {
        let state = predicted
            .state_at(rec.date)
            .ok_or(ScenarioError::DateMismatch { start, end })?;
        err_t += (state.confirmed() - rec.total).powi(2);
        err_a += (state.q - rec.active).powi(2);
        err_k += (state.d - rec.deaths).powi(2);
    }

    let total_cases = err_t / norm_t;
    let active_cases = err_a / norm_a;
    let deaths = err_k / norm_k;
    Ok(Nmse {
        total_cases,
        active_cases,
        deaths,
        total: total_cases + active_cases + deaths,
    })
}

/// One simulated instance: its trajectory over the evaluation horizon
/// (including the seeding day) and its NMSE against the observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub instance: InstanceKind,
    pub region: String,
    pub trajectory: Trajectory,
    pub nmse: Nmse,
}

/// Build the forecast seed state at the last fit-window day.
///
/// Q, R and D are re-anchored on that day's observations; E, I and P are
/// taken from the fitted trajectory, which is the model's own estimate of
/// the unobservable pools; S absorbs the remainder. The model clock keeps
/// running from the fit-window start so the time-varying rates continue
/// where the fit left them.
fn forecast_seed(
    fit: &FitResult,
    fit_window: &ObservedSeries,
    dt: f64,
) -> Result<CompartmentState, ScenarioError> {
    let fitted = fit.fitted_trajectory(fit_window, dt)?;
    let (_, fitted_end) = fitted.points.last().copied().expect("non-empty trajectory");
    let last_obs = fit_window
        .record_at(fit.window_end)
        .ok_or(ScenarioError::DateMismatch {
            start: fit.window_start,
            end: fit.window_end,
        })?;

    let occupied =
        fitted_end.e + fitted_end.i + fitted_end.p + last_obs.active + last_obs.recovered + last_obs.deaths;
    let s = fit.population - occupied;
    if s < 0.0 {
        return Err(ScenarioError::InfeasibleState { excess: -s });
    }
    Ok(CompartmentState {
        s,
        e: fitted_end.e,
        i: fitted_end.i,
        q: last_obs.active,
        r: last_obs.recovered,
        d: last_obs.deaths,
        p: fitted_end.p,
        t: fitted_end.t,
    })
}

fn inject(
    state: &CompartmentState,
    travelers: u32,
    spec: &InjectionSpec,
) -> Result<CompartmentState, ScenarioError> {
    let k = travelers as f64;
    let mut out = *state;
    match spec.pool {
        InjectionPool::Exposed => out.e += k,
        InjectionPool::Infectious => out.i += k,
        InjectionPool::Quarantined => out.q += k,
    }
    if !spec.newcomers {
        out.s -= k;
        if out.s < 0.0 {
            return Err(ScenarioError::InfeasibleState { excess: -out.s });
        }
    }
    Ok(out)
}

/// Run a forecast instance over `horizon` and score it.
///
/// The horizon must start the day after the fit window ends; its last
/// observed day is the seeding day. With `travelers` set, that many extra
/// active cases enter the seed state per `injection`.
pub fn run_instance(
    fit: &FitResult,
    fit_window: &ObservedSeries,
    travelers: Option<u32>,
    horizon: &ObservedSeries,
    injection: &InjectionSpec,
    dt: f64,
) -> Result<ScenarioOutcome, ScenarioError> {
    let expected = fit.window_end + chrono::Days::new(1);
    let got = horizon
        .first_date()
        .ok_or(ScenarioError::DateMismatch { start: expected, end: expected })?;
    if got != expected {
        return Err(ScenarioError::HorizonGap { expected, got });
    }

    let mut seed = forecast_seed(fit, fit_window, dt)?;
    if let Some(k) = travelers {
        seed = inject(&seed, k, injection)?;
    }

    let days = (horizon.last_date().unwrap() - fit.window_end).num_days() as usize;
    let trajectory = integrate(&seed, &fit.params, fit.window_end, days, dt)?;
    let score = nmse(&trajectory, horizon)?;

    Ok(ScenarioOutcome {
        instance: match travelers {
            Some(k) => InstanceKind::WithTravelers(k),
            None => InstanceKind::WithoutTravelers,
        },
        region: fit.region.clone(),
        trajectory,
        nmse: score,
    })
}

/// Score the ground-truth instance: the control regressed on the full
/// period, evaluated on the sub-window `horizon` of its own fit range.
pub fn run_ground_truth(
    fit: &FitResult,
    full_window: &ObservedSeries,
    horizon: &ObservedSeries,
    dt: f64,
) -> Result<ScenarioOutcome, ScenarioError> {
    let trajectory = fit.fitted_trajectory(full_window, dt)?;
    let score = nmse(&trajectory, horizon)?;
    Ok(ScenarioOutcome {
        instance: InstanceKind::GroundTruth,
        region: fit.region.clone(),
        trajectory,
        nmse: score,
    })
}

/// Result of sweeping the injected-traveler count over a range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub region: String,
    /// (k, NMSE total) per injected count, ascending in k.
    pub entries: Vec<(u32, f64)>,
    /// 5-point moving average of the NMSE column.
    pub smoothed: Vec<f64>,
    pub best_k: u32,
    pub best_nmse: f64,
}

/// Run one forecast per injected count over `range` and collect the NMSE
/// curve. Instances are independent simulations and run on the thread pool;
/// collection stays ordered by k so emitted files are byte-stable.
pub fn sweep_travelers(
    fit: &FitResult,
    fit_window: &ObservedSeries,
    horizon: &ObservedSeries,
    range: std::ops::RangeInclusive<u32>,
    injection: &InjectionSpec,
    dt: f64,
) -> Result<SweepResult, ScenarioError> {
    let ks: Vec<u32> = range.collect();
    if ks.is_empty() {
        return Err(ScenarioError::EmptySweep);
    }

    let entries: Vec<(u32, f64)> = ks
        .par_iter()
        .map(|&k| {
            run_instance(fit, fit_window, Some(k), horizon, injection, dt)
                .map(|outcome| (k, outcome.nmse.total))
        })
        .collect::<Result<_, _>>()?;

    let smoothed = moving_average(
        &entries.iter().map(|&(_, v)| v).collect::<Vec<_>>(),
        5,
    );

    // Argmin with ties broken towards the smallest k.
    let (mut best_k, mut best_nmse) = entries[0];
    for &(k, v) in &entries[1..] {
        if v < best_nmse {
            best_k = k;
            best_nmse = v;
        }
    }

    Ok(SweepResult {
        region: fit.region.clone(),
        entries,
        smoothed,
        best_k,
        best_nmse,
    })
}

/// Centered moving average with the window truncated at the edges, so the
/// output has the same length as the input.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if values.is_empty() || window <= 1 {
        return values.to_vec();
    }
    let radius = (window - 1) / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Ordinary least-squares projection of total cases.
///
/// Fits a line to the total-case series from its start through `anchor`
/// (inclusive) and evaluates it at `target`; negative projections clamp to
/// zero. This is the naive view of someone extrapolating early-epidemic
/// counts linearly.
pub fn linear_project(
    series: &ObservedSeries,
    anchor: NaiveDate,
    target: NaiveDate,
) -> Result<f64, ScenarioError> {
    let start = series
        .first_date()
        .ok_or(ScenarioError::AnchorOutOfRange(anchor))?;
    if anchor < start || anchor > series.last_date().unwrap() {
        return Err(ScenarioError::AnchorOutOfRange(anchor));
    }
    let points: Vec<(f64, f64)> = series
        .records
        .iter()
        .filter(|r| r.date <= anchor)
        .map(|r| ((r.date - start).num_days() as f64, r.total))
        .collect();
    if points.len() < 2 {
        return Err(ScenarioError::TooFewPoints(points.len()));
    }

    let n = points.len() as f64;
    let mean_x = points.iter().map(|(x, _)| x).sum::<f64>() / n;
    let mean_y = points.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|(x, _)| (x - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = mean_y - slope * mean_x;

    let tx = (target - start).num_days() as f64;
    Ok((intercept + slope * tx).max(0.0))
}
