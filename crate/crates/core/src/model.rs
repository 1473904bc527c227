//! Generalized SEIR (SEIQRDP) model core.
//!
//! Seven compartments: susceptible S, exposed E, infectious I, quarantined
//! (confirmed active) Q, recovered R, dead D and protected (insusceptible) P.
//! Flows:
//!
//! ```text
//!   S --beta*S*I/N--> E --gamma--> I --delta--> Q --lambda(t)--> R
//!   S --alpha--> P                              Q --kappa(t)---> D
//! ```
//!
//! The quarantined pool does not transmit; only I drives new infections.
//! The cure rate lambda(t) rises towards an asymptote and the mortality
//! kappa(t) decays, both measured on the model clock `t` (days since the
//! instance's reference day). All flows conserve the total population.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Compartment populations at one instant, plus the model-clock time in days.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompartmentState {
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub q: f64,
    pub r: f64,
    pub d: f64,
    pub p: f64,
    /// Days since the reference day of this model instance.
    pub t: f64,
}

impl CompartmentState {
    /// Total population N = S+E+I+Q+R+D+P.
    pub fn total(&self) -> f64 {
        self.s + self.e + self.i + self.q + self.r + self.d + self.p
    }

    /// Total confirmed cases C = Q+R+D, the quantity reported as `totale_casi`.
    pub fn confirmed(&self) -> f64 {
        self.q + self.r + self.d
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("S", self.s),
            ("E", self.e),
            ("I", self.i),
            ("Q", self.q),
            ("R", self.r),
            ("D", self.d),
            ("P", self.p),
        ] {
            if !(v >= 0.0) {
                return Err(ModelError::NegativeCompartment(name, v));
            }
        }
        if !(self.total() > 0.0) {
            return Err(ModelError::ZeroPopulation);
        }
        Ok(())
    }
}

/// Rate constants of the model. All rates are per day.
///
/// The time-varying rates are parametric curves:
/// cure `lambda(t) = lambda0 * (1 - exp(-lambda1 * t))` and mortality
/// `kappa(t) = kappa0 * exp(-kappa1 * t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Protection rate: susceptibles withdrawn to the insusceptible pool.
    pub alpha: f64,
    /// Infection rate of the S * I / N contact term.
    pub beta: f64,
    /// Inverse of the average latent time.
    pub gamma: f64,
    /// Inverse of the average time an infectious case circulates before
    /// confirmation/quarantine.
    pub delta: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub kappa0: f64,
    pub kappa1: f64,
}

/// Sanity cap for per-day rate constants.
pub const MAX_RATE: f64 = 10.0;

impl ModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bounded = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda0", self.lambda0),
            ("kappa0", self.kappa0),
        ];
        for (name, v) in bounded {
            if !(0.0..=MAX_RATE).contains(&v) {
                return Err(ModelError::ParamOutOfRange {
                    name,
                    value: v,
                    min: 0.0,
                    max: MAX_RATE,
                });
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("kappa1", self.kappa1)] {
            if !(v >= 0.0) {
                return Err(ModelError::ParamOutOfRange {
                    name,
                    value: v,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        Ok(())
    }

    /// Cure rate lambda(t), non-decreasing in `t`, asymptoting to `lambda0`.
    pub fn cure_rate(&self, t: f64) -> f64 {
        self.lambda0 * (1.0 - (-self.lambda1 * t).exp())
    }

    /// Mortality rate kappa(t), non-increasing in `t`, starting at `kappa0`.
    pub fn mortality_rate(&self, t: f64) -> f64 {
        self.kappa0 * (-self.kappa1 * t).exp()
    }
}

/// Per-compartment time derivatives, persons per day.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub ds: f64,
    pub de: f64,
    pub di: f64,
    pub dq: f64,
    pub dr: f64,
    pub dd: f64,
    pub dp: f64,
}

impl Derivatives {
    pub fn sum(&self) -> f64 {
        self.ds + self.de + self.di + self.dq + self.dr + self.dd + self.dp
    }
}

/// Right-hand side of the ODE system at time `t` on the model clock.
///
/// Each flow is computed once and appears exactly once as an inflow and once
/// as an outflow, so the seven derivatives sum to zero up to round-off.
pub fn derivatives(
    state: &CompartmentState,
    params: &ModelParams,
    t: f64,
) -> Result<Derivatives, ModelError> {
    let n = state.total();
    if !(n > 0.0) {
        return Err(ModelError::ZeroPopulation);
    }
    let infection = params.beta * state.s * state.i / n;
    let protection = params.alpha * state.s;
    let latency = params.gamma * state.e;
    let detection = params.delta * state.i;
    let recovery = params.cure_rate(t) * state.q;
    let death = params.mortality_rate(t) * state.q;

    Ok(Derivatives {
        ds: -infection - protection,
        de: infection - latency,
        di: latency - detection,
        dq: detection - recovery - death,
        dr: recovery,
        dd: death,
        dp: protection,
    })
}

/// One classical Runge-Kutta 4 step of size `dt` days.
///
/// Compartments driven below zero by discretization error are clamped to
/// zero; the clamped mass is returned so callers can track it.
pub fn step_rk4(
    state: &CompartmentState,
    params: &ModelParams,
    dt: f64,
) -> Result<(CompartmentState, f64), ModelError> {
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(ModelError::InvalidStep(dt));
    }

    let advance = |base: &CompartmentState, k: &Derivatives, h: f64| CompartmentState {
        s: base.s + h * k.ds,
        e: base.e + h * k.de,
        i: base.i + h * k.di,
        q: base.q + h * k.dq,
        r: base.r + h * k.dr,
        d: base.d + h * k.dd,
        p: base.p + h * k.dp,
        t: base.t + h,
    };

    let k1 = derivatives(state, params, state.t)?;
    let mid1 = advance(state, &k1, dt / 2.0);
    let k2 = derivatives(&mid1, params, mid1.t)?;
    let mid2 = advance(state, &k2, dt / 2.0);
    let k3 = derivatives(&mid2, params, mid2.t)?;
    let end = advance(state, &k3, dt);
    let k4 = derivatives(&end, params, end.t)?;

    let mut next = CompartmentState {
        s: state.s + dt / 6.0 * (k1.ds + 2.0 * k2.ds + 2.0 * k3.ds + k4.ds),
        e: state.e + dt / 6.0 * (k1.de + 2.0 * k2.de + 2.0 * k3.de + k4.de),
        i: state.i + dt / 6.0 * (k1.di + 2.0 * k2.di + 2.0 * k3.di + k4.di),
        q: state.q + dt / 6.0 * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq),
        r: state.r + dt / 6.0 * (k1.dr + 2.0 * k2.dr + 2.0 * k3.dr + k4.dr),
        d: state.d + dt / 6.0 * (k1.dd + 2.0 * k2.dd + 2.0 * k3.dd + k4.dd),
        p: state.p + dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp),
        t: state.t + dt,
    };

    let mut clamped = 0.0;
    for v in [
        &mut next.s,
        &mut next.e,
        &mut next.i,
        &mut next.q,
        &mut next.r,
        &mut next.d,
        &mut next.p,
    ] {
        if *v < 0.0 {
            clamped += -*v;
            *v = 0.0;
        }
    }
    Ok((next, clamped))
}

/// A simulated trajectory with one snapshot per day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<(NaiveDate, CompartmentState)>,
    /// Population of the initial state; the flow conserves it.
    pub population: f64,
    /// Total mass clamped away at zero across all steps.
    pub clamped_mass: f64,
}

impl Trajectory {
    pub fn state_at(&self, date: NaiveDate) -> Option<&CompartmentState> {
        self.points
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .map(|idx| &self.points[idx].1)
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.points.first().map(|(d, _)| *d)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.points.last().map(|(d, _)| *d)
    }
}

/// Integrate daily snapshots for `days` days starting from `initial`.
///
/// Day 0 of the result is the initial state itself. `dt` must divide one day
/// exactly so that every reported snapshot falls on a step boundary.
pub fn integrate(
    initial: &CompartmentState,
    params: &ModelParams,
    start_date: NaiveDate,
    days: usize,
    dt: f64,
) -> Result<Trajectory, ModelError> {
    params.validate()?;
    initial.validate()?;
    if !(dt > 0.0 && dt <= 1.0) {
        return Err(ModelError::InvalidStep(dt));
    }
    let steps_per_day = 1.0 / dt;
    if (steps_per_day - steps_per_day.round()).abs() > 1e-9 {
        return Err(ModelError::StepNotDivisor(dt));
    }
    let steps_per_day = steps_per_day.round() as usize;

    let population = initial.total();
    let mut points = Vec::with_capacity(days + 1);
    points.push((start_date, *initial));

    let mut state = *initial;
    let mut clamped_mass = 0.0;
    for day in 1..=days {
        for _ in 0..steps_per_day {
            let (next, clamped) = step_rk4(&state, params, dt)?;
            state = next;
            clamped_mass += clamped;
        }
        points.push((start_date + chrono::Days::new(day as u64), state));
    }

    if clamped_mass > 1e-6 * population {
        log::warn!(
            "integration clamped {:.3e} persons over {} days ({:.1e} of the population)",
            clamped_mass,
            days,
            clamped_mass / population
        );
    }

    Ok(Trajectory {
        points,
        population,
        clamped_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn zero_params() -> ModelParams {
        ModelParams {
            alpha: 0.0,
            beta: 0.0,
            gamma: 0.0,
            delta: 0.0,
            lambda0: 0.0,
            lambda1: 0.0,
            kappa0: 0.0,
            kappa1: 0.0,
        }
    }

    #[test]
    fn cure_rate_is_zero_at_t0() {
        let p = ModelParams {
            lambda0: 0.1,
            lambda1: 0.7,
            ..zero_params()
        };
        assert_eq!(p.cure_rate(0.0), 0.0);
    }

    #[test]
    fn cure_rate_approaches_asymptote() {
        let p = ModelParams {
            lambda0: 0.1,
            lambda1: 0.05,
            ..zero_params()
        };
        assert_relative_eq!(p.cure_rate(1e6), 0.1, max_relative = 1e-12);
    }

    #[test]
    fn cure_rate_hand_evaluated() {
        // 0.08 * (1 - exp(-0.02 * 10)), evaluated with a scalar calculator.
        let p = ModelParams {
            lambda0: 0.08,
            lambda1: 0.02,
            ..zero_params()
        };
        assert_relative_eq!(p.cure_rate(10.0), 0.014501539753761452, epsilon = 1e-15);
    }

    #[test]
    fn mortality_rate_starts_at_kappa0_and_decays() {
        let p = ModelParams {
            kappa0: 0.05,
            kappa1: 0.1,
            ..zero_params()
        };
        assert_eq!(p.mortality_rate(0.0), 0.05);
        assert!(p.mortality_rate(1e6) < 1e-12);
    }

    #[test]
    fn mortality_rate_hand_evaluated() {
        // 0.04 * exp(-0.03 * 20), evaluated with a scalar calculator.
        let p = ModelParams {
            kappa0: 0.04,
            kappa1: 0.03,
            ..zero_params()
        };
        assert_relative_eq!(p.mortality_rate(20.0), 0.021952465443761056, epsilon = 1e-15);
    }

    #[test]
    fn derivatives_all_zero_without_active_flows() {
        let state = CompartmentState {
            s: 1000.0,
            e: 0.0,
            i: 0.0,
            q: 0.0,
            r: 5.0,
            d: 1.0,
            p: 0.0,
            t: 0.0,
        };
        let k = derivatives(&state, &zero_params(), 0.0).unwrap();
        assert_eq!(k.sum(), 0.0);
        assert_eq!(k.ds, 0.0);
        assert_eq!(k.dq, 0.0);
    }

    #[test]
    fn derivatives_zero_when_no_infectious_seed() {
        let params = ModelParams {
            beta: 1.5,
            ..zero_params()
        };
        let state = CompartmentState {
            s: 10_000.0,
            e: 0.0,
            i: 0.0,
            q: 0.0,
            r: 0.0,
            d: 0.0,
            p: 0.0,
            t: 3.0,
        };
        let k = derivatives(&state, &params, 3.0).unwrap();
        for v in [k.ds, k.de, k.di, k.dq, k.dr, k.dd, k.dp] {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn derivatives_hand_evaluated_line_by_line() {
        // S=9000, E=500, I=100, Q=300, R=50, D=30, P=20 so N=10000 exactly.
        // lambda(50) = 0.05*(1-e^-50) ~= 0.05, kappa(50) = 0.02 (kappa1=0).
        let state = CompartmentState {
            s: 9000.0,
            e: 500.0,
            i: 100.0,
            q: 300.0,
            r: 50.0,
            d: 30.0,
            p: 20.0,
            t: 50.0,
        };
        let params = ModelParams {
            alpha: 0.01,
            beta: 0.5,
            gamma: 0.2,
            delta: 0.1,
            lambda0: 0.05,
            lambda1: 1.0,
            kappa0: 0.02,
            kappa1: 0.0,
        };
        let k = derivatives(&state, &params, state.t).unwrap();
        assert_relative_eq!(k.ds, -135.0, epsilon = 1e-9);
        assert_relative_eq!(k.de, -55.0, epsilon = 1e-9);
        assert_relative_eq!(k.di, 90.0, epsilon = 1e-9);
        assert_relative_eq!(k.dq, -11.0, epsilon = 1e-9);
        assert_relative_eq!(k.dr, 15.0, epsilon = 1e-9);
        assert_relative_eq!(k.dd, 6.0, epsilon = 1e-9);
        assert_relative_eq!(k.dp, 90.0, epsilon = 1e-9);
        assert!(k.sum().abs() <= 1e-12 * 135.0);
    }

    #[test]
    fn derivatives_reject_zero_population() {
        let state = CompartmentState {
            s: 0.0,
            e: 0.0,
            i: 0.0,
            q: 0.0,
            r: 0.0,
            d: 0.0,
            p: 0.0,
            t: 0.0,
        };
        assert!(matches!(
            derivatives(&state, &zero_params(), 0.0),
            Err(ModelError::ZeroPopulation)
        ));
    }

    #[test]
    fn zero_field_leaves_state_unchanged() {
        let state = CompartmentState {
            s: 500.0,
            e: 10.0,
            i: 5.0,
            q: 2.0,
            r: 1.0,
            d: 0.0,
            p: 0.0,
            t: 0.0,
        };
        let (next, clamped) = step_rk4(&state, &zero_params(), 0.25).unwrap();
        assert_eq!(clamped, 0.0);
        assert_eq!(next.s, state.s);
        assert_eq!(next.q, state.q);
        assert_eq!(next.t, 0.25);
    }

    /// Pure decay subsystem dS/dt = -alpha*S has the analytic solution
    /// S(T) = S0 * exp(-alpha*T), used as the integration oracle.
    fn decay_error(dt: f64) -> f64 {
        let alpha = 0.3;
        let days = 10;
        let params = ModelParams {
            alpha,
            ..zero_params()
        };
        let initial = CompartmentState {
            s: 1_000_000.0,
            e: 0.0,
            i: 0.0,
            q: 0.0,
            r: 0.0,
            d: 0.0,
            p: 0.0,
            t: 0.0,
        };
        let traj = integrate(&initial, &params, date(2020, 3, 1), days, dt).unwrap();
        let exact = 1_000_000.0 * (-alpha * days as f64).exp();
        (traj.points.last().unwrap().1.s - exact).abs()
    }

    #[test]
    fn rk4_matches_analytic_decay() {
        // O(dt^4) global error: at dt=0.1 the absolute error on 1e6 persons
        // stays far below one person.
        assert!(decay_error(0.1) < 1e-2);
    }

    #[test]
    fn rk4_error_shrinks_sixteen_fold_when_dt_halves() {
        let ratio = decay_error(0.2) / decay_error(0.1);
        assert!(
            (12.0..=20.0).contains(&ratio),
            "convergence ratio {ratio} outside [12, 20]"
        );
    }

    #[test]
    fn integrate_zero_days_returns_single_entry() {
        let initial = CompartmentState {
            s: 100.0,
            e: 1.0,
            i: 1.0,
            q: 0.0,
            r: 0.0,
            d: 0.0,
            p: 0.0,
            t: 0.0,
        };
        let traj = integrate(&initial, &zero_params(), date(2020, 3, 1), 0, 0.1).unwrap();
        assert_eq!(traj.points.len(), 1);
        assert_eq!(traj.points[0].1, initial);
    }

    #[test]
    fn integrate_all_zero_params_is_constant() {
        let initial = CompartmentState {
            s: 100.0,
            e: 2.0,
            i: 3.0,
            q: 4.0,
            r: 5.0,
            d: 6.0,
            p: 7.0,
            t: 0.0,
        };
        let traj = integrate(&initial, &zero_params(), date(2020, 3, 1), 30, 0.1).unwrap();
        assert_eq!(traj.points.len(), 31);
        for (_, st) in &traj.points {
            assert_eq!(st.s, initial.s);
            assert_eq!(st.q, initial.q);
            assert_eq!(st.d, initial.d);
        }
    }

    #[test]
    fn integrate_rejects_non_divisor_step() {
        let initial = CompartmentState {
            s: 100.0,
            e: 0.0,
            i: 0.0,
            q: 0.0,
            r: 0.0,
            d: 0.0,
            p: 0.0,
            t: 0.0,
        };
        assert!(matches!(
            integrate(&initial, &zero_params(), date(2020, 3, 1), 5, 0.3),
            Err(ModelError::StepNotDivisor(_))
        ));
    }

    #[test]
    fn trajectory_dates_advance_by_one_day() {
        let initial = CompartmentState {
            s: 100.0,
            e: 1.0,
            i: 1.0,
            q: 0.0,
            r: 0.0,
            d: 0.0,
            p: 0.0,
            t: 0.0,
        };
        let traj = integrate(&initial, &zero_params(), date(2020, 2, 28), 3, 0.5).unwrap();
        let dates: Vec<_> = traj.points.iter().map(|(d, _)| *d).collect();
        assert_eq!(
            dates,
            vec![
                date(2020, 2, 28),
                date(2020, 2, 29),
                date(2020, 3, 1),
                date(2020, 3, 2)
            ]
        );
        assert_eq!(traj.state_at(date(2020, 3, 1)), Some(&traj.points[2].1));
        assert_eq!(traj.state_at(date(2020, 3, 9)), None);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_params() -> impl Strategy<Value = ModelParams> {
            (
                0.0..0.5f64,
                0.0..3.0f64,
                0.0..1.0f64,
                0.0..1.0f64,
                0.0..0.5f64,
                0.0..1.0f64,
                0.0..0.2f64,
                0.0..1.0f64,
            )
                .prop_map(
                    |(alpha, beta, gamma, delta, lambda0, lambda1, kappa0, kappa1)| ModelParams {
                        alpha,
                        beta,
                        gamma,
                        delta,
                        lambda0,
                        lambda1,
                        kappa0,
                        kappa1,
                    },
                )
        }

        fn arb_state() -> impl Strategy<Value = CompartmentState> {
            (
                1.0..1e7f64,
                0.0..1e5f64,
                0.0..1e5f64,
                0.0..1e5f64,
                0.0..1e5f64,
                0.0..1e5f64,
                0.0..1e6f64,
                0.0..60.0f64,
            )
                .prop_map(|(s, e, i, q, r, d, p, t)| CompartmentState {
                    s,
                    e,
                    i,
                    q,
                    r,
                    d,
                    p,
                    t,
                })
        }

        proptest! {
            #[test]
            fn derivative_sum_vanishes(state in arb_state(), params in arb_params()) {
                let k = derivatives(&state, &params, state.t).unwrap();
                let scale = [k.ds, k.de, k.di, k.dq, k.dr, k.dd, k.dp]
                    .iter()
                    .map(|v| v.abs())
                    .fold(1.0, f64::max);
                prop_assert!(k.sum().abs() <= 1e-12 * scale);
            }

            #[test]
            fn accumulators_never_decrease(state in arb_state(), params in arb_params()) {
                let traj = integrate(&state, &params, NaiveDate::from_ymd_opt(2020, 3, 1).unwrap(), 20, 0.1).unwrap();
                for pair in traj.points.windows(2) {
                    prop_assert!(pair[1].1.d >= pair[0].1.d - 1e-9);
                    prop_assert!(pair[1].1.r >= pair[0].1.r - 1e-9);
                }
            }

            #[test]
            fn cure_rate_monotone_up(params in arb_params(), a in 0.0..100.0f64, h in 0.0..50.0f64) {
                prop_assert!(params.cure_rate(a + h) >= params.cure_rate(a));
            }

            #[test]
            fn mortality_rate_monotone_down(params in arb_params(), a in 0.0..100.0f64, h in 0.0..50.0f64) {
                prop_assert!(params.mortality_rate(a + h) <= params.mortality_rate(a));
            }
        }
    }
}
