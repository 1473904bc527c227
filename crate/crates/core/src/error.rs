//! Error types shared across the crate.

use chrono::NaiveDate;
use thiserror::Error;

/// Errors raised by the model core (derivatives, integration).
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("total population is zero; the infection term beta*S*I/N is undefined")]
    ZeroPopulation,
    #[error("parameter `{name}` = {value} is outside its valid range [{min}, {max}]")]
    ParamOutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("step size dt = {0} must be positive and at most 1 day")]
    InvalidStep(f64),
    #[error("step size dt = {0} must divide one day exactly (e.g. 0.1, 0.05)")]
    StepNotDivisor(f64),
    #[error("compartment `{0}` is negative ({1}) in the initial state")]
    NegativeCompartment(&'static str, f64),
}

/// Errors raised while ingesting observed case data.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("required column `{0}` is missing from the CSV header")]
    MissingColumn(&'static str),
    #[error("row {row}: malformed date `{value}`")]
    MalformedDate { row: usize, value: String },
    #[error("row {row}: column `{column}` holds `{value}`, expected an integer count")]
    MalformedCount {
        row: usize,
        column: &'static str,
        value: String,
    },
    #[error("region `{0}` is not listed in the population config")]
    UnknownRegion(String),
    #[error("region `{region}`: non-contiguous dates, {prev} is followed by {next}")]
    NonContiguousDates {
        region: String,
        prev: NaiveDate,
        next: NaiveDate,
    },
    #[error("window {start}..={end} is outside the available range {avail_start}..={avail_end}")]
    WindowOutOfRange {
        start: NaiveDate,
        end: NaiveDate,
        avail_start: NaiveDate,
        avail_end: NaiveDate,
    },
    #[error("window start {0} is after window end {1}")]
    InvertedWindow(NaiveDate, NaiveDate),
    #[error("series for `{0}` is empty")]
    EmptySeries(String),
    #[error("population config line {0}: expected `region = count`")]
    MalformedConfigLine(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Errors raised by parameter regression.
#[derive(Debug, Error)]
pub enum FitError {
    #[error("fit window holds {0} days; at least {1} are required")]
    WindowTooShort(usize, usize),
    #[error("initial state infeasible: compartments exceed the population by {excess}")]
    InfeasibleInitialState { excess: f64 },
    #[error("bound for `{name}` is inverted: lower {lo} > upper {hi}")]
    InvertedBound { name: &'static str, lo: f64, hi: f64 },
    #[error("observed series `{series}` is constant over the fit window; its normalizer is zero")]
    DegenerateWindow { series: &'static str },
    #[error("no feasible start point found within bounds")]
    NoFeasibleStart,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors raised by scenario evaluation.
#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("observed series `{series}` is constant over the evaluation window; NMSE is undefined")]
    ConstantSeries { series: &'static str },
    #[error("predicted trajectory does not cover the evaluation dates {start}..={end}")]
    DateMismatch { start: NaiveDate, end: NaiveDate },
    #[error("horizon must start the day after the fit window ends ({expected}), got {got}")]
    HorizonGap { expected: NaiveDate, got: NaiveDate },
    #[error("forecast state infeasible: compartments exceed the population by {excess}")]
    InfeasibleState { excess: f64 },
    #[error("sweep range is empty")]
    EmptySweep,
    #[error("linear projection needs at least 2 observations up to the anchor, got {0}")]
    TooFewPoints(usize),
    #[error("anchor date {0} is outside the observed series")]
    AnchorOutOfRange(NaiveDate),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
