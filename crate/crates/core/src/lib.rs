//! Generalized SEIR (SEIQRDP) modelling of regional COVID-19 case data:
//! ODE simulation, parameter regression from observed windows, and
//! counterfactual scenarios that inject a small number of extra active cases
//! ("travelers") into a fitted region and score the effect with a normalized
//! mean square error.
//!
//! The crate is organized around four modules:
//!
//! * [`model`] — the seven-compartment ODE right-hand side, time-varying
//!   cure/mortality rates and a fixed-step RK4 integrator.
//! * [`data`] — ingestion of the Protezione Civile per-region daily CSV and
//!   windowing of observed series.
//! * [`fit`] — bounded multi-start Nelder-Mead regression of the model
//!   parameters and initial latent pools.
//! * [`scenario`] — the three forecast instances, NMSE scoring, the traveler
//!   sweep and the naive linear projection.
//!
//! Everything is deterministic: fixed-step integration, Halton-seeded
//! restarts and ordered parallel collection, so identical inputs produce
//! bit-identical outputs.

pub mod data;
pub mod error;
pub mod fit;
pub mod model;
pub mod scenario;

pub use data::{DailyRecord, DataWarning, ObservedSeries, ParsedDataset, PopulationConfig};
pub use error::{DataError, FitError, ModelError, ScenarioError};
pub use fit::{FitOptions, FitResult, ParamBounds};
pub use model::{CompartmentState, ModelParams, Trajectory};
pub use scenario::{
    InjectionPool, InjectionSpec, InstanceKind, Nmse, ScenarioOutcome, SweepResult,
};
