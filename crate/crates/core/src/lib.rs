//! Coexistence model, event simulator and two-way time transfer analysis
//! for entangled-photon clock synchronization over hollow-core fiber that
//! also carries a classical frequency-transfer carrier.

pub mod coexistence;
pub mod coincidence;
pub mod config;
pub mod io;
pub mod link;
pub mod sim;
pub mod stability;
pub mod twtt;

pub use coexistence::{CarPoint, CoexistenceError, CoexistenceScenario, MaxDistance, PairSource, Projection, ProjectionToggle};
pub use coincidence::{CoincidenceError, CoincidenceHistogram, DelayEstimate, ExtractConfig, PeakFit};
pub use config::{Config, ConfigError, Preset, RunSettings};
pub use link::{ClassicalCarrier, DetectorModel, FiberLink, ModelError};
pub use sim::{ClockError, ScenarioStreams, SimError, SimRun, TimeTagStream};
pub use stability::{NoiseKind, PhaseSeries, StabilityCurve, StabilityError, StabilityPoint};
pub use twtt::{OffsetSample, OffsetSeries, SessionConfig, TwttError};
