//! Cavity QED simulator: driven cavity coupled to one or two two-level atoms.
//!
//! Master-equation steady states and two-time correlations, closed-form
//! weak-field results, and homodyne/photocount quantum trajectories with a
//! conditional correlator.

pub mod correlator;
pub mod error;
pub mod hilbert;
pub mod linalg;
pub mod liouvillian;
pub mod params;
pub mod qrt;
pub mod rng;
pub mod scalar;
pub mod spectrum;
pub mod state;
pub mod steady;
pub mod trajectory;
pub mod weakfield;

pub use error::{CqedError, Result};
pub use hilbert::{HilbertSpace, OperatorMatrix, SystemOperators};
pub use linalg::{CMatrix, C64};
pub use liouvillian::{liouvillian, Superoperator};
pub use params::{DerivedParams, Rates, SystemParams};
pub use scalar::Real;
pub use steady::{calibrate_converged, calibrate_drive, converge_nmax, steady_state, DensityOperator, SteadyMoments, SteadySolution};

pub use state::PureState;
pub use trajectory::{Channel, EventKind, Mode, PriorForcing, Timing, TrajectoryRecord, TrajectorySystem, WindowSpec};
pub use correlator::{collect_windows, WindowSums};
pub use qrt::{fwhm_point, qrt_spectrum, FwhmPoint};
pub use weakfield::{WeakFieldConstants, WeakFieldConstants32, WeakFieldConstants64};

pub type DerivedParams64 = DerivedParams<f64>;
pub type DerivedParams32 = DerivedParams<f32>;
