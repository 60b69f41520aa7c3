//! Discounted occupancy of an infinite-server queue fed by batches from a
//! Markov chain, with renewal arrivals: joint transforms, moments, workload,
//! their limits, and a Monte Carlo engine to check them against.

pub mod asymptotics;
pub mod deterministic;
pub mod distributions;
pub mod error;
pub mod joint;
pub mod kernel;
pub mod quad;
pub mod semimarkov;
pub mod simulator;
pub mod statespace;
pub mod transient;

pub use distributions::Distribution;
pub use error::{Error, Result};
pub use joint::{JointMatrix, Semantics};
pub use kernel::{ModelSpec, SMode, SVector};
pub use quad::{QuadMethod, QuadratureConfig};
pub use semimarkov::{embed, Embedding, Horizon, Method, MgfArgument, ModulatedMatrix, SemiMarkovSpec};
pub use simulator::{estimate, EstimateReport, InitialStates, Target, TargetEstimate};
pub use statespace::{ChainSpec, StateSpace};
