//! Simulation and analysis of a dynamic contagious point process.
//!
//! Points in `R^d` carry a reproduction weight and a resource. Each step picks
//! a mother among all existing points with probability proportional to
//! weight and places the step's daughters at the mother plus random
//! displacements.
//!
//! * [`env`], [`displacement`]: environment sequences and displacement laws.
//! * [`process`]: forward simulation, backward sampling, exact enumeration
//!   and genealogy identities.
//! * [`chf`]: characteristic-function recursions and limits.
//! * [`asymptotics`]: limit constants and centerings of the weight regimes.
//! * [`stats`]: KS, total-variation and normality checks.
//!
//! ```
//! use contagion::displacement::DisplacementLaw;
//! use contagion::env::{EnvironmentSpec, InitialPoint, WeightRegime};
//! use contagion::process::ProcessState;
//! use contagion::rng::rng_from_seed;
//! use contagion::Model;
//!
//! let spec = EnvironmentSpec::new(WeightRegime::power_law(0.0), DisplacementLaw::rademacher());
//! let model = Model::from_spec(vec![InitialPoint::origin(1)], &spec, 10, 42)?;
//! let mut state = ProcessState::new(model.initial(), rng_from_seed(7))?;
//! state.run(model.env(), 10)?;
//! assert_eq!(state.len(), 11);
//! # Ok::<(), contagion::Error>(())
//! ```

pub mod asymptotics;
pub mod chf;
pub mod displacement;
pub mod env;
pub mod error;
pub mod model;
pub mod numeric;
pub mod process;
pub mod rng;
pub mod stats;
pub mod wsampler;

pub use error::{Error, Result};
pub use model::Model;

// Runs the guide's code listings as doctests.
#[cfg(doctest)]
pub mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/process.md")]
    pub mod process {}
    #[doc = include_str!("../../../book/src/environments.md")]
    pub mod environments {}
    #[doc = include_str!("../../../book/src/chf.md")]
    pub mod chf {}
    #[doc = include_str!("../../../book/src/genealogy.md")]
    pub mod genealogy {}
    #[doc = include_str!("../../../book/src/asymptotics.md")]
    pub mod asymptotics {}
    #[doc = include_str!("../../../book/src/statistics.md")]
    pub mod statistics {}
    #[doc = include_str!("../../../book/src/reproducibility.md")]
    pub mod reproducibility {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
