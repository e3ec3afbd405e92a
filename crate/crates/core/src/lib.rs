//! Counterfactual harm and benefit over discrete structural causal models,
//! harm-penalized decisions, a closed form for Gaussian additive-noise
//! models, and constructions of environments in which factual objectives
//! are harmful.

pub mod adversary;
pub mod dose;
pub mod error;
pub mod format;
pub mod harm;
pub mod hetanm;
pub mod model_file;
pub mod random;
pub mod scm;
pub mod verify;
pub mod zoo;

pub use adversary::{ActionUtilities, CfiModel};
pub use error::{Error, Result};
pub use harm::{HarmEngine, HarmReport, Objective, UtilityTable};
pub use hetanm::{HarmInputs, HetAnm};
pub use model_file::{load_model, save_model, LoadedModel};
pub use scm::{Assignment, DiscreteScm, Intervention, ScmBuilder};
