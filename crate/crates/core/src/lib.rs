//! Globally-stable learning of Littlestone classes and its private wrapper.

pub mod bits;
pub mod concept;
pub mod dp;
pub mod error;
pub mod harness;
pub mod littlestone;
pub mod pipeline;
pub mod rng;
pub mod sampler;
pub mod soa;

pub use concept::{
    empirical_loss, mistakes, population_loss, ConceptClass, DomainPoint, Hypothesis, Label,
    LabeledExample, RealizableDistribution, Sample,
};
pub use dp::PrivacyParams;
pub use error::{Error, Result};
pub use littlestone::{
    find_shattered_tree, ldim, ldim_by_search, verify_shattered, LdimSolver, LdimValue, MistakeTree,
};
pub use pipeline::{m_params, private_learn, LearnResult, MParams};
pub use sampler::{algorithm_g, sample_dk_mc, GOutput, SampleResult, StabilityParams};
pub use soa::{soa_run, Soa, SoaRunResult, SoaState};
