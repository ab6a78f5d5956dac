//! The genetic core: chromosome codec, population, seed selection, mutation
//! and the campaign loop.

pub mod campaign;
pub mod chromosome;
pub mod generate;
pub mod mutation;
pub mod select;

pub use campaign::{run_campaign, CampaignObserver, CampaignOutput, CampaignSettings, GenStats, Provenance, SuiteEntry};
pub use chromosome::{decode, encode, CampaignContext, Chromosome, NetworkConfig, TestCase};
pub use mutation::{Dictionary, MutationOp};
pub use select::{fit_to_survive, SeedPool};
