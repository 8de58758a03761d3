//! Character-level variational autoencoder for SMILES strings, with the
//! chemistry, scoring and latent-space search machinery around it.

pub mod smiles;
pub mod scores;
pub mod autodiff;
pub mod vae;
pub mod gpbo;
pub mod latentopt;
