//! Desk-scale implicit neural field reconstruction with a latent-space
//! analysis toolkit: a Gabor multiplicative-filter-network decoder driven by
//! auto-decoded per-time latent codes, plus embedding/clustering, PCA/CCA,
//! Tucker factorization, and per-dimension ablation over the learned latents.

pub mod ablation;
pub mod corr;
pub mod embed;
pub mod fieldgen;
pub mod fio;
pub mod mmgn;
pub mod rng;
pub mod tensor;
pub mod tucker;

pub use tensor::{Matrix, Tensor3};
