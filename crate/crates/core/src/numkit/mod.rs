//! Numerical substrate: named parameter tensors, Adam, reparameterized
//! Gaussian sampling, finite-difference gradient checks and checkpoints.

mod adam;
mod checkpoint;
mod gaussian;
mod gradcheck;
pub mod linalg;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{read_checkpoint, read_checkpoint_from, write_checkpoint, write_checkpoint_to, CHECKPOINT_HEADER};
pub use gaussian::{reparameterize, sample_gaussian, sample_gaussian_logvar, standard_normals};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use tensor::{ParamSet, ParamTensor};
