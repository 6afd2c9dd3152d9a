pub mod io;
pub mod keys;
pub mod projection;

pub use keys::{generate_key, recombine_shares, salt, split_key, KeyShares, SaltedLatent, UserKey};
pub use projection::{class_matrices, class_matrix_seed, gram_schmidt_matrix, project_latent, ProjectionMatrix};
