pub mod embedding;
pub mod error;
pub mod linalg;
pub mod random;
pub mod sdp;
pub mod two_sided;
pub mod scenarios;
pub mod experiments;
