pub mod arith;
pub mod conjfill;
pub mod error;
pub mod formspace;
pub mod gf;
pub mod harness;
pub mod group;
pub mod matfq;
pub mod pmatrix;
pub mod poly;
pub mod primeselect;
pub mod reduction;
pub mod spectrum;
pub mod transversal;
pub mod word;
pub mod wordsolve;

pub use error::{Error, Result};
pub use gf::{Fe, Field};
pub use matfq::Mat;
pub use word::{Letter, Word, WordProgram};
pub use formspace::{FormKind, FormedSpace, Subspace};
