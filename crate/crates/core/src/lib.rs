//! Quasi-isometries of the rooted d-regular tree, realized on finite balls.
//!
//! * [`tree`]: addresses, distances, lowest common ancestors, finite
//!   subtrees and their boundaries.
//! * [`qi`]: finite self-maps, exact QI constants, coarse surjectivity,
//!   order preservation and the structural property checks.
//! * [`mixed`]: the level-by-level mixed-subtree construction and its
//!   structural verifier.
//! * [`transforms`]: conversion to an order-preserving map and
//!   approximation by a mixed-subtree map, with the associated constants.
//! * [`generate`]: seeded generators of automorphisms and perturbed maps.

pub mod error;
pub mod generate;
pub mod mixed;
pub mod qi;
pub mod rational;
pub mod transforms;
pub mod tree;

pub use error::{MapError, MixedError, TransformError, TreeError};
pub use qi::FiniteTreeMap;
pub use rational::Rational;
pub use tree::{FiniteSubtree, TreeShape, VertexAddress};
