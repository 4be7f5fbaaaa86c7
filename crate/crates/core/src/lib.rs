//! Numerical toolbox for one-shot capacities of quantum channels.
//!
//! Channels are stored as Stinespring isometries `V: A -> B ⊗ E`, so the
//! complementary channel is a relabelling of the output factors. On top of
//! that sit the information functionals (coherent, Holevo and private
//! information), a multi-restart gradient optimizer for lower bounds on
//! `Q(1)` and `P(1)`, closed-form capacity bound arithmetic for the
//! rocket/erasure direct-sum construction, and a state-vector simulation of
//! the entanglement-assisted rocket decoding protocol.
//!
//! Every information quantity is measured in bits.

pub mod bounds;
pub mod channels;
pub mod error;
pub mod experiments;
pub mod info;
pub mod numfmt;
pub mod optimize;
pub mod par;
pub mod protocol;
pub mod qmat;

pub use error::{QcapError, Result};
pub use par::Execution;
