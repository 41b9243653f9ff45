//! Static prediction of object field-access patterns.
//!
//! Methods of a small object-oriented IR are turned into control-flow graphs,
//! then into compressed Markov chains whose states list the field accesses
//! expected to happen in order. An instrumented interpreter produces access
//! traces, and the `validate` and `affinity` modules measure how well the
//! predicted models agree with observed behaviour.

pub mod affinity;
pub mod cfg;
pub mod cli;
pub mod interp;
pub mod ir;
pub mod markov;
pub mod par;
pub mod seed;
pub mod stats;
pub mod testkit;
pub mod validate;
