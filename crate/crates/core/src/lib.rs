//! Metamath proof search engine.

pub mod database;
pub mod dataset;
pub mod grammar;
pub mod guidance;
pub mod frame;
pub mod search;
pub mod unify;
pub mod verifier;
