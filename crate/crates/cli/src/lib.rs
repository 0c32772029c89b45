//! Operator tooling for the `lrsha`/`flrsha` deployment lifecycle: the key
//! ceremony, the signer tool with offline precompute, the verifier tool, a
//! local multi-server demo, and microbenchmarks against a baseline Schnorr
//! signer.

pub mod bench;
pub mod ceremony;
pub mod demo;
pub mod keyfiles;
pub mod signing;
pub mod verify;
