//! Near-Clifford simulation with low-rank stabilizer decompositions.
//!
//! States are written as `ρ = Σ_l λ_l σ_l ρ_S`: a mixed stabilizer state
//! `ρ_S` dressed by a short list of weighted Pauli strings. Clifford gates act
//! on the tableau and the strings by conjugation, `T` gates fork strings, and
//! Pauli measurements prune them. A dense state-vector reference in
//! [`oracle`] checks the engine at small sizes.
//!
//! ```
//! use lrsd_core::lrsd::LrsdState;
//! use lrsd_core::pauli::PauliString;
//! use rand::SeedableRng;
//!
//! let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
//! let mut s = LrsdState::plus_state(1);
//! s.apply_t_gate(0).unwrap();
//! let x: PauliString = "X".parse().unwrap();
//! let p = s.born_probability(&x);
//! assert!((p - (core::f64::consts::PI / 8.0).cos().powi(2)).abs() < 1e-12);
//! let (_, prob) = s.measure(&x, None, &mut rng).unwrap();
//! assert!(prob > 0.0);
//! ```
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod circuits;
pub mod entropy;
pub mod graphstate;
pub mod lrsd;
pub mod magic;
pub mod oracle;
pub mod pauli;
pub mod tableau;

mod f2;

pub use num_complex::Complex64;
