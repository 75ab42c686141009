//! Time-of-arrival accuracy analysis for OFDM ranging signals.
//!
//! The crate models an OFDM resource grid carrying a mix of known pilot
//! cells and unknown data cells, and answers three questions about
//! time-of-arrival (TOA) estimation from such a signal:
//!
//! * **How accurate can it be?** Cramér–Rao-type lower bounds (pilot-only,
//!   modified, and exact data-aware via numerically integrated Fisher
//!   information) and a Ziv-Zakai bound that stays meaningful at low SNR
//!   ([`bounds`], [`zzb`]).
//! * **How accurate is it?** Maximum-likelihood and decision-directed TOA
//!   estimators evaluated by Monte Carlo over noise, payload, and channel
//!   realizations ([`estimators`], [`montecarlo`]).
//! * **What should the signal look like?** Exhaustive search over sparse
//!   positioning-pilot block allocations ([`alloc`]) and an end-to-end LEO
//!   satellite pseudorange positioning simulation that turns ranging error
//!   into horizontal/vertical position error ([`leo`]).
//!
//! Everything is deterministic given explicit seeds: parallel and sequential
//! execution produce byte-identical results (see [`exec`]).

pub mod alloc;
pub mod bounds;
pub mod channel;
pub mod estimators;
pub mod exec;
pub mod grid;
pub mod leo;
pub mod montecarlo;
pub mod numeric;
pub mod quad;
pub mod zzb;

pub use numeric::SPEED_OF_LIGHT_M_S;
