//! Chameleon scalar-field pressure between parallel plates immersed in a gas,
//! together with the competing Casimir and electrostatic patch pressures.
//!
//! Chameleon-sector quantities are computed in natural units (powers of GeV);
//! the electromagnetic sector stays in SI. The [`experiment`] module is the
//! only place where the two meet, and it reports pressures in pN/cm².

pub mod background;
pub mod chameleon;
pub mod cli;
pub mod experiment;
pub mod numerics;
pub mod units;
