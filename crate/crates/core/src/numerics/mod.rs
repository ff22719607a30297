//! Numerical building blocks shared by the analysis modules.

pub mod optimize;
pub mod quadrature;
pub mod special;
