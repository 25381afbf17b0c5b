//! Index theory and saddle-point reduction for linear and asymptotically
//! linear Hamiltonian boundary value problems on [0,1].

pub mod error;
pub mod expr;
pub mod index;
pub mod ode;
pub mod operator;
pub mod path;
pub mod problems;
pub mod quadrature;
pub mod report;
pub mod reduction;
pub mod scan;
pub mod search;
pub mod spectral;
pub mod shoot;

pub use error::Error;
