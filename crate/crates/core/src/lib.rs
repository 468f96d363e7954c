//! Physics-informed Kolmogorov-Arnold network solver for continuous-time
//! optimal control problems with integer-order, fractional (Caputo) and
//! integro-differential dynamics, including multi-dimensional PDE constraints.

pub mod autodiff;
pub mod cli;
pub mod network;
pub mod fractional;
pub mod problem;
pub mod quadrature;
pub mod trainer;
