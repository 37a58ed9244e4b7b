//! Independent reference prices.

pub mod mc;
pub mod riccati;

pub use mc::{mc_price, McConfig, McEstimate, McScheme};
pub use riccati::{
    riccati_closed_form_b, riccati_solve, rk4_backward, RiccatiConvention, RiccatiSolution,
};
