//! Outward-rounded interval arithmetic and rigorous integrals of observables.

pub mod interval;
pub mod observable;
pub mod parse;
pub mod poly;
pub mod round;

pub use interval::Interval;
pub use observable::{Extension, Observable, Piece, PieceFn};
pub use parse::{parse_poly, parse_rational};
pub use poly::{Poly, RatPoly};
