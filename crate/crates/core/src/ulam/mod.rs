//! Ulam discretization: dyadic meshes, projections, and the sparse interval
//! transfer matrix.

pub mod cache;
mod mesh;
mod operator;

pub use mesh::{integrate_product, pointwise_product_with_density, project, BasisVector, Mesh};
pub use operator::{assemble, RowView, UlamOperator};
