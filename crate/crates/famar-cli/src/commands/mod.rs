pub mod fit;
pub mod loadings;
pub mod predict;
pub mod rolling;
pub mod simulate;
