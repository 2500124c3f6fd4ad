pub mod codebook;
pub mod features;
pub mod model;
pub mod pipeline;
pub mod project;
pub mod registerdata;
pub mod scalar;
pub mod textualize;
pub mod trajectory;

pub use scalar::Real;

pub type SparseVectorF32 = features::SparseVector<f32>;
pub type SparseVectorF64 = features::SparseVector<f64>;
pub type CsrMatrixF32 = features::CsrMatrix<f32>;
pub type CsrMatrixF64 = features::CsrMatrix<f64>;
pub type LinearModelF32 = model::LinearModel<f32>;
pub type LinearModelF64 = model::LinearModel<f64>;
pub type DenseMatrixF32 = project::DenseMatrix<f32>;
pub type DenseMatrixF64 = project::DenseMatrix<f64>;
pub type PcaModelF32 = project::PcaModel<f32>;
pub type PcaModelF64 = project::PcaModel<f64>;
