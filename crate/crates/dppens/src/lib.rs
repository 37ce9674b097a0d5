//! Determinantal point process sampling and ensembles of ridgeless kernel
//! regressors.
//!
//! The crate is organized around a shared spectral backbone: a [`GramMatrix`]
//! is assembled from data points, eigendecomposed once into a [`Spectrum`],
//! and the spectrum then drives every downstream consumer: exact DPP and
//! kDPP samplers, ridge leverage scores, Nystrom approximations and
//! ridgeless regression ensembles. The [`oracle`] module holds brute-force
//! verifiers (exhaustive subset enumeration and Monte Carlo estimators) for
//! the implicit-regularization identities that relate averages of
//! subset-restricted inverses to ridge-regularized inverses.
//!
//! All numeric types are generic over a [`Real`] scalar (`f32` or `f64`);
//! the `*F64` aliases at the crate root cover the common double-precision
//! case.

pub mod error;
pub mod esym;
pub mod kernel;
pub mod linalg;
pub mod nystrom;
pub mod oracle;
pub mod real;
pub mod regress;
pub mod rng;
pub mod sampler;
pub mod spectrum;
pub mod subset;

pub use error::Error;
pub use esym::{elem_sym, ElemSymTable, Scaled};
pub use kernel::{gram, GramMatrix, KernelFamily, KernelSpec};
pub use nystrom::{ensemble_nystrom, nystrom, NystromApprox};
pub use oracle::{
    expect_dpp_exhaustive, expect_kdpp_exhaustive, expectation_mc, lemma2_check, prop5_bound_check,
    remark_bound_check, IdentityReport, McReport, OracleMethod,
};
pub use real::Real;
pub use regress::{fit_krr, fit_ridgeless, EnsemblePredictor, RidgelessPredictor};
pub use rng::stream_rng;
pub use sampler::{PreparedSampler, SamplerConfig, SamplerScheme};
pub use spectrum::{eigendecompose, Spectrum};
pub use subset::Subset;

/// `Result` alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

pub type KernelSpecF64 = KernelSpec<f64>;
pub type GramMatrixF64 = GramMatrix<f64>;
pub type SpectrumF64 = Spectrum<f64>;
pub type ElemSymTableF64 = ElemSymTable<f64>;
pub type RidgelessPredictorF64 = RidgelessPredictor<f64>;
pub type EnsemblePredictorF64 = EnsemblePredictor<f64>;
