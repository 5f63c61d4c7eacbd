//! Structured compressed sensing: block Toeplitz and block circulant
//! sensing matrices, polynomial-graph deterministic matrices, FFT-based
//! products, row dependency analysis, empirical isometry constants,
//! probability bounds, sparse recovery and Monte Carlo success curves.

pub mod bounds;
pub mod combin;
pub mod dependency;
pub mod deterministic;
pub mod error;
pub mod experiment;
pub mod fast;
pub mod matrix;
pub mod recovery;
pub mod rip;
pub mod rng;

pub use bounds::{BoundParams, BoundResult, Regime};
pub use dependency::{BoundRegime, ColoringPartition, DependencyReport, SupportSet};
pub use deterministic::{PolySpec, Theorem3Report};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, SolverKind, SuccessCurve, TemplateKind};
pub use fast::{LinearOperator, ProductPath, StructuredOperator};
pub use matrix::{
    BlockStructureSpec, DistKind, EntryDistribution, MatrixKind, NestedSpec, SensingMatrix,
};
pub use recovery::{RecoveryResult, RecoveryStatus, SparseSignal};
pub use rip::{RipEstimate, RipMethod};

/// Builds the matrix for any spec, random or deterministic.
pub fn build_matrix(spec: &BlockStructureSpec) -> Result<SensingMatrix> {
    match spec.kind {
        MatrixKind::Deterministic => {
            spec.validate()?;
            deterministic::build_devore_block(&PolySpec::from_block_spec(spec)?)
        }
        _ => matrix::build_structured(spec),
    }
}
