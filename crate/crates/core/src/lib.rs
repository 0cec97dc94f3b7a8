//! Discretized bilinear averages along non-flat curves.
//!
//! The crate evaluates `B_r(f, g)(x) = r⁻¹ ∫₀^r f(x − t) g(x − P(t)) dt` and its
//! bump-weighted variant on a periodic grid, together with the frequency
//! splittings, maximal functions and pattern-density functionals used to study
//! three-point patterns `{x, x − t, x − P(t)}` in sets of positive measure.

pub mod averages;
pub mod curves;
pub mod diagnostics;
pub mod error;
pub mod frequency;
pub mod grid;
pub mod partition;
pub mod search;
pub mod sets;

pub use averages::{AverageContext, BilinearPlan, Extremum, KernelKind, KernelSpec, PinReport, ScaleGrid};
pub use curves::{Curve, CurveViolation};
pub use diagnostics::{DecayReport, DecaySettings, NormDomain, ProbeReport};
pub use error::{Error, Result};
pub use frequency::{annular_piece, band_energy, decompose_lmh, project, BandDecomposition, Side, SplitParams};
pub use partition::{dyadic_partition, partition_report, validate_partition, AdmissiblePartition, PartitionReport, ReportSettings};
pub use grid::{FourierIndex, GridData, GridFunction, Norm, Spectrum, TorusConfig};
pub use search::{calibration_sweep, search_extremal, CalibrationTable, SearchConfig, SearchOutcome};
pub use sets::{random_set, structured_set, DensitySet, StructureKind, StructureParams};
