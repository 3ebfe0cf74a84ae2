//! Simulation and numerical verification for Lévy-valued random measures,
//! additive sheets and independently scattered cylindrical Lévy processes.

pub mod characteristics;
pub mod density;
pub mod error;
pub mod export;
pub mod integrator;
pub mod kernel;
pub mod measure;
pub mod quadrature;
pub mod region;
pub mod sampler;
pub mod sheets;
pub mod testfn;
pub mod verify;

pub use characteristics::{Characteristics, CharacteristicsConfig, Preset};
pub use density::{Atom, DensityMeasure, SpatialDensity};
pub use error::{Error, Result};
pub use kernel::{JumpKernel, JumpLaw, KernelKind};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use region::{AxisBox, Closure, Region};
pub use integrator::{integrate, integrate_simple, IntegralValue, SimpleFunction};
pub use sampler::{sample_field, FieldRealization, JumpRecord, SamplerConfig, SmallJumpMode};
pub use sheets::{box_increment, sheet_from_field, BoxIncrement, SheetRealization};
pub use testfn::{Factor, TestFunction};
pub use verify::{Decision, VerificationReport};
