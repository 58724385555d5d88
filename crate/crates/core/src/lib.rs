//! Lévy random bridges: construction, simulation, conditional laws and
//! information-based pricing.

pub mod bridge;
pub mod checks;
pub mod error;
pub mod kernels;
pub mod lrb;
pub mod numerics;
pub mod pricing;
pub mod sampler;
pub mod stats;
pub mod terminal;

pub use bridge::{BridgeSampler, BridgeSpec};
pub use error::{LrbError, Result};
pub use kernels::{KernelClass, KernelFamily};
pub use lrb::{LiouvilleValue, LrbSpec};
pub use pricing::{
    BinaryBondSpec, CallMethod, CallSpec, CriticalInformation, ExerciseMode, InformationModel, PriceRecord, RateCurve,
};
pub use sampler::{RandomStream, SamplePath, SamplerMethod};
pub use terminal::{Atom, DensityFamily, DensityPart, TerminalLaw};
