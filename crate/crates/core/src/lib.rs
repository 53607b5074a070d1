//! Vacuum-field induced interactions between localized dipoles.
//!
//! The coupling `λ_ij` that remains after the photons are traced out is
//! computed by three independent routes (discrete mode sums, a frequency
//! integral of `Im G`, and the static residue of `ω² G`), for free space,
//! planar mirrors and multilayer stacks. The [`mediator`] module treats the
//! indirect coupling through localized bosonic modes and [`oracle`] holds
//! brute-force reference models.
//!
//! All quantities are in natural units `ħ = c = ε₀ = 1`; see [`UnitSystem`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod direct;
pub mod error;
pub mod geometry;
pub mod greens;
pub mod mediator;
pub mod oracle;
pub mod quad;

pub use direct::{CouplingMatrix, DiscreteMode, DiscreteModeSet, Route, SpectralCutoff};
pub use error::{Error, Result};
pub use geometry::{check_distinct, interaction_energy, CVec3, Dyadic33, Emitter, Rotation, UnitSystem, Vec3};
pub use greens::{FreeSpace, GreensEvaluator, ImageMirror, LayerStack, Layered, MirrorSpec, Permittivity};

/// Library version, echoed in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
