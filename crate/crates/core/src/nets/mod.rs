//! Differentiable building blocks: point encoders, adaptive normalization,
//! style mapping networks, the folding decoder and the discriminator.

pub mod adanorm;
pub mod codes;
pub mod decoder;
pub mod discriminator;
pub mod encoder;
pub mod layers;
pub mod mapping;
pub mod params;

pub use adanorm::{adanorm_forward, NormMode};
pub use codes::{AdaNormParams, ContentCode, Domain, StyleCode};
pub use decoder::{FoldingDecoder, UvSampling};
pub use discriminator::Discriminator;
pub use encoder::PointEncoder;
pub use layers::{Forward, Linear};
pub use mapping::{AdaNormVars, MappingNetwork};
pub use params::{Group, ParameterStore};
