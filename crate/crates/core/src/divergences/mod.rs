//! g-Bregman divergences: generators, coordinate maps, duals and the catalog.

pub mod catalog;
pub mod gbregman;
pub mod generator;
pub mod mapping;
pub mod newton;

pub use catalog::{catalog, CatalogEntry, CatalogParams, DivergenceSpec, GChoice};
pub use gbregman::{DivergenceMetadata, DualKind, Family, GBregmanDivergence};
pub use generator::Generator;
pub use mapping::Mapping;
