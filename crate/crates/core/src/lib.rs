pub mod asymptotics;
pub mod constructions;
pub mod harness;
pub mod ideals;
pub mod index_map;
pub mod matrices;
pub mod numeric;
pub mod regularity;
pub mod sequences;
