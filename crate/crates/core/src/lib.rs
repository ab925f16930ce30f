pub mod bitset;
pub mod colour;
pub mod duality;
pub mod engine;
pub mod eventmodel;
pub mod modelfile;
pub mod pcclass;
pub mod typelattice;
pub mod zoo;
