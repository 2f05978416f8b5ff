pub mod census;
pub mod charpair;
pub mod classify;
pub mod faceposet;
pub mod lattice;
pub mod localmodel;
pub mod validity;
