pub mod commands;
pub mod document;
pub mod fixtures;
