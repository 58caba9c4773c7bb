pub mod config;
pub mod experiments;
pub mod io;
pub mod manifest;
