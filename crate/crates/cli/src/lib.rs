//! Command-line front end: configuration, the staged pipeline and the
//! `genia` command surface.

pub mod app;
pub mod config;
pub mod pipeline;

pub use app::main_with_args;
