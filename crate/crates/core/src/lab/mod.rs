//! Configuration, orchestration and artifact emission for the command line.

pub mod config;
pub mod manifest;
pub mod plotdata;
pub mod run;

pub use config::{apply_override, LabConfig};
pub use manifest::RunManifest;
pub use plotdata::emit_plotdata;
pub use run::{run, two_bubble_synthetic, Command};
