//! File formats, configuration and the batch driver around `docforge-core`,
//! plus the `docforge` command line.

pub mod cli;
pub mod driver;
pub mod io;
pub mod settings;
