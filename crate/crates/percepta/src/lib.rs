//! Command-line tool and HTTP service over `percepta-core`.

pub mod cli;
pub mod server;
pub mod svg;
pub mod wire;
