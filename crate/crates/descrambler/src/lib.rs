//! File formats, command-line front end and SVG rendering around
//! `descrambler-core`.

pub mod cli;
pub mod error;
pub mod io;
pub mod svg;
