//! Session service: persistent guided-run sessions over HTTP, plus the
//! command-line front end of the `apsc` binary.

pub mod api;
pub mod cli;
pub mod store;
