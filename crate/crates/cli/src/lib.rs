//! Batch front end for `segfuse`: dataset manifests and the `fuse`,
//! `pseudo-gt`, `eval` and `simulate` commands.

pub mod commands;
pub mod io;
pub mod manifest;
