//! Ground-station service and command line front end.

pub mod cli;
pub mod server;
