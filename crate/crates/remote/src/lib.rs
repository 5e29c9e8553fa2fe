//! HTTP transport for the backend wire protocol: blocking client ports and
//! an embeddable server that hosts any set of ports (the mocks, typically).

mod client;
mod server;

pub use client::{remote_ports, RemotePort};
pub use server::{serve, ServerHandle};
