//! Transport for live sessions; the `vislearn` binary wraps it.

pub mod server;
