//! Webhook handlers for the VNI controller.
//!
//! The endpoint keeps no state of its own. Every answer is derived from the
//! request and the VNI database, so replays and restarts are harmless.

mod handlers;
pub mod server;

pub use handlers::{handle_finalize, handle_sync, EndpointError, VniEndpoint};
