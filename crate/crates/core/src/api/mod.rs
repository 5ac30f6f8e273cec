//! JSON payloads exchanged between components.

pub mod cxi;
pub mod mgmt;
pub mod webhook;

use serde::{Deserialize, Serialize};

/// Error body returned by every HTTP surface on non-2xx responses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

impl ErrorBody {
    pub fn new(error: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            error: error.into(),
            message: message.into(),
        }
    }
}
