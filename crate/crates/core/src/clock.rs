use std::fmt;
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// Seconds, either on a virtual timeline or since the UNIX epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub f64);

impl Timestamp {
    pub const ZERO: Timestamp = Timestamp(0.0);

    pub fn secs(self) -> f64 {
        self.0
    }

    pub fn plus(self, secs: f64) -> Timestamp {
        Timestamp(self.0 + secs)
    }

    pub fn since(self, earlier: Timestamp) -> f64 {
        self.0 - earlier.0
    }

    pub fn max(self, other: Timestamp) -> Timestamp {
        if other.0 > self.0 {
            other
        } else {
            self
        }
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}", self.0)
    }
}

/// Injected time source. Implementations must be monotone non-decreasing.
pub trait Clock: Send + Sync {
    fn now(&self) -> Timestamp;
}

/// Manually advanced clock for deterministic simulation.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<f64>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        Self {
            now: Mutex::new(start.0),
        }
    }

    pub fn advance(&self, secs: f64) -> Timestamp {
        let mut now = self.now.lock().unwrap();
        if secs > 0.0 {
            *now += secs;
        }
        Timestamp(*now)
    }

    /// Moves the clock forward to `t`; earlier values are ignored.
    pub fn advance_to(&self, t: Timestamp) -> Timestamp {
        let mut now = self.now.lock().unwrap();
        if t.0 > *now {
            *now = t.0;
        }
        Timestamp(*now)
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        Timestamp(*self.now.lock().unwrap())
    }
}

/// UNIX-epoch seconds, made monotone by anchoring to an [`Instant`].
#[derive(Debug)]
pub struct WallClock {
    epoch_at_start: f64,
    start: Instant,
}

impl WallClock {
    pub fn new() -> Self {
        let epoch_at_start = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        Self {
            epoch_at_start,
            start: Instant::now(),
        }
    }
}

impl Default for WallClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for WallClock {
    fn now(&self) -> Timestamp {
        Timestamp(self.epoch_at_start + self.start.elapsed().as_secs_f64())
    }
}
