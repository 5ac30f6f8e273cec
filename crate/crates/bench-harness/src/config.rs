use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    VniEnabled,
    VniDisabled,
}

impl Mode {
    /// Short name used on the command line and in CSV files.
    pub fn label(self) -> &'static str {
        match self {
            Mode::VniEnabled => "vni",
            Mode::VniDisabled => "novni",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vni" => Ok(Mode::VniEnabled),
            "novni" => Ok(Mode::VniDisabled),
            _ => Err(format!("unknown mode {s:?} (expected vni or novni)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RampConfig {
    pub start: u32,
    pub peak: u32,
    pub step: u32,
    pub sustain_batches: u32,
    /// Seconds between batches.
    pub batch_interval: f64,
    pub runs: u32,
}

impl Default for RampConfig {
    fn default() -> Self {
        RampConfig {
            start: 1,
            peak: 10,
            step: 1,
            sustain_batches: 10,
            batch_interval: 1.0,
            runs: 5,
        }
    }
}

impl RampConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.start == 0 || self.start > self.peak || self.step == 0 {
            return Err(BenchError::Config(format!(
                "ramp needs 1 <= start <= peak and step >= 1, got start {} peak {} step {}",
                self.start, self.peak, self.step
            )));
        }
        if !(self.batch_interval >= 0.0 && self.batch_interval.is_finite()) || self.runs == 0 {
            return Err(BenchError::Config("ramp needs a finite interval and at least one run".into()));
        }
        Ok(())
    }

    /// Batch sizes in submission order. The peak closes the ramp up and is
    /// not repeated when the ramp turns down.
    pub fn batches(&self) -> Vec<u32> {
        let mut up: Vec<u32> = (self.start..self.peak).step_by(self.step as usize).collect();
        up.push(self.peak);
        let down: Vec<u32> = up[..up.len() - 1].iter().rev().copied().collect();
        let sustain = std::iter::repeat_n(self.peak, self.sustain_batches as usize);
        up.iter().copied().chain(sustain).chain(down).collect()
    }

    pub fn total_jobs(&self) -> u32 {
        self.batches().iter().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpikeConfig {
    pub job_count: u32,
    pub runs: u32,
}

impl Default for SpikeConfig {
    fn default() -> Self {
        SpikeConfig { job_count: 500, runs: 5 }
    }
}

impl SpikeConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.job_count == 0 || self.runs == 0 {
            return Err(BenchError::Config("spike needs at least one job and one run".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Workload {
    Ramp(RampConfig),
    Spike(SpikeConfig),
}

impl Workload {
    pub fn name(&self) -> &'static str {
        match self {
            Workload::Ramp(_) => "ramp",
            Workload::Spike(_) => "spike",
        }
    }

    pub fn runs(&self) -> u32 {
        match self {
            Workload::Ramp(c) => c.runs,
            Workload::Spike(c) => c.runs,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        match self {
            Workload::Ramp(c) => c.validate(),
            Workload::Spike(c) => c.validate(),
        }
    }

    /// `(offset seconds, job count)` per batch.
    pub fn schedule(&self) -> Vec<(f64, u32)> {
        match self {
            Workload::Ramp(c) => c
                .batches()
                .into_iter()
                .enumerate()
                .map(|(i, n)| (i as f64 * c.batch_interval, n))
                .collect(),
            Workload::Spike(c) => vec![(0.0, c.job_count)],
        }
    }

    pub fn total_jobs(&self) -> u32 {
        self.schedule().iter().map(|b| b.1).sum()
    }
}
