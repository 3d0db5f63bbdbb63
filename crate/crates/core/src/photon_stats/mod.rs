//! Photon-counting statistics of the SPDC source: Monte Carlo simulation of
//! the detection chain, coincidence analysis and the estimators used on the
//! fabricated device (PGR, CAR, heralded g²(0)).
//!
//! The simulator emits photon pairs as a Poisson process and pushes each
//! photon through an explicit detection chain (splitter routing, per-detector
//! efficiency, Gaussian timing jitter, dark counts). Two layouts are modeled:
//!
//! - `TwoDetector`: both photons of a degenerate pair leave in one fiber and
//!   hit a 50:50 splitter; a coincidence needs the photons to exit different
//!   ports. This is the layout behind the PGR estimator's factor of 2.
//! - `ThreeDetector`: one splitter port heralds (s), the other is split again
//!   onto i₁/i₂ for the heralded-autocorrelation measurement.

mod analysis;
mod analytic;
mod sim;
mod timetag;

pub use analysis::{
    analyze, coincidence_histogram, compute_car, count_coincidences, count_singles,
    count_triples, estimate_pgr, heralded_g2, CoincidenceReport, CorrelationHistogram,
    HeraldedG2, ValueWithSigma,
};
pub use analytic::{analytic_statistics, AnalyticStatistics};
pub use sim::simulate_timetags;
pub use timetag::{read_binary, read_csv, write_binary, write_csv, FORMAT_VERSION, MAGIC};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitterLayout {
    TwoDetector,
    ThreeDetector,
}

impl SplitterLayout {
    pub fn channel_count(self) -> usize {
        match self {
            SplitterLayout::TwoDetector => 2,
            SplitterLayout::ThreeDetector => 3,
        }
    }

    pub fn channel_labels(self) -> Vec<String> {
        match self {
            SplitterLayout::TwoDetector => vec!["signal".into(), "idler".into()],
            SplitterLayout::ThreeDetector => vec!["s".into(), "i1".into(), "i2".into()],
        }
    }
}

/// Source plus detection chain for one simulated run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceDetectionSpec {
    /// True on-chip pair generation rate, Hz.
    pub pair_rate_hz: f64,
    pub duration_s: f64,
    /// Per-detector survival probability after the splitter (out-coupling,
    /// filtering and detector efficiency folded together).
    pub channel_efficiencies: Vec<f64>,
    pub dark_rates_hz: Vec<f64>,
    pub timing_jitter_sigma_ps: Vec<f64>,
    pub coincidence_window_ps: u64,
    pub splitter_layout: SplitterLayout,
    pub histogram_bin_ps: u64,
    pub rng_seed: u64,
}

impl Default for SourceDetectionSpec {
    fn default() -> Self {
        SourceDetectionSpec {
            pair_rate_hz: 1.0e6,
            duration_s: 1.0,
            channel_efficiencies: vec![0.17, 0.17],
            dark_rates_hz: vec![100.0, 100.0],
            timing_jitter_sigma_ps: vec![30.0, 30.0],
            coincidence_window_ps: 1000,
            splitter_layout: SplitterLayout::TwoDetector,
            histogram_bin_ps: 100,
            rng_seed: 1,
        }
    }
}

impl SourceDetectionSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.splitter_layout.channel_count();
        if self.channel_efficiencies.len() != n
            || self.dark_rates_hz.len() != n
            || self.timing_jitter_sigma_ps.len() != n
        {
            return Err(Error::InvalidSpec(format!(
                "layout has {n} detectors; efficiencies/darks/jitter must match"
            )));
        }
        if self.histogram_bin_ps == 0 || self.coincidence_window_ps < self.histogram_bin_ps {
            return Err(Error::InvalidSpec(
                "need coincidence_window >= histogram_bin > 0".into(),
            ));
        }
        if self.pair_rate_hz < 0.0 || self.duration_s <= 0.0 {
            return Err(Error::InvalidSpec("rates >= 0, duration > 0".into()));
        }
        if self
            .channel_efficiencies
            .iter()
            .any(|&e| !(0.0..=1.0).contains(&e))
        {
            return Err(Error::InvalidSpec("efficiencies must lie in [0, 1]".into()));
        }
        if self.dark_rates_hz.iter().any(|&d| d < 0.0)
            || self.timing_jitter_sigma_ps.iter().any(|&s| s < 0.0)
        {
            return Err(Error::InvalidSpec("rates and jitter must be >= 0".into()));
        }
        Ok(())
    }
}

/// One detection event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TimeTag {
    pub timestamp_ps: u64,
    pub channel: u8,
}

/// Ordered detection record, the in-memory form of the TCSPC output.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTagStream {
    events: Vec<TimeTag>,
    pub duration_s: f64,
    pub channel_labels: Vec<String>,
}

impl TimeTagStream {
    /// Build from events, enforcing the ordering and channel invariants.
    pub fn new(
        events: Vec<TimeTag>,
        duration_s: f64,
        channel_labels: Vec<String>,
    ) -> Result<Self> {
        let n = channel_labels.len() as u8;
        let mut prev = 0u64;
        for e in &events {
            if e.timestamp_ps < prev {
                return Err(Error::TimeTagFormat(
                    "timestamps must be non-decreasing".into(),
                ));
            }
            if e.channel >= n {
                return Err(Error::TimeTagFormat(format!(
                    "channel {} not declared (have {})",
                    e.channel, n
                )));
            }
            prev = e.timestamp_ps;
        }
        Ok(TimeTagStream {
            events,
            duration_s,
            channel_labels,
        })
    }

    pub fn events(&self) -> &[TimeTag] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.channel_labels.len()
    }

    /// Sorted timestamps of one channel.
    pub fn channel_timestamps(&self, channel: u8) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| e.channel == channel)
            .map(|e| e.timestamp_ps)
            .collect()
    }
}
