//! Hotspot duty-cycle simulation.
//!
//! Each device repeats a cycle of length `period_s`. Within cycle `c` (the
//! slot `[c·P, (c+1)·P)`) it broadcasts as a hotspot on the arc
//! `[φ_c, φ_c + f·P)` and scans on `[φ_c + f·P, φ_c + f·P + scan_duration)`,
//! both taken modulo `P` so every activity stays inside its own slot. It is
//! idle for the rest of the slot. A scanner detects a hotspot when one of its
//! scan windows overlaps one of the hotspot's broadcast intervals with
//! positive length and the received signal clears the radio's sensitivity.
//!
//! Overlaps are found with exact interval arithmetic; there is no time step.

use rand::{Rng, RngCore};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::{derive_seed, keyed_rng, DOMAIN_DEVICES};
use crate::synth::{PathLossModel, Point};

/// Stream of a device seed used to root its per-peer noise generators;
/// stream 0 carries the phases.
const NOISE_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DutyCycleError {
    #[error("invalid duty-cycle config: {0}")]
    InvalidConfig(&'static str),
    #[error("time must be finite and non-negative, got {0}")]
    NegativeTime(f64),
    #[error("simulation needs at least two devices, got {0}")]
    TooFewDevices(usize),
    #[error("duplicate device id {0:?}")]
    DuplicateDevice(String),
    #[error("duration must be finite and positive, got {0}")]
    InvalidDuration(f64),
    #[error("detection probability requires randomized phases on both devices")]
    FixedPhase,
    #[error("detection probability requires equal periods, got {0} s and {1} s")]
    UnequalPeriods(f64, f64),
    #[error("invalid radio model: {0}")]
    Radio(#[from] crate::synth::SynthError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhasePolicy {
    /// The same phase offset every cycle.
    Fixed { offset_s: f64 },
    /// A fresh uniform phase in `[0, P)` every cycle.
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DutyCycleConfig {
    period_s: f64,
    hotspot_fraction: f64,
    phase_policy: PhasePolicy,
    scan_duration_s: f64,
}

impl Default for DutyCycleConfig {
    /// 60 s period, 25 % hotspot, randomized phase, scanning the whole
    /// remainder of the cycle.
    fn default() -> Self {
        DutyCycleConfig {
            period_s: 60.0,
            hotspot_fraction: 0.25,
            phase_policy: PhasePolicy::Randomized,
            scan_duration_s: 45.0,
        }
    }
}

impl DutyCycleConfig {
    pub fn new(
        period_s: f64,
        hotspot_fraction: f64,
        phase_policy: PhasePolicy,
        scan_duration_s: f64,
    ) -> Result<Self, DutyCycleError> {
        if !(period_s.is_finite() && period_s > 0.0) {
            return Err(DutyCycleError::InvalidConfig("period_s must be positive"));
        }
        if !(hotspot_fraction > 0.0 && hotspot_fraction < 1.0) {
            return Err(DutyCycleError::InvalidConfig("hotspot_fraction must lie in (0, 1)"));
        }
        let remainder = period_s * (1.0 - hotspot_fraction);
        if !(scan_duration_s > 0.0 && scan_duration_s <= remainder) {
            return Err(DutyCycleError::InvalidConfig(
                "scan_duration_s must be positive and fit in the non-hotspot part of the period",
            ));
        }
        if let PhasePolicy::Fixed { offset_s } = phase_policy {
            if !offset_s.is_finite() {
                return Err(DutyCycleError::InvalidConfig("phase offset must be finite"));
            }
        }
        Ok(DutyCycleConfig {
            period_s,
            hotspot_fraction,
            phase_policy,
            scan_duration_s,
        })
    }

    /// Scans for the whole non-hotspot part of every cycle.
    pub fn full_scan(
        period_s: f64,
        hotspot_fraction: f64,
        phase_policy: PhasePolicy,
    ) -> Result<Self, DutyCycleError> {
        Self::new(
            period_s,
            hotspot_fraction,
            phase_policy,
            period_s * (1.0 - hotspot_fraction),
        )
    }

    pub fn period_s(&self) -> f64 {
        self.period_s
    }

    pub fn hotspot_fraction(&self) -> f64 {
        self.hotspot_fraction
    }

    pub fn phase_policy(&self) -> PhasePolicy {
        self.phase_policy
    }

    pub fn scan_duration_s(&self) -> f64 {
        self.scan_duration_s
    }

    fn hotspot_len(&self) -> f64 {
        self.period_s * self.hotspot_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hotspot,
    Scanner,
    Idle,
}

/// Phase generator of one device. Randomized phases are drawn from a ChaCha
/// stream, one `u64` per cycle, so cycle `c` can be reached directly.
struct PhaseStream {
    config: DutyCycleConfig,
    rng: ChaCha8Rng,
}

impl PhaseStream {
    fn new(config: DutyCycleConfig, seed: u64) -> Self {
        PhaseStream {
            config,
            rng: keyed_rng(seed, 0),
        }
    }

    fn phase(&mut self, cycle: u64) -> f64 {
        let p = self.config.period_s;
        match self.config.phase_policy {
            PhasePolicy::Fixed { offset_s } => offset_s.rem_euclid(p),
            PhasePolicy::Randomized => {
                self.rng.set_word_pos(u128::from(cycle) * 2);
                self.next_random_phase()
            }
        }
    }

    /// Phase of the next cycle when walking cycles in order.
    fn next_phase(&mut self) -> f64 {
        match self.config.phase_policy {
            PhasePolicy::Fixed { offset_s } => offset_s.rem_euclid(self.config.period_s),
            PhasePolicy::Randomized => self.next_random_phase(),
        }
    }

    fn next_random_phase(&mut self) -> f64 {
        // 53 random mantissa bits, uniform on [0, 1)
        let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        u * self.config.period_s
    }
}

/// Mode of a device at time `t`. Deterministic in `(config, seed, t)`.
pub fn mode_at(config: &DutyCycleConfig, seed: u64, t: f64) -> Result<Mode, DutyCycleError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(DutyCycleError::NegativeTime(t));
    }
    let p = config.period_s;
    let cycle = (t / p).floor();
    let within = t - cycle * p;
    let phase = PhaseStream::new(*config, seed).phase(cycle as u64);
    let hot = config.hotspot_len();
    Ok(if (within - phase).rem_euclid(p) < hot {
        Mode::Hotspot
    } else if (within - phase - hot).rem_euclid(p) < config.scan_duration_s {
        Mode::Scanner
    } else {
        Mode::Idle
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDevice {
    pub device_id: String,
    pub position: Point,
    pub config: DutyCycleConfig,
    pub rng_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    pub scanner_id: String,
    pub hotspot_id: String,
    pub time_s: f64,
    pub rssi_dbm: f64,
}

/// Seed of the phase stream a device with `rng_seed` uses in a simulation
/// run with `master_seed`; pass it to [`mode_at`] to query that device.
pub fn device_seed(master_seed: u64, rng_seed: u64) -> u64 {
    keyed_rng(derive_seed(master_seed, DOMAIN_DEVICES), rng_seed).next_u64()
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Interval {
    start: f64,
    end: f64,
}

/// An arc of length `len` starting at `offset` inside slot `cycle`, wrapped
/// at the slot end. Yields one or two intervals in time order. Both slot
/// edges are computed from the cycle index so that neighbouring slots share
/// the exact same boundary value.
fn arc(cycle: u64, period: f64, offset: f64, len: f64) -> ([Interval; 2], usize) {
    let base = cycle as f64 * period;
    let next = (cycle + 1) as f64 * period;
    let start = offset.rem_euclid(period);
    let end = start + len;
    if end <= period {
        let iv = Interval { start: base + start, end: (base + end).min(next) };
        ([iv, iv], 1)
    } else {
        (
            [
                Interval { start: base, end: base + (end - period) },
                Interval { start: base + start, end: next },
            ],
            2,
        )
    }
}

struct Schedule {
    /// Broadcast intervals, sorted and disjoint.
    hotspot: Vec<Interval>,
    /// Scan windows in time order; each has one or two pieces.
    scans: Vec<([Interval; 2], usize)>,
}

fn schedule(config: &DutyCycleConfig, seed: u64, duration_s: f64) -> Schedule {
    let p = config.period_s;
    let cycles = (duration_s / p).floor() as u64;
    let hot = config.hotspot_len();
    let mut phases = PhaseStream::new(*config, seed);
    let mut hotspot = Vec::with_capacity(2 * cycles as usize);
    let mut scans = Vec::with_capacity(cycles as usize);
    for c in 0..cycles {
        let phase = phases.next_phase();
        let (pieces, n) = arc(c, p, phase, hot);
        let mut pieces = pieces[..n].to_vec();
        pieces.sort_by(|a, b| a.start.total_cmp(&b.start));
        hotspot.extend(pieces);
        scans.push(arc(c, p, phase + hot, config.scan_duration_s));
    }
    Schedule { hotspot, scans }
}

/// Earliest overlap of positive length between `window` and the sorted
/// `hotspot` intervals, advancing the shared cursor.
fn first_overlap(window: &[Interval], hotspot: &[Interval], cursor: &mut usize) -> Option<Interval> {
    for piece in window {
        while *cursor < hotspot.len() && hotspot[*cursor].end <= piece.start {
            *cursor += 1;
        }
        let mut j = *cursor;
        while j < hotspot.len() && hotspot[j].start < piece.end {
            let start = piece.start.max(hotspot[j].start);
            let end = piece.end.min(hotspot[j].end);
            if start < end {
                return Some(Interval { start, end });
            }
            j += 1;
        }
    }
    None
}

/// Runs every device for the whole cycles that fit in `duration_s` and
/// returns the detections, sorted by time then scanner and hotspot id.
///
/// Each device's phase stream depends only on `master_seed` and its own
/// `rng_seed`; the shadowing draw of an encounter comes from a stream keyed
/// by the (scanner, hotspot) pair.
pub fn simulate(
    devices: &[SimDevice],
    radio: &PathLossModel,
    duration_s: f64,
    master_seed: u64,
) -> Result<Vec<Encounter>, DutyCycleError> {
    if devices.len() < 2 {
        return Err(DutyCycleError::TooFewDevices(devices.len()));
    }
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(DutyCycleError::InvalidDuration(duration_s));
    }
    radio.validate()?;
    let mut ids: Vec<&str> = devices.iter().map(|d| d.device_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(DutyCycleError::DuplicateDevice(w[0].to_string()));
    }

    let seeds: Vec<u64> = devices
        .iter()
        .map(|d| device_seed(master_seed, d.rng_seed))
        .collect();
    let schedules: Vec<Schedule> = devices
        .iter()
        .zip(&seeds)
        .map(|(d, &seed)| schedule(&d.config, seed, duration_s))
        .collect();

    let mut encounters = Vec::new();
    for (si, scanner) in devices.iter().enumerate() {
        for (hi, hotspot) in devices.iter().enumerate() {
            if si == hi {
                continue;
            }
            let distance = scanner.position.distance_to(&hotspot.position).max(radio.d0_m);
            let mut noise = keyed_rng(derive_seed(seeds[si], NOISE_STREAM), hotspot.rng_seed);
            let hot = &schedules[hi].hotspot;
            let mut cursor = 0;
            for (pieces, n) in &schedules[si].scans {
                let Some(overlap) = first_overlap(&pieces[..*n], hot, &mut cursor) else {
                    continue;
                };
                let draw: f64 = noise.sample(StandardNormal);
                let rssi = radio.rssi_at(distance, draw)?;
                if rssi >= radio.sensitivity_dbm {
                    encounters.push(Encounter {
                        scanner_id: scanner.device_id.clone(),
                        hotspot_id: hotspot.device_id.clone(),
                        time_s: (overlap.start + overlap.end) / 2.0,
                        rssi_dbm: rssi,
                    });
                }
            }
        }
    }
    encounters.sort_by(|a, b| {
        a.time_s
            .total_cmp(&b.time_s)
            .then_with(|| a.scanner_id.cmp(&b.scanner_id))
            .then_with(|| a.hotspot_id.cmp(&b.hotspot_id))
    });
    Ok(encounters)
}

/// Probability that, within one cycle, `scanner`'s scan window overlaps
/// `hotspot`'s broadcast interval when both phases are independent and
/// uniform.
///
/// The overlap length as a function of the relative phase is the circular
/// convolution of the two window indicators; it is positive on an arc of
/// length `scan + broadcast` (capped at the period), and zero elsewhere.
pub fn detection_probability(
    scanner: &DutyCycleConfig,
    hotspot: &DutyCycleConfig,
) -> Result<f64, DutyCycleError> {
    if scanner.phase_policy != PhasePolicy::Randomized
        || hotspot.phase_policy != PhasePolicy::Randomized
    {
        return Err(DutyCycleError::FixedPhase);
    }
    let p = scanner.period_s;
    if (p - hotspot.period_s).abs() > 1e-12 * p.max(hotspot.period_s) {
        return Err(DutyCycleError::UnequalPeriods(p, hotspot.period_s));
    }
    let support = scanner.scan_duration_s + hotspot.hotspot_len();
    Ok((support / p).min(1.0))
}

/// Writes encounters as line-delimited JSON.
pub fn write_encounters<W: std::io::Write>(encounters: &[Encounter], mut out: W) -> std::io::Result<()> {
    for e in encounters {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}
