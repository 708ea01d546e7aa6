//! Entropy of MAC-address colocation records and brute-force cost.
//!
//! A record built from `n` access points carries at most `48·n` bits. An
//! attacker holding a geolocated AP database and an adjacency map needs one
//! dictionary lookup for the first AP and only a choice among its neighbours
//! for every further AP, so the effective entropy is
//! `min(48·n, log2(dictionary) + (n − 1)·log2(neighbours))`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scanmodel::Scan;

pub const MAC_ADDRESS_BITS: f64 = 48.0;
/// Order of magnitude of a global wardriving AP database.
pub const DEFAULT_DICTIONARY_SIZE: u64 = 1 << 33;
pub const DEFAULT_AVG_NEIGHBORS: u64 = 64;
/// Guess rate of a single commodity GPU on a cheap hash.
pub const DEFAULT_GUESSES_PER_SECOND: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrivacyError {
    #[error("num_aps must be at least 1")]
    NoAccessPoints,
    #[error("dictionary_size must be at least 1")]
    EmptyDictionary,
    #[error("avg_neighbors must be at least 1")]
    NoNeighbors,
    #[error("bits must be finite and non-negative, got {0}")]
    InvalidBits(f64),
    #[error("guess rate must be finite and positive, got {0}")]
    InvalidRate(f64),
}

pub fn naive_entropy(num_aps: usize) -> f64 {
    MAC_ADDRESS_BITS * num_aps as f64
}

pub fn effective_entropy(
    num_aps: usize,
    dictionary_size: u64,
    avg_neighbors: u64,
) -> Result<f64, PrivacyError> {
    if num_aps == 0 {
        return Err(PrivacyError::NoAccessPoints);
    }
    if dictionary_size == 0 {
        return Err(PrivacyError::EmptyDictionary);
    }
    if avg_neighbors == 0 {
        return Err(PrivacyError::NoNeighbors);
    }
    let clustered = (dictionary_size as f64).log2()
        + (num_aps - 1) as f64 * (avg_neighbors as f64).log2();
    Ok(clustered.min(naive_entropy(num_aps)))
}

/// Seconds to exhaust a `2^bits` search space.
pub fn brute_force_time(bits: f64, guesses_per_second: f64) -> Result<f64, PrivacyError> {
    if !(bits.is_finite() && bits >= 0.0) {
        return Err(PrivacyError::InvalidBits(bits));
    }
    if !(guesses_per_second.is_finite() && guesses_per_second > 0.0) {
        return Err(PrivacyError::InvalidRate(guesses_per_second));
    }
    Ok(bits.exp2() / guesses_per_second)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivacyReport {
    pub num_aps: usize,
    pub naive_entropy_bits: f64,
    pub effective_entropy_bits: f64,
    pub dictionary_size: u64,
    pub avg_neighbors: u64,
    pub guesses_per_second: f64,
    /// Worst case: the whole effective search space.
    pub brute_force_seconds: f64,
    /// Expected case: half the search space.
    pub brute_force_average_seconds: f64,
    pub assumptions: String,
}

pub fn analyze_scan(
    scan: &Scan,
    dictionary_size: u64,
    avg_neighbors: u64,
    guesses_per_second: f64,
) -> Result<PrivacyReport, PrivacyError> {
    let num_aps = scan.len();
    let effective = if num_aps == 0 {
        if dictionary_size == 0 {
            return Err(PrivacyError::EmptyDictionary);
        }
        if avg_neighbors == 0 {
            return Err(PrivacyError::NoNeighbors);
        }
        0.0
    } else {
        effective_entropy(num_aps, dictionary_size, avg_neighbors)?
    };
    let brute_force_seconds = brute_force_time(effective, guesses_per_second)?;
    Ok(PrivacyReport {
        num_aps,
        naive_entropy_bits: naive_entropy(num_aps),
        effective_entropy_bits: effective,
        dictionary_size,
        avg_neighbors,
        guesses_per_second,
        brute_force_seconds,
        brute_force_average_seconds: brute_force_seconds / 2.0,
        assumptions: format!(
            "device={} t={}s; {} bits per MAC address; attacker dictionary of {} geolocated APs; \
             {} neighbouring APs per AP in the adjacency map; {} guesses/s",
            scan.device_id(),
            scan.timestamp_s(),
            MAC_ADDRESS_BITS,
            dictionary_size,
            avg_neighbors,
            guesses_per_second
        ),
    })
}

impl fmt::Display for PrivacyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<28} {:>16}", "access points", self.num_aps)?;
        writeln!(f, "{:<28} {:>16.2}", "naive entropy (bits)", self.naive_entropy_bits)?;
        writeln!(f, "{:<28} {:>16.2}", "effective entropy (bits)", self.effective_entropy_bits)?;
        writeln!(f, "{:<28} {:>16}", "dictionary size", self.dictionary_size)?;
        writeln!(f, "{:<28} {:>16}", "avg neighbours", self.avg_neighbors)?;
        writeln!(f, "{:<28} {:>16.3e}", "guesses per second", self.guesses_per_second)?;
        writeln!(f, "{:<28} {:>16.3e}", "brute force, worst (s)", self.brute_force_seconds)?;
        writeln!(f, "{:<28} {:>16.3e}", "brute force, average (s)", self.brute_force_average_seconds)?;
        write!(f, "assumptions: {}", self.assumptions)
    }
}
