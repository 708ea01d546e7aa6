//! WiFi scan data model and the line-delimited JSON scan-log format.
//!
//! A scan log holds one JSON object per line:
//!
//! ```text
//! {"device_id":"s1","timestamp_s":0,"ground_truth_distance_ft":3,"observations":[{"bssid":"aa:bb:cc:dd:ee:ff","rssi_dbm":-40}]}
//! ```
//!
//! BSSIDs are canonicalized to lowercase colon-separated hex on ingestion and
//! the scans of a log are kept sorted by `(device_id, timestamp_s)`.

use std::cmp::Ordering;
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

/// Weakest signal strength accepted in a scan.
pub const RSSI_MIN_DBM: f64 = -120.0;
/// Strongest signal strength accepted in a scan.
pub const RSSI_MAX_DBM: f64 = 0.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScanError {
    #[error("invalid bssid {0:?}: expected six hex octets")]
    InvalidBssid(String),
    #[error("rssi out of range: {0} dBm is outside [-120, 0]")]
    RssiOutOfRange(f64),
    #[error("duplicate bssid {0} within one scan")]
    DuplicateBssid(Bssid),
    #[error("invalid timestamp {0}: must be finite and non-negative")]
    InvalidTimestamp(f64),
    #[error("invalid ground-truth distance {0} ft: must be finite and non-negative")]
    InvalidDistance(f64),
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        #[source]
        source: ScanError,
    },
    #[error("failed to read scan log: {0}")]
    Io(#[from] io::Error),
}

impl LogError {
    /// 1-based input line the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            LogError::Json { line, .. } | LogError::Invalid { line, .. } => Some(*line),
            LogError::Io(_) => None,
        }
    }
}

/// A 48-bit access point MAC address.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bssid([u8; 6]);

impl Bssid {
    pub const fn new(octets: [u8; 6]) -> Self {
        Bssid(octets)
    }

    pub const fn octets(&self) -> [u8; 6] {
        self.0
    }

    /// Builds a BSSID from the low 48 bits of `value`.
    pub fn from_u64(value: u64) -> Self {
        let bytes = value.to_be_bytes();
        let mut octets = [0u8; 6];
        octets.copy_from_slice(&bytes[2..]);
        Bssid(octets)
    }

    pub fn to_u64(&self) -> u64 {
        self.0.iter().fold(0u64, |acc, &b| (acc << 8) | u64::from(b))
    }
}

impl FromStr for Bssid {
    type Err = ScanError;

    /// Accepts `aa:bb:cc:dd:ee:ff`, `aa-bb-cc-dd-ee-ff` or twelve bare hex
    /// digits, in any letter case.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let invalid = || ScanError::InvalidBssid(s.to_string());
        let trimmed = s.trim();
        let parts: Vec<&str> = if trimmed.contains(':') {
            trimmed.split(':').collect()
        } else if trimmed.contains('-') {
            trimmed.split('-').collect()
        } else if trimmed.len() == 12 && trimmed.is_ascii() {
            (0..6).map(|i| &trimmed[2 * i..2 * i + 2]).collect()
        } else {
            return Err(invalid());
        };
        if parts.len() != 6 {
            return Err(invalid());
        }
        let mut octets = [0u8; 6];
        for (slot, part) in octets.iter_mut().zip(&parts) {
            if part.len() != 2 || !part.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(invalid());
            }
            *slot = u8::from_str_radix(part, 16).map_err(|_| invalid())?;
        }
        Ok(Bssid(octets))
    }
}

impl fmt::Display for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            o[0], o[1], o[2], o[3], o[4], o[5]
        )
    }
}

impl fmt::Debug for Bssid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bssid({self})")
    }
}

impl Serialize for Bssid {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Bssid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Returns the canonical lowercase colon-separated form of a BSSID string.
pub fn canonicalize_bssid(s: &str) -> Result<String, ScanError> {
    s.parse::<Bssid>().map(|b| b.to_string())
}

/// One access point seen in a scan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApObservation {
    pub bssid: Bssid,
    pub rssi_dbm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssid: Option<String>,
}

impl ApObservation {
    pub fn new(bssid: Bssid, rssi_dbm: f64) -> Result<Self, ScanError> {
        if !(RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(&rssi_dbm) {
            return Err(ScanError::RssiOutOfRange(rssi_dbm));
        }
        Ok(ApObservation {
            bssid,
            rssi_dbm,
            ssid: None,
        })
    }

    pub fn with_ssid(mut self, ssid: impl Into<String>) -> Self {
        self.ssid = Some(ssid.into());
        self
    }
}

/// One device's snapshot of the visible access points.
///
/// Observations are stored sorted by BSSID, which lets pairwise feature
/// computations merge two scans in linear time.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    device_id: String,
    timestamp_s: f64,
    observations: Vec<ApObservation>,
    ground_truth_distance_ft: Option<f64>,
}

impl Scan {
    pub fn new(
        device_id: impl Into<String>,
        timestamp_s: f64,
        mut observations: Vec<ApObservation>,
        ground_truth_distance_ft: Option<f64>,
    ) -> Result<Self, ScanError> {
        if !timestamp_s.is_finite() || timestamp_s < 0.0 {
            return Err(ScanError::InvalidTimestamp(timestamp_s));
        }
        if let Some(d) = ground_truth_distance_ft {
            if !d.is_finite() || d < 0.0 {
                return Err(ScanError::InvalidDistance(d));
            }
        }
        for obs in &observations {
            if !(RSSI_MIN_DBM..=RSSI_MAX_DBM).contains(&obs.rssi_dbm) {
                return Err(ScanError::RssiOutOfRange(obs.rssi_dbm));
            }
        }
        observations.sort_by_key(|o| o.bssid);
        if let Some(w) = observations.windows(2).find(|w| w[0].bssid == w[1].bssid) {
            return Err(ScanError::DuplicateBssid(w[0].bssid));
        }
        Ok(Scan {
            device_id: device_id.into(),
            timestamp_s,
            observations,
            ground_truth_distance_ft,
        })
    }

    pub fn device_id(&self) -> &str {
        &self.device_id
    }

    pub fn timestamp_s(&self) -> f64 {
        self.timestamp_s
    }

    /// Observations in ascending BSSID order.
    pub fn observations(&self) -> &[ApObservation] {
        &self.observations
    }

    pub fn ground_truth_distance_ft(&self) -> Option<f64> {
        self.ground_truth_distance_ft
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn get(&self, bssid: &Bssid) -> Option<&ApObservation> {
        self.observations
            .binary_search_by(|o| o.bssid.cmp(bssid))
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn bssids(&self) -> impl Iterator<Item = Bssid> + '_ {
        self.observations.iter().map(|o| o.bssid)
    }

    fn sort_key_cmp(&self, other: &Scan) -> Ordering {
        self.device_id
            .cmp(&other.device_id)
            .then(self.timestamp_s.total_cmp(&other.timestamp_s))
    }
}

#[derive(Serialize)]
struct ScanLine<'a> {
    device_id: &'a str,
    timestamp_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ground_truth_distance_ft: Option<f64>,
    observations: &'a [ApObservation],
}

#[derive(Deserialize)]
struct RawObservation {
    bssid: String,
    rssi_dbm: f64,
    #[serde(default)]
    ssid: Option<String>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Deserialize)]
struct RawScan {
    device_id: String,
    timestamp_s: f64,
    #[serde(default)]
    ground_truth_distance_ft: Option<f64>,
    observations: Vec<RawObservation>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

impl RawScan {
    fn into_scan(self, unknown: &mut usize) -> Result<Scan, ScanError> {
        *unknown += self.extra.len();
        let mut observations = Vec::with_capacity(self.observations.len());
        for raw in self.observations {
            *unknown += raw.extra.len();
            let mut obs = ApObservation::new(raw.bssid.parse()?, raw.rssi_dbm)?;
            obs.ssid = raw.ssid;
            observations.push(obs);
        }
        Scan::new(
            self.device_id,
            self.timestamp_s,
            observations,
            self.ground_truth_distance_ft,
        )
    }
}

/// An ordered collection of scans with a provenance label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanLog {
    scans: Vec<Scan>,
    source: String,
}

impl ScanLog {
    /// Builds a log, stably sorting the scans by `(device_id, timestamp_s)`.
    pub fn new(source: impl Into<String>, mut scans: Vec<Scan>) -> Self {
        scans.sort_by(Scan::sort_key_cmp);
        ScanLog {
            scans,
            source: source.into(),
        }
    }

    pub fn scans(&self) -> &[Scan] {
        &self.scans
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn len(&self) -> usize {
        self.scans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scans.is_empty()
    }

    pub fn into_scans(self) -> Vec<Scan> {
        self.scans
    }

    /// Serializes the log as line-delimited JSON.
    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        write_scan_log(self, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Counters gathered while parsing a scan log.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub lines: usize,
    pub blank_lines: usize,
    pub unknown_fields: usize,
}

pub fn parse_scan_log<R: BufRead>(input: R, source: &str) -> Result<ScanLog, LogError> {
    parse_scan_log_with_stats(input, source).map(|(log, _)| log)
}

/// Parses a scan log and reports how many unknown fields were skipped.
///
/// Blank lines are ignored. Errors carry the 1-based line number.
pub fn parse_scan_log_with_stats<R: BufRead>(
    input: R,
    source: &str,
) -> Result<(ScanLog, ParseStats), LogError> {
    let mut stats = ParseStats::default();
    let mut scans = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        stats.lines += 1;
        if line.trim().is_empty() {
            stats.blank_lines += 1;
            continue;
        }
        let raw: RawScan = serde_json::from_str(&line).map_err(|source| LogError::Json {
            line: line_no,
            source,
        })?;
        let scan = raw
            .into_scan(&mut stats.unknown_fields)
            .map_err(|source| LogError::Invalid {
                line: line_no,
                source,
            })?;
        scans.push(scan);
    }
    if stats.unknown_fields > 0 {
        log::warn!(
            "{source}: ignored {} unknown field(s)",
            stats.unknown_fields
        );
    }
    Ok((ScanLog::new(source, scans), stats))
}

/// Writes one JSON object per scan, each terminated by `\n`.
pub fn write_scan_log<W: Write>(log: &ScanLog, mut out: W) -> io::Result<()> {
    for scan in &log.scans {
        let line = ScanLine {
            device_id: &scan.device_id,
            timestamp_s: scan.timestamp_s,
            ground_truth_distance_ft: scan.ground_truth_distance_ft,
            observations: &scan.observations,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<ScanLog, LogError> {
        parse_scan_log(s.as_bytes(), "test")
    }

    #[test]
    fn canonicalizes_uppercase_bssid() {
        let log = parse(
            r#"{"device_id":"s1","timestamp_s":0,"observations":[{"bssid":"AA:BB:CC:DD:EE:FF","rssi_dbm":-40}]}"#,
        )
        .unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(
            log.scans()[0].observations()[0].bssid.to_string(),
            "aa:bb:cc:dd:ee:ff"
        );
    }

    #[test]
    fn empty_input_is_empty_log() {
        assert!(parse("").unwrap().is_empty());
        assert!(parse("\n  \n").unwrap().is_empty());
    }

    #[test]
    fn rssi_out_of_range_names_line() {
        let input = concat!(
            r#"{"device_id":"s1","timestamp_s":0,"observations":[]}"#,
            "\n",
            r#"{"device_id":"s1","timestamp_s":1,"observations":[{"bssid":"aa:bb:cc:dd:ee:ff","rssi_dbm":5}]}"#,
        );
        let err = parse(input).unwrap_err();
        assert_eq!(err.line(), Some(2));
        let msg = err.to_string();
        assert!(msg.contains("rssi out of range"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn malformed_json_names_line() {
        let err = parse("{\"device_id\":").unwrap_err();
        assert!(matches!(err, LogError::Json { line: 1, .. }));
    }

    #[test]
    fn duplicate_bssid_rejected() {
        let err = parse(
            r#"{"device_id":"s1","timestamp_s":0,"observations":[{"bssid":"aa:bb:cc:dd:ee:ff","rssi_dbm":-40},{"bssid":"AA-BB-CC-DD-EE-FF","rssi_dbm":-50}]}"#,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            LogError::Invalid {
                source: ScanError::DuplicateBssid(_),
                ..
            }
        ));
    }

    #[test]
    fn unknown_fields_counted_not_fatal() {
        let (log, stats) = parse_scan_log_with_stats(
            r#"{"device_id":"s1","timestamp_s":0,"app":"x","observations":[{"bssid":"aabbccddeeff","rssi_dbm":-40,"freq":2412}]}"#.as_bytes(),
            "t",
        )
        .unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(stats.unknown_fields, 2);
    }

    #[test]
    fn sorted_by_device_then_time_stably() {
        let input = [
            r#"{"device_id":"b","timestamp_s":1,"observations":[]}"#,
            r#"{"device_id":"a","timestamp_s":5,"observations":[],"ground_truth_distance_ft":1}"#,
            r#"{"device_id":"a","timestamp_s":5,"observations":[],"ground_truth_distance_ft":2}"#,
            r#"{"device_id":"a","timestamp_s":0,"observations":[]}"#,
        ]
        .join("\n");
        let log = parse(&input).unwrap();
        let keys: Vec<_> = log
            .scans()
            .iter()
            .map(|s| (s.device_id(), s.timestamp_s(), s.ground_truth_distance_ft()))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("a", 0.0, None),
                ("a", 5.0, Some(1.0)),
                ("a", 5.0, Some(2.0)),
                ("b", 1.0, None)
            ]
        );
    }

    #[test]
    fn bssid_forms() {
        for s in ["aa:bb:cc:dd:ee:ff", "AA-BB-CC-DD-EE-FF", "aAbBcCdDeEfF"] {
            assert_eq!(canonicalize_bssid(s).unwrap(), "aa:bb:cc:dd:ee:ff");
        }
        for s in ["", "aa:bb:cc:dd:ee", "aa:bb:cc:dd:ee:gg", "aabbccddeeff00", "a:bb:cc:dd:ee:ff0"] {
            assert!(canonicalize_bssid(s).is_err(), "{s}");
        }
        let b = Bssid::new([1, 2, 3, 4, 5, 6]);
        assert_eq!(Bssid::from_u64(b.to_u64()), b);
    }

    #[test]
    fn write_empty_and_single() {
        let empty = ScanLog::new("x", vec![]);
        assert_eq!(empty.to_jsonl(), "");
        let scan = Scan::new(
            "s1",
            2.5,
            vec![ApObservation::new("aa:bb:cc:dd:ee:ff".parse().unwrap(), -40.5)
                .unwrap()
                .with_ssid("home")],
            Some(3.0),
        )
        .unwrap();
        let log = ScanLog::new("x", vec![scan]);
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(parse_scan_log(text.as_bytes(), "x").unwrap(), log);
    }

    #[test]
    fn scan_rejects_bad_values() {
        assert!(matches!(
            Scan::new("d", -1.0, vec![], None),
            Err(ScanError::InvalidTimestamp(_))
        ));
        assert!(matches!(
            Scan::new("d", 0.0, vec![], Some(f64::NAN)),
            Err(ScanError::InvalidDistance(_))
        ));
        assert!(ApObservation::new(Bssid::new([0; 6]), -120.5).is_err());
        assert!(ApObservation::new(Bssid::new([0; 6]), -120.0).is_ok());
    }
}
