use std::cell::Cell;
use std::fs;
use std::io;
use std::path::Path;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::backend::{CompletionRequest, CompletionResponse};

pub trait Clock {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Starts at a fixed instant and advances one second per reading, so logs
/// of offline runs are reproducible byte for byte.
#[derive(Debug)]
pub struct LogicalClock {
    start: DateTime<Utc>,
    ticks: Cell<i64>,
}

impl LogicalClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            start,
            ticks: Cell::new(0),
        }
    }
}

impl Default for LogicalClock {
    fn default() -> Self {
        Self::new(DateTime::UNIX_EPOCH)
    }
}

impl Clock for LogicalClock {
    fn now(&self) -> DateTime<Utc> {
        let t = self.ticks.get();
        self.ticks.set(t + 1);
        self.start + Duration::seconds(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    pub ordinal: usize,
    pub request: CompletionRequest,
    pub response: CompletionResponse,
    pub timestamp: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Every backend exchange of one chain run, in call order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainLog {
    records: Vec<ExchangeRecord>,
}

impl ChainLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        request: CompletionRequest,
        response: CompletionResponse,
        error: Option<String>,
        at: DateTime<Utc>,
    ) {
        self.records.push(ExchangeRecord {
            ordinal: self.records.len(),
            request,
            response,
            timestamp: at.to_rfc3339_opts(SecondsFormat::Millis, true),
            error,
        });
    }

    pub fn records(&self) -> &[ExchangeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }

    pub fn from_jsonl(raw: &str) -> Result<Self, serde_json::Error> {
        let records = raw
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, self.to_jsonl())
    }
}
