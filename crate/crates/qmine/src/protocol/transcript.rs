//! Round records and their JSON-lines form: one header line, then one
//! `RoundRecord` per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AbortReason, ProtocolParams};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    Compute,
    Test1,
    Test2,
    Final,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionReason {
    /// v₀ ≠ w₀.
    V0Mismatch,
    /// A bit other than v₀/w₀ came out 1.
    StrayOne,
    /// The swap test returned 1.
    SwapTest,
    /// Failed an idealised state comparison.
    Fidelity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// Loop index; `None` for the final window.
    pub loop_index: Option<usize>,
    pub kind: RoundKind,
    /// Alice's test draw for this window.
    pub r: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detection: Option<DetectionReason>,
    /// Measurement outcomes as 0/1 strings, in the order taken.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub outcomes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cause", rename_all = "snake_case")]
pub enum Cause {
    Detected { reason: DetectionReason },
    BobAbort { reason: AbortReason },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Termination {
    pub loop_index: Option<usize>,
    #[serde(flatten)]
    pub cause: Cause,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptHeader {
    pub seed: u64,
    pub params: ProtocolParams,
    pub y: u64,
    pub theta: Option<u64>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub terminated: Option<Termination>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct Transcript {
    pub records: Vec<RoundRecord>,
}

impl Transcript {
    pub fn push(&mut self, r: RoundRecord) {
        self.records.push(r);
    }

    pub fn tests(&self) -> usize {
        self.records.iter().filter(|r| matches!(r.kind, RoundKind::Test1 | RoundKind::Test2)).count()
    }

    pub fn detections(&self) -> usize {
        self.records.iter().filter(|r| r.detection.is_some()).count()
    }
}

pub fn write_transcript(w: &mut impl Write, header: &TranscriptHeader, t: &Transcript) -> Result<()> {
    let io = |e| Error::io("<transcript>", e);
    serde_json::to_writer(&mut *w, header)?;
    w.write_all(b"\n").map_err(io)?;
    for r in &t.records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

pub fn read_transcript(path: &Path) -> Result<(TranscriptHeader, Transcript)> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = std::io::BufReader::new(f).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Parse("empty transcript".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: TranscriptHeader = serde_json::from_str(&first)?;
    let mut t = Transcript::default();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            t.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, t))
}
