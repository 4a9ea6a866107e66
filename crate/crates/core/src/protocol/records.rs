//! Transcript records and their JSON-lines log format.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::Bloch;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseFlag {
    Acc,
    Rej,
    Cont,
}

/// The Phase-A messages the Bell mapping reads.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "protocol", rename_all = "lowercase")]
pub enum Transcript {
    /// Key id, image, verifier string and Hadamard outcome of the toy TCF round.
    Tcf { key: u64, z: u32, r: u32, d: u32 },
    /// Encrypted input and answer, plus the verifier's one-time pads.
    Compiled { x_enc: u8, a_enc: u8, pad: [u8; 2] },
}

/// What the prover holds after Phase A: a classical label and, for quantum provers, a qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProverView {
    pub label: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bloch: Option<Bloch>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub shot: u64,
    pub transcript: Transcript,
    pub virtual_x: u8,
    pub virtual_a: u8,
    pub flag: PhaseFlag,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub challenge_y: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_b: Option<u8>,
    pub view: ProverView,
}

impl TranscriptRecord {
    /// Phase-B fields are present exactly when the round continued.
    pub fn is_consistent(&self) -> bool {
        let has_b = self.challenge_y.is_some() && self.response_b.is_some();
        let has_none = self.challenge_y.is_none() && self.response_b.is_none();
        if self.flag == PhaseFlag::Cont {
            has_b
        } else {
            has_none
        }
    }
}

/// First line of a record log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub protocol: String,
    pub seed: u64,
    pub shots: u64,
    pub config: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    header: RecordHeader,
}

pub fn write_jsonl(header: &RecordHeader, records: &[TranscriptRecord]) -> String {
    let mut out = serde_json::to_string(&HeaderLine {
        header: header.clone(),
    })
    .expect("header serializes");
    out.push('\n');
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<(RecordHeader, Vec<TranscriptRecord>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter("empty record log".into()))?;
    let header = serde_json::from_str::<HeaderLine>(first)?.header;
    let records = lines
        .map(serde_json::from_str)
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok((header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(flag: PhaseFlag, phase_b: bool) -> TranscriptRecord {
        TranscriptRecord {
            shot: 3,
            transcript: Transcript::Tcf {
                key: 1,
                z: 5,
                r: 9,
                d: 2,
            },
            virtual_x: 1,
            virtual_a: 0,
            flag,
            challenge_y: phase_b.then_some(1),
            response_b: phase_b.then_some(0),
            view: ProverView {
                label: 0,
                bloch: Some(Bloch([0.0, 0.0, 1.0])),
            },
        }
    }

    #[test]
    fn phase_b_fields_follow_the_flag() {
        assert!(record(PhaseFlag::Cont, true).is_consistent());
        assert!(!record(PhaseFlag::Cont, false).is_consistent());
        assert!(record(PhaseFlag::Acc, false).is_consistent());
        assert!(!record(PhaseFlag::Rej, true).is_consistent());
    }

    #[test]
    fn log_round_trip() {
        let header = RecordHeader {
            protocol: "tcf".into(),
            seed: 7,
            shots: 2,
            config: serde_json::json!({"n": 4}),
        };
        let recs = vec![record(PhaseFlag::Cont, true), record(PhaseFlag::Acc, false)];
        let text = write_jsonl(&header, &recs);
        assert_eq!(text.lines().count(), 3);
        assert!(!text.lines().nth(2).unwrap().contains("challenge_y"));
        let (h, r) = read_jsonl(&text).unwrap();
        assert_eq!(h, header);
        assert_eq!(r, recs);
        assert!(read_jsonl("").is_err());
        assert!(read_jsonl("{\"header\":1}").is_err());
    }
}
