use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training stages, in the order they run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PretrainAe,
    PretrainTrans,
    PretrainMi,
    Finetune,
    Done,
}

impl Phase {
    pub const TRAINING: [Phase; 4] = [Phase::PretrainAe, Phase::PretrainTrans, Phase::PretrainMi, Phase::Finetune];

    pub fn name(self) -> &'static str {
        match self {
            Phase::PretrainAe => "pretrain_ae",
            Phase::PretrainTrans => "pretrain_trans",
            Phase::PretrainMi => "pretrain_mi",
            Phase::Finetune => "finetune",
            Phase::Done => "done",
        }
    }

    pub fn next(self) -> Phase {
        match self {
            Phase::PretrainAe => Phase::PretrainTrans,
            Phase::PretrainTrans => Phase::PretrainMi,
            Phase::PretrainMi => Phase::Finetune,
            Phase::Finetune | Phase::Done => Phase::Done,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Phase::PretrainAe, Phase::PretrainTrans, Phase::PretrainMi, Phase::Finetune, Phase::Done]
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Checkpoint(format!("unknown phase `{s}`")))
    }
}

/// Epoch means of each loss part. Parts a phase does not compute are 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub phase: Phase,
    /// Zero-based within the phase.
    pub epoch: usize,
    pub rec_s: f64,
    pub rec_t: f64,
    pub trans: f64,
    pub mi: f64,
    /// The quantity the phase minimizes, from the epoch means.
    pub total: f64,
}

pub const CSV_HEADER: &str = "phase,epoch,L_rec_s,L_rec_t,L_trans,L_MI,total";

/// One header line plus one line per record; epochs are printed 1-based.
pub fn records_csv(records: &[EpochRecord]) -> String {
    let mut out = format!("{CSV_HEADER}\n");
    for r in records {
        out.push_str(&format!("{},{},{},{},{},{},{}\n", r.phase, r.epoch + 1, r.rec_s, r.rec_t, r.trans, r.mi, r.total));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let r = EpochRecord { phase: Phase::Finetune, epoch: 0, rec_s: 0.5, rec_t: 0.25, trans: 1.0, mi: 0.125, total: 1.625 };
        assert_eq!(records_csv(&[r]), "phase,epoch,L_rec_s,L_rec_t,L_trans,L_MI,total\nfinetune,1,0.5,0.25,1,0.125,1.625\n");
    }

    #[test]
    fn phase_names_round_trip() {
        for p in Phase::TRAINING {
            assert_eq!(p.name().parse::<Phase>().unwrap(), p);
        }
        assert!("warmup".parse::<Phase>().is_err());
        assert_eq!(Phase::Finetune.next(), Phase::Done);
    }
}
