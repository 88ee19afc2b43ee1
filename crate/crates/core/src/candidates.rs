use serde::{Deserialize, Serialize};

use crate::nn::FlatParams;

/// Where a candidate policy came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    EsaInitial { particle: usize },
    EsaRelease { particle: usize, step: usize },
    RandomWalkInitial { walker: usize },
    RandomWalkRelease { walker: usize, step: usize },
    CheckpointAverage,
    Pbt { member: usize },
    GuidedEs,
    Vfs,
    Incumbent,
    Cloud { sample: usize },
    File { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub params: FlatParams,
    pub provenance: Provenance,
}

impl Candidate {
    pub fn new(params: FlatParams, provenance: Provenance) -> Self {
        Self { params, provenance }
    }
}

pub type CandidateSet = Vec<Candidate>;
