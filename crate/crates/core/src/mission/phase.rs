//! Mission phases and the legal transition relation.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    ScanAndMap,
    SelectZone,
    PositionOverZone,
    LowerTether,
    VerifyTouchdown,
    Detach,
    GroundOps,
    ReturnAndSignal,
    AlignForRetrieval,
    Reattach,
    Retract,
    Done,
    Aborted,
}

impl Phase {
    /// Stable name used in the event log schema.
    pub fn name(&self) -> &'static str {
        match self {
            Phase::Idle => "Idle",
            Phase::ScanAndMap => "ScanAndMap",
            Phase::SelectZone => "SelectZone",
            Phase::PositionOverZone => "PositionOverZone",
            Phase::LowerTether => "LowerTether",
            Phase::VerifyTouchdown => "VerifyTouchdown",
            Phase::Detach => "Detach",
            Phase::GroundOps => "GroundOps",
            Phase::ReturnAndSignal => "ReturnAndSignal",
            Phase::AlignForRetrieval => "AlignForRetrieval",
            Phase::Reattach => "Reattach",
            Phase::Retract => "Retract",
            Phase::Done => "Done",
            Phase::Aborted => "Aborted",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Phase::Done | Phase::Aborted)
    }
}

/// Whether the tether stays connected throughout the mission or the vehicle
/// is released for independent operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissionMode {
    Attached,
    Detached,
}

/// The full transition relation (union over both modes). Every phase may
/// abort; terminal phases have no exits.
pub fn transition_allowed(from: Phase, to: Phase) -> bool {
    use Phase::*;
    if from.is_terminal() {
        return false;
    }
    if to == Aborted {
        return true;
    }
    matches!(
        (from, to),
        (Idle, ScanAndMap)
            | (ScanAndMap, SelectZone)
            | (SelectZone, PositionOverZone)
            | (PositionOverZone, LowerTether)
            | (LowerTether, VerifyTouchdown)
            | (VerifyTouchdown, Detach)
            | (VerifyTouchdown, GroundOps) // attached mode skips the release
            | (VerifyTouchdown, LowerTether) // reattempt
            | (Detach, GroundOps)
            | (GroundOps, ReturnAndSignal)
            | (ReturnAndSignal, AlignForRetrieval)
            | (AlignForRetrieval, Reattach)
            | (AlignForRetrieval, Retract) // attached mode skips reattachment
            | (Reattach, Retract)
            | (Retract, Done)
    )
}
