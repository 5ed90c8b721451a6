//! Typed dialogue acts exchanged between system and user.

use serde::{Deserialize, Serialize};

/// Act categories, in the fixed order used for one-hot encodings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActType {
    Hello,
    Request,
    Inform,
    Confirm,
    Affirm,
    Deny,
    Repeat,
    Bye,
    Garbled,
}

pub const ACT_TYPE_COUNT: usize = 9;

impl ActType {
    pub fn index(self) -> usize {
        match self {
            ActType::Hello => 0,
            ActType::Request => 1,
            ActType::Inform => 2,
            ActType::Confirm => 3,
            ActType::Affirm => 4,
            ActType::Deny => 5,
            ActType::Repeat => 6,
            ActType::Bye => 7,
            ActType::Garbled => 8,
        }
    }

    pub fn all() -> [ActType; ACT_TYPE_COUNT] {
        [
            ActType::Hello,
            ActType::Request,
            ActType::Inform,
            ActType::Confirm,
            ActType::Affirm,
            ActType::Deny,
            ActType::Repeat,
            ActType::Bye,
            ActType::Garbled,
        ]
    }
}

/// A dialogue act with its slot-value payload. Slots and values are
/// indices into the active domain's slot and value lists.
///
/// - `Request` carries the slot being asked for.
/// - `Confirm` carries a slot and the value to be confirmed.
/// - `Inform` carries slot-value pairs; an entity offer also carries the
///   entity's payload string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DialogueAct {
    Hello,
    Request { slot: usize },
    Inform { pairs: Vec<(usize, usize)>, payload: Option<String> },
    Confirm { slot: usize, value: usize },
    Affirm,
    Deny,
    Repeat,
    Bye,
    Garbled,
}

impl DialogueAct {
    pub fn act_type(&self) -> ActType {
        match self {
            DialogueAct::Hello => ActType::Hello,
            DialogueAct::Request { .. } => ActType::Request,
            DialogueAct::Inform { .. } => ActType::Inform,
            DialogueAct::Confirm { .. } => ActType::Confirm,
            DialogueAct::Affirm => ActType::Affirm,
            DialogueAct::Deny => ActType::Deny,
            DialogueAct::Repeat => ActType::Repeat,
            DialogueAct::Bye => ActType::Bye,
            DialogueAct::Garbled => ActType::Garbled,
        }
    }

    pub fn inform_single(slot: usize, value: usize) -> Self {
        DialogueAct::Inform { pairs: vec![(slot, value)], payload: None }
    }
}
