//! The summary action space and the executability mask.

use crate::dialogue::{ActType, BeliefState, DomainSpec};

/// Abstract policy actions over S constraint slots, in fixed order:
/// request(slot 0..S), confirm(slot 0..S), inform, repeat, bye.
/// Size is 2S + 3.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummaryAction {
    Request(usize),
    Confirm(usize),
    Inform,
    Repeat,
    Bye,
}

#[derive(Clone, Debug)]
pub struct ActionSpace {
    pub num_slots: usize,
}

impl ActionSpace {
    pub fn new(spec: &DomainSpec) -> Self {
        ActionSpace { num_slots: spec.slots.len() }
    }

    pub fn len(&self) -> usize {
        2 * self.num_slots + 3
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn action(&self, index: usize) -> SummaryAction {
        let s = self.num_slots;
        match index {
            i if i < s => SummaryAction::Request(i),
            i if i < 2 * s => SummaryAction::Confirm(i - s),
            i if i == 2 * s => SummaryAction::Inform,
            i if i == 2 * s + 1 => SummaryAction::Repeat,
            i if i == 2 * s + 2 => SummaryAction::Bye,
            _ => panic!("action index {index} out of range"),
        }
    }

    pub fn index(&self, action: SummaryAction) -> usize {
        let s = self.num_slots;
        match action {
            SummaryAction::Request(i) => i,
            SummaryAction::Confirm(i) => s + i,
            SummaryAction::Inform => 2 * s,
            SummaryAction::Repeat => 2 * s + 1,
            SummaryAction::Bye => 2 * s + 2,
        }
    }

    /// Which actions make sense in the current belief: confirm needs some
    /// evidence on the slot, inform needs at least one filled slot,
    /// request/repeat/bye are always available. Once the user has said
    /// goodbye only bye remains, so dialogues close.
    pub fn executable_mask(&self, belief: &BeliefState) -> Vec<bool> {
        let mut mask = vec![false; self.len()];
        if belief.last_user_act == Some(ActType::Bye) {
            mask[self.index(SummaryAction::Bye)] = true;
            return mask;
        }
        let any_filled = (0..self.num_slots).any(|s| belief.filled(s));
        for i in 0..self.len() {
            mask[i] = match self.action(i) {
                SummaryAction::Request(_) => true,
                SummaryAction::Confirm(s) => belief.top_value(s).1 > 0.0,
                SummaryAction::Inform => any_filled,
                SummaryAction::Repeat => true,
                SummaryAction::Bye => true,
            };
        }
        mask
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::{focus_update, SlotDef};

    fn spec() -> DomainSpec {
        DomainSpec {
            name: "t".into(),
            slots: (0..4)
                .map(|i| SlotDef {
                    name: format!("s{i}"),
                    values: vec!["a".into(), "b".into()],
                })
                .collect(),
            database: Vec::new(),
        }
    }

    #[test]
    fn size_is_two_s_plus_three() {
        let space = ActionSpace::new(&spec());
        assert_eq!(space.len(), 11);
        assert_eq!(space.action(0), SummaryAction::Request(0));
        assert_eq!(space.action(4), SummaryAction::Confirm(0));
        assert_eq!(space.action(8), SummaryAction::Inform);
        assert_eq!(space.action(10), SummaryAction::Bye);
    }

    #[test]
    fn fresh_belief_blocks_confirm_and_inform() {
        let spec = spec();
        let space = ActionSpace::new(&spec);
        let belief = BeliefState::fresh(&spec);
        let mask = space.executable_mask(&belief);
        for i in 0..4 {
            assert!(mask[i], "request {i}");
            assert!(!mask[4 + i], "confirm {i}");
        }
        assert!(!mask[8], "inform");
        assert!(mask[9], "repeat");
        assert!(mask[10], "bye");
    }

    #[test]
    fn filling_a_slot_unlocks_inform_and_confirm() {
        let spec = spec();
        let space = ActionSpace::new(&spec);
        let mut belief = BeliefState::fresh(&spec);
        focus_update(&mut belief, 2, &[(1, 1.0)]).unwrap();
        let mask = space.executable_mask(&belief);
        assert!(mask[4 + 2], "confirm filled slot");
        assert!(!mask[4], "confirm empty slot");
        assert!(mask[8], "inform");
    }

    #[test]
    fn user_farewell_narrows_to_bye() {
        let spec = spec();
        let space = ActionSpace::new(&spec);
        let mut belief = BeliefState::fresh(&spec);
        belief.last_user_act = Some(ActType::Bye);
        let mask = space.executable_mask(&belief);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 1);
        assert!(mask[10]);
    }
}
