//! Belief state over slot values with the focus update rule and the
//! fixed-length summary the policy consumes.

use super::acts::{ActType, ACT_TYPE_COUNT};
use super::domain::DomainSpec;
use super::DialogueError;

pub const SUMMARY_DB_BUCKETS: usize = 5;
pub const SUMMARY_ACT_BLOCK: usize = ACT_TYPE_COUNT;
const SUMMARY_PER_SLOT: usize = 4;

/// Per-slot probability distributions over the slot's values plus "none"
/// (stored last), the last user act type, and a turn counter.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefState {
    /// slot → distribution of length `|values| + 1`; the final entry is
    /// the probability that no value has been given.
    pub slots: Vec<Vec<f64>>,
    pub last_user_act: Option<ActType>,
    pub turn: usize,
}

impl BeliefState {
    /// Fresh belief: all mass on "none" for every slot.
    pub fn fresh(spec: &DomainSpec) -> Self {
        let slots = spec
            .slots
            .iter()
            .map(|s| {
                let mut dist = vec![0.0; s.values.len() + 1];
                *dist.last_mut().unwrap() = 1.0;
                dist
            })
            .collect();
        BeliefState { slots, last_user_act: None, turn: 0 }
    }

    /// Highest-probability real value (excluding "none") and its mass.
    pub fn top_value(&self, slot: usize) -> (usize, f64) {
        let dist = &self.slots[slot];
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (v, &p) in dist[..dist.len() - 1].iter().enumerate() {
            if p > best_p {
                best_p = p;
                best = v;
            }
        }
        (best, best_p)
    }

    /// A slot is filled once a real value holds the majority of the mass.
    pub fn filled(&self, slot: usize) -> bool {
        self.top_value(slot).1 > 0.5
    }

    pub fn filled_constraints(&self) -> Vec<(usize, u16)> {
        (0..self.slots.len())
            .filter(|&s| self.filled(s))
            .map(|s| (s, self.top_value(s).0 as u16))
            .collect()
    }
}

/// Focus update for one slot: b'(v) = p(v) + q·b(v) with q = 1 − Σp and
/// p(none) = 0. The result sums to one by construction.
pub fn focus_update(
    belief: &mut BeliefState,
    slot: usize,
    evidence: &[(usize, f64)],
) -> Result<(), DialogueError> {
    if slot >= belief.slots.len() {
        return Err(DialogueError::SlotOutOfRange { index: slot, slots: belief.slots.len() });
    }
    let mut total = 0.0;
    for &(_, p) in evidence {
        if p < 0.0 {
            return Err(DialogueError::NegativeEvidence { p });
        }
        total += p;
    }
    if total > 1.0 + 1e-9 {
        return Err(DialogueError::EvidenceAboveOne { sum: total });
    }
    let q = 1.0 - total;
    let dist = &mut belief.slots[slot];
    for b in dist.iter_mut() {
        *b *= q;
    }
    for &(value, p) in evidence {
        dist[value] += p;
    }
    Ok(())
}

/// Fixed-length policy features: per slot [p_max, p_second, normalized
/// entropy, filled flag] over real values, a one-hot database match-count
/// bucket {0, 1, 2–5, 6–50, >50}, and a one-hot of the last user act.
/// Length is 4·S + 5 + 9.
pub fn summarize(belief: &BeliefState, db_match_count: usize, spec: &DomainSpec) -> Vec<f64> {
    let s = spec.slots.len();
    let mut out = Vec::with_capacity(SUMMARY_PER_SLOT * s + SUMMARY_DB_BUCKETS + SUMMARY_ACT_BLOCK);
    for slot in 0..s {
        let dist = &belief.slots[slot];
        let real = &dist[..dist.len() - 1];
        let mut p_max = 0.0f64;
        let mut p_second = 0.0f64;
        for &p in real {
            if p > p_max {
                p_second = p_max;
                p_max = p;
            } else if p > p_second {
                p_second = p;
            }
        }
        let mut entropy = 0.0;
        for &p in real {
            if p > 0.0 {
                entropy -= p * p.ln();
            }
        }
        let norm = ((real.len() + 1) as f64).ln();
        let entropy = if norm > 0.0 { (entropy / norm).clamp(0.0, 1.0) } else { 0.0 };
        out.push(p_max);
        out.push(p_second);
        out.push(entropy);
        out.push(if p_max > 0.5 { 1.0 } else { 0.0 });
    }
    let bucket = match db_match_count {
        0 => 0,
        1 => 1,
        2..=5 => 2,
        6..=50 => 3,
        _ => 4,
    };
    for i in 0..SUMMARY_DB_BUCKETS {
        out.push(if i == bucket { 1.0 } else { 0.0 });
    }
    let mut act_block = [0.0; SUMMARY_ACT_BLOCK];
    if let Some(act) = belief.last_user_act {
        act_block[act.index()] = 1.0;
    }
    out.extend_from_slice(&act_block);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dialogue::domain::SlotDef;

    fn spec_with_slots(sizes: &[usize]) -> DomainSpec {
        DomainSpec {
            name: "t".into(),
            slots: sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| SlotDef {
                    name: format!("s{i}"),
                    values: (0..n).map(|v| format!("v{v}")).collect(),
                })
                .collect(),
            database: Vec::new(),
        }
    }

    #[test]
    fn zero_evidence_is_identity() {
        let spec = spec_with_slots(&[3]);
        let mut b = BeliefState::fresh(&spec);
        let before = b.clone();
        focus_update(&mut b, 0, &[]).unwrap();
        assert_eq!(b, before);
    }

    #[test]
    fn certain_evidence_is_point_mass() {
        let spec = spec_with_slots(&[3]);
        let mut b = BeliefState::fresh(&spec);
        focus_update(&mut b, 0, &[(1, 1.0)]).unwrap();
        assert_eq!(b.slots[0], vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn hand_worked_update() {
        // b = (A: 0.5, B: 0.3, none: 0.2), evidence p(A) = 0.6
        let spec = spec_with_slots(&[2]);
        let mut b = BeliefState::fresh(&spec);
        b.slots[0] = vec![0.5, 0.3, 0.2];
        focus_update(&mut b, 0, &[(0, 0.6)]).unwrap();
        assert!((b.slots[0][0] - 0.8).abs() < 1e-12);
        assert!((b.slots[0][1] - 0.12).abs() < 1e-12);
        assert!((b.slots[0][2] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn evidence_above_one_rejected() {
        let spec = spec_with_slots(&[2]);
        let mut b = BeliefState::fresh(&spec);
        assert!(focus_update(&mut b, 0, &[(0, 0.7), (1, 0.7)]).is_err());
    }

    #[test]
    fn normalization_preserved_over_random_updates() {
        use rand::{Rng, SeedableRng};
        let spec = spec_with_slots(&[4]);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(1);
        for _ in 0..500 {
            let mut b = BeliefState::fresh(&spec);
            for _ in 0..rng.gen_range(1..10) {
                let scale: f64 = rng.gen();
                let raw: Vec<f64> = (0..4).map(|_| rng.gen::<f64>()).collect();
                let total: f64 = raw.iter().sum();
                let evidence: Vec<(usize, f64)> =
                    raw.iter().enumerate().map(|(v, p)| (v, scale * p / total)).collect();
                focus_update(&mut b, 0, &evidence).unwrap();
                let sum: f64 = b.slots[0].iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "sum drifted to {sum}");
            }
        }
    }

    #[test]
    fn fresh_summary_features_are_zero_per_slot() {
        let spec = spec_with_slots(&[3, 3]);
        let b = BeliefState::fresh(&spec);
        let v = summarize(&b, 100, &spec);
        assert_eq!(v.len(), 4 * 2 + 5 + 9);
        // p_max, p_second, entropy, filled all zero: mass sits on none
        assert_eq!(&v[0..4], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(&v[4..8], &[0.0, 0.0, 0.0, 0.0]);
        // >50 bucket
        assert_eq!(&v[8..13], &[0.0, 0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn point_mass_summary() {
        let spec = spec_with_slots(&[3]);
        let mut b = BeliefState::fresh(&spec);
        focus_update(&mut b, 0, &[(2, 1.0)]).unwrap();
        let v = summarize(&b, 1, &spec);
        assert_eq!(&v[0..4], &[1.0, 0.0, 0.0, 1.0]);
        assert_eq!(&v[4..9], &[0.0, 1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn summary_length_for_six_slots() {
        let spec = spec_with_slots(&[2; 6]);
        let b = BeliefState::fresh(&spec);
        assert_eq!(summarize(&b, 0, &spec).len(), 4 * 6 + 5 + 9);
    }

    #[test]
    fn entries_stay_in_unit_interval() {
        use rand::{Rng, SeedableRng};
        let spec = spec_with_slots(&[5]);
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(2);
        for _ in 0..200 {
            let mut b = BeliefState::fresh(&spec);
            for _ in 0..3 {
                let v = rng.gen_range(0..5);
                let p: f64 = rng.gen();
                focus_update(&mut b, 0, &[(v, p)]).unwrap();
            }
            b.last_user_act = Some(ActType::Inform);
            for x in summarize(&b, rng.gen_range(0..200), &spec) {
                assert!((0.0..=1.0).contains(&x));
            }
        }
    }
}
