//! Dialogue-wise cross-validation folds: a dialogue never spans folds.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{AnnotatedDialogue, CorpusError};

/// Partitions dialogue ids into `k` disjoint folds whose sizes differ by
/// at most one. Deterministic in `seed`.
pub fn make_folds(
    corpus: &[AnnotatedDialogue],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<String>>, CorpusError> {
    if corpus.len() < k {
        return Err(CorpusError::TooFewDialogues { dialogues: corpus.len(), folds: k });
    }
    let mut ids: Vec<String> = corpus.iter().map(|d| d.dialogue_id.clone()).collect();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id);
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnnotatedTurn;
    use std::collections::HashSet;

    fn dialogues(n: usize) -> Vec<AnnotatedDialogue> {
        (0..n)
            .map(|i| AnnotatedDialogue {
                dialogue_id: format!("d{i}"),
                turns: vec![AnnotatedTurn {
                    turn_index: 0,
                    system_text: "s".into(),
                    user_text: "u".into(),
                    iq: Some(5),
                }],
            })
            .collect()
    }

    #[test]
    fn ten_dialogues_ten_singleton_folds() {
        let folds = make_folds(&dialogues(10), 10, 0).unwrap();
        assert!(folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn four_hundred_dialogues_forty_per_fold() {
        let folds = make_folds(&dialogues(400), 10, 7).unwrap();
        assert!(folds.iter().all(|f| f.len() == 40));
    }

    #[test]
    fn partition_covers_all_ids_disjointly() {
        let corpus = dialogues(53);
        let folds = make_folds(&corpus, 10, 3).unwrap();
        let mut seen = HashSet::new();
        for fold in &folds {
            for id in fold {
                assert!(seen.insert(id.clone()), "{id} appears twice");
            }
        }
        assert_eq!(seen.len(), 53);
        let (min, max) = folds.iter().map(|f| f.len()).fold((usize::MAX, 0), |(lo, hi), n| {
            (lo.min(n), hi.max(n))
        });
        assert!(max - min <= 1);
    }

    #[test]
    fn fewer_dialogues_than_folds_rejected() {
        assert!(make_folds(&dialogues(5), 10, 0).is_err());
    }

    #[test]
    fn deterministic_in_seed() {
        let corpus = dialogues(30);
        assert_eq!(make_folds(&corpus, 7, 9).unwrap(), make_folds(&corpus, 7, 9).unwrap());
        assert_ne!(make_folds(&corpus, 7, 9).unwrap(), make_folds(&corpus, 7, 10).unwrap());
    }
}
