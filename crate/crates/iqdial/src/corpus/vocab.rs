//! Tokenization and vocabulary construction. Id 0 is reserved for unknown
//! tokens; remaining ids are assigned by descending frequency, ties broken
//! lexicographically.

use std::collections::HashMap;

use super::AnnotatedDialogue;

/// Literal token inserted between the system and user utterance when a
/// turn is encoded as one token sequence.
pub const SEPARATOR_TOKEN: &str = "eou";

pub const UNK_ID: usize = 0;

/// Lowercases and splits on every non-alphanumeric character.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|s| !s.is_empty())
        .map(|s| s.to_string())
        .collect()
}

#[derive(Clone, Debug)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

impl Vocab {
    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.id_to_token[id]
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    /// Encodes a full turn: system tokens, the separator, user tokens.
    /// Always yields at least the separator.
    pub fn encode_turn(&self, system_text: &str, user_text: &str) -> Vec<usize> {
        let mut ids = Vec::new();
        for tok in tokenize(system_text) {
            ids.push(self.id(&tok));
        }
        ids.push(self.id(SEPARATOR_TOKEN));
        for tok in tokenize(user_text) {
            ids.push(self.id(&tok));
        }
        ids
    }

    pub fn tokens(&self) -> impl Iterator<Item = &String> {
        self.id_to_token.iter()
    }
}

/// Counts tokens over system and user text (plus the separator, once per
/// turn) and assigns ids. Tokens below `min_count` map to the unknown id.
pub fn build_vocab(corpus: &[AnnotatedDialogue], min_count: usize) -> Vocab {
    let mut counts: HashMap<String, usize> = HashMap::new();
    for dialogue in corpus {
        for turn in &dialogue.turns {
            for tok in tokenize(&turn.system_text).into_iter().chain(tokenize(&turn.user_text)) {
                *counts.entry(tok).or_insert(0) += 1;
            }
            *counts.entry(SEPARATOR_TOKEN.to_string()).or_insert(0) += 1;
        }
    }
    let mut entries: Vec<(String, usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_count.max(1)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let mut id_to_token = vec!["<unk>".to_string()];
    let mut token_to_id = HashMap::new();
    for (tok, _) in entries {
        token_to_id.insert(tok.clone(), id_to_token.len());
        id_to_token.push(tok);
    }
    Vocab { token_to_id, id_to_token }
}
