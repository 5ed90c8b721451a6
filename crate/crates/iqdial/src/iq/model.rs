//! Model construction, tape-free inference, and serialization.

use std::io::{BufRead, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{AnnotatedDialogue, Vocab};
use crate::nn::gru::GruParams;
use crate::nn::kernels::{matvec, softmax_into};
use crate::nn::{container, gru, init, ops, ParameterSet, Tensor};

use super::{IqError, IqModelConfig, NUM_CLASSES};

const MAGIC: &[u8; 4] = b"IQDM";
const VERSION: u32 = 1;

/// Attention weights over a turn's tokens and the pooled turn vector.
#[derive(Clone, Debug)]
pub struct TurnEncoding {
    pub attention: Vec<f64>,
    pub pooled: Vec<f64>,
}

/// Class distribution over scores 1..=5 and the argmax score, ties broken
/// toward the lowest class.
#[derive(Clone, Debug, PartialEq)]
pub struct IqPrediction {
    pub distribution: Vec<f64>,
    pub score: u8,
}

impl IqPrediction {
    fn from_distribution(distribution: Vec<f64>) -> Self {
        let mut best = 0;
        for (i, &p) in distribution.iter().enumerate() {
            if p > distribution[best] {
                best = i;
            }
        }
        IqPrediction { distribution, score: (best + 1) as u8 }
    }
}

/// Row lookup into an embedding matrix; id 0 is the unknown token.
pub fn embed_turn(embedding: &Tensor, ids: &[usize]) -> Result<Vec<Vec<f64>>, IqError> {
    let (v, d) = match embedding.shape() {
        [v, d] => (*v, *d),
        s => {
            return Err(IqError::Nn(crate::nn::NnError::BadShape {
                what: format!("embedding shape {s:?}"),
            }))
        }
    };
    if ids.is_empty() {
        return Err(IqError::Nn(crate::nn::NnError::EmptySequence));
    }
    let mut out = Vec::with_capacity(ids.len());
    for &id in ids {
        if id >= v {
            return Err(IqError::Nn(crate::nn::NnError::TokenOutOfRange { id, vocab: v }));
        }
        out.push(embedding.data()[id * d..(id + 1) * d].to_vec());
    }
    Ok(out)
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: IqModelConfig,
    vocab: Vec<String>,
}

pub struct IqModel {
    pub config: IqModelConfig,
    pub params: ParameterSet,
    pub vocab: Vocab,
}

impl IqModel {
    /// Fresh model over the given vocabulary, parameters drawn from the
    /// config seed.
    pub fn new(mut config: IqModelConfig, vocab: Vocab) -> Result<Self, IqError> {
        config.vocab_size = vocab.len();
        config.validate()?;
        let mut params = ParameterSet::new(config.seed);
        let mut rng = params.seeded_rng();
        let d = config.embedding_dim;
        let u = config.turn_hidden;
        let att = config.attention_dim;
        let ud = config.dialogue_hidden;
        init::matrix(&mut params, "emb", config.vocab_size, d, &mut rng)?;
        init::gru(&mut params, "tf", d, u, &mut rng)?;
        init::gru(&mut params, "tb", d, u, &mut rng)?;
        init::matrix(&mut params, "att_w", att, 2 * u, &mut rng)?;
        init::zeros(&mut params, "att_b", att)?;
        init::vector(&mut params, "att_v", att, &mut rng)?;
        init::gru(&mut params, "dg", 2 * u, ud, &mut rng)?;
        init::matrix(&mut params, "head_w", ud, NUM_CLASSES, &mut rng)?;
        init::zeros(&mut params, "head_b", NUM_CLASSES)?;
        Ok(IqModel { config, params, vocab })
    }

    pub fn encode_dialogue(&self, dialogue: &AnnotatedDialogue) -> Vec<Vec<usize>> {
        dialogue
            .turns
            .iter()
            .map(|t| self.vocab.encode_turn(&t.system_text, &t.user_text))
            .collect()
    }

    /// Tape-free turn encoder: bidirectional GRU states, attention
    /// weights, and the attention-pooled turn vector.
    pub fn encode_turn(&self, token_ids: &[usize]) -> Result<TurnEncoding, IqError> {
        if token_ids.is_empty() {
            return Err(IqError::Nn(crate::nn::NnError::EmptySequence));
        }
        let inputs = embed_turn(self.params.get("emb")?, token_ids)?;
        let u = self.config.turn_hidden;
        let h = ops::bigru_sequence(&inputs, &self.params, "tf", "tb", u)?;

        let att = self.config.attention_dim;
        let w = self.params.get("att_w")?.data();
        let b = self.params.get("att_b")?.data();
        let v = self.params.get("att_v")?.data();
        let k = h.len();
        let mut scores = vec![0.0; k];
        let mut pre = vec![0.0; att];
        for (i, hk) in h.iter().enumerate() {
            matvec(w, hk, &mut pre, att, 2 * u);
            let mut s = 0.0;
            for j in 0..att {
                s += v[j] * (pre[j] + b[j]).tanh();
            }
            scores[i] = self.config.attention_gamma * s;
        }
        let mut attention = vec![0.0; k];
        softmax_into(&scores, &mut attention);
        let mut pooled = vec![0.0; 2 * u];
        for (alpha, hk) in attention.iter().zip(&h) {
            for (p, x) in pooled.iter_mut().zip(hk) {
                *p += alpha * x;
            }
        }
        Ok(TurnEncoding { attention, pooled })
    }

    fn dialogue_gru_params(&self) -> Result<GruParams<'_>, IqError> {
        Ok(ops::gru_params(
            &self.params,
            "dg",
            2 * self.config.turn_hidden,
            self.config.dialogue_hidden,
        )?)
    }

    fn head(&self, state: &[f64]) -> Result<IqPrediction, IqError> {
        let ud = self.config.dialogue_hidden;
        let w = self.params.get("head_w")?.data(); // ud×5, used as xᵀW
        let b = self.params.get("head_b")?.data();
        let mut logits = vec![0.0; NUM_CLASSES];
        for c in 0..NUM_CLASSES {
            let mut s = 0.0;
            for i in 0..ud {
                s += state[i] * w[i * NUM_CLASSES + c];
            }
            logits[c] = s + b[c];
        }
        let mut distribution = vec![0.0; NUM_CLASSES];
        softmax_into(&logits, &mut distribution);
        Ok(IqPrediction::from_distribution(distribution))
    }

    /// Per-turn predictions for a dialogue given as token-id lists.
    ///
    /// The dialogue recurrence starts from zero state. When the dialogue
    /// exceeds `max_context_turns`, the prediction at turn t comes from a
    /// fresh recurrence over the最 recent window ending at t, so outputs
    /// depend only on the window.
    pub fn predict_sequence(&self, turns: &[Vec<usize>]) -> Result<Vec<IqPrediction>, IqError> {
        if turns.is_empty() {
            return Err(IqError::EmptyDialogue);
        }
        let pooled: Vec<Vec<f64>> = turns
            .iter()
            .map(|ids| self.encode_turn(ids).map(|e| e.pooled))
            .collect::<Result<_, _>>()?;
        self.predict_from_pooled(&pooled)
    }

    pub(crate) fn predict_from_pooled(
        &self,
        pooled: &[Vec<f64>],
    ) -> Result<Vec<IqPrediction>, IqError> {
        let t_total = pooled.len();
        let m = self.config.max_context_turns;
        let ud = self.config.dialogue_hidden;
        let width = 2 * self.config.turn_hidden;
        let p = self.dialogue_gru_params()?;

        let run_chain = |rows: &[Vec<f64>]| -> Vec<f64> {
            let steps = rows.len();
            let mut flat = Vec::with_capacity(steps * width);
            for r in rows {
                flat.extend_from_slice(r);
            }
            let mut h = vec![0.0; steps * ud];
            let mut z = vec![0.0; steps * ud];
            let mut rr = vec![0.0; steps * ud];
            let mut hc = vec![0.0; steps * ud];
            gru::seq_forward(&flat, steps, p, &mut h, &mut z, &mut rr, &mut hc);
            h
        };

        let prefix_len = t_total.min(m);
        let prefix_states = run_chain(&pooled[..prefix_len]);
        let mut out = Vec::with_capacity(t_total);
        for t in 0..t_total {
            let state: Vec<f64> = if t < m {
                prefix_states[t * ud..(t + 1) * ud].to_vec()
            } else {
                let window = &pooled[t + 1 - m..=t];
                let states = run_chain(window);
                states[(m - 1) * ud..m * ud].to_vec()
            };
            out.push(self.head(&state)?);
        }
        Ok(out)
    }

    /// Prediction for a dialogue's final system turn.
    pub fn predict_final(&self, dialogue: &AnnotatedDialogue) -> Result<IqPrediction, IqError> {
        let turns = self.encode_dialogue(dialogue);
        let mut preds = self.predict_sequence(&turns)?;
        Ok(preds.pop().expect("nonempty dialogue"))
    }

    // ---- persistence -----------------------------------------------------

    pub fn save(&self, path: &Path) -> Result<(), IqError> {
        let header = ModelHeader {
            config: self.config.clone(),
            vocab: self.vocab.tokens().cloned().collect(),
        };
        let header = serde_json::to_string(&header)
            .map_err(|e| IqError::HeaderMismatch { what: e.to_string() })?;
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        container::write_params(&mut w, MAGIC, VERSION, &header, &self.params)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, IqError> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        let (header, params) = container::read_params(&mut r, MAGIC, VERSION)?;
        let header: ModelHeader = serde_json::from_str(&header)
            .map_err(|e| IqError::HeaderMismatch { what: format!("unreadable header: {e}") })?;
        let vocab = vocab_from_tokens(&header.vocab);
        let model = IqModel { config: header.config, params, vocab };
        model.check_shapes()?;
        Ok(model)
    }

    /// Header config and stored parameter shapes must agree.
    fn check_shapes(&self) -> Result<(), IqError> {
        let c = &self.config;
        let expect = [
            ("emb", vec![c.vocab_size, c.embedding_dim]),
            ("att_w", vec![c.attention_dim, 2 * c.turn_hidden]),
            ("head_w", vec![c.dialogue_hidden, NUM_CLASSES]),
            ("dg_wz", vec![c.dialogue_hidden, 2 * c.turn_hidden]),
            ("tf_wz", vec![c.turn_hidden, c.embedding_dim]),
        ];
        for (name, shape) in expect {
            let t = self.params.get(name)?;
            if t.shape() != shape.as_slice() {
                return Err(IqError::HeaderMismatch {
                    what: format!("{name}: header implies {shape:?}, file has {:?}", t.shape()),
                });
            }
        }
        if self.vocab.len() != c.vocab_size {
            return Err(IqError::HeaderMismatch {
                what: format!("vocab {} vs config {}", self.vocab.len(), c.vocab_size),
            });
        }
        Ok(())
    }

    /// Copies vectors from a whitespace-separated text file (token then
    /// `embedding_dim` reals per line) into the embedding rows of in-vocab
    /// tokens. Returns the fraction of the vocabulary covered; tokens
    /// without a vector keep their seeded initialization.
    pub fn load_pretrained_embeddings(&mut self, path: &Path) -> Result<f64, IqError> {
        let d = self.config.embedding_dim;
        let reader = BufReader::new(std::fs::File::open(path)?);
        let mut covered = vec![false; self.vocab.len()];
        let mut expected_dim: Option<usize> = None;
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().ok_or_else(|| IqError::BadEmbeddingFile {
                line: i + 1,
                what: "empty line".into(),
            })?;
            let values: Vec<f64> = parts
                .map(|p| p.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| IqError::BadEmbeddingFile { line: i + 1, what: e.to_string() })?;
            match expected_dim {
                None => expected_dim = Some(values.len()),
                Some(expect) if expect != values.len() => {
                    return Err(IqError::BadEmbeddingFile {
                        line: i + 1,
                        what: format!("dimension {} but earlier lines had {expect}", values.len()),
                    })
                }
                _ => {}
            }
            if values.len() != d {
                return Err(IqError::BadEmbeddingFile {
                    line: i + 1,
                    what: format!("dimension {} but model expects {d}", values.len()),
                });
            }
            let id = self.vocab.id(token);
            if id != 0 && self.vocab.token(id) == token {
                let emb = self.params.get_mut("emb")?;
                emb.data_mut()[id * d..(id + 1) * d].copy_from_slice(&values);
                covered[id] = true;
            }
        }
        let in_vocab = self.vocab.len().saturating_sub(1); // unknown excluded
        if in_vocab == 0 {
            return Ok(0.0);
        }
        let hit = covered.iter().skip(1).filter(|&&c| c).count();
        Ok(hit as f64 / in_vocab as f64)
    }
}

pub(crate) fn vocab_from_tokens(tokens: &[String]) -> Vocab {
    // reconstructs a vocabulary whose ids are the positions in `tokens`;
    // position 0 is the unknown slot
    use crate::corpus::{build_vocab, AnnotatedTurn};
    // Build through the public constructor to keep a single code path:
    // a synthetic corpus with descending frequencies reproduces the order.
    let mut dialogues = Vec::new();
    for (i, tok) in tokens.iter().enumerate().skip(1) {
        let copies = tokens.len() - i;
        for c in 0..copies {
            dialogues.push(AnnotatedDialogue {
                dialogue_id: format!("v{i}_{c}"),
                turns: vec![AnnotatedTurn {
                    turn_index: 0,
                    system_text: tok.clone(),
                    user_text: String::new(),
                    iq: None,
                }],
            });
        }
    }
    build_vocab(&dialogues, 1)
}
