//! Corpus ingestion: newline-delimited JSON (one dialogue per line) and
//! delimited tables with a caller-supplied column mapping.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotatedDialogue, AnnotatedTurn, CorpusError};

/// Writes one dialogue per line as JSON. The layout round-trips exactly:
/// `{"dialogue_id": ..., "turns": [{"turn_index", "system_text",
/// "user_text", "iq"?}]}` with `iq` omitted on unlabeled turns.
pub fn save_corpus_jsonl(path: &Path, corpus: &[AnnotatedDialogue]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for dialogue in corpus {
        let line = serde_json::to_string(dialogue)
            .map_err(|source| CorpusError::Json { line: 0, source })?;
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn load_corpus_jsonl(path: &Path) -> Result<Vec<AnnotatedDialogue>, CorpusError> {
    let r = BufReader::new(File::open(path)?);
    let mut corpus = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut dialogue: AnnotatedDialogue = serde_json::from_str(&line)
            .map_err(|source| CorpusError::Json { line: i + 1, source })?;
        dialogue.turns.sort_by_key(|t| t.turn_index);
        dialogue.validate()?;
        corpus.push(dialogue);
    }
    Ok(corpus)
}

/// Names the table columns holding each record field. The label column is
/// optional for inference-only data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub dialogue_id: String,
    pub turn_index: String,
    pub system_text: String,
    pub user_text: String,
    #[serde(default)]
    pub iq: Option<String>,
}

impl ColumnMapping {
    pub fn from_file(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|source| CorpusError::Json { line: 0, source })
    }
}

/// Loads a delimited table (headers required), grouping rows into
/// dialogues by id and sorting turns by index. Rows with empty label
/// cells stay unlabeled.
pub fn load_corpus_table(
    path: &Path,
    mapping: &ColumnMapping,
) -> Result<Vec<AnnotatedDialogue>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str, row: usize| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn { row, column: name.to_string() })
    };
    let id_col = col(&mapping.dialogue_id, 0)?;
    let index_col = col(&mapping.turn_index, 0)?;
    let sys_col = col(&mapping.system_text, 0)?;
    let usr_col = col(&mapping.user_text, 0)?;
    let iq_col = match &mapping.iq {
        Some(name) => Some(col(name, 0)?),
        None => None,
    };

    let mut grouped: BTreeMap<String, Vec<(usize, AnnotatedTurn)>> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2; // header is row 1
        let record = record.map_err(|source| CorpusError::Csv { row, source })?;
        let field = |idx: usize| record.get(idx).unwrap_or("").to_string();
        let raw_index = field(index_col);
        let turn_index: usize = raw_index
            .trim()
            .parse()
            .map_err(|_| CorpusError::BadLabel { row, value: format!("turn_index {raw_index}") })?;
        let iq = match iq_col {
            Some(c) => {
                let raw = field(c);
                let raw = raw.trim();
                if raw.is_empty() {
                    None
                } else {
                    let v: i64 = raw
                        .parse()
                        .map_err(|_| CorpusError::BadLabel { row, value: raw.to_string() })?;
                    if !(1..=5).contains(&v) {
                        return Err(CorpusError::BadLabel { row, value: raw.to_string() });
                    }
                    Some(v as u8)
                }
            }
            None => None,
        };
        let turn = AnnotatedTurn {
            turn_index,
            system_text: field(sys_col),
            user_text: field(usr_col),
            iq,
        };
        grouped.entry(field(id_col)).or_default().push((turn_index, turn));
    }

    let mut corpus = Vec::new();
    for (dialogue_id, mut turns) in grouped {
        turns.sort_by_key(|(idx, _)| *idx);
        let turns: Vec<AnnotatedTurn> = turns
            .into_iter()
            .enumerate()
            .map(|(i, (_, mut t))| {
                t.turn_index = i;
                t
            })
            .collect();
        let dialogue = AnnotatedDialogue { dialogue_id, turns };
        dialogue.validate()?;
        corpus.push(dialogue);
    }
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    Ok(corpus)
}

impl From<csv::Error> for CorpusError {
    fn from(source: csv::Error) -> Self {
        CorpusError::Csv { row: 0, source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mapping() -> ColumnMapping {
        ColumnMapping {
            dialogue_id: "dlg".into(),
            turn_index: "idx".into(),
            system_text: "sys".into(),
            user_text: "usr".into(),
            iq: Some("score".into()),
        }
    }

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn jsonl_round_trip_exact() {
        let corpus = vec![AnnotatedDialogue {
            dialogue_id: "d1".into(),
            turns: vec![
                AnnotatedTurn {
                    turn_index: 0,
                    system_text: "where to?".into(),
                    user_text: "downtown".into(),
                    iq: Some(5),
                },
                AnnotatedTurn {
                    turn_index: 1,
                    system_text: "leaving when?".into(),
                    user_text: "noon".into(),
                    iq: Some(4),
                },
            ],
        }];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_corpus_jsonl(f.path(), &corpus).unwrap();
        let back = load_corpus_jsonl(f.path()).unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn table_rows_out_of_order_are_sorted() {
        let f = write_temp("dlg,idx,sys,usr,score\nd1,1,second,b,4\nd1,0,first,a,5\n");
        let corpus = load_corpus_table(f.path(), &mapping()).unwrap();
        assert_eq!(corpus[0].turns[0].system_text, "first");
        assert_eq!(corpus[0].turns[1].system_text, "second");
        assert_eq!(corpus[0].turns[0].iq, Some(5));
    }

    #[test]
    fn table_label_six_rejected_with_row() {
        let f = write_temp("dlg,idx,sys,usr,score\nd1,0,hi,yo,6\n");
        let err = load_corpus_table(f.path(), &mapping()).unwrap_err();
        match err {
            CorpusError::BadLabel { row, value } => {
                assert_eq!(row, 2);
                assert_eq!(value, "6");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn table_missing_mapped_column_named() {
        let f = write_temp("dlg,idx,sys,score\nd1,0,hi,5\n");
        let err = load_corpus_table(f.path(), &mapping()).unwrap_err();
        assert!(err.to_string().contains("usr"), "got: {err}");
    }
}
