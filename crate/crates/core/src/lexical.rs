//! Transcript tokenization and word-vector lookup.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::Matrix;

pub const DEFAULT_EMBEDDING_DIM: usize = 300;

/// Lowercased tokens with edge punctuation removed.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercase, split on whitespace, strip punctuation at token edges, drop
/// tokens that end up empty. Inner apostrophes survive ("let's").
pub fn tokenize(text: &str) -> TokenSequence {
    let tokens = text
        .split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty())
        .collect();
    TokenSequence { tokens }
}

/// Frozen token-to-vector table. Unknown tokens map to the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Later inserts of the same token replace earlier ones.
    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        Error::check_dim("embedding vector", self.dim, vector.len())?;
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    /// Text format: optional `count dim` header, then `token v1 .. vD` lines.
    pub fn read<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let mut table: Option<EmbeddingTable> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                message,
            };
            if idx == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                let dim: usize = fields[1].parse().unwrap();
                table = Some(EmbeddingTable::new(dim));
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| parse_err(e.to_string()))?;
            let t = table.get_or_insert_with(|| EmbeddingTable::new(values.len()));
            if values.len() != t.dim {
                return Err(parse_err(format!(
                    "vector for `{}` has {} components, table dimension is {}",
                    fields[0],
                    values.len(),
                    t.dim
                )));
            }
            t.vectors.insert(fields[0].to_string(), values);
        }
        Ok(table.unwrap_or_else(|| EmbeddingTable::new(DEFAULT_EMBEDDING_DIM)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        EmbeddingTable::read(BufReader::new(f), path)
    }

    /// Writes the text format with a header, tokens sorted.
    pub fn save(&self, path: &Path) -> Result<()> {
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "{} {}", self.vectors.len(), self.dim)?;
            let mut tokens: Vec<&String> = self.vectors.keys().collect();
            tokens.sort();
            for tok in tokens {
                write!(w, "{tok}")?;
                for v in &self.vectors[tok] {
                    write!(w, " {v}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// One row per token (zero rows for unknown tokens); an empty sequence yields
/// a single zero row so the lexical branch always has a step.
pub fn embed_tokens(tokens: &TokenSequence, table: &EmbeddingTable) -> Matrix {
    let rows = tokens.len().max(1);
    let mut out = Matrix::zeros(rows, table.dim());
    for (r, tok) in tokens.tokens.iter().enumerate() {
        if let Some(v) = table.get(tok) {
            out.row_mut(r).copy_from_slice(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> TokenSequence {
        TokenSequence {
            tokens: words.iter().map(|w| w.to_string()).collect(),
        }
    }

    #[test]
    fn tokenizer_rules() {
        assert_eq!(tokenize("Let's chat!").tokens, ["let's", "chat"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("  HELLO   world ").tokens, ["hello", "world"]);
        assert_eq!(tokenize("... ?! ok,").tokens, ["ok"]);
    }

    #[test]
    fn lookup_and_oov() {
        let mut t = EmbeddingTable::new(3);
        t.insert("hi", vec![1.0, 2.0, 3.0]).unwrap();
        t.insert("there", vec![-1.0, 0.0, 0.5]).unwrap();
        let m = embed_tokens(&toks(&["hi", "there"]), &t);
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0]);
        assert_eq!(m.row(1), &[-1.0, 0.0, 0.5]);

        let oov = embed_tokens(&toks(&["a", "b", "c"]), &t);
        assert_eq!(oov.rows(), 3);
        assert!(oov.as_slice().iter().all(|&v| v == 0.0));

        let empty = embed_tokens(&TokenSequence::default(), &EmbeddingTable::new(300));
        assert_eq!((empty.rows(), empty.cols()), (1, 300));
        assert!(empty.as_slice().iter().all(|&v| v == 0.0));

        assert!(t.insert("bad", vec![1.0]).is_err());
    }

    #[test]
    fn text_format_with_and_without_header() {
        let with = "2 3\nhi 1 2 3\nyo 0 0 1\n";
        let t = EmbeddingTable::read(with.as_bytes(), Path::new("e.txt")).unwrap();
        assert_eq!((t.dim(), t.len()), (3, 2));
        let without = "hi 1 2 3\nyo 0 0 1\n";
        assert_eq!(EmbeddingTable::read(without.as_bytes(), Path::new("e.txt")).unwrap(), t);

        let ragged = "hi 1 2 3\nyo 0 1\n";
        match EmbeddingTable::read(ragged.as_bytes(), Path::new("e.txt")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let header_mismatch = "1 4\nhi 1 2 3\n";
        assert!(EmbeddingTable::read(header_mismatch.as_bytes(), Path::new("e.txt")).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = EmbeddingTable::new(2);
        t.insert("b", vec![0.5, -0.25]).unwrap();
        t.insert("a", vec![1e-3, 7.0]).unwrap();
        let p = dir.path().join("emb.txt");
        t.save(&p).unwrap();
        assert_eq!(EmbeddingTable::load(&p).unwrap(), t);
    }

    proptest! {
        #[test]
        fn row_count_is_max_one_token_count(words in prop::collection::vec("[a-z]{1,5}", 0..12)) {
            let t = EmbeddingTable::new(4);
            let seq = TokenSequence { tokens: words.clone() };
            prop_assert_eq!(embed_tokens(&seq, &t).rows(), words.len().max(1));
        }

        #[test]
        fn lookup_ignores_insertion_order(mut entries in prop::collection::vec(("[a-z]{1,4}", -5.0f64..5.0), 1..10)) {
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            entries.dedup_by(|a, b| a.0 == b.0);
            let mut fwd = EmbeddingTable::new(1);
            let mut rev = EmbeddingTable::new(1);
            for (k, v) in &entries { fwd.insert(k.clone(), vec![*v]).unwrap(); }
            for (k, v) in entries.iter().rev() { rev.insert(k.clone(), vec![*v]).unwrap(); }
            let seq = TokenSequence { tokens: entries.iter().map(|e| e.0.clone()).collect() };
            prop_assert_eq!(embed_tokens(&seq, &fwd), embed_tokens(&seq, &rev));
        }
    }
}
