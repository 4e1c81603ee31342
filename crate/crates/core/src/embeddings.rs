//! fastText-format text embeddings, trimmed to the most frequent words and
//! exposed as a dense row-major f32 matrix with token/index maps.
//!
//! Files are frequency-ordered, so "trim to N" is a pure prefix and the row
//! index doubles as the word's frequency rank.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use thiserror::Error;

pub const DEFAULT_TRIM: usize = 200_000;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("bad header: expected \"<count> <dim>\"")]
    BadHeader,
    #[error("line {0}: expected token plus dim values")]
    DimMismatch(usize),
    #[error("line {0}: non-finite or unparseable value")]
    NonFiniteValue(usize),
    #[error("line {0}: zero vector cannot be normalized")]
    ZeroVector(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub struct EmbeddingStore {
    tokens: Vec<String>,
    matrix: Vec<f32>,
    dim: usize,
    normalized: bool,
    index: HashMap<String, usize>,
    lower_index: HashMap<String, usize>,
    row_norms: Vec<f32>,
    /// Later duplicate tokens skipped at load (first occurrence kept).
    pub skipped_duplicates: usize,
}

impl std::fmt::Debug for EmbeddingStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmbeddingStore")
            .field("tokens", &self.tokens.len())
            .field("dim", &self.dim)
            .field("normalized", &self.normalized)
            .finish_non_exhaustive()
    }
}

impl EmbeddingStore {
    /// Build a store from in-memory rows, applying the same validation,
    /// dedup, and normalization rules as the file loader.
    pub fn from_rows(
        tokens: Vec<String>,
        rows: Vec<Vec<f32>>,
        normalize: bool,
    ) -> Result<Self, EmbeddingError> {
        assert_eq!(tokens.len(), rows.len());
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        let mut builder = Builder::new(dim, usize::MAX, normalize);
        for (i, (token, row)) in tokens.into_iter().zip(rows).enumerate() {
            builder.push(token, &row, i + 1)?;
        }
        Ok(builder.finish())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.matrix[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn row_norm(&self, idx: usize) -> f32 {
        self.row_norms[idx]
    }

    /// Exact-match lookup on the stored token.
    pub fn lookup(&self, token: &str) -> Option<(usize, &[f32])> {
        self.index.get(token).map(|&i| (i, self.row(i)))
    }

    /// Row index = frequency rank (lower is more frequent).
    pub fn frequency_rank(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Membership/rank check against lowercased vocabulary, for callers that
    /// compare case-insensitively (extraction, scoring).
    pub fn rank_of_lowercase(&self, lower: &str) -> Option<usize> {
        self.lower_index.get(lower).copied()
    }

    pub fn contains_lowercase(&self, lower: &str) -> bool {
        self.lower_index.contains_key(lower)
    }
}

struct Builder {
    dim: usize,
    trim: usize,
    normalize: bool,
    tokens: Vec<String>,
    matrix: Vec<f32>,
    index: HashMap<String, usize>,
    lower_index: HashMap<String, usize>,
    row_norms: Vec<f32>,
    skipped: usize,
}

impl Builder {
    fn new(dim: usize, trim: usize, normalize: bool) -> Self {
        Self {
            dim,
            trim,
            normalize,
            tokens: Vec::new(),
            matrix: Vec::new(),
            index: HashMap::new(),
            lower_index: HashMap::new(),
            row_norms: Vec::new(),
            skipped: 0,
        }
    }

    fn full(&self) -> bool {
        self.tokens.len() >= self.trim
    }

    fn push(&mut self, token: String, values: &[f32], line_no: usize) -> Result<(), EmbeddingError> {
        if values.len() != self.dim {
            return Err(EmbeddingError::DimMismatch(line_no));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFiniteValue(line_no));
        }
        if self.index.contains_key(&token) {
            self.skipped += 1;
            return Ok(());
        }
        let start = self.matrix.len();
        self.matrix.extend_from_slice(values);
        if self.normalize {
            let norm = l2_norm(&self.matrix[start..]);
            if norm < f32::MIN_POSITIVE {
                self.matrix.truncate(start);
                return Err(EmbeddingError::ZeroVector(line_no));
            }
            for v in &mut self.matrix[start..] {
                *v /= norm;
            }
        }
        // Norm of the *stored* row, so cosine code can divide by it directly.
        self.row_norms.push(l2_norm(&self.matrix[start..]));
        let idx = self.tokens.len();
        self.index.insert(token.clone(), idx);
        self.lower_index.entry(token.to_lowercase()).or_insert(idx);
        self.tokens.push(token);
        Ok(())
    }

    fn finish(self) -> EmbeddingStore {
        EmbeddingStore {
            tokens: self.tokens,
            matrix: self.matrix,
            dim: self.dim,
            normalized: self.normalize,
            index: self.index,
            lower_index: self.lower_index,
            row_norms: self.row_norms,
            skipped_duplicates: self.skipped,
        }
    }
}

fn l2_norm(values: &[f32]) -> f32 {
    values.iter().map(|v| v * v).sum::<f32>().sqrt()
}

/// Load a fastText `.vec` text file (gzip accepted for `.gz` paths), keeping
/// at most `trim` rows in file order.
pub fn load_vec(path: &Path, trim: usize, normalize: bool) -> Result<EmbeddingStore, EmbeddingError> {
    let file = File::open(path)?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(flate2::read::GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    let mut lines = BufReader::new(reader).lines();

    let header = lines.next().ok_or(EmbeddingError::BadHeader)??;
    let mut parts = header.split_whitespace();
    let (_count, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(c), Some(d), None) => (
            c.parse::<usize>().map_err(|_| EmbeddingError::BadHeader)?,
            d.parse::<usize>().map_err(|_| EmbeddingError::BadHeader)?,
        ),
        _ => return Err(EmbeddingError::BadHeader),
    };
    if dim == 0 {
        return Err(EmbeddingError::BadHeader);
    }

    let mut builder = Builder::new(dim, trim, normalize);
    let mut values = Vec::with_capacity(dim);
    for (idx, line) in lines.enumerate() {
        if builder.full() {
            break;
        }
        let line = line?;
        let line_no = idx + 2; // 1-based, after the header
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().expect("non-empty line");
        values.clear();
        for field in fields {
            values.push(
                field
                    .parse::<f32>()
                    .map_err(|_| EmbeddingError::NonFiniteValue(line_no))?,
            );
        }
        builder.push(token.to_string(), &values, line_no)?;
    }
    Ok(builder.finish())
}
