//! Orthogonal-mapping baseline: learn a linear map from seed pairs by solving
//! the Procrustes problem with an SVD, then retrieve translations by cosine or
//! CSLS over the mapped query vector.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::embeddings::EmbeddingStore;
use crate::lexicon::Lexicon;
use crate::retrieval::{top_k_cosine, top_k_from_scores, CslsScorer, RetrievalError};

const MAPPING_MAGIC: &[u8; 8] = b"BLIWMAP1";
const METHOD_PROCRUSTES: u8 = 0;

#[derive(Debug, Error)]
pub enum ProcrustesError {
    #[error("store dimensions differ: source {src}, target {tgt}")]
    DimMismatch { src: usize, tgt: usize },
    #[error("{usable} usable seed pairs; need at least {needed} (the embedding dimension)")]
    InsufficientPairs { needed: usize, usable: usize },
    #[error("query {0:?} is not in the source embeddings")]
    QueryNotInEmbeddings(String),
    #[error("bad mapping file: {0}")]
    BadMappingFile(String),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MappingMethod {
    Procrustes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MappingMatrix {
    w: DMatrix<f64>,
    method: MappingMethod,
}

impl MappingMatrix {
    pub fn identity(dim: usize) -> Self {
        Self { w: DMatrix::identity(dim, dim), method: MappingMethod::Procrustes }
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn method(&self) -> MappingMethod {
        self.method
    }

    /// Max absolute entry of wᵀw − I; small for a healthy fit (< 1e-5).
    pub fn orthogonality_error(&self) -> f64 {
        let gram = self.w.transpose() * &self.w;
        let dim = self.dim();
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - expect).abs());
            }
        }
        worst
    }

    /// Map a source-space vector into the target space.
    pub fn apply(&self, v: &[f32]) -> Vec<f32> {
        let dim = self.dim();
        assert_eq!(v.len(), dim, "vector length {} vs mapping dim {}", v.len(), dim);
        (0..dim)
            .map(|i| {
                let mut acc = 0.0f64;
                for (j, &x) in v.iter().enumerate() {
                    acc += self.w[(i, j)] * x as f64;
                }
                acc as f32
            })
            .collect()
    }

    /// Binary layout: magic, dim (u32 LE), method (u8), FNV-1a 64 checksum of
    /// the payload (u64 LE), then dim×dim row-major f64 LE entries.
    pub fn save(&self, path: &Path) -> Result<(), ProcrustesError> {
        let dim = self.dim();
        let mut payload = Vec::with_capacity(dim * dim * 8);
        for i in 0..dim {
            for j in 0..dim {
                payload.extend_from_slice(&self.w[(i, j)].to_le_bytes());
            }
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        out.write_all(MAPPING_MAGIC)?;
        out.write_all(&(dim as u32).to_le_bytes())?;
        out.write_all(&[METHOD_PROCRUSTES])?;
        out.write_all(&fnv1a64(&payload).to_le_bytes())?;
        out.write_all(&payload)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ProcrustesError> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        let mut magic = [0u8; 8];
        file.read_exact(&mut magic)
            .map_err(|_| ProcrustesError::BadMappingFile("truncated header".into()))?;
        if &magic != MAPPING_MAGIC {
            return Err(ProcrustesError::BadMappingFile("bad magic".into()));
        }
        let mut u32buf = [0u8; 4];
        file.read_exact(&mut u32buf)
            .map_err(|_| ProcrustesError::BadMappingFile("truncated header".into()))?;
        let dim = u32::from_le_bytes(u32buf) as usize;
        if dim == 0 {
            return Err(ProcrustesError::BadMappingFile("zero dimension".into()));
        }
        let mut method = [0u8; 1];
        file.read_exact(&mut method)
            .map_err(|_| ProcrustesError::BadMappingFile("truncated header".into()))?;
        if method[0] != METHOD_PROCRUSTES {
            return Err(ProcrustesError::BadMappingFile(format!(
                "unknown method byte {}",
                method[0]
            )));
        }
        let mut u64buf = [0u8; 8];
        file.read_exact(&mut u64buf)
            .map_err(|_| ProcrustesError::BadMappingFile("truncated header".into()))?;
        let checksum = u64::from_le_bytes(u64buf);
        let mut payload = vec![0u8; dim * dim * 8];
        file.read_exact(&mut payload)
            .map_err(|_| ProcrustesError::BadMappingFile("truncated payload".into()))?;
        if fnv1a64(&payload) != checksum {
            return Err(ProcrustesError::BadMappingFile("checksum mismatch".into()));
        }
        let entries: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunked by 8")))
            .collect();
        Ok(Self {
            w: DMatrix::from_row_slice(dim, dim, &entries),
            method: MappingMethod::Procrustes,
        })
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn resolve(store: &EmbeddingStore, token: &str) -> Option<usize> {
    store
        .frequency_rank(token)
        .or_else(|| store.rank_of_lowercase(&token.to_lowercase()))
}

/// Unit-normalized f64 copy of one stored row.
fn unit_row(store: &EmbeddingStore, idx: usize) -> Vec<f64> {
    let row = store.row(idx);
    let norm = row.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
    row.iter().map(|&v| v as f64 / norm).collect()
}

/// Solve the orthogonal Procrustes problem over the seed pairs embedded in
/// both stores: w = U·Vᵀ from the SVD of Yᵀ·X, where X holds unit-normalized
/// source rows and Y the aligned target rows. Multi-gold entries contribute
/// one row per pair. Near-zero singular values only warn (the fit is still
/// orthogonal), but fewer usable pairs than dimensions is an error.
pub fn fit_procrustes(
    src_store: &EmbeddingStore,
    tgt_store: &EmbeddingStore,
    seed: &Lexicon,
) -> Result<MappingMatrix, ProcrustesError> {
    let dim = src_store.dim();
    if tgt_store.dim() != dim {
        return Err(ProcrustesError::DimMismatch { src: dim, tgt: tgt_store.dim() });
    }
    let usable: Vec<(usize, usize)> = seed
        .entries
        .iter()
        .filter_map(|e| Some((resolve(src_store, &e.source)?, resolve(tgt_store, &e.target)?)))
        .collect();
    if usable.len() < dim {
        return Err(ProcrustesError::InsufficientPairs { needed: dim, usable: usable.len() });
    }

    let n = usable.len();
    let mut x = DMatrix::<f64>::zeros(n, dim);
    let mut y = DMatrix::<f64>::zeros(n, dim);
    for (row, &(si, ti)) in usable.iter().enumerate() {
        for (col, v) in unit_row(src_store, si).into_iter().enumerate() {
            x[(row, col)] = v;
        }
        for (col, v) in unit_row(tgt_store, ti).into_iter().enumerate() {
            y[(row, col)] = v;
        }
    }

    let m = y.transpose() * x;
    let svd = m.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let near_zero = svd
        .singular_values
        .iter()
        .filter(|&&s| s < 1e-10 * max_sv.max(1e-300))
        .count();
    if near_zero > 0 || max_sv == 0.0 {
        log::warn!(
            "rank-deficient seed alignment: {near_zero}/{dim} singular values near zero"
        );
    }
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    Ok(MappingMatrix { w: u * v_t, method: MappingMethod::Procrustes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalMethod {
    Cosine,
    Csls { k_csls: usize },
}

/// Reusable translation state: holds the CSLS penalty table (built once over
/// the mapped source rows) so per-query work is a single vocabulary scan.
pub struct Translator<'a> {
    mapping: &'a MappingMatrix,
    src: &'a EmbeddingStore,
    tgt: &'a EmbeddingStore,
    csls: Option<CslsScorer>,
}

impl<'a> Translator<'a> {
    /// `csls_background` caps how many of the most frequent source rows feed
    /// the CSLS penalty table (None = all rows; irrelevant for cosine).
    pub fn new(
        mapping: &'a MappingMatrix,
        src: &'a EmbeddingStore,
        tgt: &'a EmbeddingStore,
        method: RetrievalMethod,
        csls_background: Option<usize>,
    ) -> Result<Self, ProcrustesError> {
        if src.dim() != tgt.dim() {
            return Err(ProcrustesError::DimMismatch { src: src.dim(), tgt: tgt.dim() });
        }
        if mapping.dim() != src.dim() {
            return Err(ProcrustesError::DimMismatch { src: mapping.dim(), tgt: src.dim() });
        }
        let csls = match method {
            RetrievalMethod::Cosine => None,
            RetrievalMethod::Csls { k_csls } => {
                let background = csls_background
                    .map(|n| n.min(src.len()))
                    .unwrap_or_else(|| src.len());
                let tokens: Vec<String> =
                    (0..background).map(|i| src.token(i).to_string()).collect();
                let rows: Vec<Vec<f32>> =
                    (0..background).map(|i| mapping.apply(src.row(i))).collect();
                let mapped = EmbeddingStore::from_rows(tokens, rows, true)
                    .map_err(|e| ProcrustesError::BadMappingFile(format!(
                        "mapped source rows unusable: {e}"
                    )))?;
                Some(CslsScorer::new(tgt, &mapped, k_csls)?)
            }
        };
        Ok(Self { mapping, src, tgt, csls })
    }

    /// Top-k target words for one source query, best first.
    pub fn translate(&self, query: &str, k: usize) -> Result<Vec<(String, f32)>, ProcrustesError> {
        let idx = resolve(self.src, query)
            .ok_or_else(|| ProcrustesError::QueryNotInEmbeddings(query.to_string()))?;
        let mapped = self.mapping.apply(self.src.row(idx));
        let no_exclusions = HashSet::new();
        let neighbors = match &self.csls {
            None => top_k_cosine(self.tgt, &mapped, k, &no_exclusions)?,
            Some(scorer) => {
                top_k_from_scores(&scorer.scores(self.tgt, &mapped)?, k, &no_exclusions)
            }
        };
        Ok(neighbors
            .into_iter()
            .map(|n| (self.tgt.token(n.index).to_string(), n.score))
            .collect())
    }

    /// Parallel batch form; results are in query order.
    pub fn translate_batch(
        &self,
        queries: &[String],
        k: usize,
    ) -> Vec<Result<Vec<(String, f32)>, ProcrustesError>> {
        queries.par_iter().map(|q| self.translate(q, k)).collect()
    }
}

/// One-shot convenience wrapper around [`Translator`].
pub fn translate(
    query: &str,
    mapping: &MappingMatrix,
    src_store: &EmbeddingStore,
    tgt_store: &EmbeddingStore,
    method: RetrievalMethod,
    k: usize,
) -> Result<Vec<(String, f32)>, ProcrustesError> {
    Translator::new(mapping, src_store, tgt_store, method, None)?.translate(query, k)
}
