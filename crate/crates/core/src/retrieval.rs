//! Exact top-k similarity search over an `EmbeddingStore`.
//!
//! Cosine retrieval drives in-context example selection; CSLS retrieval is
//! used by the mapping baseline. No approximation anywhere: results must be
//! identical to a brute-force scan, with ties broken by ascending index.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::collections::HashSet;

use rayon::prelude::*;
use thiserror::Error;

use crate::embeddings::EmbeddingStore;

/// CSLS neighborhood size, the literature default.
pub const DEFAULT_K_CSLS: usize = 10;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("query dim {got} does not match store dim {expected}")]
    DimMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub score: f32,
}

/// Heap entry ordered so the max-heap root is the *worst* kept candidate:
/// lower score is greater, and on equal scores a higher index is greater.
#[derive(PartialEq)]
struct Worst(f32, usize);

impl Eq for Worst {}

impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .total_cmp(&self.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}

/// Collect the k best (score desc, index asc) pairs from a score stream.
struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self { k, heap: BinaryHeap::with_capacity(k + 1) }
    }

    fn offer(&mut self, index: usize, score: f32) {
        if self.heap.len() < self.k {
            self.heap.push(Worst(score, index));
        } else if let Some(worst) = self.heap.peek() {
            let better = match score.total_cmp(&worst.0) {
                Ordering::Greater => true,
                Ordering::Equal => index < worst.1,
                Ordering::Less => false,
            };
            if better {
                self.heap.pop();
                self.heap.push(Worst(score, index));
            }
        }
    }

    fn into_sorted(self) -> Vec<Neighbor> {
        let mut out: Vec<Neighbor> = self
            .heap
            .into_iter()
            .map(|Worst(score, index)| Neighbor { index, score })
            .collect();
        out.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.index.cmp(&b.index))
        });
        out
    }
}

fn l2_norm(values: &[f32]) -> f32 {
    values.iter().map(|v| v * v).sum::<f32>()
}

fn cosine(dot: f32, qn: f32, rn: f32) -> f32 {
    let denom = qn * rn;
    if denom == 0.0 {
        f32::NEG_INFINITY
    } else {
        dot / denom
    }
}

/// Scan all rows, feeding cosine(query, row) to `visit(index, score)`.
/// Rows go four at a time for instruction-level parallelism; each row's
/// accumulation stays strictly sequential so results are bit-identical to a
/// naive per-row dot product.
fn cosine_scan(store: &EmbeddingStore, query: &[f32], mut visit: impl FnMut(usize, f32)) {
    let dim = store.dim();
    let query = &query[..dim];
    let qn = l2_norm(query).sqrt();
    let n = store.len();
    let mut i = 0;
    while i + 4 <= n {
        let r0 = store.row(i);
        let r1 = store.row(i + 1);
        let r2 = store.row(i + 2);
        let r3 = store.row(i + 3);
        let (mut a0, mut a1, mut a2, mut a3) = (0.0f32, 0.0f32, 0.0f32, 0.0f32);
        for d in 0..dim {
            let q = query[d];
            a0 += q * r0[d];
            a1 += q * r1[d];
            a2 += q * r2[d];
            a3 += q * r3[d];
        }
        visit(i, cosine(a0, qn, store.row_norm(i)));
        visit(i + 1, cosine(a1, qn, store.row_norm(i + 1)));
        visit(i + 2, cosine(a2, qn, store.row_norm(i + 2)));
        visit(i + 3, cosine(a3, qn, store.row_norm(i + 3)));
        i += 4;
    }
    for j in i..n {
        let row = store.row(j);
        let mut acc = 0.0f32;
        for d in 0..dim {
            acc += query[d] * row[d];
        }
        visit(j, cosine(acc, qn, store.row_norm(j)));
    }
}

fn check_dim(store: &EmbeddingStore, query: &[f32]) -> Result<(), RetrievalError> {
    if query.len() != store.dim() {
        return Err(RetrievalError::DimMismatch {
            expected: store.dim(),
            got: query.len(),
        });
    }
    Ok(())
}

/// Exact top-k by cosine similarity, skipping `exclude` indices.
/// Returns min(k, |vocab| - |exclude|) neighbors, score desc, index asc on ties.
pub fn top_k_cosine(
    store: &EmbeddingStore,
    query: &[f32],
    k: usize,
    exclude: &HashSet<usize>,
) -> Result<Vec<Neighbor>, RetrievalError> {
    check_dim(store, query)?;
    let mut top = TopK::new(k);
    if exclude.is_empty() {
        cosine_scan(store, query, |i, s| top.offer(i, s));
    } else {
        cosine_scan(store, query, |i, s| {
            if !exclude.contains(&i) {
                top.offer(i, s);
            }
        });
    }
    Ok(top.into_sorted())
}

/// Batch form of [`top_k_cosine`], parallel across queries. Results are in
/// input order and independent of the thread count.
pub fn top_k_cosine_batch(
    store: &EmbeddingStore,
    queries: &[Vec<f32>],
    k: usize,
    exclude: &HashSet<usize>,
) -> Result<Vec<Vec<Neighbor>>, RetrievalError> {
    queries
        .par_iter()
        .map(|q| top_k_cosine(store, q, k, exclude))
        .collect()
}

/// Mean cosine of `query` to its k nearest rows.
fn mean_top_k_cosine(store: &EmbeddingStore, query: &[f32], k: usize) -> f32 {
    let mut top = TopK::new(k);
    cosine_scan(store, query, |i, s| top.offer(i, s));
    let kept = top.into_sorted();
    kept.iter().map(|n| n.score).sum::<f32>() / kept.len() as f32
}

/// CSLS scoring: score(y) = 2 cos(q, y) - r_T(q) - r_S(y), where r_T is the
/// mean cosine of the mapped query to its k nearest target rows and r_S(y)
/// the mean cosine of target y to its k nearest mapped source rows.
///
/// The r_S penalties depend only on the stores, so they are computed once
/// here and reused across queries.
pub struct CslsScorer {
    k_csls: usize,
    r_src: Vec<f32>,
}

impl CslsScorer {
    pub fn new(
        tgt: &EmbeddingStore,
        mapped_src: &EmbeddingStore,
        k_csls: usize,
    ) -> Result<Self, RetrievalError> {
        if tgt.dim() != mapped_src.dim() {
            return Err(RetrievalError::DimMismatch {
                expected: tgt.dim(),
                got: mapped_src.dim(),
            });
        }
        let r_src: Vec<f32> = (0..tgt.len())
            .into_par_iter()
            .map(|y| mean_top_k_cosine(mapped_src, tgt.row(y), k_csls))
            .collect();
        Ok(Self { k_csls, r_src })
    }

    /// CSLS scores over the whole target vocabulary for one mapped query.
    pub fn scores(
        &self,
        tgt: &EmbeddingStore,
        mapped_query: &[f32],
    ) -> Result<Vec<f32>, RetrievalError> {
        check_dim(tgt, mapped_query)?;
        let r_tgt = mean_top_k_cosine(tgt, mapped_query, self.k_csls);
        let mut scores = vec![0.0f32; tgt.len()];
        cosine_scan(tgt, mapped_query, |y, c| {
            scores[y] = 2.0 * c - r_tgt - self.r_src[y];
        });
        Ok(scores)
    }
}

/// One-shot CSLS scores; builds the penalty table on every call, so prefer
/// [`CslsScorer`] when translating many queries.
pub fn csls_scores(
    mapped_query: &[f32],
    tgt: &EmbeddingStore,
    mapped_src: &EmbeddingStore,
    k_csls: usize,
) -> Result<Vec<f32>, RetrievalError> {
    CslsScorer::new(tgt, mapped_src, k_csls)?.scores(tgt, mapped_query)
}

/// Top-k (score desc, index asc) over a dense score vector.
pub fn top_k_from_scores(scores: &[f32], k: usize, exclude: &HashSet<usize>) -> Vec<Neighbor> {
    let mut top = TopK::new(k);
    for (i, &s) in scores.iter().enumerate() {
        if !exclude.contains(&i) {
            top.offer(i, s);
        }
    }
    top.into_sorted()
}
