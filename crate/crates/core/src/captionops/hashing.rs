use crate::error::{Error, Result};
use crate::rng::fnv1a64;

pub const DEFAULT_BUCKETS: usize = 1 << 18;

/// Sparse bucket counts, sorted by bucket.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseCounts {
    pub buckets: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseCounts {
    pub fn get(&self, bucket: usize) -> f64 {
        self.entries.binary_search_by_key(&bucket, |e| e.0).map(|i| self.entries[i].1).unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.buckets];
        for &(b, c) in &self.entries {
            v[b] = c;
        }
        v
    }
}

/// Bucket of an n-gram; bigrams are the two tokens joined by one space.
pub fn ngram_bucket(gram: &str, buckets: usize) -> usize {
    (fnv1a64(gram.as_bytes()) % buckets as u64) as usize
}

/// Unigram and bigram counts, hashed into `buckets`.
pub fn hash_ngrams<S: AsRef<str>>(caption: &[S], buckets: usize) -> Result<SparseCounts> {
    if buckets < 2 {
        return Err(Error::Parameter(format!("need >= 2 hash buckets, got {buckets}")));
    }
    let mut raw: Vec<usize> = Vec::with_capacity(caption.len() * 2);
    for (i, tok) in caption.iter().enumerate() {
        raw.push(ngram_bucket(tok.as_ref(), buckets));
        if i > 0 {
            let bigram = format!("{} {}", caption[i - 1].as_ref(), tok.as_ref());
            raw.push(ngram_bucket(&bigram, buckets));
        }
    }
    raw.sort_unstable();
    let mut entries: Vec<(usize, f64)> = Vec::new();
    for b in raw {
        match entries.last_mut() {
            Some(last) if last.0 == b => last.1 += 1.0,
            _ => entries.push((b, 1.0)),
        }
    }
    Ok(SparseCounts { buckets, entries })
}
