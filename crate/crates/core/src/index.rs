//! Suffix-array index over a reference corpus, used to count definition
//! strings such as `herpes simplex virus (HSV`.
//!
//! Documents are concatenated, each followed by a NUL sentinel so that no
//! match can span two documents. The suffix array is built by prefix doubling
//! with counting sorts, `O(n log n)`.
//!
//! Serialized layout (all integers little-endian):
//!
//! ```text
//! magic        6 bytes  "ADISA1"
//! text length  u64
//! flags        u32      bit 0: case folded
//! text         text length bytes
//! suffixes     text length * u64
//! checksum     u32      CRC-32 of everything above
//! ```

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::document::Document;

pub const SENTINEL: u8 = 0;
pub const MAGIC: &[u8; 6] = b"ADISA1";

const FLAG_CASE_FOLDED: u32 = 1;
const HEADER_LEN: usize = MAGIC.len() + 8 + 4;
const CHECKSUM_LEN: usize = 4;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("nothing to index: the document list is empty")]
    NoDocuments,
    #[error("document `{0}` is empty")]
    EmptyDocument(String),
    #[error("document `{0}` contains the NUL separator byte")]
    SentinelInDocument(String),
    #[error("query pattern is empty")]
    EmptyPattern,
    #[error("query pattern contains the NUL separator byte")]
    SentinelInPattern,
    #[error("unrecognized index header {found:?} (expected {expected:?})")]
    VersionMismatch { found: String, expected: String },
    #[error("index file truncated: need {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("index checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Immutable suffix array over a document collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuffixIndex {
    text: Vec<u8>,
    sa: Vec<usize>,
    doc_count: usize,
    case_folded: bool,
}

impl SuffixIndex {
    /// Indexes `docs`. With `case_fold`, text and later queries are lowercased.
    pub fn build(docs: &[Document], case_fold: bool) -> Result<Self, IndexError> {
        if docs.is_empty() {
            return Err(IndexError::NoDocuments);
        }
        let mut text = Vec::with_capacity(docs.iter().map(|d| d.text.len() + 1).sum());
        for doc in docs {
            if doc.text.is_empty() {
                return Err(IndexError::EmptyDocument(doc.id.clone()));
            }
            if doc.text.as_bytes().contains(&SENTINEL) {
                return Err(IndexError::SentinelInDocument(doc.id.clone()));
            }
            if case_fold {
                text.extend_from_slice(doc.text.to_lowercase().as_bytes());
            } else {
                text.extend_from_slice(doc.text.as_bytes());
            }
            text.push(SENTINEL);
        }
        let sa = suffix_array(&text);
        Ok(SuffixIndex {
            text,
            sa,
            doc_count: docs.len(),
            case_folded: case_fold,
        })
    }

    /// Concatenated corpus, sentinels included.
    pub fn text(&self) -> &[u8] {
        &self.text
    }

    pub fn suffixes(&self) -> &[usize] {
        &self.sa
    }

    pub fn len(&self) -> usize {
        self.sa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sa.is_empty()
    }

    pub fn doc_count(&self) -> usize {
        self.doc_count
    }

    /// Corpus length without the document separators.
    pub fn corpus_len(&self) -> usize {
        self.text.len() - self.doc_count
    }

    pub fn case_folded(&self) -> bool {
        self.case_folded
    }

    /// Number of (possibly overlapping) occurrences of `pattern`.
    pub fn count_occurrences(&self, pattern: &str) -> Result<usize, IndexError> {
        if pattern.is_empty() {
            return Err(IndexError::EmptyPattern);
        }
        if pattern.as_bytes().contains(&SENTINEL) {
            return Err(IndexError::SentinelInPattern);
        }
        if self.case_folded {
            Ok(self.count_bytes(pattern.to_lowercase().as_bytes()))
        } else {
            Ok(self.count_bytes(pattern.as_bytes()))
        }
    }

    fn count_bytes(&self, pattern: &[u8]) -> usize {
        let text = &self.text;
        let m = pattern.len();
        let lo = self.sa.partition_point(|&s| &text[s..] < pattern);
        let hi =
            lo + self.sa[lo..].partition_point(|&s| &text[s..(s + m).min(text.len())] <= pattern);
        hi - lo
    }

    /// Occurrences of the definition string `lf + " (" + sf`.
    pub fn definition_freq(&self, sf: &str, lf: &str) -> Result<usize, IndexError> {
        if sf.is_empty() || lf.is_empty() {
            return Err(IndexError::EmptyPattern);
        }
        self.count_occurrences(&definition_query(sf, lf))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n = self.text.len();
        let mut out = Vec::with_capacity(HEADER_LEN + n * 9 + CHECKSUM_LEN);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(n as u64).to_le_bytes());
        let flags = if self.case_folded {
            FLAG_CASE_FOLDED
        } else {
            0
        };
        out.extend_from_slice(&flags.to_le_bytes());
        out.extend_from_slice(&self.text);
        for &s in &self.sa {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        let magic_len = MAGIC.len();
        if bytes.len() < magic_len {
            return Err(IndexError::Truncated {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        if &bytes[..magic_len] != MAGIC {
            return Err(IndexError::VersionMismatch {
                found: String::from_utf8_lossy(&bytes[..magic_len]).into_owned(),
                expected: String::from_utf8_lossy(MAGIC).into_owned(),
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(IndexError::Truncated {
                expected: HEADER_LEN,
                actual: bytes.len(),
            });
        }
        let n = u64::from_le_bytes(bytes[magic_len..magic_len + 8].try_into().unwrap());
        let flags = u32::from_le_bytes(bytes[magic_len + 8..HEADER_LEN].try_into().unwrap());
        let n =
            usize::try_from(n).map_err(|_| IndexError::Corrupt("text length overflows".into()))?;
        let expected = n
            .checked_mul(9)
            .and_then(|b| b.checked_add(HEADER_LEN + CHECKSUM_LEN))
            .ok_or_else(|| IndexError::Corrupt("text length overflows".into()))?;
        if bytes.len() < expected {
            return Err(IndexError::Truncated {
                expected,
                actual: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(IndexError::Corrupt(format!(
                "{} trailing bytes after checksum",
                bytes.len() - expected
            )));
        }
        let body = &bytes[..expected - CHECKSUM_LEN];
        let stored = u32::from_le_bytes(bytes[expected - CHECKSUM_LEN..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(IndexError::ChecksumMismatch { stored, computed });
        }
        if flags & !FLAG_CASE_FOLDED != 0 {
            return Err(IndexError::Corrupt(format!("unknown flags {flags:#x}")));
        }

        let text = body[HEADER_LEN..HEADER_LEN + n].to_vec();
        let sa: Vec<usize> = body[HEADER_LEN + n..]
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let mut seen = vec![false; n];
        for &s in &sa {
            if s >= n || std::mem::replace(&mut seen[s], true) {
                return Err(IndexError::Corrupt(
                    "suffix offsets are not a permutation".into(),
                ));
            }
        }
        let doc_count = text.iter().filter(|&&b| b == SENTINEL).count();
        Ok(SuffixIndex {
            text,
            sa,
            doc_count,
            case_folded: flags & FLAG_CASE_FOLDED != 0,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        Self::from_bytes(&fs::read(path)?)
    }
}

/// The literal string counted by [`SuffixIndex::definition_freq`], with runs
/// of whitespace in the long form collapsed to single spaces.
pub fn definition_query(sf: &str, lf: &str) -> String {
    let lf = lf.split_whitespace().collect::<Vec<_>>().join(" ");
    format!("{lf} ({sf}")
}

/// Prefix doubling: after round `h`, suffixes are sorted by their first `2^h`
/// bytes. Each round is two stable counting sorts keyed by rank.
fn suffix_array(text: &[u8]) -> Vec<usize> {
    let n = text.len();
    if n == 0 {
        return Vec::new();
    }
    let mut rank: Vec<usize> = text.iter().map(|&b| b as usize).collect();
    let mut sa: Vec<usize> = (0..n).collect();
    sa.sort_by_key(|&i| text[i]);
    let mut tmp = vec![0usize; n];
    let mut classes = 256usize;
    let mut k = 1usize;
    loop {
        // Order by second key: suffixes too short to have one come first.
        let mut by_second = Vec::with_capacity(n);
        by_second.extend(n.saturating_sub(k)..n);
        by_second.extend(sa.iter().filter(|&&s| s >= k).map(|&s| s - k));

        // Stable counting sort on first key. Ranks are shifted by one so the
        // "no second key" case can use 0.
        let mut counts = vec![0usize; classes + 1];
        for &i in &by_second {
            counts[rank[i]] += 1;
        }
        let mut sum = 0;
        for c in counts.iter_mut() {
            let here = *c;
            *c = sum;
            sum += here;
        }
        for &i in &by_second {
            sa[counts[rank[i]]] = i;
            counts[rank[i]] += 1;
        }

        let key = |i: usize, rank: &[usize]| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        tmp[sa[0]] = 0;
        for w in 1..n {
            let bump = usize::from(key(sa[w - 1], &rank) != key(sa[w], &rank));
            tmp[sa[w]] = tmp[sa[w - 1]] + bump;
        }
        std::mem::swap(&mut rank, &mut tmp);
        classes = rank[sa[n - 1]] + 1;
        if classes == n {
            break;
        }
        k *= 2;
    }
    sa
}
