//! Definition-site detection, long-form matching and n-best candidate generation.
//!
//! A definition site is a parenthesized span whose content looks like a short
//! form (`heat shock protein (HSP)`) or whose preceding token does
//! (`HSP (heat shock protein)`). Long forms are recovered by matching the
//! short form's characters right to left through the tokens before the
//! parenthesis, with the first short-form character pinned to the start of a
//! token.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::document::{Document, Span};

/// Default n-best list size.
pub const DEFAULT_K: usize = 5;

/// Longest parenthesized content still treated as a short form, in characters.
const MAX_SF_CHARS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Pattern {
    /// `heat shock protein (HSP)`
    LfParenSf,
    /// `HSP (heat shock protein)`
    SfParenLf,
}

impl Pattern {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pattern::LfParenSf => "LF_PAREN_SF",
            Pattern::SfParenLf => "SF_PAREN_LF",
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LF_PAREN_SF" => Ok(Pattern::LfParenSf),
            "SF_PAREN_LF" => Ok(Pattern::SfParenLf),
            other => Err(format!("unknown definition pattern `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SfLfPair {
    pub sf: String,
    pub lf: String,
    pub sf_span: Span,
    pub lf_span: Span,
    pub pattern: Pattern,
}

/// A whitespace-delimited token with leading and trailing non-alphanumeric
/// characters removed. `span` covers the stripped text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinitionSite {
    pub sf: String,
    pub sf_span: Span,
    /// Tokens immediately preceding the open parenthesis, oldest first.
    pub window: Vec<Token>,
    pub window_span: Span,
}

impl DefinitionSite {
    pub fn window_texts(&self) -> Vec<&str> {
        self.window.iter().map(|t| t.text.as_str()).collect()
    }
}

/// How many tokens before a parenthesis are considered as long-form material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WindowPolicy {
    /// `min(|sf| + 5, 2 * |sf|)` tokens, the same cap applied to long forms.
    #[default]
    ShortFormRelative,
    Fixed(usize),
}

impl WindowPolicy {
    pub fn max_tokens(&self, sf: &str) -> usize {
        match *self {
            WindowPolicy::ShortFormRelative => lf_token_cap(sf),
            WindowPolicy::Fixed(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub lf: String,
    pub rank: usize,
    #[serde(default, rename = "score", skip_serializing_if = "Option::is_none")]
    pub generator_score: Option<f64>,
}

impl Candidate {
    pub fn new(lf: impl Into<String>, rank: usize) -> Self {
        Candidate {
            lf: lf.into(),
            rank,
            generator_score: None,
        }
    }
}

/// Ranked long-form candidates for one short form. Rank 0 is the generator's
/// best guess.
#[derive(Debug, Clone, PartialEq)]
pub struct NBestList {
    pub doc_id: String,
    pub sf: String,
    pub sf_span: Span,
    pub candidates: Vec<Candidate>,
}

impl NBestList {
    /// Checks that ranks are exactly `0..n` in order.
    pub fn ranks_are_consecutive(&self) -> bool {
        self.candidates.iter().enumerate().all(|(i, c)| c.rank == i)
    }
}

fn lf_token_cap(sf: &str) -> usize {
    let n = sf.chars().count();
    (n + 5).min(2 * n)
}

fn is_year(token: &str) -> bool {
    let digits = token.trim_end_matches(|c: char| c.is_ascii_lowercase());
    token.len() - digits.len() <= 1
        && digits.len() == 4
        && digits.bytes().all(|b| b.is_ascii_digit())
        && matches!(digits.as_bytes()[0], b'1' | b'2')
}

fn is_citation_like(content: &str) -> bool {
    const MARKERS: [&str; 5] = ["e.g", "i.e", "cf.", "etc", "et al"];
    let lower = content.to_lowercase();
    MARKERS.iter().any(|m| lower.starts_with(m))
        || content
            .split_whitespace()
            .any(|t| is_year(t.trim_matches(|c: char| !c.is_alphanumeric())))
}

/// Whether parenthesized content (or a lone token) can serve as a short form:
/// 1 to 10 characters, at least one letter, at most two tokens, and not a
/// number or a citation fragment such as `e.g.` or a year.
pub fn is_plausible_short_form(content: &str) -> bool {
    let s = content.trim();
    let n = s.chars().count();
    if n == 0 || n > MAX_SF_CHARS {
        return false;
    }
    if !s.chars().any(char::is_alphabetic) {
        return false;
    }
    if s.split_whitespace().count() > 2 {
        return false;
    }
    if s.parse::<f64>().is_ok() {
        return false;
    }
    !is_citation_like(s)
}

/// Whitespace tokenization of `text[range]`, reporting absolute offsets.
/// Tokens that are pure punctuation are dropped.
fn tokenize_range(text: &str, start: usize, end: usize) -> Vec<Token> {
    let slice = &text[start..end];
    let mut out = Vec::new();
    let mut push = |s: usize, e: usize| {
        let raw = &slice[s..e];
        let lead = raw.len() - raw.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
        let stripped = raw.trim_matches(|c: char| !c.is_alphanumeric());
        if !stripped.is_empty() {
            let abs = start + s + lead;
            out.push(Token {
                text: stripped.to_string(),
                span: Span::new(abs, abs + stripped.len()),
            });
        }
    };
    let mut token_start = None;
    for (i, c) in slice.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = token_start.take() {
                push(s, i);
            }
        } else if token_start.is_none() {
            token_start = Some(i);
        }
    }
    if let Some(s) = token_start {
        push(s, slice.len());
    }
    out
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_range(text, 0, text.len())
}

/// Positions where a long-form window may begin: just after any parenthesis
/// and just after sentence-final punctuation (`.`, `!`, `?` followed by
/// whitespace and an uppercase letter). Sorted ascending.
fn window_barriers(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, c) in text.char_indices() {
        match c {
            '(' | ')' => out.push(i + 1),
            '.' | '!' | '?' => {
                let rest = &text[i + 1..];
                let after_ws = rest.trim_start();
                if after_ws.len() < rest.len()
                    && after_ws.chars().next().is_some_and(char::is_uppercase)
                {
                    out.push(i + 1);
                }
            }
            _ => {}
        }
    }
    out
}

fn barrier_before(barriers: &[usize], pos: usize) -> usize {
    let idx = barriers.partition_point(|&b| b <= pos);
    if idx == 0 {
        0
    } else {
        barriers[idx - 1]
    }
}

#[derive(Debug, Clone, Copy)]
struct ParenGroup {
    open: usize,
    /// Trimmed content between the parentheses.
    content: Span,
}

/// Single-level parenthesized groups. An open parenthesis followed by another
/// open parenthesis before any close is skipped.
fn paren_groups(text: &str) -> Vec<ParenGroup> {
    let parens: Vec<(usize, u8)> = text
        .bytes()
        .enumerate()
        .filter(|&(_, b)| b == b'(' || b == b')')
        .collect();
    parens
        .windows(2)
        .filter(|w| w[0].1 == b'(' && w[1].1 == b')')
        .filter_map(|w| {
            let (open, close) = (w[0].0, w[1].0);
            let inner = &text[open + 1..close];
            let trimmed = inner.trim();
            if trimmed.is_empty() {
                return None;
            }
            let lead = inner.len() - inner.trim_start().len();
            let start = open + 1 + lead;
            Some(ParenGroup {
                open,
                content: Span::new(start, start + trimmed.len()),
            })
        })
        .collect()
}

fn last_n(mut tokens: Vec<Token>, n: usize) -> Vec<Token> {
    if tokens.len() > n {
        tokens.drain(..tokens.len() - n);
    }
    tokens
}

/// Finds every `... (SF)` site whose parenthesized content passes the
/// short-form filter, with the tokens preceding the parenthesis as its
/// window. Windows never reach back across a sentence boundary or another
/// parenthesis.
pub fn find_definition_sites(doc: &Document, policy: WindowPolicy) -> Vec<DefinitionSite> {
    let text = doc.text.as_str();
    let barriers = window_barriers(text);
    paren_groups(text)
        .into_iter()
        .filter_map(|g| {
            let sf = &text[g.content.start..g.content.end];
            if !is_plausible_short_form(sf) {
                return None;
            }
            let start = barrier_before(&barriers, g.open);
            let window = last_n(tokenize_range(text, start, g.open), policy.max_tokens(sf));
            let first = window.first()?;
            let window_span = Span::new(first.span.start, window.last()?.span.end);
            Some(DefinitionSite {
                sf: sf.to_string(),
                sf_span: g.content,
                window,
                window_span,
            })
        })
        .collect()
}

fn lower_chars(s: &str) -> Vec<char> {
    s.chars().flat_map(char::to_lowercase).collect()
}

/// Index of the first window token of the shortest suffix that covers the
/// alphanumeric characters of `sf` in order, or `None`.
fn match_start(sf: &str, window: &[Token]) -> Option<usize> {
    let targets: Vec<char> = sf
        .chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(char::to_lowercase)
        .collect();
    if targets.is_empty() || window.is_empty() {
        return None;
    }
    let tokens: Vec<Vec<char>> = window.iter().map(|t| lower_chars(&t.text)).collect();

    // Cursor (token, char) is exclusive: the next match must lie strictly before it.
    let mut tok = tokens.len() - 1;
    let mut pos = tokens[tok].len();
    for (k, &target) in targets.iter().enumerate().rev() {
        let must_start_token = k == 0;
        loop {
            if pos == 0 {
                if tok == 0 {
                    return None;
                }
                tok -= 1;
                pos = tokens[tok].len();
                continue;
            }
            pos -= 1;
            if tokens[tok][pos] == target && (!must_start_token || pos == 0) {
                break;
            }
        }
    }
    Some(tok)
}

/// Right-to-left character matching of a short form against the tokens that
/// precede it. Returns the long form (tokens joined by single spaces) and its
/// span, or `None` when no suffix of the window qualifies.
///
/// A long form is rejected when it has more than `min(|sf| + 5, 2 * |sf|)`
/// tokens, contains `(`, is not longer than the short form, or equals the
/// short form ignoring case.
pub fn char_match_lf(sf: &str, window: &[Token]) -> Option<(String, Span)> {
    let start = match_start(sf, window)?;
    let lf_tokens = &window[start..];
    if lf_tokens.len() > lf_token_cap(sf) {
        return None;
    }
    let lf = lf_tokens
        .iter()
        .map(|t| t.text.as_str())
        .collect::<Vec<_>>()
        .join(" ");
    if lf.contains('(')
        || lf.chars().count() <= sf.chars().count()
        || lf.to_lowercase() == sf.to_lowercase()
    {
        return None;
    }
    let span = Span::new(
        lf_tokens[0].span.start,
        lf_tokens[lf_tokens.len() - 1].span.end,
    );
    Some((lf, span))
}

fn has_uppercase(s: &str) -> bool {
    s.chars().any(char::is_uppercase)
}

/// Extracts short-form/long-form pairs with the default window policy.
pub fn extract_pairs(doc: &Document) -> Vec<SfLfPair> {
    extract_pairs_with(doc, WindowPolicy::default())
}

/// Extracts at most one pair per parenthesized group, ordered by short-form
/// position.
///
/// `LF (SF)` is tried first when the content passes the short-form filter.
/// Otherwise, or when no long form matches, the token just before the
/// parenthesis is tried as the short form and the parenthesized text (up to
/// the first `,` or `;`) as the long-form window.
pub fn extract_pairs_with(doc: &Document, policy: WindowPolicy) -> Vec<SfLfPair> {
    let text = doc.text.as_str();
    let barriers = window_barriers(text);
    let mut pairs = Vec::new();
    for g in paren_groups(text) {
        let content = &text[g.content.start..g.content.end];
        let preceding = tokenize_range(text, barrier_before(&barriers, g.open), g.open);

        if is_plausible_short_form(content) {
            let window = last_n(preceding.clone(), policy.max_tokens(content));
            if let Some((lf, lf_span)) = char_match_lf(content, &window) {
                pairs.push(SfLfPair {
                    sf: content.to_string(),
                    lf,
                    sf_span: g.content,
                    lf_span,
                    pattern: Pattern::LfParenSf,
                });
                continue;
            }
        }

        let Some(sf_token) = preceding.last() else {
            continue;
        };
        let adjacent = text[sf_token.span.end..g.open]
            .chars()
            .all(char::is_whitespace);
        if !adjacent || !is_plausible_short_form(&sf_token.text) || !has_uppercase(&sf_token.text) {
            continue;
        }
        let lf_end = content
            .find([',', ';'])
            .map_or(g.content.end, |i| g.content.start + i);
        let lf_window = tokenize_range(text, g.content.start, lf_end);
        if let Some((lf, lf_span)) = char_match_lf(&sf_token.text, &lf_window) {
            pairs.push(SfLfPair {
                sf: sf_token.text.clone(),
                lf,
                sf_span: sf_token.span,
                lf_span,
                pattern: Pattern::SfParenLf,
            });
        }
    }
    pairs.sort_by_key(|p| p.sf_span.start);
    pairs
}

/// Runs [`extract_pairs_with`] over many documents in parallel. Output is
/// sorted by document id.
pub fn extract_corpus(docs: &[Document], policy: WindowPolicy) -> Vec<(String, Vec<SfLfPair>)> {
    let mut out: Vec<(String, Vec<SfLfPair>)> = docs
        .par_iter()
        .map(|d| (d.id.clone(), extract_pairs_with(d, policy)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Surrogate n-best generator. Every candidate is a suffix of the site
/// window, so candidates differ only at their left edge.
///
/// Rank 0 is the character-matched long form when one exists. The remaining
/// suffixes follow by distance between their token count and the short-form
/// length, shorter first on ties.
pub fn generate_nbest(doc: &Document, site: &DefinitionSite, k: usize) -> NBestList {
    let n = site.window.len();
    let sf_len = site.sf.chars().count();
    let best =
        char_match_lf(&site.sf, &site.window).and_then(|_| match_start(&site.sf, &site.window));

    let mut starts: Vec<usize> = (0..n).filter(|&s| Some(s) != best).collect();
    starts.sort_by_key(|&s| {
        let len = n - s;
        (len.abs_diff(sf_len), len)
    });
    let ordered = best.into_iter().chain(starts);

    let candidates = ordered
        .take(k)
        .enumerate()
        .map(|(rank, s)| {
            let lf = site.window[s..]
                .iter()
                .map(|t| t.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            Candidate::new(lf, rank)
        })
        .collect();

    NBestList {
        doc_id: doc.id.clone(),
        sf: site.sf.clone(),
        sf_span: site.sf_span,
        candidates,
    }
}

/// One n-best list per definition site of `doc`.
pub fn nbest_for_document(doc: &Document, k: usize, policy: WindowPolicy) -> Vec<NBestList> {
    find_definition_sites(doc, policy)
        .iter()
        .map(|site| generate_nbest(doc, site, k))
        .collect()
}
