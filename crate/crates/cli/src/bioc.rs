//! Reader for the subset of BioC XML used by the abbreviation benchmarks.
//!
//! Recognized elements: `collection`, `document` (with `id`), `passage` (with
//! `offset` and `text`), `annotation` (with a `type` infon, `location` and
//! `text`) and `relation` (with `node refid=.. role=..`). Everything else is
//! ignored.
//!
//! A gold pair is a relation with one short-form node and one long-form
//! node. A node's role decides which is which; when the role is not
//! recognizable the referenced annotation's `type` infon is used. Role and
//! type values are matched case-insensitively: `ShortForm`, `short form`,
//! `SF`, `abbreviation` mark short forms and `LongForm`, `long form`, `LF`,
//! `definition` mark long forms.
//!
//! Annotation offsets are document-level character offsets. An annotation
//! whose `text` does not match the passage text at its location is skipped
//! with a warning, and so are relations that use it.

use std::collections::BTreeMap;

use adi_core::{Document, GoldSet};
use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("malformed BioC at byte {offset}: {message}")]
pub struct BiocError {
    pub offset: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Passage {
    pub offset: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiocSubsetDocument {
    pub id: String,
    pub passages: Vec<Passage>,
    /// Gold `(sf, lf)` pairs from relations with valid annotations.
    pub pairs: Vec<(String, String)>,
}

impl BiocSubsetDocument {
    /// Passages laid out at their offsets, gaps filled with spaces.
    pub fn to_document(&self) -> Document {
        let mut passages: Vec<&Passage> = self.passages.iter().collect();
        passages.sort_by_key(|p| p.offset);
        let mut text = String::new();
        let mut len = 0usize;
        for p in passages {
            if len < p.offset {
                text.extend(std::iter::repeat_n(' ', p.offset - len));
                len = p.offset;
            } else if !text.is_empty() {
                text.push(' ');
                len += 1;
            }
            text.push_str(&p.text);
            len += p.text.chars().count();
        }
        Document::new(self.id.clone(), text)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BiocCollection {
    pub documents: Vec<BiocSubsetDocument>,
    /// Annotations dropped because their offsets did not match the text.
    pub skipped_annotations: usize,
    pub warnings: Vec<String>,
}

impl BiocCollection {
    pub fn gold_set(&self, name: &str) -> GoldSet {
        let mut gold = GoldSet::new(name);
        for d in &self.documents {
            gold.add_document(&d.id);
            for (sf, lf) in &d.pairs {
                gold.add_pair(&d.id, sf, lf);
            }
        }
        gold
    }

    pub fn to_documents(&self) -> Vec<Document> {
        self.documents
            .iter()
            .map(BiocSubsetDocument::to_document)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Short,
    Long,
}

fn role_of(label: &str) -> Option<Role> {
    let l = label.trim().to_lowercase().replace(['_', '-', ' '], "");
    match l.as_str() {
        "sf" | "shortform" | "short" | "abbreviation" | "abbr" | "acronym" => Some(Role::Short),
        "lf" | "longform" | "long" | "definition" | "expansion" => Some(Role::Long),
        _ => None,
    }
}

#[derive(Debug, Default)]
struct Annotation {
    id: String,
    kind: Option<String>,
    location: Option<(usize, usize)>,
    text: Option<String>,
}

#[derive(Debug, Default)]
struct Relation {
    nodes: Vec<(String, String)>,
}

#[derive(Debug, Default)]
struct DocBuilder {
    id: Option<String>,
    passages: Vec<Passage>,
    annotations: Vec<Annotation>,
    relations: Vec<Relation>,
}

#[derive(Debug, Default)]
struct PassageBuilder {
    offset: Option<usize>,
    text: String,
}

struct Parser {
    stack: Vec<String>,
    buf: String,
    infon_key: Option<String>,
    doc: Option<DocBuilder>,
    passage: Option<PassageBuilder>,
    annotation: Option<Annotation>,
    relation: Option<Relation>,
    out: BiocCollection,
}

fn attr(e: &BytesStart<'_>, key: &str) -> Result<Option<String>, String> {
    for a in e.attributes() {
        let a = a.map_err(|err| err.to_string())?;
        if a.key.local_name().into_inner() == key {
            return a
                .normalized_value(XmlVersion::Implicit1_0)
                .map(|v| Some(v.into_owned()))
                .map_err(|err| err.to_string());
        }
    }
    Ok(None)
}

fn parse_usize(what: &str, s: &str) -> Result<usize, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("{what} `{}` is not a non-negative integer", s.trim()))
}

impl Parser {
    fn parent(&self) -> Option<&str> {
        self.stack.last().map(String::as_str)
    }

    fn open(&mut self, name: &str, e: &BytesStart<'_>) -> Result<(), String> {
        self.buf.clear();
        match name {
            "document" => self.doc = Some(DocBuilder::default()),
            "passage" if self.doc.is_some() => self.passage = Some(PassageBuilder::default()),
            "annotation" if self.doc.is_some() => {
                self.annotation = Some(Annotation {
                    id: attr(e, "id")?.unwrap_or_default(),
                    ..Default::default()
                })
            }
            "relation" if self.doc.is_some() => self.relation = Some(Relation::default()),
            "location" => {
                if let Some(ann) = self.annotation.as_mut() {
                    let offset = attr(e, "offset")?.ok_or("location without offset")?;
                    let length = attr(e, "length")?.ok_or("location without length")?;
                    let loc = (
                        parse_usize("offset", &offset)?,
                        parse_usize("length", &length)?,
                    );
                    ann.location.get_or_insert(loc);
                }
            }
            "node" => {
                if let Some(rel) = self.relation.as_mut() {
                    let refid = attr(e, "refid")?.ok_or("relation node without refid")?;
                    let role = attr(e, "role")?.unwrap_or_default();
                    rel.nodes.push((refid, role));
                }
            }
            "infon" => self.infon_key = attr(e, "key")?,
            _ => {}
        }
        Ok(())
    }

    fn close(&mut self, name: &str) -> Result<(), String> {
        let text = std::mem::take(&mut self.buf);
        match (name, self.parent()) {
            ("id", Some("document")) => {
                if let Some(d) = self.doc.as_mut() {
                    d.id = Some(text.trim().to_string());
                }
            }
            ("offset", Some("passage")) => {
                if let Some(p) = self.passage.as_mut() {
                    p.offset = Some(parse_usize("passage offset", &text)?);
                }
            }
            ("text", Some("passage")) => {
                if let Some(p) = self.passage.as_mut() {
                    p.text = text;
                }
            }
            ("text", Some("annotation")) => {
                if let Some(a) = self.annotation.as_mut() {
                    a.text = Some(text);
                }
            }
            ("infon", Some("annotation")) => {
                if self.infon_key.as_deref() == Some("type") {
                    if let Some(a) = self.annotation.as_mut() {
                        a.kind = Some(text.trim().to_string());
                    }
                }
            }
            ("passage", _) => {
                if let (Some(p), Some(d)) = (self.passage.take(), self.doc.as_mut()) {
                    d.passages.push(Passage {
                        offset: p.offset.unwrap_or(0),
                        text: p.text,
                    });
                }
            }
            ("annotation", _) => {
                if let (Some(a), Some(d)) = (self.annotation.take(), self.doc.as_mut()) {
                    d.annotations.push(a);
                }
            }
            ("relation", _) => {
                if let (Some(r), Some(d)) = (self.relation.take(), self.doc.as_mut()) {
                    d.relations.push(r);
                }
            }
            ("document", _) => {
                if let Some(d) = self.doc.take() {
                    self.finish_document(d)?;
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn finish_document(&mut self, d: DocBuilder) -> Result<(), String> {
        let id =
            d.id.filter(|id| !id.is_empty())
                .ok_or("document without a non-empty <id>")?;

        let mut valid: BTreeMap<String, (Option<Role>, String)> = BTreeMap::new();
        for ann in d.annotations {
            match resolve_annotation(&d.passages, &ann) {
                Ok(text) => {
                    let role = ann.kind.as_deref().and_then(role_of);
                    valid.insert(ann.id.clone(), (role, text));
                }
                Err(why) => {
                    self.out.skipped_annotations += 1;
                    self.out.warnings.push(format!(
                        "document {id}: skipping annotation `{}`: {why}",
                        ann.id
                    ));
                }
            }
        }

        let mut pairs = Vec::new();
        for rel in d.relations {
            let mut sf = None;
            let mut lf = None;
            let mut complete = true;
            for (refid, role) in &rel.nodes {
                let Some((kind, text)) = valid.get(refid) else {
                    complete = false;
                    continue;
                };
                match role_of(role).or(*kind) {
                    Some(Role::Short) => sf = Some(text.clone()),
                    Some(Role::Long) => lf = Some(text.clone()),
                    None => {}
                }
            }
            if let (true, Some(sf), Some(lf)) = (complete, sf, lf) {
                pairs.push((sf, lf));
            }
        }

        self.out.documents.push(BiocSubsetDocument {
            id,
            passages: d.passages,
            pairs,
        });
        Ok(())
    }
}

/// Text covered by an annotation's location, checked against its `text`.
fn resolve_annotation(passages: &[Passage], ann: &Annotation) -> Result<String, String> {
    let (offset, length) = ann.location.ok_or("no location")?;
    let passage = passages
        .iter()
        .find(|p| p.offset <= offset && offset + length <= p.offset + p.text.chars().count())
        .ok_or_else(|| format!("location {offset}+{length} lies outside every passage"))?;
    let covered: String = passage
        .text
        .chars()
        .skip(offset - passage.offset)
        .take(length)
        .collect();
    match &ann.text {
        Some(t) if *t != covered => Err(format!(
            "text `{t}` does not match `{covered}` at offset {offset}"
        )),
        _ => Ok(covered),
    }
}

/// Parses BioC XML held in memory.
pub fn parse_bioc(xml: &str) -> Result<BiocCollection, BiocError> {
    let mut reader = Reader::from_str(xml);
    let mut p = Parser {
        stack: Vec::new(),
        buf: String::new(),
        infon_key: None,
        doc: None,
        passage: None,
        annotation: None,
        relation: None,
        out: BiocCollection::default(),
    };
    loop {
        let pos = reader.buffer_position();
        let fail = |message: String| BiocError {
            offset: pos,
            message,
        };
        let event = reader.read_event().map_err(|e| BiocError {
            offset: reader.buffer_position(),
            message: e.to_string(),
        })?;
        match event {
            Event::Start(e) => {
                let name = e.local_name().into_inner().to_string();
                p.open(&name, &e).map_err(fail)?;
                p.stack.push(name);
            }
            Event::Empty(e) => {
                let name = e.local_name().into_inner().to_string();
                p.open(&name, &e).map_err(fail)?;
                p.close(&name).map_err(fail)?;
            }
            Event::End(e) => {
                let name = e.local_name().into_inner().to_string();
                p.stack.pop();
                p.close(&name).map_err(fail)?;
            }
            Event::Text(t) => p.buf.push_str(&t.xml10_content()),
            Event::CData(t) => p.buf.push_str(&t.xml10_content()),
            Event::GeneralRef(r) => {
                let resolved = if r.is_char_ref() {
                    r.resolve_char_ref().ok().flatten().map(String::from)
                } else {
                    resolve_predefined_entity(&r).map(str::to_string)
                };
                let s = resolved.ok_or_else(|| fail(format!("unknown entity `&{};`", &*r)))?;
                p.buf.push_str(&s);
            }
            Event::Eof => {
                if let Some(open) = p.stack.last() {
                    return Err(fail(format!("unexpected end of input inside <{open}>")));
                }
                break;
            }
            _ => {}
        }
    }
    Ok(p.out)
}
