//! In-memory RDF triple store with SPO, POS and OSP indexes and
//! N-Triples import/export.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::value::{Dtype, Literal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TermError {
    #[error("`{0}` is not an absolute IRI")]
    InvalidIri(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("N-Triples parse error on line {line}: {message}")]
pub struct NtParseError {
    pub line: usize,
    pub message: String,
}

/// An absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iri(Arc<str>);

impl Iri {
    pub fn new(value: &str) -> Result<Iri, TermError> {
        if is_absolute_iri(value) {
            Ok(Iri(value.into()))
        } else {
            Err(TermError::InvalidIri(value.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

fn is_absolute_iri(value: &str) -> bool {
    let Some((scheme, _)) = value.split_once(':') else {
        return false;
    };
    let mut chars = scheme.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'))
        && !value
            .chars()
            .any(|c| c.is_whitespace() || c.is_control() || "<>\"{}|^`\\".contains(c))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Iri(Iri),
    Literal(Literal),
}

impl Term {
    pub fn iri(value: &str) -> Result<Term, TermError> {
        Iri::new(value).map(Term::Iri)
    }

    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Term::Iri(iri) => Some(iri),
            Term::Literal(_) => None,
        }
    }

    pub fn as_literal(&self) -> Option<&Literal> {
        match self {
            Term::Literal(lit) => Some(lit),
            Term::Iri(_) => None,
        }
    }

    /// Plain rendering for result tables: the IRI or the lexical form.
    pub fn plain(&self) -> &str {
        match self {
            Term::Iri(iri) => iri.as_str(),
            Term::Literal(lit) => lit.lexical(),
        }
    }
}

impl From<Literal> for Term {
    fn from(lit: Literal) -> Term {
        Term::Literal(lit)
    }
}

impl From<Iri> for Term {
    fn from(iri: Iri) -> Term {
        Term::Iri(iri)
    }
}

/// N-Triples syntax.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Iri(iri) => iri.fmt(f),
            Term::Literal(lit) => {
                f.write_str("\"")?;
                for c in lit.lexical().chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\r' => f.write_str("\\r")?,
                        c => write!(f, "{c}")?,
                    }
                }
                write!(f, "\"^^<{}>", lit.dtype().iri())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Triple {
    pub subject: Iri,
    pub predicate: Iri,
    pub object: Term,
}

impl Triple {
    pub fn new(subject: Iri, predicate: Iri, object: impl Into<Term>) -> Triple {
        Triple {
            subject,
            predicate,
            object: object.into(),
        }
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

type Index<A, B, C> = BTreeMap<A, BTreeMap<B, BTreeSet<C>>>;

/// A set of triples indexed three ways.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TripleStore {
    spo: Index<Iri, Iri, Term>,
    pos: Index<Iri, Term, Iri>,
    osp: Index<Term, Iri, Iri>,
    len: usize,
}

fn index_insert<A: Ord, B: Ord, C: Ord>(index: &mut Index<A, B, C>, a: A, b: B, c: C) -> bool {
    index.entry(a).or_default().entry(b).or_default().insert(c)
}

impl TripleStore {
    pub fn new() -> TripleStore {
        TripleStore::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Returns true iff the triple was not already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        let Triple {
            subject,
            predicate,
            object,
        } = t;
        if !index_insert(&mut self.spo, subject.clone(), predicate.clone(), object.clone()) {
            return false;
        }
        index_insert(&mut self.pos, predicate.clone(), object.clone(), subject.clone());
        index_insert(&mut self.osp, object, subject, predicate);
        self.len += 1;
        true
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.spo
            .get(&t.subject)
            .and_then(|m| m.get(&t.predicate))
            .is_some_and(|objects| objects.contains(&t.object))
    }

    /// Every triple in SPO order.
    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().flat_map(|(s, m)| {
            m.iter().flat_map(move |(p, objects)| {
                objects
                    .iter()
                    .map(move |o| Triple::new(s.clone(), p.clone(), o.clone()))
            })
        })
    }

    /// All triples unifying with the pattern (`None` is a wildcard), in SPO
    /// order. Non-IRI terms in subject or predicate position match nothing.
    pub fn match_pattern(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> Vec<Triple> {
        let s = match s.map(Term::as_iri) {
            Some(None) => return Vec::new(),
            Some(Some(iri)) => Some(iri),
            None => None,
        };
        let p = match p.map(Term::as_iri) {
            Some(None) => return Vec::new(),
            Some(Some(iri)) => Some(iri),
            None => None,
        };
        let mut out: Vec<Triple> = match (s, p, o) {
            (Some(s), _, _) => {
                let Some(by_p) = self.spo.get(s) else {
                    return Vec::new();
                };
                let pick = |(pred, objects): (&Iri, &BTreeSet<Term>)| -> Vec<Triple> {
                    match o {
                        Some(o) if objects.contains(o) => {
                            vec![Triple::new(s.clone(), pred.clone(), o.clone())]
                        }
                        Some(_) => Vec::new(),
                        None => objects
                            .iter()
                            .map(|obj| Triple::new(s.clone(), pred.clone(), obj.clone()))
                            .collect(),
                    }
                };
                match p {
                    Some(p) => by_p.get_key_value(p).map(pick).unwrap_or_default(),
                    None => by_p.iter().flat_map(pick).collect(),
                }
            }
            (None, Some(p), _) => {
                let Some(by_o) = self.pos.get(p) else {
                    return Vec::new();
                };
                let subjects = |(obj, subjects): (&Term, &BTreeSet<Iri>)| {
                    subjects
                        .iter()
                        .map(|s| Triple::new(s.clone(), p.clone(), obj.clone()))
                        .collect::<Vec<_>>()
                };
                match o {
                    Some(o) => by_o.get_key_value(o).map(subjects).unwrap_or_default(),
                    None => by_o.iter().flat_map(subjects).collect(),
                }
            }
            (None, None, Some(o)) => self
                .osp
                .get(o)
                .map(|by_s| {
                    by_s.iter()
                        .flat_map(|(s, preds)| {
                            preds.iter().map(|p| Triple::new(s.clone(), p.clone(), o.clone()))
                        })
                        .collect()
                })
                .unwrap_or_default(),
            (None, None, None) => return self.iter().collect(),
        };
        // POS and OSP scans come out in their own index order.
        if s.is_none() {
            out.sort();
        }
        out
    }

    /// Number of triples matching the pattern, without materializing them.
    pub fn count_pattern(&self, s: Option<&Term>, p: Option<&Term>, o: Option<&Term>) -> usize {
        match (s, p, o) {
            (None, None, None) => self.len,
            (None, Some(Term::Iri(p)), None) => self
                .pos
                .get(p)
                .map_or(0, |by_o| by_o.values().map(BTreeSet::len).sum()),
            (None, Some(Term::Iri(p)), Some(o)) => self
                .pos
                .get(p)
                .and_then(|by_o| by_o.get(o))
                .map_or(0, BTreeSet::len),
            (None, None, Some(o)) => self
                .osp
                .get(o)
                .map_or(0, |by_s| by_s.values().map(BTreeSet::len).sum()),
            _ => self.match_pattern(s, p, o).len(),
        }
    }

    /// N-Triples text, one line per triple in SPO order.
    pub fn export_ntriples(&self) -> String {
        let mut out = String::new();
        for t in self.iter() {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }

    pub fn import_ntriples(text: &str) -> Result<TripleStore, NtParseError> {
        let mut store = TripleStore::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let triple = parse_line(line).map_err(|message| NtParseError {
                line: i + 1,
                message,
            })?;
            store.insert(triple);
        }
        Ok(store)
    }
}

impl FromIterator<Triple> for TripleStore {
    fn from_iter<I: IntoIterator<Item = Triple>>(iter: I) -> TripleStore {
        let mut store = TripleStore::new();
        for t in iter {
            store.insert(t);
        }
        store
    }
}

struct LineCursor<'a> {
    rest: &'a str,
}

impl<'a> LineCursor<'a> {
    fn skip_ws(&mut self) {
        self.rest = self.rest.trim_start_matches([' ', '\t']);
    }

    fn iri(&mut self) -> Result<Iri, String> {
        self.skip_ws();
        let body = self
            .rest
            .strip_prefix('<')
            .ok_or_else(|| format!("expected IRI at `{}`", preview(self.rest)))?;
        let end = body.find('>').ok_or("unterminated IRI")?;
        self.rest = &body[end + 1..];
        Iri::new(&body[..end]).map_err(|e| e.to_string())
    }

    fn term(&mut self) -> Result<Term, String> {
        self.skip_ws();
        if !self.rest.starts_with('"') {
            return self.iri().map(Term::Iri);
        }
        let mut lexical = String::new();
        let mut chars = self.rest[1..].char_indices();
        let close = loop {
            let (i, c) = chars.next().ok_or("unterminated literal")?;
            match c {
                '"' => break i + 1,
                '\\' => {
                    let (_, esc) = chars.next().ok_or("dangling escape")?;
                    match esc {
                        't' => lexical.push('\t'),
                        'b' => lexical.push('\u{8}'),
                        'n' => lexical.push('\n'),
                        'r' => lexical.push('\r'),
                        'f' => lexical.push('\u{c}'),
                        '"' => lexical.push('"'),
                        '\'' => lexical.push('\''),
                        '\\' => lexical.push('\\'),
                        'u' | 'U' => {
                            let width = if esc == 'u' { 4 } else { 8 };
                            let hex: String = (0..width)
                                .filter_map(|_| chars.next().map(|(_, c)| c))
                                .collect();
                            let code = u32::from_str_radix(&hex, 16)
                                .ok()
                                .filter(|_| hex.len() == width)
                                .and_then(char::from_u32)
                                .ok_or_else(|| format!("bad unicode escape `\\{esc}{hex}`"))?;
                            lexical.push(code);
                        }
                        other => return Err(format!("unknown escape `\\{other}`")),
                    }
                }
                c => lexical.push(c),
            }
        };
        self.rest = &self.rest[close + 1..];
        let dtype = if let Some(after) = self.rest.strip_prefix("^^") {
            self.rest = after;
            let iri = self.iri()?;
            Dtype::from_iri(iri.as_str())
                .ok_or_else(|| format!("unsupported datatype {iri}"))?
        } else if self.rest.starts_with('@') {
            return Err("language-tagged literals are not supported".into());
        } else {
            Dtype::String
        };
        Literal::parse(&lexical, dtype)
            .map(Term::Literal)
            .map_err(|e| e.to_string())
    }
}

fn preview(s: &str) -> &str {
    let end = s.char_indices().nth(20).map_or(s.len(), |(i, _)| i);
    &s[..end]
}

fn parse_line(line: &str) -> Result<Triple, String> {
    let mut cursor = LineCursor { rest: line };
    let subject = cursor.iri()?;
    let predicate = cursor.iri()?;
    let object = cursor.term()?;
    cursor.skip_ws();
    if cursor.rest != "." {
        return Err(format!("expected terminal ` .`, found `{}`", preview(cursor.rest)));
    }
    Ok(Triple {
        subject,
        predicate,
        object,
    })
}
