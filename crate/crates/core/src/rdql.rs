//! The supported RDQL subset: conjunctive triple patterns plus a
//! conjunction of comparisons.
//!
//! ```text
//! SELECT ?a, ?b
//! WHERE
//! (?t <http://integratedDB/T#A> ?a),
//! (?t <http://integratedDB/T#B> ?b)
//! AND ?b > 2000 && ?a != "x"
//! ```

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::triple_store::{Iri, Term, TripleStore};
use crate::value::{compare_literals, Comparator, Dtype, Literal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RdqlError {
    #[error("RDQL parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("selected variable ?{0} does not occur in any triple pattern")]
    UnboundSelectVar(String),
    #[error("filter variable ?{0} does not occur in any triple pattern")]
    UnboundFilterVar(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    /// Variable name without the leading `?`.
    Var(String),
    Iri(Iri),
    Literal(Literal),
}

impl PatternTerm {
    pub fn var(name: &str) -> PatternTerm {
        PatternTerm::Var(name.to_string())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Iri(iri) => iri.fmt(f),
            PatternTerm::Literal(lit) => write_literal(f, lit),
        }
    }
}

/// Numbers print bare, strings quoted, booleans with their datatype.
fn write_literal(f: &mut fmt::Formatter<'_>, lit: &Literal) -> fmt::Result {
    match lit.dtype() {
        Dtype::Integer | Dtype::Decimal => f.write_str(lit.lexical()),
        Dtype::String => {
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
            f.write_str("\"")
        }
        Dtype::Boolean => write!(f, "\"{}\"^^<{}>", lit.lexical(), Dtype::Boolean.iri()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub s: PatternTerm,
    pub p: PatternTerm,
    pub o: PatternTerm,
}

impl TriplePattern {
    pub fn new(s: PatternTerm, p: PatternTerm, o: PatternTerm) -> TriplePattern {
        TriplePattern { s, p, o }
    }

    pub fn terms(&self) -> [&PatternTerm; 3] {
        [&self.s, &self.p, &self.o]
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} {} {})", self.s, self.p, self.o)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum FilterOperand {
    Var(String),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FilterAtom {
    pub lhs: String,
    pub op: Comparator,
    pub rhs: FilterOperand,
}

impl fmt::Display for FilterAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{} {} ", self.lhs, self.op)?;
        match &self.rhs {
            FilterOperand::Var(v) => write!(f, "?{v}"),
            FilterOperand::Literal(lit) => write_literal(f, lit),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RdqlQuery {
    pub select: Vec<String>,
    pub patterns: Vec<TriplePattern>,
    /// Conjunction; empty means no filtering.
    pub filter: Vec<FilterAtom>,
}

impl RdqlQuery {
    /// Pattern variables in first-occurrence order.
    pub fn pattern_vars(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        self.patterns
            .iter()
            .flat_map(TriplePattern::terms)
            .filter_map(PatternTerm::as_var)
            .filter(|v| seen.insert(*v))
            .collect()
    }

    fn validate(&self) -> Result<(), RdqlError> {
        let vars: HashSet<&str> = self.pattern_vars().into_iter().collect();
        if let Some(v) = self.select.iter().find(|v| !vars.contains(v.as_str())) {
            return Err(RdqlError::UnboundSelectVar(v.clone()));
        }
        for atom in &self.filter {
            let rhs = match &atom.rhs {
                FilterOperand::Var(v) => Some(v),
                FilterOperand::Literal(_) => None,
            };
            if let Some(v) = std::iter::once(&atom.lhs)
                .chain(rhs)
                .find(|v| !vars.contains(v.as_str()))
            {
                return Err(RdqlError::UnboundFilterVar(v.clone()));
            }
        }
        Ok(())
    }
}

/// Canonical text layout: SELECT line, WHERE line, one pattern per line
/// (comma-terminated except the last), then an optional AND line.
impl fmt::Display for RdqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let select: Vec<String> = self.select.iter().map(|v| format!("?{v}")).collect();
        writeln!(f, "SELECT {}", select.join(", "))?;
        write!(f, "WHERE")?;
        for (i, pattern) in self.patterns.iter().enumerate() {
            let sep = if i + 1 < self.patterns.len() { "," } else { "" };
            write!(f, "\n{pattern}{sep}")?;
        }
        if !self.filter.is_empty() {
            let atoms: Vec<String> = self.filter.iter().map(ToString::to_string).collect();
            write!(f, "\nAND {}", atoms.join(" && "))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Keyword(String),
    Var(String),
    Iri(String),
    /// Quoted literal with its optional datatype IRI.
    Quoted(String, Option<String>),
    Number(String),
    LParen,
    RParen,
    Comma,
    AndAnd,
    Star,
    Cmp(Comparator),
    Eof,
}

struct Lexer<'a> {
    text: &'a str,
    at: usize,
}

impl<'a> Lexer<'a> {
    fn err<T>(&self, position: usize, message: impl Into<String>) -> Result<T, RdqlError> {
        Err(RdqlError::Parse {
            position,
            message: message.into(),
        })
    }

    fn rest(&self) -> &'a str {
        &self.text[self.at..]
    }

    fn next_token(&mut self) -> Result<(Tok, usize), RdqlError> {
        let trimmed = self.rest().trim_start();
        self.at = self.text.len() - trimmed.len();
        let start = self.at;
        let Some(c) = trimmed.chars().next() else {
            return Ok((Tok::Eof, start));
        };
        let two = trimmed.get(..2).unwrap_or("");
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            '*' => (Tok::Star, 1),
            '&' if two == "&&" => (Tok::AndAnd, 2),
            '=' if two == "==" => (Tok::Cmp(Comparator::Eq), 2),
            '=' => (Tok::Cmp(Comparator::Eq), 1),
            '!' if two == "!=" => (Tok::Cmp(Comparator::Ne), 2),
            '<' if two == "<=" => (Tok::Cmp(Comparator::Le), 2),
            '>' if two == ">=" => (Tok::Cmp(Comparator::Ge), 2),
            '>' => (Tok::Cmp(Comparator::Gt), 1),
            '<' => match trimmed[1..].find(|c: char| c == '>' || c.is_whitespace()) {
                Some(end) if trimmed.as_bytes()[1 + end] == b'>' => {
                    (Tok::Iri(trimmed[1..1 + end].to_string()), end + 2)
                }
                _ => (Tok::Cmp(Comparator::Lt), 1),
            },
            '?' => {
                let name_len = trimmed[1..]
                    .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
                    .unwrap_or(trimmed.len() - 1);
                let name = &trimmed[1..1 + name_len];
                if !crate::descriptors::is_identifier(name) {
                    return self.err(start, "malformed variable name");
                }
                (Tok::Var(name.to_string()), name_len + 1)
            }
            '"' | '\'' => return self.quoted(c),
            c if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && trimmed.len() > 1) => {
                let len = trimmed
                    .char_indices()
                    .skip(1)
                    .find(|(_, c)| !(c.is_ascii_digit() || *c == '.'))
                    .map_or(trimmed.len(), |(i, _)| i);
                (Tok::Number(trimmed[..len].to_string()), len)
            }
            c if c.is_ascii_alphabetic() => {
                let len = trimmed
                    .find(|c: char| !c.is_ascii_alphanumeric())
                    .unwrap_or(trimmed.len());
                (Tok::Keyword(trimmed[..len].to_ascii_uppercase()), len)
            }
            other => return self.err(start, format!("unexpected character `{other}`")),
        };
        self.at += len;
        Ok((tok, start))
    }

    fn quoted(&mut self, quote: char) -> Result<(Tok, usize), RdqlError> {
        let start = self.at;
        let mut value = String::new();
        let mut chars = self.rest().char_indices().skip(1);
        let end = loop {
            let Some((i, c)) = chars.next() else {
                return self.err(start, "unterminated literal");
            };
            match c {
                c if c == quote => break i + 1,
                '\\' => match chars.next().map(|(_, c)| c) {
                    Some('n') => value.push('\n'),
                    Some('r') => value.push('\r'),
                    Some('t') => value.push('\t'),
                    Some(c @ ('"' | '\'' | '\\')) => value.push(c),
                    _ => return self.err(start + i, "bad escape in literal"),
                },
                c => value.push(c),
            }
        };
        self.at += end;
        let mut dtype = None;
        if let Some(after) = self.rest().strip_prefix("^^<") {
            let Some(close) = after.find('>') else {
                return self.err(self.at, "unterminated datatype IRI");
            };
            dtype = Some(after[..close].to_string());
            self.at += 3 + close + 1;
        }
        Ok((Tok::Quoted(value, dtype), start))
    }
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].0
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.at].0.clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        tok
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, RdqlError> {
        Err(RdqlError::Parse {
            position: self.pos(),
            message: message.into(),
        })
    }

    fn keyword(&mut self, kw: &str) -> Result<(), RdqlError> {
        match self.peek() {
            Tok::Keyword(k) if k == kw => {
                self.bump();
                Ok(())
            }
            _ => self.err(format!("expected {kw}")),
        }
    }

    fn literal(&self, tok: &Tok) -> Result<Option<Literal>, RdqlError> {
        let (raw, dtype) = match tok {
            Tok::Quoted(value, None) => (value.as_str(), Dtype::String),
            Tok::Quoted(value, Some(iri)) => match Dtype::from_iri(iri) {
                Some(dtype) => (value.as_str(), dtype),
                None => return self.err(format!("unsupported datatype <{iri}>")),
            },
            Tok::Number(n) if n.contains('.') => (n.as_str(), Dtype::Decimal),
            Tok::Number(n) => (n.as_str(), Dtype::Integer),
            Tok::Keyword(k) if k == "TRUE" || k == "FALSE" => (k.as_str(), Dtype::Boolean),
            _ => return Ok(None),
        };
        match Literal::parse(raw, dtype) {
            Ok(lit) => Ok(Some(lit)),
            Err(e) => self.err(e.to_string()),
        }
    }

    fn pattern_term(&mut self) -> Result<PatternTerm, RdqlError> {
        let tok = self.peek().clone();
        let term = match &tok {
            Tok::Var(v) => PatternTerm::Var(v.clone()),
            Tok::Iri(iri) => match Iri::new(iri) {
                Ok(iri) => PatternTerm::Iri(iri),
                Err(e) => return self.err(e.to_string()),
            },
            other => match self.literal(other)? {
                Some(lit) => PatternTerm::Literal(lit),
                None => return self.err("expected variable, IRI or literal"),
            },
        };
        self.bump();
        Ok(term)
    }

    fn pattern(&mut self) -> Result<TriplePattern, RdqlError> {
        if self.bump() != Tok::LParen {
            self.at -= 1;
            return self.err("expected `(`");
        }
        let s = self.pattern_term()?;
        let p = self.pattern_term()?;
        let o = self.pattern_term()?;
        if *self.peek() != Tok::RParen {
            return self.err("expected `)`");
        }
        self.bump();
        Ok(TriplePattern { s, p, o })
    }

    fn filter_operand(&mut self) -> Result<FilterOperand, RdqlError> {
        let tok = self.peek().clone();
        let operand = match &tok {
            Tok::Var(v) => FilterOperand::Var(v.clone()),
            other => match self.literal(other)? {
                Some(lit) => FilterOperand::Literal(lit),
                None => return self.err("expected variable or literal"),
            },
        };
        self.bump();
        Ok(operand)
    }

    fn atom(&mut self) -> Result<FilterAtom, RdqlError> {
        let lhs = self.filter_operand()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => return self.err("expected comparison operator"),
        };
        self.bump();
        let rhs = self.filter_operand()?;
        match (lhs, rhs) {
            (FilterOperand::Var(lhs), rhs) => Ok(FilterAtom { lhs, op, rhs }),
            (FilterOperand::Literal(lit), FilterOperand::Var(v)) => Ok(FilterAtom {
                lhs: v,
                op: op.flip(),
                rhs: FilterOperand::Literal(lit),
            }),
            _ => self.err("a comparison needs at least one variable"),
        }
    }

    fn query(&mut self) -> Result<RdqlQuery, RdqlError> {
        self.keyword("SELECT")?;
        let mut select = Vec::new();
        let mut star = false;
        if *self.peek() == Tok::Star {
            self.bump();
            star = true;
        } else {
            loop {
                match self.peek().clone() {
                    Tok::Var(v) => {
                        self.bump();
                        select.push(v);
                    }
                    _ => return self.err("expected variable"),
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else if !matches!(self.peek(), Tok::Var(_)) {
                    break;
                }
            }
        }
        self.keyword("WHERE")?;
        let mut patterns = vec![self.pattern()?];
        loop {
            if *self.peek() == Tok::Comma {
                self.bump();
                patterns.push(self.pattern()?);
            } else if *self.peek() == Tok::LParen {
                patterns.push(self.pattern()?);
            } else {
                break;
            }
        }
        let mut filter = Vec::new();
        if matches!(self.peek(), Tok::Keyword(k) if k == "AND") {
            self.bump();
            filter.push(self.atom()?);
            while *self.peek() == Tok::AndAnd {
                self.bump();
                filter.push(self.atom()?);
            }
        }
        if *self.peek() != Tok::Eof {
            return self.err("unexpected trailing input");
        }
        let mut query = RdqlQuery {
            select,
            patterns,
            filter,
        };
        if star {
            query.select = query.pattern_vars().into_iter().map(str::to_string).collect();
        }
        Ok(query)
    }
}

/// Parses and validates RDQL text.
pub fn parse_rdql(text: &str) -> Result<RdqlQuery, RdqlError> {
    let mut lexer = Lexer { text, at: 0 };
    let mut tokens = Vec::new();
    loop {
        let (tok, pos) = lexer.next_token()?;
        let done = tok == Tok::Eof;
        tokens.push((tok, pos));
        if done {
            break;
        }
    }
    let query = Parser { tokens, at: 0 }.query()?;
    query.validate()?;
    Ok(query)
}

// ---------------------------------------------------------------------------
// Evaluation

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    /// Filter comparisons between incomparable terms (each counted as false).
    pub type_mismatches: usize,
    pub solutions: usize,
}

/// Evaluates the query; rows are kept as a multiset in canonical order.
pub fn evaluate(query: &RdqlQuery, store: &TripleStore) -> ResultSet {
    evaluate_with_stats(query, store).0
}

pub fn evaluate_with_stats(query: &RdqlQuery, store: &TripleStore) -> (ResultSet, EvalStats) {
    let mut vars: HashMap<&str, usize> = HashMap::new();
    for v in query.pattern_vars() {
        let n = vars.len();
        vars.insert(v, n);
    }
    let slot = |t: &PatternTerm| -> Slot {
        match t {
            PatternTerm::Var(v) => Slot::Var(vars[v.as_str()]),
            PatternTerm::Iri(iri) => Slot::Const(Term::Iri(iri.clone())),
            PatternTerm::Literal(lit) => Slot::Const(Term::Literal(lit.clone())),
        }
    };
    let patterns: Vec<[Slot; 3]> = query
        .patterns
        .iter()
        .map(|p| [slot(&p.s), slot(&p.p), slot(&p.o)])
        .collect();
    let atoms: Vec<CompiledAtom> = query
        .filter
        .iter()
        .map(|a| CompiledAtom {
            lhs: vars[a.lhs.as_str()],
            op: a.op,
            rhs: match &a.rhs {
                FilterOperand::Var(v) => AtomRhs::Var(vars[v.as_str()]),
                FilterOperand::Literal(lit) => AtomRhs::Const(Term::Literal(lit.clone())),
            },
        })
        .collect();
    let projection: Vec<usize> = query.select.iter().map(|v| vars[v.as_str()]).collect();

    let mut search = Search {
        store,
        patterns: &patterns,
        atoms: &atoms,
        binding: vec![None; vars.len()],
        pending: (0..patterns.len()).collect(),
        projection: &projection,
        rows: Vec::new(),
        stats: EvalStats::default(),
    };
    search.run();
    let Search { mut rows, stats, .. } = search;
    sort_rows(&mut rows);
    (
        ResultSet {
            columns: query.select.clone(),
            rows,
        },
        stats,
    )
}

/// Canonical row order: lexicographic over the N-Triples rendering of each
/// term.
pub fn sort_rows(rows: &mut [Vec<Term>]) {
    rows.sort_by_cached_key(|row| row.iter().map(ToString::to_string).collect::<Vec<_>>());
}

#[derive(Debug, Clone)]
enum Slot {
    Var(usize),
    Const(Term),
}

#[derive(Debug)]
enum AtomRhs {
    Var(usize),
    Const(Term),
}

#[derive(Debug)]
struct CompiledAtom {
    lhs: usize,
    op: Comparator,
    rhs: AtomRhs,
}

/// Compares two bound terms under filter semantics. `None` means the terms
/// are not comparable with this operator.
pub fn compare_terms(op: Comparator, a: &Term, b: &Term) -> Option<bool> {
    match (a, b) {
        (Term::Literal(x), Term::Literal(y)) => compare_literals(op, x, y),
        (Term::Iri(x), Term::Iri(y)) if op.is_equality() => Some(op.holds(x.cmp(y))),
        _ => None,
    }
}

struct Search<'a> {
    store: &'a TripleStore,
    patterns: &'a [[Slot; 3]],
    atoms: &'a [CompiledAtom],
    binding: Vec<Option<Term>>,
    pending: Vec<usize>,
    projection: &'a [usize],
    rows: Vec<Vec<Term>>,
    stats: EvalStats,
}

impl Search<'_> {
    fn run(&mut self) {
        // Atoms are checked as soon as all their variables are bound; with
        // no patterns left every atom has been checked.
        if self.pending.is_empty() {
            self.stats.solutions += 1;
            let row = self
                .projection
                .iter()
                .map(|&v| self.binding[v].clone().expect("projected vars are bound"))
                .collect();
            self.rows.push(row);
            return;
        }
        let (pick, _) = self
            .pending
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let [s, pr, o] = self.resolve(p);
                (i, self.store.count_pattern(s.as_ref(), pr.as_ref(), o.as_ref()))
            })
            .min_by_key(|&(i, count)| (count, self.pending[i]))
            .expect("pending is non-empty");
        let pattern = self.pending.swap_remove(pick);
        let [s, p, o] = self.resolve(pattern);
        let candidates = self.store.match_pattern(s.as_ref(), p.as_ref(), o.as_ref());
        for triple in candidates {
            let values = [
                Term::Iri(triple.subject),
                Term::Iri(triple.predicate),
                triple.object,
            ];
            let mut newly = Vec::with_capacity(3);
            let mut ok = true;
            for (slot, value) in self.patterns[pattern].iter().zip(values) {
                if let Slot::Var(v) = slot {
                    match &self.binding[*v] {
                        Some(bound) => {
                            if *bound != value {
                                ok = false;
                                break;
                            }
                        }
                        None => {
                            self.binding[*v] = Some(value);
                            newly.push(*v);
                        }
                    }
                }
            }
            if ok && self.filters_hold(&newly) {
                self.run();
            }
            for v in newly {
                self.binding[v] = None;
            }
        }
        self.pending.push(pattern);
        let last = self.pending.len() - 1;
        self.pending.swap(pick, last);
    }

    fn resolve(&self, pattern: usize) -> [Option<Term>; 3] {
        self.patterns[pattern].clone().map(|slot| match slot {
            Slot::Var(v) => self.binding[v].clone(),
            Slot::Const(t) => Some(t),
        })
    }

    /// Checks the atoms whose last variable was bound just now.
    fn filters_hold(&mut self, newly: &[usize]) -> bool {
        for atom in self.atoms {
            let rhs_var = match atom.rhs {
                AtomRhs::Var(v) => Some(v),
                AtomRhs::Const(_) => None,
            };
            let touches = newly.contains(&atom.lhs) || rhs_var.is_some_and(|v| newly.contains(&v));
            if !touches {
                continue;
            }
            let Some(lhs) = &self.binding[atom.lhs] else {
                continue;
            };
            let rhs = match &atom.rhs {
                AtomRhs::Var(v) => match &self.binding[*v] {
                    Some(t) => t,
                    None => continue,
                },
                AtomRhs::Const(t) => t,
            };
            match compare_terms(atom.op, lhs, rhs) {
                Some(true) => {}
                Some(false) => return false,
                None => {
                    self.stats.type_mismatches += 1;
                    return false;
                }
            }
        }
        true
    }
}
