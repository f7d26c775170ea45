//! Hand-written parser for the supported SQL subset.
//!
//! ```text
//! query    := SELECT column {, column} FROM tables [ON cond {AND cond}]
//!             [WHERE cond {AND cond}] [;]
//! tables   := table { , table | [INNER] JOIN table ON cond {AND cond} }
//! cond     := operand cmp operand
//! operand  := column | 'string' | number | TRUE | FALSE
//! column   := [table .] field
//! ```
//!
//! Aggregates, subqueries, expressions, `OR`, `ORDER BY`, `GROUP BY` and
//! friends are recognized and rejected with [`SqlError::Unsupported`]
//! rather than mis-parsed.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::descriptors::IntegratedSchema;
use crate::value::{Comparator, Dtype, Literal};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SqlError {
    #[error("SQL parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown table `{0}`")]
    UnknownTable(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualifiedField {
    pub table: String,
    pub field: String,
}

impl QualifiedField {
    pub fn new(table: &str, field: &str) -> QualifiedField {
        QualifiedField {
            table: table.to_string(),
            field: field.to_string(),
        }
    }
}

impl fmt::Display for QualifiedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.table, self.field)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand<F> {
    Field(F),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Condition<F = QualifiedField> {
    pub lhs: F,
    pub op: Comparator,
    pub rhs: Operand<F>,
}

impl Condition {
    /// `Some((a, b))` when this is a field = field equality.
    pub fn as_equijoin(&self) -> Option<(&QualifiedField, &QualifiedField)> {
        match (&self.rhs, self.op) {
            (Operand::Field(rhs), Comparator::Eq) => Some((&self.lhs, rhs)),
            _ => None,
        }
    }

    pub fn fields(&self) -> impl Iterator<Item = &QualifiedField> {
        let rhs = match &self.rhs {
            Operand::Field(f) => Some(f),
            Operand::Literal(_) => None,
        };
        std::iter::once(&self.lhs).chain(rhs)
    }
}

/// A validated query over the integrated schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub select: Vec<QualifiedField>,
    pub from: Vec<String>,
    /// Field = field equalities, from `ON` or `WHERE`.
    pub join_conds: Vec<Condition>,
    /// Every other condition; all are AND-ed.
    pub filters: Vec<Condition>,
}

impl SqlQuery {
    /// Every field the query mentions, first occurrence first: SELECT list,
    /// then join conditions, then filters.
    pub fn fields(&self) -> Vec<&QualifiedField> {
        let mut seen = HashSet::new();
        self.select
            .iter()
            .chain(self.join_conds.iter().flat_map(Condition::fields))
            .chain(self.filters.iter().flat_map(Condition::fields))
            .filter(|f| seen.insert(*f))
            .collect()
    }
}

/// Column reference as written, possibly unqualified.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ColumnRef {
    pub table: Option<String>,
    pub field: String,
}

/// Syntactic result of parsing, before schema validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectStatement {
    pub select: Vec<ColumnRef>,
    pub from: Vec<String>,
    /// Conditions from `ON` clauses (comma or JOIN form).
    pub on: Vec<Condition<ColumnRef>>,
    /// Conditions from `WHERE`.
    pub filters: Vec<Condition<ColumnRef>>,
    /// Whether any JOIN keyword or ON clause appeared.
    pub has_join_syntax: bool,
}

/// Parses `text` and validates it against the integrated schema.
pub fn parse_sql(text: &str, schema: &IntegratedSchema) -> Result<SqlQuery, SqlError> {
    let stmt = parse_statement(text)?;

    let mut from_seen = HashSet::new();
    for table in &stmt.from {
        if schema.table(table).is_none() {
            return Err(SqlError::UnknownTable(table.clone()));
        }
        if !from_seen.insert(table.as_str()) {
            return Err(SqlError::Unsupported(format!("table `{table}` listed twice")));
        }
    }

    let qualify = |c: &ColumnRef| -> Result<QualifiedField, SqlError> {
        let table = c
            .table
            .as_ref()
            .ok_or_else(|| SqlError::Unsupported(format!("unqualified field `{}`", c.field)))?;
        if !from_seen.contains(table.as_str()) {
            return Err(SqlError::UnknownTable(format!("{table} (not in FROM)")));
        }
        let def = schema.table(table).expect("checked above");
        if def.field(&c.field).is_none() {
            return Err(SqlError::UnknownField(format!("{table}.{}", c.field)));
        }
        Ok(QualifiedField::new(table, &c.field))
    };
    let qualify_cond = |c: &Condition<ColumnRef>| -> Result<Condition, SqlError> {
        Ok(Condition {
            lhs: qualify(&c.lhs)?,
            op: c.op,
            rhs: match &c.rhs {
                Operand::Field(f) => Operand::Field(qualify(f)?),
                Operand::Literal(l) => Operand::Literal(l.clone()),
            },
        })
    };

    let select = stmt.select.iter().map(qualify).collect::<Result<Vec<_>, _>>()?;
    let mut join_conds = Vec::new();
    let mut filters = Vec::new();
    for cond in stmt.on.iter().chain(&stmt.filters) {
        let cond = qualify_cond(cond)?;
        if cond.as_equijoin().is_some() {
            join_conds.push(cond);
        } else {
            filters.push(cond);
        }
    }
    let query = SqlQuery {
        select,
        from: stmt.from,
        join_conds,
        filters,
    };
    let referenced: HashSet<&str> = query.fields().iter().map(|f| f.table.as_str()).collect();
    if let Some(t) = query.from.iter().find(|t| !referenced.contains(t.as_str())) {
        return Err(SqlError::Unsupported(format!(
            "table `{t}` contributes no field (cross product)"
        )));
    }
    Ok(query)
}

/// Prints a query back as SQL text that parses to the same AST.
pub fn unparse(q: &SqlQuery) -> String {
    let cond = |c: &Condition| {
        let rhs = match &c.rhs {
            Operand::Field(f) => f.to_string(),
            Operand::Literal(l) => literal_sql(l),
        };
        format!("{} {} {}", c.lhs, c.op, rhs)
    };
    let mut out = format!(
        "SELECT {} FROM {}",
        q.select.iter().map(ToString::to_string).collect::<Vec<_>>().join(", "),
        q.from.join(", ")
    );
    if !q.join_conds.is_empty() {
        out.push_str(" ON ");
        out.push_str(&q.join_conds.iter().map(cond).collect::<Vec<_>>().join(" AND "));
    }
    if !q.filters.is_empty() {
        out.push_str(" WHERE ");
        out.push_str(&q.filters.iter().map(cond).collect::<Vec<_>>().join(" AND "));
    }
    out
}

fn literal_sql(l: &Literal) -> String {
    match l.dtype() {
        Dtype::String => format!("'{}'", l.lexical().replace('\'', "''")),
        Dtype::Boolean => l.lexical().to_ascii_uppercase(),
        Dtype::Integer | Dtype::Decimal => l.lexical().to_string(),
    }
}

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Semicolon,
    Cmp(Comparator),
    /// Arithmetic or concatenation operator.
    Arith(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, SqlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |position: usize, message: &str| SqlError::Parse {
        position,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b',' => Tok::Comma,
            b'.' if !bytes.get(i + 1).is_some_and(u8::is_ascii_digit) => Tok::Dot,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'*' => Tok::Star,
            b';' => Tok::Semicolon,
            b'+' => Tok::Arith("+"),
            b'-' => Tok::Arith("-"),
            b'/' => Tok::Arith("/"),
            b'%' => Tok::Arith("%"),
            b'|' if bytes.get(i + 1) == Some(&b'|') => {
                i += 1;
                Tok::Arith("||")
            }
            b'=' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                }
                Tok::Cmp(Comparator::Eq)
            }
            b'!' if bytes.get(i + 1) == Some(&b'=') => {
                i += 1;
                Tok::Cmp(Comparator::Ne)
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 1;
                    Tok::Cmp(Comparator::Le)
                }
                Some(b'>') => {
                    i += 1;
                    Tok::Cmp(Comparator::Ne)
                }
                _ => Tok::Cmp(Comparator::Lt),
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 1;
                    Tok::Cmp(Comparator::Ge)
                } else {
                    Tok::Cmp(Comparator::Gt)
                }
            }
            b'\'' => {
                let mut value = String::new();
                let mut j = i + 1;
                loop {
                    match text[j..].chars().next() {
                        None => return Err(err(start, "unterminated string literal")),
                        Some('\'') if bytes.get(j + 1) == Some(&b'\'') => {
                            value.push('\'');
                            j += 2;
                        }
                        Some('\'') => break,
                        Some(ch) => {
                            value.push(ch);
                            j += ch.len_utf8();
                        }
                    }
                }
                i = j;
                Tok::Str(value)
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j].is_ascii_alphabetic() || bytes[j] == b'_') {
                    return Err(err(j, "malformed number"));
                }
                let number = &text[i..j];
                if number.matches('.').count() > 1 {
                    return Err(err(start, "malformed number"));
                }
                i = j - 1;
                Tok::Number(number.to_string())
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                    j += 1;
                }
                i = j - 1;
                Tok::Ident(text[start..j].to_string())
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(err(start, &format!("unexpected character `{ch}`")));
            }
        };
        i += 1;
        out.push(Token { tok, pos: start });
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: text.len(),
    });
    Ok(out)
}

// ---------------------------------------------------------------------------
// Parser

const AGGREGATES: &[&str] = &["COUNT", "SUM", "AVG", "MIN", "MAX"];

/// Keywords that end a clause or are rejected outright.
const RESERVED: &[&str] = &[
    "SELECT", "FROM", "WHERE", "ON", "AND", "JOIN", "INNER", "OR", "NOT", "ORDER", "GROUP", "BY",
    "HAVING", "DISTINCT", "LIMIT", "OFFSET", "UNION", "AS", "LEFT", "RIGHT", "FULL", "OUTER",
    "CROSS", "NATURAL", "IN", "IS", "LIKE", "BETWEEN", "EXISTS", "TRUE", "FALSE", "NULL", "ALL",
    "INTERSECT", "EXCEPT", "CASE",
];

struct Parser {
    tokens: Vec<Token>,
    at: usize,
}

fn is_kw(tok: &Tok, kw: &str) -> bool {
    matches!(tok, Tok::Ident(s) if s.eq_ignore_ascii_case(kw))
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.at + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> usize {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.at].tok.clone();
        if self.at < self.tokens.len() - 1 {
            self.at += 1;
        }
        tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Parse {
            position: self.pos(),
            message: message.into(),
        })
    }

    fn at_kw(&self, kw: &str) -> bool {
        is_kw(self.peek(), kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {kw}"))
        }
    }

    /// Rejects the unsupported constructs that can start at the current
    /// token.
    fn reject_unsupported(&self) -> Result<(), SqlError> {
        let unsupported = |what: &str| Err(SqlError::Unsupported(what.to_string()));
        match self.peek() {
            Tok::LParen if is_kw(self.peek_at(1), "SELECT") => unsupported("subquery"),
            Tok::Ident(name) if matches!(self.peek_at(1), Tok::LParen) => {
                if AGGREGATES.iter().any(|a| name.eq_ignore_ascii_case(a)) {
                    unsupported("aggregate")
                } else if name.eq_ignore_ascii_case("EXISTS") || name.eq_ignore_ascii_case("IN") {
                    unsupported("subquery")
                } else {
                    unsupported("function call")
                }
            }
            Tok::Ident(kw) => {
                let upper = kw.to_ascii_uppercase();
                match upper.as_str() {
                    "OR" => unsupported("OR"),
                    "NOT" => unsupported("NOT"),
                    "ORDER" => unsupported("ORDER BY"),
                    "GROUP" => unsupported("GROUP BY"),
                    "HAVING" => unsupported("HAVING"),
                    "DISTINCT" | "ALL" => unsupported("DISTINCT"),
                    "LIMIT" | "OFFSET" => unsupported("LIMIT"),
                    "UNION" | "INTERSECT" | "EXCEPT" => unsupported("set operation"),
                    "AS" => unsupported("alias"),
                    "LEFT" | "RIGHT" | "FULL" | "OUTER" | "CROSS" | "NATURAL" => {
                        unsupported("outer or cross join")
                    }
                    "IN" | "EXISTS" => unsupported("subquery"),
                    "IS" | "NULL" => unsupported("NULL test"),
                    "LIKE" | "BETWEEN" | "CASE" => unsupported("expression"),
                    _ => Ok(()),
                }
            }
            Tok::Arith(_) => unsupported("expression"),
            Tok::LParen => unsupported("expression"),
            _ => Ok(()),
        }
    }

    fn identifier(&mut self, what: &str) -> Result<String, SqlError> {
        self.reject_unsupported()?;
        match self.peek().clone() {
            Tok::Ident(name)
                if !RESERVED.iter().any(|k| name.eq_ignore_ascii_case(k)) =>
            {
                self.bump();
                Ok(name)
            }
            _ => self.error(format!("expected {what}")),
        }
    }

    fn column(&mut self) -> Result<ColumnRef, SqlError> {
        let first = self.identifier("field name")?;
        let col = if matches!(self.peek(), Tok::Dot) {
            self.bump();
            let field = self.identifier("field name")?;
            ColumnRef {
                table: Some(first),
                field,
            }
        } else {
            ColumnRef {
                table: None,
                field: first,
            }
        };
        self.reject_trailing_expression()?;
        Ok(col)
    }

    fn reject_trailing_expression(&self) -> Result<(), SqlError> {
        match self.peek() {
            Tok::Arith(_) | Tok::Star => Err(SqlError::Unsupported("expression".into())),
            Tok::LParen => Err(SqlError::Unsupported("function call".into())),
            _ => Ok(()),
        }
    }

    fn operand(&mut self) -> Result<Operand<ColumnRef>, SqlError> {
        let lit = match self.peek().clone() {
            Tok::Str(s) => Literal::string(s),
            Tok::Number(n) => number(&n),
            Tok::Arith("-") if matches!(self.peek_at(1), Tok::Number(_)) => {
                self.bump();
                let Tok::Number(n) = self.peek().clone() else {
                    unreachable!()
                };
                number(&format!("-{n}"))
            }
            Tok::Ident(kw) if kw.eq_ignore_ascii_case("TRUE") => Literal::boolean(true),
            Tok::Ident(kw) if kw.eq_ignore_ascii_case("FALSE") => Literal::boolean(false),
            _ => return Ok(Operand::Field(self.column()?)),
        };
        self.bump();
        self.reject_trailing_expression()?;
        Ok(Operand::Literal(lit))
    }

    fn condition(&mut self) -> Result<Condition<ColumnRef>, SqlError> {
        let lhs = self.operand()?;
        let op = match self.peek() {
            Tok::Cmp(op) => *op,
            _ => {
                self.reject_unsupported()?;
                return self.error("expected comparison operator");
            }
        };
        self.bump();
        let rhs = self.operand()?;
        match (lhs, rhs) {
            (Operand::Field(lhs), rhs) => Ok(Condition { lhs, op, rhs }),
            (Operand::Literal(lit), Operand::Field(f)) => Ok(Condition {
                lhs: f,
                op: op.flip(),
                rhs: Operand::Literal(lit),
            }),
            (Operand::Literal(_), Operand::Literal(_)) => {
                Err(SqlError::Unsupported("constant comparison".into()))
            }
        }
    }

    fn conjunction(&mut self, out: &mut Vec<Condition<ColumnRef>>) -> Result<(), SqlError> {
        loop {
            out.push(self.condition()?);
            self.reject_unsupported()?;
            if !self.eat_kw("AND") {
                return Ok(());
            }
        }
    }

    fn statement(&mut self) -> Result<SelectStatement, SqlError> {
        self.expect_kw("SELECT")?;
        self.reject_unsupported()?;
        if matches!(self.peek(), Tok::Star) {
            return Err(SqlError::Unsupported("SELECT *".into()));
        }
        let mut select = vec![self.column()?];
        while matches!(self.peek(), Tok::Comma) {
            self.bump();
            select.push(self.column()?);
        }
        self.reject_unsupported()?;
        self.expect_kw("FROM")?;

        let mut from = vec![self.identifier("table name")?];
        let mut on = Vec::new();
        let mut has_join_syntax = false;
        loop {
            self.reject_unsupported()?;
            if matches!(self.peek(), Tok::Comma) {
                self.bump();
                from.push(self.identifier("table name")?);
            } else if self.at_kw("JOIN") || self.at_kw("INNER") {
                if self.eat_kw("INNER") && !self.at_kw("JOIN") {
                    return self.error("expected JOIN");
                }
                self.expect_kw("JOIN")?;
                has_join_syntax = true;
                from.push(self.identifier("table name")?);
                self.reject_unsupported()?;
                self.expect_kw("ON")?;
                self.conjunction(&mut on)?;
            } else if self.eat_kw("ON") {
                has_join_syntax = true;
                self.conjunction(&mut on)?;
            } else {
                break;
            }
        }

        let mut filters = Vec::new();
        if self.eat_kw("WHERE") {
            self.conjunction(&mut filters)?;
        }
        self.reject_unsupported()?;
        if matches!(self.peek(), Tok::Semicolon) {
            self.bump();
        }
        if !matches!(self.peek(), Tok::Eof) {
            return self.error("unexpected trailing input");
        }
        Ok(SelectStatement {
            select,
            from,
            on,
            filters,
            has_join_syntax,
        })
    }
}

fn number(text: &str) -> Literal {
    let dtype = if text.contains('.') {
        Dtype::Decimal
    } else {
        Dtype::Integer
    };
    Literal::parse(text, dtype).expect("lexer only produces digits and one point")
}

/// Parses the SQL subset without consulting any schema.
pub fn parse_statement(text: &str) -> Result<SelectStatement, SqlError> {
    let mut parser = Parser {
        tokens: lex(text)?,
        at: 0,
    };
    parser.statement()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptors::{FieldRef, IntegratedFieldDef, IntegratedTableDef};

    pub(crate) fn schema(tables: &[(&str, &[(&str, Dtype)])]) -> IntegratedSchema {
        IntegratedSchema {
            name: "test".into(),
            tables: tables
                .iter()
                .map(|(t, fields)| IntegratedTableDef {
                    name: t.to_string(),
                    fields: fields
                        .iter()
                        .map(|(f, dtype)| IntegratedFieldDef {
                            name: f.to_string(),
                            dtype: *dtype,
                            mapping: FieldRef::new("src", t, f),
                        })
                        .collect(),
                })
                .collect(),
            relations: vec![],
        }
    }

    fn uni() -> IntegratedSchema {
        use Dtype::*;
        schema(&[
            (
                "STUDENT",
                &[("ID", Integer), ("FIRSTNAME", String), ("LASTNAME", String), ("DEBT", Integer)],
            ),
            ("GRADE", &[("STUDENTID", Integer), ("AVERAGE", Integer)]),
            ("T", &[("A", String), ("B", Integer)]),
        ])
    }

    const DEBTORS: &str = "SELECT STUDENT.FIRSTNAME,
       STUDENT.LASTNAME,
       GRADE.AVERAGE,
       STUDENT.DEBT
FROM STUDENT, GRADE
ON STUDENT.ID=GRADE.STUDENTID
WHERE STUDENT.DEBT>2000";

    #[test]
    fn worked_example() {
        let q = parse_sql(DEBTORS, &uni()).unwrap();
        let qf = QualifiedField::new;
        assert_eq!(
            q.select,
            vec![
                qf("STUDENT", "FIRSTNAME"),
                qf("STUDENT", "LASTNAME"),
                qf("GRADE", "AVERAGE"),
                qf("STUDENT", "DEBT")
            ]
        );
        assert_eq!(q.from, vec!["STUDENT", "GRADE"]);
        assert_eq!(
            q.join_conds,
            vec![Condition {
                lhs: qf("STUDENT", "ID"),
                op: Comparator::Eq,
                rhs: Operand::Field(qf("GRADE", "STUDENTID"))
            }]
        );
        assert_eq!(
            q.filters,
            vec![Condition {
                lhs: qf("STUDENT", "DEBT"),
                op: Comparator::Gt,
                rhs: Operand::Literal(Literal::integer(2000))
            }]
        );
    }

    #[test]
    fn minimal_query() {
        let q = parse_sql("SELECT T.A FROM T", &uni()).unwrap();
        assert_eq!(q.select, vec![QualifiedField::new("T", "A")]);
        assert!(q.join_conds.is_empty() && q.filters.is_empty());
    }

    #[test]
    fn join_forms_are_equivalent() {
        let s = uni();
        let comma = parse_sql(DEBTORS, &s).unwrap();
        let join = parse_sql(
            "select STUDENT.FIRSTNAME, STUDENT.LASTNAME, GRADE.AVERAGE, STUDENT.DEBT \
             from STUDENT inner join GRADE on STUDENT.ID = GRADE.STUDENTID where STUDENT.DEBT > 2000;",
            &s,
        )
        .unwrap();
        let where_join = parse_sql(
            "SELECT STUDENT.FIRSTNAME, STUDENT.LASTNAME, GRADE.AVERAGE, STUDENT.DEBT \
             FROM STUDENT, GRADE WHERE STUDENT.ID = GRADE.STUDENTID AND 2000 < STUDENT.DEBT",
            &s,
        )
        .unwrap();
        assert_eq!(comma, join);
        assert_eq!(comma, where_join);
    }

    #[test]
    fn literals() {
        let q = parse_sql(
            "SELECT T.A FROM T WHERE T.A = 'it''s' AND T.B >= -3 AND T.B < 2.50",
            &uni(),
        )
        .unwrap();
        let lits: Vec<_> = q
            .filters
            .iter()
            .map(|c| match &c.rhs {
                Operand::Literal(l) => (l.lexical().to_string(), l.dtype()),
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            lits,
            vec![
                ("it's".to_string(), Dtype::String),
                ("-3".to_string(), Dtype::Integer),
                ("2.5".to_string(), Dtype::Decimal)
            ]
        );
    }

    #[test]
    fn unsupported_constructs() {
        let s = uni();
        let cases = [
            ("SELECT COUNT(*) FROM T", "aggregate"),
            ("SELECT AVG(T.B) FROM T", "aggregate"),
            ("SELECT T.A FROM T WHERE T.B > (SELECT MAX(T.B) FROM T)", "subquery"),
            ("SELECT T.B + 1 FROM T", "expression"),
            ("SELECT T.A FROM T ORDER BY T.A", "ORDER BY"),
            ("SELECT T.A FROM T GROUP BY T.A", "GROUP BY"),
            ("SELECT T.A FROM T WHERE T.B = 1 OR T.B = 2", "OR"),
            ("SELECT DISTINCT T.A FROM T", "DISTINCT"),
            ("SELECT T.A FROM T WHERE T.B + 1 > 2", "expression"),
            ("SELECT * FROM T", "SELECT *"),
            ("SELECT A FROM T", "unqualified field `A`"),
            ("SELECT T.A FROM T, GRADE", "table `GRADE` contributes no field (cross product)"),
        ];
        for (sql, what) in cases {
            assert_eq!(
                parse_sql(sql, &s),
                Err(SqlError::Unsupported(what.to_string())),
                "{sql}"
            );
        }
    }

    #[test]
    fn schema_errors() {
        let s = uni();
        assert_eq!(
            parse_sql("SELECT X.A FROM X", &s),
            Err(SqlError::UnknownTable("X".into()))
        );
        assert_eq!(
            parse_sql("SELECT T.Z FROM T", &s),
            Err(SqlError::UnknownField("T.Z".into()))
        );
        assert!(matches!(
            parse_sql("SELECT GRADE.AVERAGE FROM T", &s),
            Err(SqlError::UnknownTable(_))
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let s = uni();
        assert_eq!(
            parse_sql("SELECT T.A T", &s),
            Err(SqlError::Parse {
                position: 11,
                message: "expected FROM".into()
            })
        );
        assert!(matches!(
            parse_sql("SELECT T.A FROM T WHERE T.A = 'open", &s),
            Err(SqlError::Parse { position: 30, .. })
        ));
        assert!(matches!(parse_sql("", &s), Err(SqlError::Parse { position: 0, .. })));
    }

    #[test]
    fn unparse_fixpoint_on_example() {
        let s = uni();
        let q = parse_sql(DEBTORS, &s).unwrap();
        assert_eq!(parse_sql(&unparse(&q), &s).unwrap(), q);
    }
}
