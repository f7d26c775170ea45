//! Typed scalar values shared by the wrappers, the triple store and the
//! query engines.
//!
//! Every value carries a [`Dtype`] and a canonical lexical form, so two
//! literals of the same dtype are equal exactly when their lexical forms
//! are equal.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dtype {
    String,
    Integer,
    Decimal,
    Boolean,
}

impl Dtype {
    pub const ALL: [Dtype; 4] = [Dtype::String, Dtype::Integer, Dtype::Decimal, Dtype::Boolean];

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::String => "string",
            Dtype::Integer => "integer",
            Dtype::Decimal => "decimal",
            Dtype::Boolean => "boolean",
        }
    }

    pub fn is_numeric(self) -> bool {
        matches!(self, Dtype::Integer | Dtype::Decimal)
    }

    /// The XML Schema datatype IRI used in N-Triples.
    pub fn iri(self) -> String {
        format!("{XSD}{}", self.as_str())
    }

    pub fn from_iri(iri: &str) -> Option<Dtype> {
        iri.strip_prefix(XSD).and_then(|local| local.parse().ok())
    }
}

impl fmt::Display for Dtype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown data type `{0}`")]
pub struct UnknownDtype(pub String);

impl FromStr for Dtype {
    type Err = UnknownDtype;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "string" => Ok(Dtype::String),
            "integer" => Ok(Dtype::Integer),
            "decimal" => Ok(Dtype::Decimal),
            "boolean" => Ok(Dtype::Boolean),
            other => Err(UnknownDtype(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("`{lexical}` is not a valid {dtype}")]
pub struct CoercionError {
    pub lexical: String,
    pub dtype: Dtype,
}

/// A typed value in canonical lexical form.
///
/// Canonical forms: integers have no `+` sign and no leading zeros;
/// decimals are `digits.digits` with no redundant zeros on either side
/// (at least one digit after the point); booleans are `true`/`false`;
/// strings are kept verbatim. Negative zero normalizes to zero.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    lexical: String,
    dtype: Dtype,
}

impl Literal {
    /// Parses `raw` as a value of `dtype`, normalizing it.
    pub fn parse(raw: &str, dtype: Dtype) -> Result<Literal, CoercionError> {
        let fail = || CoercionError {
            lexical: raw.to_string(),
            dtype,
        };
        let lexical = match dtype {
            Dtype::String => raw.to_string(),
            Dtype::Integer => canonical_integer(raw).ok_or_else(fail)?,
            Dtype::Decimal => canonical_decimal(raw).ok_or_else(fail)?,
            Dtype::Boolean => match raw.to_ascii_lowercase().as_str() {
                "true" => "true".to_string(),
                "false" => "false".to_string(),
                _ => return Err(fail()),
            },
        };
        Ok(Literal { lexical, dtype })
    }

    pub fn string(s: impl Into<String>) -> Literal {
        Literal {
            lexical: s.into(),
            dtype: Dtype::String,
        }
    }

    pub fn integer(n: i64) -> Literal {
        Literal {
            lexical: n.to_string(),
            dtype: Dtype::Integer,
        }
    }

    pub fn boolean(b: bool) -> Literal {
        Literal {
            lexical: b.to_string(),
            dtype: Dtype::Boolean,
        }
    }

    pub fn lexical(&self) -> &str {
        &self.lexical
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    /// Converts this value to another dtype. Numeric widening and
    /// narrowing succeed when no information is lost; anything converts
    /// to a string.
    pub fn coerce(&self, dtype: Dtype) -> Result<Literal, CoercionError> {
        if dtype == self.dtype {
            return Ok(self.clone());
        }
        match (self.dtype, dtype) {
            (_, Dtype::String) => Ok(Literal::string(self.lexical.clone())),
            (Dtype::Integer, Dtype::Decimal) => Ok(Literal {
                lexical: format!("{}.0", self.lexical),
                dtype,
            }),
            (Dtype::Decimal, Dtype::Integer) => match self.lexical.strip_suffix(".0") {
                Some(int) => Ok(Literal {
                    lexical: int.to_string(),
                    dtype,
                }),
                None => Err(CoercionError {
                    lexical: self.lexical.clone(),
                    dtype,
                }),
            },
            _ => Literal::parse(&self.lexical, dtype),
        }
    }

    /// Value equality: numeric values compare by magnitude across
    /// integer/decimal, everything else needs identical dtype and lexical.
    pub fn value_eq(&self, other: &Literal) -> bool {
        if self.dtype.is_numeric() && other.dtype.is_numeric() {
            compare_numeric(&self.lexical, &other.lexical) == Ordering::Equal
        } else {
            self == other
        }
    }

    /// A key such that `a.value_eq(b)` iff `a.join_key() == b.join_key()`.
    pub fn join_key(&self) -> (u8, String) {
        match self.dtype {
            Dtype::Integer => (1, format!("{}.0", self.lexical)),
            Dtype::Decimal => (1, self.lexical.clone()),
            Dtype::String => (0, self.lexical.clone()),
            Dtype::Boolean => (2, self.lexical.clone()),
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.lexical)
    }
}

fn canonical_integer(raw: &str) -> Option<String> {
    let (neg, digits) = split_sign(raw);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits = digits.trim_start_matches('0');
    Some(match (neg, digits.is_empty()) {
        (_, true) => "0".to_string(),
        (true, false) => format!("-{digits}"),
        (false, false) => digits.to_string(),
    })
}

fn canonical_decimal(raw: &str) -> Option<String> {
    let (neg, body) = split_sign(raw);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let int = if int.is_empty() { "0" } else { int };
    let frac = if frac.is_empty() { "0" } else { frac };
    let zero = int == "0" && frac == "0";
    let sign = if neg && !zero { "-" } else { "" };
    Some(format!("{sign}{int}.{frac}"))
}

fn split_sign(raw: &str) -> (bool, &str) {
    if let Some(rest) = raw.strip_prefix('-') {
        (true, rest)
    } else if let Some(rest) = raw.strip_prefix('+') {
        (false, rest)
    } else {
        (false, raw)
    }
}

/// Splits a canonical integer or decimal into (negative, integer digits,
/// fraction digits without trailing zeros).
fn numeric_parts(lexical: &str) -> (bool, &str, &str) {
    let (neg, body) = split_sign(lexical);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    let int = int.trim_start_matches('0');
    let frac = frac.trim_end_matches('0');
    let zero = int.is_empty() && frac.is_empty();
    (neg && !zero, int, frac)
}

/// Exact comparison of two canonical numeric lexical forms (integer or
/// decimal, possibly mixed).
pub fn compare_numeric(a: &str, b: &str) -> Ordering {
    let (a_neg, a_int, a_frac) = numeric_parts(a);
    let (b_neg, b_int, b_frac) = numeric_parts(b);
    let magnitude = a_int
        .len()
        .cmp(&b_int.len())
        .then_with(|| a_int.cmp(b_int))
        .then_with(|| a_frac.cmp(b_frac));
    match (a_neg, b_neg) {
        (false, false) => magnitude,
        (true, true) => magnitude.reverse(),
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
    }
}

/// The six comparison operators shared by SQL conditions and RDQL filters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Eq => "=",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    /// The operator with its operands swapped: `a op b` iff `b op.flip() a`.
    pub fn flip(self) -> Comparator {
        match self {
            Comparator::Lt => Comparator::Gt,
            Comparator::Le => Comparator::Ge,
            Comparator::Gt => Comparator::Lt,
            Comparator::Ge => Comparator::Le,
            other => other,
        }
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            Comparator::Eq => ord == Ordering::Equal,
            Comparator::Ne => ord != Ordering::Equal,
            Comparator::Lt => ord == Ordering::Less,
            Comparator::Le => ord != Ordering::Greater,
            Comparator::Gt => ord == Ordering::Greater,
            Comparator::Ge => ord != Ordering::Less,
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, Comparator::Eq | Comparator::Ne)
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Compares two literals. Numbers compare by value, strings by code point,
/// booleans support only `=` and `!=`. Returns `None` when the operands
/// are not comparable.
pub fn compare_literals(op: Comparator, a: &Literal, b: &Literal) -> Option<bool> {
    match (a.dtype, b.dtype) {
        (x, y) if x.is_numeric() && y.is_numeric() => {
            Some(op.holds(compare_numeric(&a.lexical, &b.lexical)))
        }
        (Dtype::String, Dtype::String) => Some(op.holds(a.lexical.cmp(&b.lexical))),
        (Dtype::Boolean, Dtype::Boolean) if op.is_equality() => {
            Some(op.holds(a.lexical.cmp(&b.lexical)))
        }
        _ => None,
    }
}

/// Fixed-point number used for derived `add` relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Fixed {
    mantissa: i128,
    scale: u32,
}

impl Fixed {
    pub(crate) fn from_literal(lit: &Literal) -> Option<Fixed> {
        let (neg, int, frac) = numeric_parts(&lit.lexical);
        let digits = format!("{int}{frac}");
        let mut mantissa: i128 = if digits.is_empty() {
            0
        } else {
            digits.parse().ok()?
        };
        if neg {
            mantissa = -mantissa;
        }
        Some(Fixed {
            mantissa,
            scale: frac.len() as u32,
        })
    }

    pub(crate) fn zero() -> Fixed {
        Fixed {
            mantissa: 0,
            scale: 0,
        }
    }

    pub(crate) fn checked_add(self, other: Fixed) -> Option<Fixed> {
        let scale = self.scale.max(other.scale);
        let lhs = self
            .mantissa
            .checked_mul(10i128.checked_pow(scale - self.scale)?)?;
        let rhs = other
            .mantissa
            .checked_mul(10i128.checked_pow(scale - other.scale)?)?;
        Some(Fixed {
            mantissa: lhs.checked_add(rhs)?,
            scale,
        })
    }

    /// Renders the value as a decimal literal (always canonical).
    pub(crate) fn to_decimal(self) -> Literal {
        let digits = self.mantissa.unsigned_abs().to_string();
        let scale = self.scale as usize;
        let padded = format!("{digits:0>width$}", width = scale + 1);
        let (int, frac) = padded.split_at(padded.len() - scale);
        let sign = if self.mantissa < 0 { "-" } else { "" };
        Literal::parse(&format!("{sign}{int}.{frac}"), Dtype::Decimal)
            .expect("fixed-point rendering is a valid decimal")
    }
}
