//! Structured action parsing and deterministic keyword-weighted embedding.
//!
//! Actions use a compact call syntax, e.g.
//! `db_query(table=customers, fields=pii, filter=active)`. Each action is
//! embedded into a fixed 21-dimensional nonnegative semantic vector by
//! summing per-token contributions from a versioned lexicon. No
//! normalization is applied at embed time; downstream consumers that need
//! scale invariance (cosine) get it for free, and mass-ratio consumers
//! keep magnitude information.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Dimensionality of the semantic vector space.
pub const DIM: usize = 21;

/// Names of the semantic dimensions, in index order.
pub const DIMENSIONS: [&str; DIM] = [
    "data_read",
    "data_write",
    "data_export",
    "external_transfer",
    "pii_sensitivity",
    "query_scope",
    "privilege",
    "escalation",
    "credential",
    "identity",
    "audit_control",
    "compliance_override",
    "approval",
    "financial",
    "deletion",
    "encryption",
    "compression",
    "network",
    "configuration",
    "communication",
    "scheduling",
];

/// Index of a named dimension, if it exists.
pub fn dimension_index(name: &str) -> Option<usize> {
    DIMENSIONS.iter().position(|d| *d == name)
}

// ---------------------------------------------------------------------------
// Actions and parsing
// ---------------------------------------------------------------------------

/// A parsed structured action: a verb plus ordered key=value arguments.
///
/// Equality ignores the raw source text, so a reparse of the canonical
/// serialization compares equal to the original.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Action {
    name: String,
    args: Vec<(String, String)>,
    raw: String,
}

impl PartialEq for Action {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.args == other.args
    }
}

impl Eq for Action {}

impl Action {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn args(&self) -> &[(String, String)] {
        &self.args
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    /// Canonical source form: `name` or `name(k=v, k=v)`. Values that are
    /// not bare tokens are quoted so the output always reparses.
    pub fn to_canonical_string(&self) -> String {
        if self.args.is_empty() {
            return self.name.clone();
        }
        let args = self
            .args
            .iter()
            .map(|(k, v)| {
                if is_bare_value(v) {
                    format!("{k}={v}")
                } else {
                    format!("{k}=\"{v}\"")
                }
            })
            .collect::<Vec<_>>()
            .join(", ");
        format!("{}({})", self.name, args)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_canonical_string())
    }
}

/// Rejection reasons for malformed action text. These indicate a malformed
/// benchmark file or a caller bug and are never silently coerced.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyntaxError {
    #[error("empty action name")]
    EmptyName,
    #[error("invalid action name {0:?} (expected [a-z][a-z0-9_]*)")]
    InvalidName(String),
    #[error("unbalanced parenthesis")]
    UnbalancedParenthesis,
    #[error("invalid argument key {0:?}")]
    InvalidKey(String),
    #[error("missing '=' after key {0:?}")]
    MissingEquals(String),
    #[error("missing value for key {0:?}")]
    MissingValue(String),
    #[error("duplicate key {0:?}")]
    DuplicateKey(String),
    #[error("unterminated quoted string")]
    UnterminatedString,
    #[error("unexpected trailing input {0:?}")]
    TrailingInput(String),
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_'
}

fn is_valid_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_lowercase()) && chars.all(is_name_char)
}

fn is_bare_value_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-'
}

fn is_bare_value(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_bare_value_char)
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Self {
            input: input.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && (self.input[self.pos] as char).is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.input.get(self.pos).map(|b| *b as char)
    }

    fn take_while(&mut self, pred: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while self.pos < self.input.len() && pred(self.input[self.pos] as char) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.input[start..self.pos]).unwrap_or("")
    }

    fn rest(&self) -> String {
        String::from_utf8_lossy(&self.input[self.pos.min(self.input.len())..]).into_owned()
    }
}

/// Parse a single action expression.
///
/// Grammar: `name` or `name(key=value, ...)` with arbitrary surrounding
/// whitespace. Keys and names match `[a-z][a-z0-9_]*`; values are bare
/// tokens (`[A-Za-z0-9_.-]+`) or double-quoted strings. Keys must be
/// unique within one action.
pub fn parse_action(text: &str) -> Result<Action, SyntaxError> {
    let mut p = Parser::new(text);
    p.skip_ws();

    let name = p.take_while(is_name_char).to_string();
    if name.is_empty() {
        return Err(SyntaxError::EmptyName);
    }
    if !is_valid_name(&name) {
        return Err(SyntaxError::InvalidName(name));
    }

    let mut args = Vec::new();
    p.skip_ws();
    if p.peek() == Some('(') {
        p.pos += 1;
        p.skip_ws();
        if p.peek() == Some(')') {
            p.pos += 1;
        } else {
            loop {
                p.skip_ws();
                let key = p.take_while(is_name_char).to_string();
                if key.is_empty() || !is_valid_name(&key) {
                    return Err(SyntaxError::InvalidKey(key));
                }
                p.skip_ws();
                if p.peek() != Some('=') {
                    return Err(SyntaxError::MissingEquals(key));
                }
                p.pos += 1;
                p.skip_ws();
                let value = match p.peek() {
                    Some('"') => {
                        p.pos += 1;
                        let v = p.take_while(|c| c != '"').to_string();
                        if p.peek() != Some('"') {
                            return Err(SyntaxError::UnterminatedString);
                        }
                        p.pos += 1;
                        v
                    }
                    _ => {
                        let v = p.take_while(is_bare_value_char).to_string();
                        if v.is_empty() {
                            return Err(SyntaxError::MissingValue(key));
                        }
                        v
                    }
                };
                if args.iter().any(|(k, _)| *k == key) {
                    return Err(SyntaxError::DuplicateKey(key));
                }
                args.push((key, value));
                p.skip_ws();
                match p.peek() {
                    Some(',') => {
                        p.pos += 1;
                    }
                    Some(')') => {
                        p.pos += 1;
                        break;
                    }
                    _ => return Err(SyntaxError::UnbalancedParenthesis),
                }
            }
        }
    }

    p.skip_ws();
    if p.pos < p.input.len() {
        return Err(SyntaxError::TrailingInput(p.rest()));
    }

    Ok(Action {
        name,
        args,
        raw: text.to_string(),
    })
}

/// Lowercased token stream of an action: name, then each key and value in
/// source order. Every source token is emitted whole; tokens that split on
/// non-alphanumeric boundaries additionally emit their parts, so
/// `db_query` yields `db_query`, `db`, `query`.
pub fn tokenize(action: &Action) -> Vec<String> {
    let mut out = Vec::new();
    push_token(&mut out, &action.name);
    for (key, value) in &action.args {
        push_token(&mut out, key);
        push_token(&mut out, value);
    }
    out
}

fn push_token(out: &mut Vec<String>, token: &str) {
    let lowered = token.to_ascii_lowercase();
    let parts: Vec<&str> = lowered
        .split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|p| !p.is_empty())
        .collect();
    if lowered.is_empty() {
        return;
    }
    out.push(lowered.clone());
    if parts.len() > 1 || (parts.len() == 1 && parts[0] != lowered) {
        for part in parts {
            out.push(part.to_string());
        }
    }
}

// ---------------------------------------------------------------------------
// Vectors
// ---------------------------------------------------------------------------

/// Nonnegative 21-dimensional semantic vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionVector(#[serde(with = "serde_arrays")] pub [f64; DIM]);

impl ActionVector {
    pub fn zero() -> Self {
        Self([0.0; DIM])
    }

    pub fn components(&self) -> &[f64; DIM] {
        &self.0
    }

    pub fn get(&self, dim: usize) -> f64 {
        self.0[dim]
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0.0)
    }

    /// Sum of components (total semantic mass).
    pub fn l1_mass(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn dot(&self, other: &[f64; DIM]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }
}

// Serde helper: fixed-size f64 arrays as plain JSON arrays.
mod serde_arrays {
    use super::DIM;
    use serde::de::Error;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64; DIM], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[f64; DIM], D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let len = v.len();
        v.try_into()
            .map_err(|_| D::Error::custom(format!("expected {DIM} components, got {len}")))
    }
}

// ---------------------------------------------------------------------------
// Lexicon
// ---------------------------------------------------------------------------

/// Keyword-to-dimension weight table driving the embedding.
///
/// Lookup is case-insensitive (keys are stored lowercase) and the table is
/// read-only after load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: String,
    pub entries: BTreeMap<String, Vec<(usize, f64)>>,
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("token {token:?} references dimension {dim} (must be < {DIM})")]
    InvalidDimension { token: String, dim: usize },
    #[error("token {token:?} has non-positive weight {weight}")]
    NonPositiveWeight { token: String, weight: f64 },
    #[error("token {0:?} is not lowercase")]
    NonLowercaseToken(String),
}

impl Lexicon {
    pub fn from_json_str(json: &str) -> Result<Self, LexiconError> {
        let lexicon: Lexicon = serde_json::from_str(json)?;
        lexicon.validate()?;
        Ok(lexicon)
    }

    /// The lexicon co-calibrated with the bundled role profiles and the
    /// benchmark generator.
    pub fn bundled() -> &'static Lexicon {
        static BUNDLED: std::sync::OnceLock<Lexicon> = std::sync::OnceLock::new();
        BUNDLED.get_or_init(|| {
            Lexicon::from_json_str(include_str!("../data/lexicon.json"))
                .expect("bundled lexicon is valid")
        })
    }

    pub fn validate(&self) -> Result<(), LexiconError> {
        for (token, weights) in &self.entries {
            if *token != token.to_ascii_lowercase() {
                return Err(LexiconError::NonLowercaseToken(token.clone()));
            }
            for &(dim, weight) in weights {
                if dim >= DIM {
                    return Err(LexiconError::InvalidDimension {
                        token: token.clone(),
                        dim,
                    });
                }
                if weight <= 0.0 || weight.is_nan() {
                    return Err(LexiconError::NonPositiveWeight {
                        token: token.clone(),
                        weight,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn lookup(&self, token: &str) -> &[(usize, f64)] {
        self.entries
            .get(&token.to_ascii_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

/// Embed an action by summing the lexicon contributions of its tokens.
/// Unknown tokens contribute nothing; a token appearing twice counts twice.
pub fn embed(action: &Action, lexicon: &Lexicon) -> ActionVector {
    let mut v = ActionVector::zero();
    for token in tokenize(action) {
        for &(dim, weight) in lexicon.lookup(&token) {
            v.0[dim] += weight;
        }
    }
    v
}
