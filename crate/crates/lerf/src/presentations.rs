//! Alphabets, freely reduced words, and the line-oriented input format for
//! amalgam descriptions and membership queries.
//!
//! Words are stored as expanded letter sequences (one entry per signed
//! generator occurrence) so that folding and rewriting code downstream works
//! with a single representation.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::permgrp::Perm;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: unknown generator symbol `{symbol}`")]
    UnknownSymbol { line: usize, symbol: String },
    #[error("line {line}: malformed exponent in token `{token}`")]
    MalformedExponent { line: usize, token: String },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("factor {factor}: unsupported class `{class}`")]
    UnsupportedClass { factor: char, class: String },
    #[error("amalgamated generator lists have mismatched lengths: H has {h}, K has {k}")]
    ArityMismatch { h: usize, k: usize },
    #[error("invalid generator name `{0}`")]
    BadName(String),
    #[error("duplicate generator name `{0}`")]
    DuplicateName(String),
}

/// An ordered list of distinct generator names. The ordering is fixed for the
/// lifetime of a specification and determines letter indices in every word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    names: Vec<String>,
    index: HashMap<String, usize>,
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl Alphabet {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, ParseError> {
        let mut out = Alphabet {
            names: Vec::new(),
            index: HashMap::new(),
        };
        for name in names {
            let name = name.into();
            if !valid_name(&name) {
                return Err(ParseError::BadName(name));
            }
            if out.index.contains_key(&name) {
                return Err(ParseError::DuplicateName(name));
            }
            out.index.insert(name.clone(), out.names.len());
            out.names.push(name);
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    /// Concatenation of two disjoint alphabets; the left block keeps its
    /// indices, the right block is shifted by `self.len()`.
    pub fn join(&self, other: &Alphabet) -> Result<Alphabet, ParseError> {
        Alphabet::new(self.names.iter().chain(other.names.iter()).cloned())
    }
}

/// One signed generator occurrence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub sym: usize,
    pub sign: i8,
}

impl Letter {
    pub fn new(sym: usize, sign: i8) -> Self {
        debug_assert!(sign == 1 || sign == -1);
        Letter { sym, sign }
    }

    pub fn inverse(self) -> Self {
        Letter {
            sym: self.sym,
            sign: -self.sign,
        }
    }
}

/// A freely reduced word: no adjacent `x x^-1` or `x^-1 x` pair. The empty
/// word is the identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Word {
    letters: Vec<Letter>,
}

impl Word {
    pub fn identity() -> Self {
        Word::default()
    }

    /// Free reduction of a raw letter sequence. Idempotent and
    /// length-nonincreasing.
    pub fn from_letters(raw: impl IntoIterator<Item = Letter>) -> Self {
        let mut stack: Vec<Letter> = Vec::new();
        for l in raw {
            match stack.last() {
                Some(top) if top.sym == l.sym && top.sign == -l.sign => {
                    stack.pop();
                }
                _ => stack.push(l),
            }
        }
        Word { letters: stack }
    }

    pub fn generator(sym: usize) -> Self {
        Word {
            letters: vec![Letter::new(sym, 1)],
        }
    }

    pub fn letters(&self) -> &[Letter] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_identity(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| l.inverse()).collect(),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        Word::from_letters(self.letters.iter().chain(other.letters.iter()).copied())
    }

    pub fn pow(&self, k: i64) -> Word {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Word::identity();
        for _ in 0..k.unsigned_abs() {
            out = out.concat(&base);
        }
        out
    }

    /// Re-index the letters by a translation table (used to move words between
    /// a factor alphabet and the combined amalgam alphabet).
    pub fn map_symbols(&self, f: impl Fn(usize) -> usize) -> Word {
        Word {
            letters: self
                .letters
                .iter()
                .map(|l| Letter::new(f(l.sym), l.sign))
                .collect(),
        }
    }

    /// Largest index mentioned, if any.
    pub fn max_symbol(&self) -> Option<usize> {
        self.letters.iter().map(|l| l.sym).max()
    }

    /// Net exponent sum per symbol over an alphabet of `n` symbols.
    pub fn exponent_sums(&self, n: usize) -> Vec<i64> {
        let mut sums = vec![0i64; n];
        for l in &self.letters {
            sums[l.sym] += l.sign as i64;
        }
        sums
    }
}

/// Canonical textual form: runs of a repeated signed symbol render as
/// `name^k`; a single positive occurrence renders bare. Round-trips through
/// [`parse_word`] exactly.
pub fn serialize_word(word: &Word, alphabet: &Alphabet) -> String {
    let mut parts: Vec<String> = Vec::new();
    let mut i = 0;
    let letters = word.letters();
    while i < letters.len() {
        let l = letters[i];
        let mut run = 1usize;
        while i + run < letters.len() && letters[i + run] == l {
            run += 1;
        }
        let name = alphabet.name(l.sym);
        let exp = run as i64 * l.sign as i64;
        if exp == 1 {
            parts.push(name.to_string());
        } else {
            parts.push(format!("{name}^{exp}"));
        }
        i += run;
    }
    parts.join(" ")
}

fn parse_word_line(text: &str, alphabet: &Alphabet, line: usize) -> Result<Word, ParseError> {
    let mut raw = Vec::new();
    for token in text.split_whitespace() {
        let (name, exp) = match token.split_once('^') {
            None => (token, 1i64),
            Some((name, exp_str)) => {
                let exp: i64 = exp_str.parse().map_err(|_| ParseError::MalformedExponent {
                    line,
                    token: token.to_string(),
                })?;
                if exp == 0 {
                    return Err(ParseError::MalformedExponent {
                        line,
                        token: token.to_string(),
                    });
                }
                (name, exp)
            }
        };
        let sym = alphabet
            .lookup(name)
            .ok_or_else(|| ParseError::UnknownSymbol {
                line,
                symbol: name.to_string(),
            })?;
        let sign = if exp > 0 { 1 } else { -1 };
        for _ in 0..exp.unsigned_abs() {
            raw.push(Letter::new(sym, sign));
        }
    }
    Ok(Word::from_letters(raw))
}

/// Parse a whitespace-separated word: tokens `name`, `name^-1` or `name^k`
/// with a nonzero integer `k`. The result is freely reduced.
pub fn parse_word(text: &str, alphabet: &Alphabet) -> Result<Word, ParseError> {
    parse_word_line(text, alphabet, 0)
}

/// Free reduction exposed on raw letter sequences.
pub fn free_reduce(raw: impl IntoIterator<Item = Letter>) -> Word {
    Word::from_letters(raw)
}

/// Class of a factor group as named in a spec file, together with its
/// structural parameters. Interpretation of the parameters lives in
/// `effgroups`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FactorClassSpec {
    Finite { degree: usize, gens: Vec<Perm> },
    Abelian { rank: usize, torsion: Vec<u64> },
    Klein,
    Free { rank: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorSpec {
    pub names: Vec<String>,
    pub class: FactorClassSpec,
}

impl FactorSpec {
    pub fn alphabet(&self) -> Alphabet {
        Alphabet::new(self.names.iter().cloned()).expect("validated at parse time")
    }
}

/// Search limit knobs attached to a query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchLimits {
    pub wall_ms: u64,
    pub order_cap: usize,
    pub window: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            wall_ms: 60_000,
            order_cap: 100_000,
            window: 3,
        }
    }
}

/// A membership query: does `target` lie in the subgroup generated by
/// `subgroup`? Zero subgroup generators means the trivial subgroup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub subgroup: Vec<Word>,
    pub target: Word,
    pub limits: SearchLimits,
}

/// Parsed form of an amalgam description document: the two factors, the
/// amalgamated generator lists (positionally paired), and an optional query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AmalgamSpec {
    pub factor_a: FactorSpec,
    pub factor_b: FactorSpec,
    /// Generators of the amalgamated subgroup of A, as words over A's alphabet.
    pub h_gens: Vec<Word>,
    /// Generators of the amalgamated subgroup of B, as words over B's alphabet.
    pub k_gens: Vec<Word>,
    pub query: Option<QuerySpec>,
}

impl AmalgamSpec {
    /// A's alphabet followed by B's; all query words index into this.
    pub fn combined_alphabet(&self) -> Alphabet {
        self.factor_a
            .alphabet()
            .join(&self.factor_b.alphabet())
            .expect("validated at parse time")
    }
}

/// Split `key=value` parameter tokens, keeping bracketed permutation images
/// together (`gens=[1 0];[0 2 1]`).
fn split_params(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0usize;
    for c in text.chars() {
        match c {
            '[' => {
                depth += 1;
                cur.push(c);
            }
            ']' => {
                depth = depth.saturating_sub(1);
                cur.push(c);
            }
            c if c.is_whitespace() && depth == 0 => {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn parse_perm_literal(text: &str, line: usize) -> Result<Perm, ParseError> {
    let inner = text
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| ParseError::Syntax {
            line,
            message: format!("expected permutation `[i0 i1 ...]`, got `{text}`"),
        })?;
    let mut images = Vec::new();
    for tok in inner.split_whitespace() {
        images.push(tok.parse::<usize>().map_err(|_| ParseError::Syntax {
            line,
            message: format!("bad permutation entry `{tok}`"),
        })?);
    }
    Perm::from_images(images).map_err(|e| ParseError::Syntax {
        line,
        message: e.to_string(),
    })
}

fn parse_factor(rest: &str, factor: char, line: usize) -> Result<FactorSpec, ParseError> {
    let params = split_params(rest);
    if params.is_empty() {
        return Err(ParseError::Syntax {
            line,
            message: "missing factor class".to_string(),
        });
    }
    let class_name = params[0].as_str();
    let mut kv: HashMap<&str, &str> = HashMap::new();
    for p in &params[1..] {
        let (k, v) = p.split_once('=').ok_or_else(|| ParseError::Syntax {
            line,
            message: format!("expected key=value, got `{p}`"),
        })?;
        kv.insert(k, v);
    }
    let names: Vec<String> = match kv.get("names") {
        Some(v) => v.split(',').map(|s| s.trim().to_string()).collect(),
        None => {
            return Err(ParseError::Syntax {
                line,
                message: "factor requires names=<n1,n2,...>".to_string(),
            })
        }
    };
    let class = match class_name {
        "finite" => {
            let degree: usize = kv
                .get("degree")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ParseError::Syntax {
                    line,
                    message: "finite factor requires degree=<n>".to_string(),
                })?;
            let gens_text = kv.get("gens").ok_or_else(|| ParseError::Syntax {
                line,
                message: "finite factor requires gens=<perm>;<perm>...".to_string(),
            })?;
            let mut gens = Vec::new();
            for g in gens_text.split(';') {
                let p = parse_perm_literal(g, line)?;
                if p.degree() != degree {
                    return Err(ParseError::Syntax {
                        line,
                        message: format!(
                            "generator degree {} does not match declared degree {degree}",
                            p.degree()
                        ),
                    });
                }
                gens.push(p);
            }
            if gens.len() != names.len() {
                return Err(ParseError::Syntax {
                    line,
                    message: format!(
                        "finite factor has {} generators but {} names",
                        gens.len(),
                        names.len()
                    ),
                });
            }
            FactorClassSpec::Finite { degree, gens }
        }
        "abelian" => {
            let rank: usize = kv
                .get("rank")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ParseError::Syntax {
                    line,
                    message: "abelian factor requires rank=<r>".to_string(),
                })?;
            let torsion: Vec<u64> = match kv.get("torsion") {
                None => Vec::new(),
                Some(v) if v.is_empty() => Vec::new(),
                Some(v) => {
                    let mut out = Vec::new();
                    for t in v.split(',') {
                        let d: u64 = t.parse().map_err(|_| ParseError::Syntax {
                            line,
                            message: format!("bad torsion divisor `{t}`"),
                        })?;
                        if d < 2 {
                            return Err(ParseError::Syntax {
                                line,
                                message: format!("torsion divisor must be >= 2, got {d}"),
                            });
                        }
                        out.push(d);
                    }
                    out
                }
            };
            for w in torsion.windows(2) {
                if w[1] % w[0] != 0 {
                    return Err(ParseError::Syntax {
                        line,
                        message: format!("torsion divisors must form a chain: {} ∤ {}", w[0], w[1]),
                    });
                }
            }
            if names.len() != rank + torsion.len() {
                return Err(ParseError::Syntax {
                    line,
                    message: format!(
                        "abelian factor needs {} names (rank {rank} + {} torsion), got {}",
                        rank + torsion.len(),
                        torsion.len(),
                        names.len()
                    ),
                });
            }
            FactorClassSpec::Abelian { rank, torsion }
        }
        "klein" => {
            if names.len() != 2 {
                return Err(ParseError::Syntax {
                    line,
                    message: "klein factor requires exactly two names".to_string(),
                });
            }
            FactorClassSpec::Klein
        }
        "free" => {
            let rank: usize = kv
                .get("rank")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| ParseError::Syntax {
                    line,
                    message: "free factor requires rank=<r>".to_string(),
                })?;
            if names.len() != rank {
                return Err(ParseError::Syntax {
                    line,
                    message: format!("free factor needs {rank} names, got {}", names.len()),
                });
            }
            FactorClassSpec::Free { rank }
        }
        other => {
            return Err(ParseError::UnsupportedClass {
                factor,
                class: other.to_string(),
            })
        }
    };
    // validate names early so alphabet() cannot fail later
    Alphabet::new(names.iter().cloned())?;
    Ok(FactorSpec { names, class })
}

fn parse_word_list(rest: &str, alphabet: &Alphabet, line: usize) -> Result<Vec<Word>, ParseError> {
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    rest.split(',')
        .map(|w| parse_word_line(w, alphabet, line))
        .collect()
}

/// Parse a full amalgam description document.
///
/// Grammar (line oriented, `#` starts a comment):
///
/// ```text
/// factor A <class> names=<n1,...> [class params]
/// factor B <class> names=<n1,...> [class params]
/// amalgam H = w1, w2, ...        # words over A's alphabet
/// amalgam K = v1, v2, ...        # words over B's alphabet, paired with H
/// subgroup U = u1, u2, ...       # optional, words over the combined alphabet
/// element a = w                  # optional, word over the combined alphabet
/// ```
pub fn parse_amalgam_spec(document: &str) -> Result<AmalgamSpec, ParseError> {
    let mut factor_a: Option<FactorSpec> = None;
    let mut factor_b: Option<FactorSpec> = None;
    let mut h_lines: Vec<(usize, String)> = Vec::new();
    let mut k_lines: Vec<(usize, String)> = Vec::new();
    let mut u_line: Option<(usize, String)> = None;
    let mut elt_line: Option<(usize, String)> = None;

    for (idx, raw_line) in document.lines().enumerate() {
        let line_no = idx + 1;
        let content = match raw_line.split_once('#') {
            Some((before, _)) => before,
            None => raw_line,
        }
        .trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("factor ") {
            let rest = rest.trim();
            let (which, tail) = rest.split_at(1);
            match which {
                "A" => factor_a = Some(parse_factor(tail.trim(), 'A', line_no)?),
                "B" => factor_b = Some(parse_factor(tail.trim(), 'B', line_no)?),
                other => {
                    return Err(ParseError::Syntax {
                        line: line_no,
                        message: format!("factor must be A or B, got `{other}`"),
                    })
                }
            }
        } else if let Some(rest) = content.strip_prefix("amalgam ") {
            let rest = rest.trim();
            if let Some(tail) = rest.strip_prefix("H") {
                let tail = tail.trim().strip_prefix('=').ok_or(ParseError::Syntax {
                    line: line_no,
                    message: "expected `amalgam H = ...`".to_string(),
                })?;
                h_lines.push((line_no, tail.to_string()));
            } else if let Some(tail) = rest.strip_prefix("K") {
                let tail = tail.trim().strip_prefix('=').ok_or(ParseError::Syntax {
                    line: line_no,
                    message: "expected `amalgam K = ...`".to_string(),
                })?;
                k_lines.push((line_no, tail.to_string()));
            } else {
                return Err(ParseError::Syntax {
                    line: line_no,
                    message: "amalgam side must be H or K".to_string(),
                });
            }
        } else if let Some(rest) = content.strip_prefix("subgroup ") {
            let tail = rest
                .trim()
                .strip_prefix("U")
                .and_then(|t| t.trim().strip_prefix('='))
                .ok_or(ParseError::Syntax {
                    line: line_no,
                    message: "expected `subgroup U = ...`".to_string(),
                })?;
            u_line = Some((line_no, tail.to_string()));
        } else if let Some(rest) = content.strip_prefix("element ") {
            let tail = rest
                .trim()
                .strip_prefix("a")
                .and_then(|t| t.trim().strip_prefix('='))
                .ok_or(ParseError::Syntax {
                    line: line_no,
                    message: "expected `element a = ...`".to_string(),
                })?;
            elt_line = Some((line_no, tail.to_string()));
        } else {
            return Err(ParseError::Syntax {
                line: line_no,
                message: format!("unrecognized directive `{content}`"),
            });
        }
    }

    let factor_a = factor_a.ok_or(ParseError::Syntax {
        line: 0,
        message: "missing `factor A` line".to_string(),
    })?;
    let factor_b = factor_b.ok_or(ParseError::Syntax {
        line: 0,
        message: "missing `factor B` line".to_string(),
    })?;

    let alpha_a = factor_a.alphabet();
    let alpha_b = factor_b.alphabet();
    let combined = alpha_a.join(&alpha_b)?;

    let mut h_gens = Vec::new();
    for (line, text) in &h_lines {
        h_gens.extend(parse_word_list(text, &alpha_a, *line)?);
    }
    let mut k_gens = Vec::new();
    for (line, text) in &k_lines {
        k_gens.extend(parse_word_list(text, &alpha_b, *line)?);
    }
    if h_gens.len() != k_gens.len() {
        return Err(ParseError::ArityMismatch {
            h: h_gens.len(),
            k: k_gens.len(),
        });
    }

    let query = match (u_line, elt_line) {
        (None, None) => None,
        (u, Some((line, text))) => {
            let subgroup = match u {
                Some((uline, utext)) => parse_word_list(&utext, &combined, uline)?,
                None => Vec::new(),
            };
            let target = parse_word_line(&text, &combined, line)?;
            Some(QuerySpec {
                subgroup,
                target,
                limits: SearchLimits::default(),
            })
        }
        (Some((line, _)), None) => {
            return Err(ParseError::Syntax {
                line,
                message: "subgroup given without `element a = ...`".to_string(),
            })
        }
    };

    Ok(AmalgamSpec {
        factor_a,
        factor_b,
        h_gens,
        k_gens,
        query,
    })
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_identity() {
            return write!(f, "1");
        }
        let parts: Vec<String> = self
            .letters
            .iter()
            .map(|l| {
                if l.sign > 0 {
                    format!("g{}", l.sym)
                } else {
                    format!("g{}^-1", l.sym)
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}
