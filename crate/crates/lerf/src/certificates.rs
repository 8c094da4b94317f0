//! Self-contained separation certificates and their independent verifier.
//!
//! A certificate packages a homomorphism into a finite permutation group
//! (one image per generator) together with the relators it must kill and the
//! claim that the target's image lies outside the subgroup generated by the
//! images of the subgroup generators. Verification uses only `permgrp`
//! primitives and never touches engine state, so a certificate stands on its
//! own: relators are stored inline and no access to the original group
//! description is needed.

use std::collections::BTreeMap;
use std::fmt;

use crate::permgrp::{self, Perm, PermError};
use crate::presentations::{parse_word, serialize_word, Alphabet, Word};

const FORMAT_HEADER: &str = "lerf-certificate v1";

/// Cap on closure enumeration during verification; hostile certificates must
/// not be able to pin the verifier.
pub const VERIFY_CLOSURE_CAP: usize = 500_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub alphabet: Alphabet,
    /// Defining relations of the group the homomorphism claims to factor
    /// through, including any amalgamation identities.
    pub relators: Vec<Word>,
    /// One permutation per alphabet symbol, all of the same degree.
    pub images: Vec<Perm>,
    pub subgroup: Vec<Word>,
    pub target: Word,
    pub meta: BTreeMap<String, String>,
}

/// Why a certificate failed verification. The category is part of the
/// contract: adversarial-mutation tests check that tampering is rejected for
/// the right reason.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvalidReason {
    /// Degree below 1, image degrees disagree, or image count is wrong.
    MalformedImages(String),
    /// A relator, subgroup generator, or the target mentions a symbol
    /// outside the alphabet.
    WordOutOfRange(String),
    /// Some relator does not map to the identity permutation.
    RelatorNotKilled(Word),
    /// The target's image lies inside the subgroup generated by the images
    /// of the subgroup generators, so nothing is separated.
    TargetNotSeparated,
    /// Closure enumeration exceeded the verifier's resource cap.
    ResourceLimit,
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::MalformedImages(m) => write!(f, "malformed images: {m}"),
            InvalidReason::WordOutOfRange(m) => write!(f, "word out of range: {m}"),
            InvalidReason::RelatorNotKilled(_) => write!(f, "relator image is not the identity"),
            InvalidReason::TargetNotSeparated => {
                write!(f, "target image lies inside the subgroup image")
            }
            InvalidReason::ResourceLimit => write!(f, "verification resource cap exceeded"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid(InvalidReason),
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl Certificate {
    pub fn degree(&self) -> usize {
        self.images.first().map(|p| p.degree()).unwrap_or(0)
    }

    fn eval(&self, w: &Word) -> Perm {
        let mut out = Perm::identity(self.degree());
        for l in w.letters() {
            let g = &self.images[l.sym];
            let step = if l.sign > 0 { g.clone() } else { g.inverse() };
            out = out.compose(&step).expect("degrees checked before eval");
        }
        out
    }
}

fn word_in_range(w: &Word, n: usize) -> bool {
    w.max_symbol().map(|m| m < n).unwrap_or(true)
}

/// Check a certificate from first principles: (1) shape, (2) every relator
/// dies, (3) the target's image is outside the closure of the subgroup
/// generators' images.
pub fn verify(c: &Certificate) -> Verdict {
    if c.images.len() != c.alphabet.len() {
        return Verdict::Invalid(InvalidReason::MalformedImages(format!(
            "{} images for {} symbols",
            c.images.len(),
            c.alphabet.len()
        )));
    }
    let degree = c.degree();
    if degree < 1 {
        return Verdict::Invalid(InvalidReason::MalformedImages(
            "degree must be at least 1".to_string(),
        ));
    }
    if c.images.iter().any(|p| p.degree() != degree) {
        return Verdict::Invalid(InvalidReason::MalformedImages(
            "image degrees disagree".to_string(),
        ));
    }
    let n = c.alphabet.len();
    for w in c.relators.iter().chain(c.subgroup.iter()) {
        if !word_in_range(w, n) {
            return Verdict::Invalid(InvalidReason::WordOutOfRange(
                "relator or subgroup word".to_string(),
            ));
        }
    }
    if !word_in_range(&c.target, n) {
        return Verdict::Invalid(InvalidReason::WordOutOfRange("target word".to_string()));
    }
    for r in &c.relators {
        if !c.eval(r).is_identity() {
            return Verdict::Invalid(InvalidReason::RelatorNotKilled(r.clone()));
        }
    }
    let sub_images: Vec<Perm> = c.subgroup.iter().map(|w| c.eval(w)).collect();
    let sub_closure = match permgrp::closure(degree, &sub_images, VERIFY_CLOSURE_CAP) {
        Ok(g) => g,
        Err(PermError::CapExceeded { .. }) => {
            return Verdict::Invalid(InvalidReason::ResourceLimit)
        }
        Err(e) => return Verdict::Invalid(InvalidReason::MalformedImages(e.to_string())),
    };
    if sub_closure.contains(&c.eval(&c.target)) {
        return Verdict::Invalid(InvalidReason::TargetNotSeparated);
    }
    Verdict::Valid
}

/// Canonical text encoding: fixed section order, relator and subgroup lines
/// sorted and deduplicated, metadata sorted by key. Encoding a decoded
/// encoding is byte-identical.
pub fn encode(c: &Certificate) -> String {
    let mut out = String::new();
    out.push_str(FORMAT_HEADER);
    out.push('\n');
    out.push_str(&format!("degree {}\n", c.degree()));
    for (i, name) in c.alphabet.names().iter().enumerate() {
        out.push_str(&format!("gen {} {}\n", name, c.images[i].to_line()));
    }
    let mut relator_lines: Vec<String> = c
        .relators
        .iter()
        .map(|w| serialize_word(w, &c.alphabet))
        .collect();
    relator_lines.sort();
    relator_lines.dedup();
    for line in relator_lines {
        out.push_str(&format!("relator {}\n", line).replace("relator \n", "relator\n"));
    }
    let mut subgroup_lines: Vec<String> = c
        .subgroup
        .iter()
        .map(|w| serialize_word(w, &c.alphabet))
        .collect();
    subgroup_lines.sort();
    subgroup_lines.dedup();
    for line in subgroup_lines {
        out.push_str(&format!("subgroup {}\n", line).replace("subgroup \n", "subgroup\n"));
    }
    out.push_str(&format!("target {}\n", serialize_word(&c.target, &c.alphabet)).replace("target \n", "target\n"));
    for (k, v) in &c.meta {
        out.push_str(&format!("meta {k}={v}\n"));
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("certificate parse error at line {line}: {message}")]
pub struct DecodeError {
    pub line: usize,
    pub message: String,
}

fn decode_err(line: usize, message: impl Into<String>) -> DecodeError {
    DecodeError {
        line,
        message: message.into(),
    }
}

pub fn decode(text: &str) -> Result<Certificate, DecodeError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, first)) if first.trim() == FORMAT_HEADER => {}
        Some((i, first)) => {
            return Err(decode_err(
                i + 1,
                format!("expected header `{FORMAT_HEADER}`, got `{first}`"),
            ))
        }
        None => return Err(decode_err(1, "empty certificate")),
    }

    let mut degree: Option<usize> = None;
    let mut names: Vec<String> = Vec::new();
    let mut raw_images: Vec<Vec<usize>> = Vec::new();
    let mut relator_texts: Vec<(usize, String)> = Vec::new();
    let mut subgroup_texts: Vec<(usize, String)> = Vec::new();
    let mut target_text: Option<(usize, String)> = None;
    let mut meta = BTreeMap::new();

    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let (keyword, rest) = match line.split_once(' ') {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        match keyword {
            "degree" => {
                let d: usize = rest
                    .parse()
                    .map_err(|_| decode_err(line_no, format!("bad degree `{rest}`")))?;
                degree = Some(d);
            }
            "gen" => {
                let (name, perm_text) = rest
                    .split_once(' ')
                    .ok_or_else(|| decode_err(line_no, "expected `gen <name> [images]`"))?;
                let inner = perm_text
                    .trim()
                    .strip_prefix('[')
                    .and_then(|t| t.strip_suffix(']'))
                    .ok_or_else(|| decode_err(line_no, "expected bracketed image array"))?;
                let mut images = Vec::new();
                for tok in inner.split_whitespace() {
                    images.push(
                        tok.parse::<usize>()
                            .map_err(|_| decode_err(line_no, format!("bad image `{tok}`")))?,
                    );
                }
                names.push(name.to_string());
                raw_images.push(images);
            }
            "relator" => relator_texts.push((line_no, rest.to_string())),
            "subgroup" => subgroup_texts.push((line_no, rest.to_string())),
            "target" => {
                if target_text.is_some() {
                    return Err(decode_err(line_no, "duplicate target line"));
                }
                target_text = Some((line_no, rest.to_string()));
            }
            "meta" => {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| decode_err(line_no, "expected `meta key=value`"))?;
                meta.insert(k.to_string(), v.to_string());
            }
            other => return Err(decode_err(line_no, format!("unknown keyword `{other}`"))),
        }
    }

    let degree = degree.ok_or_else(|| decode_err(0, "missing degree line"))?;
    let alphabet = Alphabet::new(names).map_err(|e| decode_err(0, e.to_string()))?;
    let mut images = Vec::new();
    for raw in raw_images {
        if raw.len() != degree {
            return Err(decode_err(
                0,
                format!("image array length {} does not match degree {degree}", raw.len()),
            ));
        }
        images.push(Perm::from_images(raw).map_err(|e| decode_err(0, e.to_string()))?);
    }
    let mut relators = Vec::new();
    for (line_no, text) in relator_texts {
        relators
            .push(parse_word(&text, &alphabet).map_err(|e| decode_err(line_no, e.to_string()))?);
    }
    let mut subgroup = Vec::new();
    for (line_no, text) in subgroup_texts {
        subgroup
            .push(parse_word(&text, &alphabet).map_err(|e| decode_err(line_no, e.to_string()))?);
    }
    let (target_line, target_text) =
        target_text.ok_or_else(|| decode_err(0, "missing target line"))?;
    let target = parse_word(&target_text, &alphabet)
        .map_err(|e| decode_err(target_line, e.to_string()))?;

    Ok(Certificate {
        alphabet,
        relators,
        images,
        subgroup,
        target,
        meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The order-2 certificate for `b` outside `<b^2, a>` in G(2,2):
    /// a and c map to the identity, b to the transposition.
    fn bs22_cert() -> Certificate {
        let alphabet = Alphabet::new(["a", "c", "b"]).unwrap();
        let relators = vec![
            parse_word("a^-1 c^-1 a c", &alphabet).unwrap(),
            parse_word("c b^-2", &alphabet).unwrap(),
        ];
        let images = vec![
            Perm::identity(2),
            Perm::identity(2),
            Perm::from_images(vec![1, 0]).unwrap(),
        ];
        let subgroup = vec![
            parse_word("b^2", &alphabet).unwrap(),
            parse_word("a", &alphabet).unwrap(),
        ];
        let target = parse_word("b", &alphabet).unwrap();
        let mut meta = BTreeMap::new();
        meta.insert("engine".to_string(), "lerf-0.1.0".to_string());
        Certificate {
            alphabet,
            relators,
            images,
            subgroup,
            target,
            meta,
        }
    }

    #[test]
    fn bs22_degree2_certificate_is_valid() {
        assert_eq!(verify(&bs22_cert()), Verdict::Valid);
    }

    #[test]
    fn mutated_target_is_rejected() {
        let mut c = bs22_cert();
        c.target = parse_word("b^2", &c.alphabet).unwrap();
        assert_eq!(
            verify(&c),
            Verdict::Invalid(InvalidReason::TargetNotSeparated)
        );
    }

    #[test]
    fn extra_relator_is_rejected() {
        let mut c = bs22_cert();
        c.relators.push(parse_word("b", &c.alphabet).unwrap());
        assert!(matches!(
            verify(&c),
            Verdict::Invalid(InvalidReason::RelatorNotKilled(_))
        ));
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let mut c = bs22_cert();
        c.images[2] = Perm::from_images(vec![1, 2, 0]).unwrap();
        assert!(matches!(
            verify(&c),
            Verdict::Invalid(InvalidReason::MalformedImages(_))
        ));
    }

    #[test]
    fn out_of_range_word_is_rejected() {
        let mut c = bs22_cert();
        c.target = Word::from_letters([crate::presentations::Letter::new(7, 1)]);
        assert!(matches!(
            verify(&c),
            Verdict::Invalid(InvalidReason::WordOutOfRange(_))
        ));
    }

    #[test]
    fn encode_decode_round_trip_is_byte_stable() {
        let c = bs22_cert();
        let text = encode(&c);
        let back = decode(&text).unwrap();
        assert_eq!(verify(&back), Verdict::Valid);
        assert_eq!(encode(&back), text);
    }

    #[test]
    fn decode_truncated_fails() {
        let c = bs22_cert();
        let text = encode(&c);
        let truncated = &text[..text.len() / 2];
        // chopping mid-document must produce a parse error or an incomplete
        // certificate, never silent acceptance of garbage
        match decode(truncated) {
            Err(_) => {}
            Ok(partial) => assert_ne!(partial, c),
        }
        assert!(decode("").is_err());
        assert!(decode("some other file\n").is_err());
    }

    #[test]
    fn identity_words_round_trip() {
        let mut c = bs22_cert();
        c.relators.push(Word::identity());
        let text = encode(&c);
        let back = decode(&text).unwrap();
        assert!(back.relators.iter().any(|w| w.is_identity()));
        assert_eq!(encode(&back), text);
    }
}
