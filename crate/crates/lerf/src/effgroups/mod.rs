//! The effective factor-group contract: normal forms, exact subgroup
//! membership with witnesses, separation into finite quotients, quotients by
//! finitely generated normal subgroups, coset decomposition, and congruence
//! quotient streams — for the four supported classes (finite permutation
//! groups, finitely generated abelian groups, the Klein bottle group, free
//! groups) plus quotients of the Klein group that fall outside those classes.
//!
//! Quotients renormalize into a plain class whenever one fits: abelian
//! quotients stay abelian (extra relation columns), finite-index quotients
//! become finite permutation groups, and only the infinite non-abelian
//! quotients of the Klein group stay wrapped with their base and kernel.

pub mod klein;
pub mod lattice;

use std::collections::HashMap;

use thiserror::Error;

use crate::permgrp::{self, closure, FinGroup, FiniteQuotientHom, Perm, PermError};
use crate::presentations::{Alphabet, FactorClassSpec, FactorSpec, Letter, Word};
use crate::stallings;

use klein::{KleinElt, KleinSubgroup};
use lattice::{column_hnf, lattice_kernel, lattice_solve, HnfBasis, Vector};

/// Hard ceiling on modulus scans inside `separate`; reaching it means a bug
/// or an adversarial instance, never a normal search.
const SEPARATION_SCAN_CAP: usize = 100_000;

/// Ceiling for "is this subgroup finite" enumeration.
const FINITE_ENUM_CAP: usize = 4_096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EffError {
    #[error("subgroup is not normal: a conjugated generator escapes it")]
    NotNormal,
    #[error("operation unsupported for this group class: {0}")]
    Unsupported(String),
    #[error("separation requested for a member element")]
    MemberViolation,
    #[error("separation scan exhausted after {0} steps")]
    SeparationExhausted(usize),
    #[error("saturation window exhausted")]
    SaturationExhausted,
    #[error(transparent)]
    Perm(#[from] PermError),
}

#[derive(Debug, Clone)]
pub struct FiniteData {
    pub gens: Vec<Perm>,
    pub group: FinGroup,
}

#[derive(Debug, Clone)]
pub struct AbelianData {
    /// Relation lattice columns over the alphabet coordinates.
    pub relations: Vec<Vector>,
    hnf: HnfBasis,
}

#[derive(Debug, Clone)]
pub struct QuotientData {
    /// Always a Klein-class group: every other base renormalizes away.
    pub base: Box<EffectiveGroup>,
    pub n_gens: Vec<Word>,
    pub n_sub: KleinSubgroup,
}

#[derive(Debug, Clone)]
pub enum GroupClass {
    Finite(FiniteData),
    Abelian(AbelianData),
    Klein,
    Free { rank: usize },
    Quotient(QuotientData),
}

#[derive(Debug, Clone)]
pub struct EffectiveGroup {
    pub alphabet: Alphabet,
    pub class: GroupClass,
}

/// Canonical coordinates of a group element; equal coordinates exactly when
/// the elements are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormalFormElt {
    Finite(Perm),
    Abelian(Vec<i64>),
    Klein(KleinElt),
    Free(Word),
    Quotient(KleinElt),
}

/// Canonical identifier of a finitely generated subgroup, used to detect
/// stabilization during saturation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubgroupKey {
    Finite(Vec<Perm>),
    Abelian(Vec<(usize, Vector)>),
    Klein((i64, i64, i64)),
    Free(stallings::CanonicalGraph),
}

fn vec_to_word(v: &[i64]) -> Word {
    let mut letters = Vec::new();
    for (sym, &e) in v.iter().enumerate() {
        let sign = if e >= 0 { 1 } else { -1 };
        for _ in 0..e.unsigned_abs() {
            letters.push(Letter::new(sym, sign));
        }
    }
    Word::from_letters(letters)
}

/// Substitute subgroup generator words into a word over generator symbols.
pub fn substitute(expr: &Word, gens: &[Word]) -> Word {
    let mut out = Word::identity();
    for l in expr.letters() {
        let g = &gens[l.sym];
        out = out.concat(&if l.sign > 0 { g.clone() } else { g.inverse() });
    }
    out
}

impl EffectiveGroup {
    pub fn finite(alphabet: Alphabet, gens: Vec<Perm>) -> Result<Self, EffError> {
        assert_eq!(alphabet.len(), gens.len());
        let degree = gens.first().map(|p| p.degree()).unwrap_or(1);
        let group = closure(degree, &gens, permgrp::DEFAULT_ELEMENT_CAP)?;
        Ok(EffectiveGroup {
            alphabet,
            class: GroupClass::Finite(FiniteData { gens, group }),
        })
    }

    pub fn abelian(alphabet: Alphabet, relations: Vec<Vector>) -> Self {
        let m = alphabet.len();
        for r in &relations {
            assert_eq!(r.len(), m);
        }
        let hnf = column_hnf(&relations, m);
        EffectiveGroup {
            alphabet,
            class: GroupClass::Abelian(AbelianData { relations, hnf }),
        }
    }

    pub fn abelian_free(alphabet: Alphabet) -> Self {
        Self::abelian(alphabet, Vec::new())
    }

    pub fn klein(alphabet: Alphabet) -> Self {
        assert_eq!(alphabet.len(), 2, "klein group has two generators");
        EffectiveGroup {
            alphabet,
            class: GroupClass::Klein,
        }
    }

    pub fn free(alphabet: Alphabet) -> Self {
        let rank = alphabet.len();
        EffectiveGroup {
            alphabet,
            class: GroupClass::Free { rank },
        }
    }

    pub fn from_factor_spec(spec: &FactorSpec) -> Result<Self, EffError> {
        let alphabet = spec.alphabet();
        match &spec.class {
            FactorClassSpec::Finite { gens, .. } => Self::finite(alphabet, gens.clone()),
            FactorClassSpec::Abelian { rank, torsion } => {
                let m = alphabet.len();
                let relations = torsion
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| {
                        let mut col = vec![0i64; m];
                        col[rank + i] = d as i64;
                        col
                    })
                    .collect();
                Ok(Self::abelian(alphabet, relations))
            }
            FactorClassSpec::Klein => Ok(Self::klein(alphabet)),
            FactorClassSpec::Free { .. } => Ok(Self::free(alphabet)),
        }
    }

    pub fn class_name(&self) -> &'static str {
        match &self.class {
            GroupClass::Finite(_) => "finite",
            GroupClass::Abelian(_) => "abelian",
            GroupClass::Klein => "klein",
            GroupClass::Free { .. } => "free",
            GroupClass::Quotient(_) => "quotient",
        }
    }

    fn abelian_vec(&self, w: &Word) -> Vector {
        w.exponent_sums(self.alphabet.len())
    }

    // ---- normal forms ----

    pub fn nf(&self, w: &Word) -> NormalFormElt {
        match &self.class {
            GroupClass::Finite(d) => {
                let mut p = Perm::identity(d.group.degree());
                for l in w.letters() {
                    let g = &d.gens[l.sym];
                    let step = if l.sign > 0 { g.clone() } else { g.inverse() };
                    p = p.compose(&step).expect("common degree");
                }
                NormalFormElt::Finite(p)
            }
            GroupClass::Abelian(d) => NormalFormElt::Abelian(d.hnf.reduce(&self.abelian_vec(w))),
            GroupClass::Klein => NormalFormElt::Klein(KleinElt::from_word(w)),
            GroupClass::Free { .. } => NormalFormElt::Free(w.clone()),
            GroupClass::Quotient(d) => {
                NormalFormElt::Quotient(d.n_sub.coset_representative(KleinElt::from_word(w)))
            }
        }
    }

    pub fn nf_identity(&self) -> NormalFormElt {
        self.nf(&Word::identity())
    }

    pub fn is_identity_word(&self, w: &Word) -> bool {
        self.nf(w) == self.nf_identity()
    }

    pub fn nf_mul(&self, x: &NormalFormElt, y: &NormalFormElt) -> NormalFormElt {
        match (&self.class, x, y) {
            (GroupClass::Finite(_), NormalFormElt::Finite(a), NormalFormElt::Finite(b)) => {
                NormalFormElt::Finite(a.compose(b).expect("common degree"))
            }
            (GroupClass::Abelian(d), NormalFormElt::Abelian(a), NormalFormElt::Abelian(b)) => {
                let sum: Vector = a.iter().zip(b.iter()).map(|(p, q)| p + q).collect();
                NormalFormElt::Abelian(d.hnf.reduce(&sum))
            }
            (GroupClass::Klein, NormalFormElt::Klein(a), NormalFormElt::Klein(b)) => {
                NormalFormElt::Klein(a.mul(*b))
            }
            (GroupClass::Free { .. }, NormalFormElt::Free(a), NormalFormElt::Free(b)) => {
                NormalFormElt::Free(a.concat(b))
            }
            (GroupClass::Quotient(d), NormalFormElt::Quotient(a), NormalFormElt::Quotient(b)) => {
                NormalFormElt::Quotient(d.n_sub.coset_representative(a.mul(*b)))
            }
            _ => panic!("normal form class mismatch"),
        }
    }

    pub fn nf_inv(&self, x: &NormalFormElt) -> NormalFormElt {
        match (&self.class, x) {
            (GroupClass::Finite(_), NormalFormElt::Finite(a)) => NormalFormElt::Finite(a.inverse()),
            (GroupClass::Abelian(d), NormalFormElt::Abelian(a)) => {
                let neg: Vector = a.iter().map(|p| -p).collect();
                NormalFormElt::Abelian(d.hnf.reduce(&neg))
            }
            (GroupClass::Klein, NormalFormElt::Klein(a)) => NormalFormElt::Klein(a.inv()),
            (GroupClass::Free { .. }, NormalFormElt::Free(a)) => NormalFormElt::Free(a.inverse()),
            (GroupClass::Quotient(d), NormalFormElt::Quotient(a)) => {
                NormalFormElt::Quotient(d.n_sub.coset_representative(a.inv()))
            }
            _ => panic!("normal form class mismatch"),
        }
    }

    /// A canonical word evaluating to the given normal form.
    pub fn nf_to_word(&self, x: &NormalFormElt) -> Word {
        match (&self.class, x) {
            (GroupClass::Finite(d), NormalFormElt::Finite(p)) => {
                let idx = d
                    .group
                    .element_index(p)
                    .expect("normal form lies in the group");
                let word = &d.group.element_words()[idx];
                Word::from_letters(word.iter().map(|&(g, s)| Letter::new(g, s)))
            }
            (GroupClass::Abelian(_), NormalFormElt::Abelian(v)) => vec_to_word(v),
            (GroupClass::Klein, NormalFormElt::Klein(e)) => e.to_word(),
            (GroupClass::Free { .. }, NormalFormElt::Free(w)) => w.clone(),
            (GroupClass::Quotient(_), NormalFormElt::Quotient(e)) => e.to_word(),
            _ => panic!("normal form class mismatch"),
        }
    }

    // ---- membership and expression ----

    pub fn member(&self, gens: &[Word], g: &Word) -> Result<bool, EffError> {
        match &self.class {
            GroupClass::Finite(d) => {
                let sub_gens: Vec<Perm> = gens.iter().map(|w| self.eval_perm(d, w)).collect();
                let sub = closure(d.group.degree(), &sub_gens, d.group.order().max(1))?;
                Ok(sub.contains(&self.eval_perm(d, g)))
            }
            GroupClass::Abelian(d) => {
                let mut cols: Vec<Vector> = gens.iter().map(|w| self.abelian_vec(w)).collect();
                cols.extend(d.relations.iter().cloned());
                Ok(lattice::lattice_contains(
                    &cols,
                    self.alphabet.len(),
                    &self.abelian_vec(g),
                ))
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = gens.iter().map(KleinElt::from_word).collect();
                Ok(KleinSubgroup::from_generators(&elts).contains(KleinElt::from_word(g)))
            }
            GroupClass::Free { rank } => {
                let graph = stallings::core_graph(*rank, gens);
                Ok(stallings::member_free(&graph, g))
            }
            GroupClass::Quotient(d) => {
                let mut lifted = gens.to_vec();
                lifted.extend(d.n_gens.iter().cloned());
                d.base.member(&lifted, g)
            }
        }
    }

    fn eval_perm(&self, d: &FiniteData, w: &Word) -> Perm {
        let mut p = Perm::identity(d.group.degree());
        for l in w.letters() {
            let g = &d.gens[l.sym];
            let step = if l.sign > 0 { g.clone() } else { g.inverse() };
            p = p.compose(&step).expect("common degree");
        }
        p
    }

    /// Express `g` as a word over the generator symbols of `gens`, when it
    /// is a member. The returned word substitutes back to an element equal
    /// to `g` in the group.
    pub fn express(&self, gens: &[Word], g: &Word) -> Result<Option<Word>, EffError> {
        match &self.class {
            GroupClass::Finite(d) => {
                let sub_gens: Vec<Perm> = gens.iter().map(|w| self.eval_perm(d, w)).collect();
                let sub = closure(d.group.degree(), &sub_gens, d.group.order().max(1))?;
                let target = self.eval_perm(d, g);
                match sub.element_index(&target) {
                    None => Ok(None),
                    Some(idx) => {
                        let word = &sub.element_words()[idx];
                        Ok(Some(Word::from_letters(
                            word.iter().map(|&(gi, s)| Letter::new(gi, s)),
                        )))
                    }
                }
            }
            GroupClass::Abelian(d) => {
                let mut cols: Vec<Vector> = gens.iter().map(|w| self.abelian_vec(w)).collect();
                cols.extend(d.relations.iter().cloned());
                match lattice_solve(&cols, self.alphabet.len(), &self.abelian_vec(g)) {
                    None => Ok(None),
                    Some(coeffs) => Ok(Some(vec_to_word(&coeffs[..gens.len()]))),
                }
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = gens.iter().map(KleinElt::from_word).collect();
                Ok(KleinSubgroup::from_generators(&elts).express(KleinElt::from_word(g)))
            }
            GroupClass::Free { rank } => {
                if gens.is_empty() {
                    return Ok(g.is_identity().then(Word::identity));
                }
                if *rank == 1 {
                    let exps: Vec<Vector> =
                        gens.iter().map(|w| vec![w.exponent_sums(1)[0]]).collect();
                    let target = g.exponent_sums(1)[0];
                    return Ok(lattice_solve(&exps, 1, &[target]).map(|c| vec_to_word(&c)));
                }
                // breadth-first over products, deduplicated by reduced word
                if g.is_identity() {
                    return Ok(Some(Word::identity()));
                }
                let mut seen: HashMap<Word, Word> = HashMap::new();
                seen.insert(Word::identity(), Word::identity());
                let mut frontier = vec![Word::identity()];
                for _ in 0..12 {
                    let mut next = Vec::new();
                    for u in &frontier {
                        let expr_u = seen[u].clone();
                        for (i, h) in gens.iter().enumerate() {
                            for sign in [1i8, -1] {
                                let step = if sign > 0 { h.clone() } else { h.inverse() };
                                let cand = u.concat(&step);
                                if !seen.contains_key(&cand) {
                                    let expr =
                                        expr_u.concat(&Word::from_letters([Letter::new(i, sign)]));
                                    if cand == *g {
                                        return Ok(Some(expr));
                                    }
                                    if seen.len() > 20_000 {
                                        return Ok(None);
                                    }
                                    seen.insert(cand.clone(), expr);
                                    next.push(cand);
                                }
                            }
                        }
                    }
                    frontier = next;
                }
                Ok(seen.get(g).cloned())
            }
            GroupClass::Quotient(d) => {
                let mut lifted = gens.to_vec();
                lifted.extend(d.n_gens.iter().cloned());
                match d.base.express(&lifted, g)? {
                    None => Ok(None),
                    Some(expr) => {
                        // kernel generators are identity in the quotient:
                        // drop their letters
                        let trimmed = Word::from_letters(
                            expr.letters()
                                .iter()
                                .filter(|l| l.sym < gens.len())
                                .copied(),
                        );
                        debug_assert_eq!(self.nf(&substitute(&trimmed, gens)), self.nf(g));
                        Ok(Some(trimmed))
                    }
                }
            }
        }
    }

    // ---- separation ----

    /// A homomorphism onto a finite permutation group mapping `g` outside
    /// the image of the subgroup generated by `gens`.
    pub fn separate(&self, gens: &[Word], g: &Word) -> Result<FiniteQuotientHom, EffError> {
        if self.member(gens, g)? {
            return Err(EffError::MemberViolation);
        }
        match &self.class {
            GroupClass::Finite(d) => Ok(FiniteQuotientHom::new(
                self.alphabet.clone(),
                d.gens.clone(),
                self.defining_relators(),
            )),
            GroupClass::Abelian(d) => {
                let m = self.alphabet.len();
                let gen_cols: Vec<Vector> = gens.iter().map(|w| self.abelian_vec(w)).collect();
                let g_vec = self.abelian_vec(g);
                for n in 2..SEPARATION_SCAN_CAP {
                    let n = n as i64;
                    let mut cols = gen_cols.clone();
                    cols.extend(d.relations.iter().cloned());
                    for i in 0..m {
                        let mut e = vec![0i64; m];
                        e[i] = n;
                        cols.push(e);
                    }
                    if !lattice::lattice_contains(&cols, m, &g_vec) {
                        let hom = self.abelian_mod_hom(n);
                        debug_assert!(self.hom_separates(&hom, gens, g));
                        return Ok(hom);
                    }
                }
                Err(EffError::SeparationExhausted(SEPARATION_SCAN_CAP))
            }
            GroupClass::Klein => {
                // scan quotients by the kernels {(i,j): 2M | i, N | j} in
                // order of quotient size 2MN
                for order in 1..SEPARATION_SCAN_CAP {
                    if order % 2 != 0 {
                        continue;
                    }
                    let half = (order / 2) as i64;
                    for m_exp in 1..=half {
                        if half % m_exp != 0 {
                            continue;
                        }
                        let n_exp = half / m_exp;
                        let hom = klein_mod_hom(&self.alphabet, m_exp, n_exp);
                        if self.hom_separates(&hom, gens, g) {
                            return Ok(hom);
                        }
                    }
                }
                Err(EffError::SeparationExhausted(SEPARATION_SCAN_CAP))
            }
            GroupClass::Free { .. } => {
                let cert = stallings::separate_free(&self.alphabet, gens, g)
                    .map_err(|_| EffError::MemberViolation)?;
                Ok(FiniteQuotientHom::new(
                    self.alphabet.clone(),
                    cert.images,
                    Vec::new(),
                ))
            }
            GroupClass::Quotient(d) => {
                let mut lifted = gens.to_vec();
                lifted.extend(d.n_gens.iter().cloned());
                let theta = d.base.separate(&lifted, g)?;
                // pass to the action on cosets of the separating subgroup:
                // the kernel then contains the normal subgroup we quotient
                // by, so the homomorphism descends
                let ambient = theta.image_group(permgrp::DEFAULT_ELEMENT_CAP)?;
                let sub_images: Vec<Perm> = lifted.iter().map(|w| theta.eval(w)).collect();
                let action =
                    permgrp::coset_action(&ambient, &sub_images, permgrp::DEFAULT_ELEMENT_CAP)?;
                let hom = FiniteQuotientHom::new(
                    self.alphabet.clone(),
                    action,
                    self.defining_relators(),
                );
                debug_assert!(d.n_gens.iter().all(|w| hom.eval(w).is_identity()));
                debug_assert!(self.hom_separates(&hom, gens, g));
                Ok(hom)
            }
        }
    }

    fn hom_separates(&self, hom: &FiniteQuotientHom, gens: &[Word], g: &Word) -> bool {
        let images: Vec<Perm> = gens.iter().map(|w| hom.eval(w)).collect();
        match closure(hom.degree(), &images, permgrp::DEFAULT_ELEMENT_CAP) {
            Ok(sub) => !sub.contains(&hom.eval(g)),
            Err(_) => false,
        }
    }

    /// Reduction of a finitely generated abelian group modulo n, realized on
    /// disjoint cycles of the cyclic invariants.
    fn abelian_mod_hom(&self, n: i64) -> FiniteQuotientHom {
        let d = match &self.class {
            GroupClass::Abelian(d) => d,
            _ => unreachable!(),
        };
        let m = self.alphabet.len();
        let mut cols = d.relations.clone();
        for i in 0..m {
            let mut e = vec![0i64; m];
            e[i] = n;
            cols.push(e);
        }
        // rows of the relation matrix are ambient coordinates
        let rows: Vec<Vector> = (0..m).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
        let smith = lattice::smith_normal_form(&rows);
        let blocks: Vec<(usize, i64)> = smith
            .diag
            .iter()
            .enumerate()
            .filter(|(_, &dd)| dd >= 2)
            .map(|(i, &dd)| (i, dd))
            .collect();
        let degree: usize = blocks.iter().map(|(_, dd)| *dd as usize).sum::<usize>().max(1);
        let mut images = Vec::with_capacity(m);
        for j in 0..m {
            let mut img: Vec<usize> = (0..degree).collect();
            let mut offset = 0usize;
            for &(row, dd) in &blocks {
                let shift = smith.left[row][j].rem_euclid(dd) as usize;
                let dd = dd as usize;
                for x in 0..dd {
                    img[offset + x] = offset + (x + shift) % dd;
                }
                offset += dd;
            }
            images.push(Perm::from_images(img).expect("block rotations are bijections"));
        }
        FiniteQuotientHom::new(self.alphabet.clone(), images, self.defining_relators())
    }

    // ---- quotients ----

    /// Verify that the subgroup generated by `sub_gens` is normal: each
    /// generator conjugated by each alphabet letter (both signs) must stay
    /// inside the subgroup.
    pub fn is_normal_subgroup(&self, sub_gens: &[Word]) -> Result<bool, EffError> {
        for n in sub_gens {
            for sym in 0..self.alphabet.len() {
                for sign in [1i8, -1] {
                    let x = Word::from_letters([Letter::new(sym, sign)]);
                    let conj = x.inverse().concat(n).concat(&x);
                    if !self.member(sub_gens, &conj)? {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// The quotient by the normal subgroup generated by `n_gens`, as an
    /// effective group over the same alphabet.
    pub fn quotient_by_fg_normal(&self, n_gens: &[Word]) -> Result<EffectiveGroup, EffError> {
        if !self.is_normal_subgroup(n_gens)? {
            return Err(EffError::NotNormal);
        }
        let nontrivial: Vec<Word> = n_gens
            .iter()
            .filter(|w| !self.is_identity_word(w))
            .cloned()
            .collect();
        if nontrivial.is_empty() {
            return Ok(self.clone());
        }
        match &self.class {
            GroupClass::Abelian(d) => {
                let mut relations = d.relations.clone();
                relations.extend(nontrivial.iter().map(|w| self.abelian_vec(w)));
                Ok(EffectiveGroup::abelian(self.alphabet.clone(), relations))
            }
            GroupClass::Finite(d) => {
                let sub: Vec<Perm> = nontrivial.iter().map(|w| self.eval_perm(d, w)).collect();
                let action =
                    permgrp::coset_action(&d.group, &sub, permgrp::DEFAULT_ELEMENT_CAP)?;
                EffectiveGroup::finite(self.alphabet.clone(), action)
            }
            GroupClass::Free { rank } => {
                let graph = stallings::core_graph(*rank, &nontrivial);
                let complete_already = (0..*rank).all(|sym| {
                    (0..graph.num_vertices()).all(|v| graph.step(v, sym, 1).is_some())
                });
                if !complete_already {
                    // a proper nontrivial normal subgroup of a free group
                    // must have finite index, so its core graph is complete
                    return Err(EffError::NotNormal);
                }
                let action = stallings::hall_complete(&graph).vertex_action();
                EffectiveGroup::finite(self.alphabet.clone(), action)
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = nontrivial.iter().map(KleinElt::from_word).collect();
                let n_sub = KleinSubgroup::from_generators(&elts);
                self.klein_quotient(nontrivial, n_sub)
            }
            GroupClass::Quotient(d) => {
                // collapse the tower: quotient the base by the combined kernel
                let mut combined = d.n_gens.clone();
                combined.extend(nontrivial);
                d.base.quotient_by_fg_normal(&combined)
            }
        }
    }

    fn klein_quotient(
        &self,
        n_gens: Vec<Word>,
        n_sub: KleinSubgroup,
    ) -> Result<EffectiveGroup, EffError> {
        let (p, q) = (n_sub.p, n_sub.q);
        if p == 0 && q == 1 {
            // killing c leaves the infinite cyclic group on a
            return Ok(EffectiveGroup::abelian(
                self.alphabet.clone(),
                vec![vec![0, 1]],
            ));
        }
        if p == 0 && q == 2 {
            // c^2 central and killed: a commutes with the involution c
            return Ok(EffectiveGroup::abelian(
                self.alphabet.clone(),
                vec![vec![0, 2]],
            ));
        }
        if p > 0 && q > 0 {
            // finite quotient of order p*q: right regular action on the
            // canonical coset representatives
            let reps: Vec<KleinElt> = (0..p)
                .flat_map(|i| (0..q).map(move |j| KleinElt::new(i, j)))
                .collect();
            let index_of = |x: KleinElt| -> usize {
                let rep = n_sub.coset_representative(x);
                reps.iter()
                    .position(|&r| r == rep)
                    .expect("representative enumeration covers all cosets")
            };
            let mut images = Vec::with_capacity(2);
            for gen in [KleinElt::new(1, 0), KleinElt::new(0, 1)] {
                let img: Vec<usize> = reps.iter().map(|&r| index_of(r.mul(gen))).collect();
                images.push(Perm::from_images(img).expect("coset action is a bijection"));
            }
            return EffectiveGroup::finite(self.alphabet.clone(), images);
        }
        // infinite non-abelian quotients stay wrapped over the Klein base
        Ok(EffectiveGroup {
            alphabet: self.alphabet.clone(),
            class: GroupClass::Quotient(QuotientData {
                base: Box::new(EffectiveGroup::klein(self.alphabet.clone())),
                n_gens,
                n_sub,
            }),
        })
    }

    // ---- coset decomposition ----

    /// Split `x = h · rep` with `h` in the normal subgroup generated by
    /// `h_gens` and `rep` a canonical coset representative (a function of
    /// the coset only).
    pub fn coset_decompose(
        &self,
        h_gens: &[Word],
        x: &Word,
    ) -> Result<(Word, NormalFormElt), EffError> {
        if !self.is_normal_subgroup(h_gens)? {
            return Err(EffError::NotNormal);
        }
        self.coset_split(h_gens, x)
    }

    /// Same as [`Self::coset_decompose`] but trusting that the subgroup has
    /// already been validated normal (hot path inside amalgam reduction).
    pub fn coset_split(
        &self,
        h_gens: &[Word],
        x: &Word,
    ) -> Result<(Word, NormalFormElt), EffError> {
        match &self.class {
            GroupClass::Abelian(d) => {
                let mut cols: Vec<Vector> = h_gens.iter().map(|w| self.abelian_vec(w)).collect();
                cols.extend(d.relations.iter().cloned());
                let basis = column_hnf(&cols, self.alphabet.len());
                let xv = self.abelian_vec(x);
                let rep_vec = basis.reduce(&xv);
                let h_vec: Vector = xv.iter().zip(rep_vec.iter()).map(|(a, b)| a - b).collect();
                let rep = NormalFormElt::Abelian(d.hnf.reduce(&rep_vec));
                Ok((vec_to_word(&h_vec), rep))
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = h_gens.iter().map(KleinElt::from_word).collect();
                let sub = KleinSubgroup::from_generators(&elts);
                let xe = KleinElt::from_word(x);
                let rep = sub.coset_representative(xe);
                let h = xe.mul(rep.inv());
                debug_assert!(sub.contains(h));
                Ok((h.to_word(), NormalFormElt::Klein(rep)))
            }
            GroupClass::Finite(d) => {
                let sub_gens: Vec<Perm> = h_gens.iter().map(|w| self.eval_perm(d, w)).collect();
                let sub = closure(d.group.degree(), &sub_gens, d.group.order().max(1))?;
                let xp = self.eval_perm(d, x);
                // first group element (in enumeration order) lying in the
                // right coset H·x
                let rep = d
                    .group
                    .elements()
                    .iter()
                    .find(|e| sub.contains(&xp.compose(&e.inverse()).expect("common degree")))
                    .expect("x lies in some coset")
                    .clone();
                let h = xp.compose(&rep.inverse()).expect("common degree");
                let h_word = self.nf_to_word(&NormalFormElt::Finite(h));
                Ok((h_word, NormalFormElt::Finite(rep)))
            }
            GroupClass::Free { rank } => {
                if h_gens.iter().all(|w| w.is_identity()) {
                    return Ok((Word::identity(), NormalFormElt::Free(x.clone())));
                }
                if *rank == 1 {
                    let exps: Vec<i64> = h_gens.iter().map(|w| w.exponent_sums(1)[0]).collect();
                    let k = exps.iter().fold(0i64, |acc, &e| gcd(acc, e));
                    let t = x.exponent_sums(1)[0];
                    let rem = if k == 0 { t } else { t.rem_euclid(k) };
                    let rep = Word::from_letters(
                        std::iter::repeat(Letter::new(0, if rem >= 0 { 1 } else { -1 }))
                            .take(rem.unsigned_abs() as usize),
                    );
                    let h = vec_to_word(&[t - rem]);
                    return Ok((h, NormalFormElt::Free(rep)));
                }
                Err(EffError::Unsupported(
                    "nontrivial normal subgroups of free rank >= 2".to_string(),
                ))
            }
            GroupClass::Quotient(d) => {
                let mut combined: Vec<KleinElt> = h_gens.iter().map(KleinElt::from_word).collect();
                combined.extend(d.n_gens.iter().map(KleinElt::from_word));
                let sub = KleinSubgroup::from_generators(&combined);
                let xe = KleinElt::from_word(x);
                let rep0 = sub.coset_representative(xe);
                let h = xe.mul(rep0.inv());
                let rep = NormalFormElt::Quotient(d.n_sub.coset_representative(rep0));
                Ok((h.to_word(), rep))
            }
        }
    }

    // ---- subgroup saturation ----

    /// Canonical identifier of the subgroup generated by `gens`.
    pub fn subgroup_canonical(&self, gens: &[Word]) -> Result<SubgroupKey, EffError> {
        match &self.class {
            GroupClass::Finite(d) => {
                let sub_gens: Vec<Perm> = gens.iter().map(|w| self.eval_perm(d, w)).collect();
                let sub = closure(d.group.degree(), &sub_gens, d.group.order().max(1))?;
                let mut elems = sub.elements().to_vec();
                elems.sort();
                Ok(SubgroupKey::Finite(elems))
            }
            GroupClass::Abelian(d) => {
                let mut cols: Vec<Vector> = gens.iter().map(|w| self.abelian_vec(w)).collect();
                cols.extend(d.relations.iter().cloned());
                Ok(SubgroupKey::Abelian(
                    column_hnf(&cols, self.alphabet.len()).columns,
                ))
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = gens.iter().map(KleinElt::from_word).collect();
                let sub = KleinSubgroup::from_generators(&elts);
                Ok(SubgroupKey::Klein((sub.p, sub.r, sub.q)))
            }
            GroupClass::Free { rank } => Ok(SubgroupKey::Free(
                stallings::core_graph(*rank, gens).canonical_form(),
            )),
            GroupClass::Quotient(d) => {
                let mut combined: Vec<KleinElt> = gens.iter().map(KleinElt::from_word).collect();
                combined.extend(d.n_gens.iter().map(KleinElt::from_word));
                let sub = KleinSubgroup::from_generators(&combined);
                Ok(SubgroupKey::Klein((sub.p, sub.r, sub.q)))
            }
        }
    }

    /// Generators of a subgroup of `U ∩ H` obtained by saturating products
    /// of the `u_gens` and keeping those that land in `⟨h_gens⟩`, until the
    /// generated subgroup is stable for `window` consecutive rounds.
    /// Always sound (a subset of the intersection); equal to it once the
    /// ascending chain has stabilized.
    pub fn intersect_with_normal(
        &self,
        u_gens: &[Word],
        h_gens: &[Word],
        window: usize,
        max_rounds: usize,
    ) -> Result<Vec<Word>, EffError> {
        let mut collected: Vec<Word> = Vec::new();
        let mut key = self.subgroup_canonical(&collected)?;
        let mut stable = 0usize;
        let mut seen: HashMap<NormalFormElt, ()> = HashMap::new();
        let id = self.nf_identity();
        seen.insert(id.clone(), ());
        let mut frontier: Vec<NormalFormElt> = vec![id];
        let gen_nfs: Vec<NormalFormElt> = u_gens.iter().map(|w| self.nf(w)).collect();

        for _ in 0..max_rounds {
            let mut next = Vec::new();
            for u in &frontier {
                for g in &gen_nfs {
                    for cand in [self.nf_mul(u, g), self.nf_mul(u, &self.nf_inv(g))] {
                        if seen.len() > 200_000 {
                            return Err(EffError::SaturationExhausted);
                        }
                        if !seen.contains_key(&cand) {
                            seen.insert(cand.clone(), ());
                            let word = self.nf_to_word(&cand);
                            if self.member(h_gens, &word)? {
                                let mut grown = collected.clone();
                                grown.push(word.clone());
                                let new_key = self.subgroup_canonical(&grown)?;
                                if new_key != key {
                                    collected = grown;
                                    key = new_key;
                                    stable = 0;
                                }
                            }
                            next.push(cand);
                        }
                    }
                }
            }
            stable += 1;
            if stable > window {
                return Ok(collected);
            }
            frontier = next;
        }
        Err(EffError::SaturationExhausted)
    }

    // ---- presentations ----

    /// Defining relators over this group's alphabet. A homomorphism killing
    /// all of them is exactly a homomorphism of the group.
    pub fn defining_relators(&self) -> Vec<Word> {
        match &self.class {
            GroupClass::Finite(d) => {
                let words = d.group.element_words();
                let mut out = Vec::new();
                for (idx, e) in d.group.elements().iter().enumerate() {
                    for (gi, g) in d.gens.iter().enumerate() {
                        let target = e.compose(g).expect("common degree");
                        let tidx = d.group.element_index(&target).expect("closed");
                        let w_e = Word::from_letters(
                            words[idx].iter().map(|&(a, s)| Letter::new(a, s)),
                        );
                        let w_t = Word::from_letters(
                            words[tidx].iter().map(|&(a, s)| Letter::new(a, s)),
                        );
                        let relator = w_e
                            .concat(&Word::from_letters([Letter::new(gi, 1)]))
                            .concat(&w_t.inverse());
                        if !relator.is_identity() {
                            out.push(relator);
                        }
                    }
                }
                out.sort();
                out.dedup();
                out
            }
            GroupClass::Abelian(d) => {
                let m = self.alphabet.len();
                let mut out = Vec::new();
                for i in 0..m {
                    for j in i + 1..m {
                        out.push(Word::from_letters([
                            Letter::new(i, 1),
                            Letter::new(j, 1),
                            Letter::new(i, -1),
                            Letter::new(j, -1),
                        ]));
                    }
                }
                out.extend(d.relations.iter().map(|v| vec_to_word(v)));
                out.retain(|w| !w.is_identity());
                out
            }
            GroupClass::Klein => {
                // a^-1 c a c = 1 encodes the inversion relation
                vec![Word::from_letters([
                    Letter::new(0, -1),
                    Letter::new(1, 1),
                    Letter::new(0, 1),
                    Letter::new(1, 1),
                ])]
            }
            GroupClass::Free { .. } => Vec::new(),
            GroupClass::Quotient(d) => {
                let mut out = d.base.defining_relators();
                out.extend(d.n_gens.iter().cloned());
                out
            }
        }
    }

    /// Enumerate the subgroup generated by `gens` if it has at most `cap`
    /// elements; returns (element, witness word over generator symbols)
    /// pairs in search order.
    pub fn enumerate_subgroup(
        &self,
        gens: &[Word],
        cap: usize,
    ) -> Option<Vec<(NormalFormElt, Word)>> {
        let id = self.nf_identity();
        let mut order: Vec<(NormalFormElt, Word)> = vec![(id.clone(), Word::identity())];
        let mut seen: HashMap<NormalFormElt, ()> = HashMap::new();
        seen.insert(id, ());
        let gen_nfs: Vec<NormalFormElt> = gens.iter().map(|w| self.nf(w)).collect();
        let mut head = 0;
        while head < order.len() {
            let (cur, expr) = order[head].clone();
            for (i, g) in gen_nfs.iter().enumerate() {
                for sign in [1i8, -1] {
                    let step = if sign > 0 { g.clone() } else { self.nf_inv(g) };
                    let cand = self.nf_mul(&cur, &step);
                    if !seen.contains_key(&cand) {
                        if order.len() >= cap {
                            return None;
                        }
                        seen.insert(cand.clone(), ());
                        order.push((
                            cand,
                            expr.concat(&Word::from_letters([Letter::new(i, sign)])),
                        ));
                    }
                }
            }
            head += 1;
        }
        Some(order)
    }

    /// A finite presentation of the subgroup generated by `gens`, with
    /// relators written over the generator symbols. Used to check that a
    /// positional generator pairing extends to an isomorphism.
    pub fn subgroup_presentation(&self, gens: &[Word]) -> Result<Vec<Word>, EffError> {
        // finite subgroups: multiplication-table presentation
        if let Some(elements) = self.enumerate_subgroup(gens, FINITE_ENUM_CAP) {
            let index: HashMap<NormalFormElt, usize> = elements
                .iter()
                .enumerate()
                .map(|(i, (e, _))| (e.clone(), i))
                .collect();
            let gen_nfs: Vec<NormalFormElt> = gens.iter().map(|w| self.nf(w)).collect();
            let mut out = Vec::new();
            for (e, expr) in &elements {
                for (gi, g) in gen_nfs.iter().enumerate() {
                    let target = self.nf_mul(e, g);
                    let (_, texpr) = &elements[index[&target]];
                    let relator = expr
                        .concat(&Word::from_letters([Letter::new(gi, 1)]))
                        .concat(&texpr.inverse());
                    if !relator.is_identity() {
                        out.push(relator);
                    }
                }
            }
            out.sort();
            out.dedup();
            return Ok(out);
        }
        match &self.class {
            GroupClass::Abelian(d) => {
                let mut cols: Vec<Vector> = gens.iter().map(|w| self.abelian_vec(w)).collect();
                let k = cols.len();
                cols.extend(d.relations.iter().cloned());
                let kernel = lattice_kernel(&cols, self.alphabet.len());
                let mut commutators = Vec::new();
                for i in 0..k {
                    for j in i + 1..k {
                        commutators.push(Word::from_letters([
                            Letter::new(i, 1),
                            Letter::new(j, 1),
                            Letter::new(i, -1),
                            Letter::new(j, -1),
                        ]));
                    }
                }
                commutators.extend(kernel.iter().map(|v| vec_to_word(&v[..k])));
                commutators.retain(|w| !w.is_identity());
                Ok(commutators)
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = gens.iter().map(KleinElt::from_word).collect();
                let sub = KleinSubgroup::from_generators(&elts);
                klein_subgroup_presentation(&sub, &elts)
            }
            GroupClass::Quotient(_) => Err(EffError::Unsupported(
                "presentations of infinite subgroups of wrapped quotients".to_string(),
            )),
            GroupClass::Free { rank } => {
                if gens.iter().all(|w| w.is_identity()) {
                    return Ok((0..gens.len()).map(Word::generator).collect());
                }
                if *rank == 1 {
                    let cols: Vec<Vector> =
                        gens.iter().map(|w| vec![w.exponent_sums(1)[0]]).collect();
                    let kernel = lattice_kernel(&cols, 1);
                    return Ok(kernel
                        .iter()
                        .map(|v| vec_to_word(v))
                        .filter(|w| !w.is_identity())
                        .collect());
                }
                Err(EffError::Unsupported(
                    "presentations of infinite-rank free subgroups".to_string(),
                ))
            }
            GroupClass::Finite(_) => unreachable!("finite subgroups enumerate"),
        }
    }

    /// Generators of the verbal subgroup `⟨ h^e : h ∈ H ⟩` of the subgroup
    /// `H = ⟨h_gens⟩`. Verbal subgroups are characteristic; for the classes
    /// here the result has finite index in `H` whenever `e ≥ 1`.
    pub fn verbal_power_gens(&self, h_gens: &[Word], e: i64) -> Result<Vec<Word>, EffError> {
        assert!(e >= 1);
        // finite H: exact elementwise powers
        if let Some(elements) = self.enumerate_subgroup(h_gens, FINITE_ENUM_CAP) {
            let mut out: Vec<Word> = Vec::new();
            for (elt, _) in &elements {
                let mut p = self.nf_identity();
                for _ in 0..e {
                    p = self.nf_mul(&p, elt);
                }
                let w = self.nf_to_word(&p);
                if !self.is_identity_word(&w) {
                    out.push(w);
                }
            }
            out.sort();
            out.dedup();
            return Ok(out);
        }
        match &self.class {
            GroupClass::Abelian(_) | GroupClass::Free { .. } => {
                // abelian (and rank-one free) H: the verbal subgroup is e·H
                Ok(h_gens
                    .iter()
                    .map(|w| w.pow(e))
                    .filter(|w| !self.is_identity_word(w))
                    .collect())
            }
            GroupClass::Klein => {
                let elts: Vec<KleinElt> = h_gens.iter().map(KleinElt::from_word).collect();
                let sub = KleinSubgroup::from_generators(&elts);
                if sub.p.rem_euclid(2) == 0 {
                    // the subgroup is abelian (free abelian of rank <= 2)
                    return Ok(h_gens
                        .iter()
                        .map(|w| w.pow(e))
                        .filter(|w| !self.is_identity_word(w))
                        .collect());
                }
                // Klein-type subgroup on the canonical pair (w0, c^q):
                // even e: <w0^e, (c^q)^e>; odd e: <w0^e, c^q>
                let w0 = KleinElt::new(sub.p, sub.r);
                let cq = KleinElt::new(0, sub.q);
                let mut out = vec![w0.pow(e).to_word()];
                if sub.q > 0 {
                    out.push(if e % 2 == 0 {
                        cq.pow(e).to_word()
                    } else {
                        cq.to_word()
                    });
                }
                out.retain(|w| !self.is_identity_word(w));
                Ok(out)
            }
            GroupClass::Quotient(_) => Err(EffError::Unsupported(
                "verbal subgroups of infinite subgroups of wrapped quotients".to_string(),
            )),
            GroupClass::Finite(_) => unreachable!("finite subgroups enumerate"),
        }
    }

    /// Free rank and torsion divisors, for abelian groups.
    pub fn invariants(&self) -> Option<(usize, Vec<u64>)> {
        match &self.class {
            GroupClass::Abelian(d) => Some(lattice::quotient_invariants(
                &d.relations,
                self.alphabet.len(),
            )),
            _ => None,
        }
    }

    pub fn congruence_stream(&self) -> CongruenceStream {
        CongruenceStream {
            group: self.clone(),
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

fn klein_subgroup_presentation(
    sub: &KleinSubgroup,
    gens: &[KleinElt],
) -> Result<Vec<Word>, EffError> {
    if sub.is_trivial() {
        return Ok((0..gens.len())
            .filter(|&i| gens[i].is_identity())
            .map(Word::generator)
            .collect());
    }
    let mut out = Vec::new();
    if sub.p > 0 && sub.q > 0 {
        // relation on the canonical pair, substituted through the witnesses
        let x = sub.w0_witness.clone().expect("p > 0");
        let y = sub.c_witness.clone().expect("q > 0");
        let pair_relator = if sub.p.rem_euclid(2) == 1 {
            // x^-1 y x y = 1 (inversion under conjugation)
            x.inverse().concat(&y).concat(&x).concat(&y)
        } else {
            // commutator
            x.inverse()
                .concat(&y.inverse())
                .concat(&x)
                .concat(&y)
        };
        if !pair_relator.is_identity() {
            out.push(pair_relator);
        }
    }
    // each original generator equals its canonical-pair expression
    for (i, &g) in gens.iter().enumerate() {
        let expr = sub.express(g).expect("generators are members");
        let relator = Word::generator(i).inverse().concat(&expr);
        if !relator.is_identity() {
            out.push(relator);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// The reduction of the Klein group modulo the normal subgroup
/// `{(i,j) : 2M | i, N | j}`, realized by the right regular action on the
/// 2M·N canonical representatives.
fn klein_mod_hom(alphabet: &Alphabet, m_exp: i64, n_exp: i64) -> FiniteQuotientHom {
    let (mm, nn) = (2 * m_exp, n_exp);
    let index = |i: i64, j: i64| -> usize { (i.rem_euclid(mm) * nn + j.rem_euclid(nn)) as usize };
    let degree = (mm * nn) as usize;
    let mut a_img = vec![0usize; degree];
    let mut c_img = vec![0usize; degree];
    for i in 0..mm {
        for j in 0..nn {
            // right multiplication on normal forms: (i,j)·a = (i+1, -j),
            // (i,j)·c = (i, j+1)
            a_img[index(i, j)] = index(i + 1, -j);
            c_img[index(i, j)] = index(i, j + 1);
        }
    }
    let relator = Word::from_letters([
        Letter::new(0, -1),
        Letter::new(1, 1),
        Letter::new(0, 1),
        Letter::new(1, 1),
    ]);
    FiniteQuotientHom::new(
        alphabet.clone(),
        vec![
            Perm::from_images(a_img).expect("rotation is a bijection"),
            Perm::from_images(c_img).expect("rotation is a bijection"),
        ],
        vec![relator],
    )
}

/// Ordered stream of finite quotients of an effective group: each member is
/// a homomorphism onto a finite permutation group, image orders strictly
/// increase along the stream, and every finite quotient of the group factors
/// through some member.
#[derive(Debug, Clone)]
pub struct CongruenceStream {
    group: EffectiveGroup,
}

impl CongruenceStream {
    pub fn group(&self) -> &EffectiveGroup {
        &self.group
    }

    /// The k-th member (1-based). `None` when the stream is exhausted below
    /// `order_cap` (finite groups have a one-member stream; caps end the
    /// others).
    pub fn nth(&self, k: usize, order_cap: usize) -> Result<Option<FiniteQuotientHom>, EffError> {
        assert!(k >= 1);
        match &self.group.class {
            GroupClass::Finite(d) => {
                if k == 1 {
                    Ok(Some(FiniteQuotientHom::new(
                        self.group.alphabet.clone(),
                        d.gens.clone(),
                        self.group.defining_relators(),
                    )))
                } else {
                    Ok(None)
                }
            }
            GroupClass::Abelian(_) => {
                let mut found = 0usize;
                let mut last_order = 0usize;
                for n in 1..SEPARATION_SCAN_CAP {
                    let hom = self.group.abelian_mod_hom(n as i64);
                    let order = hom.image_group(order_cap.max(2));
                    let order = match order {
                        Ok(g) => g.order(),
                        Err(PermError::CapExceeded { .. }) => return Ok(None),
                        Err(e) => return Err(e.into()),
                    };
                    if order > order_cap {
                        return Ok(None);
                    }
                    if order > last_order {
                        last_order = order;
                        found += 1;
                        if found == k {
                            return Ok(Some(hom));
                        }
                    }
                }
                Ok(None)
            }
            GroupClass::Klein => {
                // n-th member: kernel {(i,j): 2n | i, n | j}, order 2n^2
                let n = k as i64;
                let order = 2 * n * n;
                if order as usize > order_cap {
                    return Ok(None);
                }
                Ok(Some(klein_mod_hom(&self.group.alphabet, n, n)))
            }
            GroupClass::Free { rank } => {
                let mut found = 0usize;
                let mut last_order = 0usize;
                for n in 1..12usize {
                    let hom = match free_sym_hom(&self.group.alphabet, *rank, n, order_cap) {
                        Some(h) => h,
                        None => return Ok(None),
                    };
                    let order = match hom.image_group(order_cap.max(2)) {
                        Ok(g) => g.order(),
                        Err(PermError::CapExceeded { .. }) => return Ok(None),
                        Err(e) => return Err(e.into()),
                    };
                    if order > order_cap {
                        return Ok(None);
                    }
                    if order > last_order {
                        last_order = order;
                        found += 1;
                        if found == k {
                            return Ok(Some(hom));
                        }
                    }
                }
                Ok(None)
            }
            GroupClass::Quotient(d) => {
                let base_stream = d.base.congruence_stream();
                let mut found = 0usize;
                let mut last_order = 0usize;
                for base_k in 1..SEPARATION_SCAN_CAP {
                    let theta = match base_stream.nth(base_k, order_cap)? {
                        Some(t) => t,
                        None => return Ok(None),
                    };
                    let hom = match induce_on_quotient(&self.group, d, &theta, order_cap)? {
                        Some(h) => h,
                        None => return Ok(None),
                    };
                    let order = match hom.image_group(order_cap.max(2)) {
                        Ok(g) => g.order(),
                        Err(PermError::CapExceeded { .. }) => continue,
                        Err(e) => return Err(e.into()),
                    };
                    if order > order_cap {
                        continue;
                    }
                    if order > last_order {
                        last_order = order;
                        found += 1;
                        if found == k {
                            return Ok(Some(hom));
                        }
                    }
                }
                Ok(None)
            }
        }
    }
}

/// Quotient of the free group of the given rank by the intersection of the
/// kernels of all homomorphisms into symmetric groups of degree at most n:
/// the block-diagonal permutation built from every such homomorphism.
fn free_sym_hom(
    alphabet: &Alphabet,
    rank: usize,
    n: usize,
    degree_cap: usize,
) -> Option<FiniteQuotientHom> {
    let mut blocks: Vec<Vec<Perm>> = Vec::new(); // per hom, images of the rank gens
    for d in 1..=n {
        let sym = all_perms(d);
        // every rank-tuple of elements of Sym(d)
        let mut tuple_idx = vec![0usize; rank];
        loop {
            blocks.push(tuple_idx.iter().map(|&i| sym[i].clone()).collect());
            // advance the mixed-radix counter
            let mut pos = 0;
            loop {
                if pos == rank {
                    break;
                }
                tuple_idx[pos] += 1;
                if tuple_idx[pos] < sym.len() {
                    break;
                }
                tuple_idx[pos] = 0;
                pos += 1;
            }
            if pos == rank {
                break;
            }
        }
        if rank == 0 {
            break;
        }
    }
    let degree: usize = blocks.iter().map(|b| b.first().map(|p| p.degree()).unwrap_or(1)).sum();
    if degree == 0 || degree > degree_cap {
        return None;
    }
    let mut images = Vec::with_capacity(rank);
    for g in 0..rank {
        let mut img = Vec::with_capacity(degree);
        let mut offset = 0usize;
        for block in &blocks {
            let p = &block[g];
            for x in 0..p.degree() {
                img.push(offset + p.apply(x));
            }
            offset += p.degree();
        }
        images.push(Perm::from_images(img).expect("block diagonal of permutations"));
    }
    Some(FiniteQuotientHom::new(alphabet.clone(), images, Vec::new()))
}

fn all_perms(degree: usize) -> Vec<Perm> {
    fn heap(args: &mut Vec<usize>, k: usize, out: &mut Vec<Perm>) {
        if k <= 1 {
            out.push(Perm::from_images(args.clone()).expect("permutation by construction"));
            return;
        }
        for i in 0..k {
            heap(args, k - 1, out);
            if k % 2 == 0 {
                args.swap(i, k - 1);
            } else {
                args.swap(0, k - 1);
            }
        }
    }
    let mut args: Vec<usize> = (0..degree).collect();
    let mut out = Vec::new();
    heap(&mut args, degree, &mut out);
    out.sort();
    out.dedup();
    out
}

/// Push a finite quotient of the Klein base down to the wrapped quotient
/// group: kill the normal closure of the kernel generators' images by the
/// coset action of the image on it.
fn induce_on_quotient(
    quotient: &EffectiveGroup,
    d: &QuotientData,
    theta: &FiniteQuotientHom,
    order_cap: usize,
) -> Result<Option<FiniteQuotientHom>, EffError> {
    let ambient = match theta.image_group(order_cap.max(2)) {
        Ok(g) => g,
        Err(PermError::CapExceeded { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    // conjugation-saturate the kernel generator images
    let mut closure_set: Vec<Perm> = Vec::new();
    let mut pending: Vec<Perm> = d.n_gens.iter().map(|w| theta.eval(w)).collect();
    while let Some(p) = pending.pop() {
        if closure_set.contains(&p) {
            continue;
        }
        for g in ambient.generators() {
            for conj in [
                g.inverse().compose(&p).and_then(|x| x.compose(g)),
                g.compose(&p).and_then(|x| x.compose(&g.inverse())),
            ] {
                pending.push(conj.expect("common degree"));
            }
        }
        closure_set.push(p);
    }
    let action = match permgrp::coset_action(&ambient, &closure_set, order_cap.max(2)) {
        Ok(a) => a,
        Err(PermError::IndexCapExceeded { .. }) | Err(PermError::CapExceeded { .. }) => {
            return Ok(None)
        }
        Err(e) => return Err(e.into()),
    };
    let hom = FiniteQuotientHom::new(
        quotient.alphabet.clone(),
        action,
        quotient.defining_relators(),
    );
    debug_assert!(d.n_gens.iter().all(|w| hom.eval(w).is_identity()));
    Ok(Some(hom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presentations::parse_word;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn z2() -> EffectiveGroup {
        EffectiveGroup::abelian_free(Alphabet::new(["a", "c"]).unwrap())
    }

    fn kg() -> EffectiveGroup {
        EffectiveGroup::klein(Alphabet::new(["a", "c"]).unwrap())
    }

    fn f2() -> EffectiveGroup {
        EffectiveGroup::free(Alphabet::new(["x", "y"]).unwrap())
    }

    fn w(g: &EffectiveGroup, text: &str) -> Word {
        parse_word(text, &g.alphabet).unwrap()
    }

    #[test]
    fn nf_examples() {
        let g = kg();
        assert_eq!(
            g.nf(&w(&g, "a c a c")),
            NormalFormElt::Klein(KleinElt::new(2, 0))
        );
        let g = z2();
        assert_eq!(
            g.nf(&w(&g, "a^-1 c^2 a")),
            NormalFormElt::Abelian(vec![0, 2])
        );
        let g = f2();
        assert_eq!(g.nf(&w(&g, "x y y^-1")), NormalFormElt::Free(w(&g, "x")));
    }

    fn random_word(rng: &mut ChaCha8Rng, n: usize, max_len: usize) -> Word {
        let len = rng.gen_range(0..=max_len);
        Word::from_letters((0..len).map(|_| {
            Letter::new(rng.gen_range(0..n), if rng.gen_bool(0.5) { 1 } else { -1 })
        }))
    }

    #[test]
    fn nf_is_multiplicative_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let torsion = EffectiveGroup::abelian(
            Alphabet::new(["a", "c", "t"]).unwrap(),
            vec![vec![0, 0, 4]],
        );
        let fin = EffectiveGroup::finite(
            Alphabet::new(["s", "r"]).unwrap(),
            vec![
                Perm::from_images(vec![1, 0, 2]).unwrap(),
                Perm::from_images(vec![0, 2, 1]).unwrap(),
            ],
        )
        .unwrap();
        let kq = kg().quotient_by_fg_normal(&[w(&kg(), "c^3")]).unwrap();
        for g in [z2(), kg(), f2(), torsion, fin, kq] {
            for _ in 0..500 {
                let w1 = random_word(&mut rng, g.alphabet.len(), 6);
                let w2 = random_word(&mut rng, g.alphabet.len(), 6);
                let lhs = g.nf(&w1.concat(&w2));
                let rhs = g.nf_mul(&g.nf(&w1), &g.nf(&w2));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn nf_to_word_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let kq = kg().quotient_by_fg_normal(&[w(&kg(), "c^3")]).unwrap();
        for g in [z2(), kg(), f2(), kq] {
            for _ in 0..100 {
                let word = random_word(&mut rng, g.alphabet.len(), 6);
                let nf = g.nf(&word);
                assert_eq!(g.nf(&g.nf_to_word(&nf)), nf);
            }
        }
    }

    #[test]
    fn member_examples() {
        let g = z2();
        let gens = [w(&g, "a^2"), w(&g, "c^3")];
        assert!(!g.member(&gens, &w(&g, "a")).unwrap());
        assert!(g.member(&gens, &w(&g, "a^2 c^3")).unwrap());
        let k = kg();
        assert!(!k.member(&[w(&k, "c^2")], &w(&k, "c")).unwrap());
        assert!(k.member(&[w(&k, "c^2")], &w(&k, "c^-4")).unwrap());
    }

    /// Breadth-first enumeration oracle over normal forms.
    fn ball(g: &EffectiveGroup, gens: &[Word], depth: usize) -> Vec<NormalFormElt> {
        let mut seen = vec![g.nf_identity()];
        let mut frontier = seen.clone();
        let gen_nfs: Vec<NormalFormElt> = gens.iter().map(|x| g.nf(x)).collect();
        for _ in 0..depth {
            let mut next = Vec::new();
            for u in &frontier {
                for ge in &gen_nfs {
                    for cand in [g.nf_mul(u, ge), g.nf_mul(u, &g.nf_inv(ge))] {
                        if !seen.contains(&cand) {
                            seen.push(cand.clone());
                            next.push(cand);
                        }
                    }
                }
            }
            frontier = next;
        }
        seen
    }

    #[test]
    fn member_agrees_with_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let fin = EffectiveGroup::finite(
            Alphabet::new(["s", "r"]).unwrap(),
            vec![
                Perm::from_images(vec![1, 0, 2]).unwrap(),
                Perm::from_images(vec![0, 2, 1]).unwrap(),
            ],
        )
        .unwrap();
        let torsion = EffectiveGroup::abelian(
            Alphabet::new(["a", "t"]).unwrap(),
            vec![vec![0, 6]],
        );
        let kq = kg().quotient_by_fg_normal(&[w(&kg(), "c^4")]).unwrap();
        for g in [z2(), kg(), f2(), fin, torsion, kq] {
            for _ in 0..8 {
                let gens: Vec<Word> = (0..2)
                    .map(|_| random_word(&mut rng, g.alphabet.len(), 4))
                    .collect();
                let members = ball(&g, &gens, 8);
                // everything the oracle reaches is a member
                for m in members.iter().take(60) {
                    assert!(g.member(&gens, &g.nf_to_word(m)).unwrap());
                }
            }
        }
    }

    #[test]
    fn express_substitutes_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let kq = kg().quotient_by_fg_normal(&[w(&kg(), "c^4")]).unwrap();
        for g in [z2(), kg(), f2(), kq] {
            for _ in 0..10 {
                let gens: Vec<Word> = (0..2)
                    .map(|_| random_word(&mut rng, g.alphabet.len(), 3))
                    .collect();
                // a random product of the generators
                let mut prod = Word::identity();
                for _ in 0..rng.gen_range(0..5) {
                    let i = rng.gen_range(0..gens.len());
                    prod = if rng.gen_bool(0.5) {
                        prod.concat(&gens[i])
                    } else {
                        prod.concat(&gens[i].inverse())
                    };
                }
                let expr = g
                    .express(&gens, &prod)
                    .unwrap()
                    .expect("products of generators are members");
                assert_eq!(g.nf(&substitute(&expr, &gens)), g.nf(&prod));
            }
        }
    }

    #[test]
    fn separate_abelian_example() {
        // separating (1,0) from <(2,0),(0,3)>: the smallest modulus is 2,
        // confirmed by the lattice oracle, giving the order-4 quotient
        let g = z2();
        let gens = [w(&g, "a^2"), w(&g, "c^3")];
        let target = w(&g, "a");
        let hom = g.separate(&gens, &target).unwrap();
        let image = hom.image_group(1000).unwrap();
        assert_eq!(image.order(), 4);
        // the homomorphism genuinely separates
        let sub = closure(
            hom.degree(),
            &gens.iter().map(|x| hom.eval(x)).collect::<Vec<_>>(),
            1000,
        )
        .unwrap();
        assert!(!sub.contains(&hom.eval(&target)));
        assert!(permgrp::check_hom(&g.defining_relators(), &hom));
    }

    #[test]
    fn separate_klein_example() {
        // separating c from <c^2> takes the order-4 quotient killing a^2, c^2
        let g = kg();
        let hom = g.separate(&[w(&g, "c^2")], &w(&g, "c")).unwrap();
        assert_eq!(hom.degree(), 4);
        assert!(hom.eval(&w(&g, "a^2")).is_identity());
        assert!(hom.eval(&w(&g, "c^2")).is_identity());
        assert!(!hom.eval(&w(&g, "c")).is_identity());
        assert!(permgrp::check_hom(&g.defining_relators(), &hom));
    }

    #[test]
    fn separate_free_via_stallings() {
        let g = f2();
        let hom = g.separate(&[w(&g, "x^2"), w(&g, "y")], &w(&g, "x")).unwrap();
        assert_eq!(hom.degree(), 2);
    }

    #[test]
    fn separate_rejects_members() {
        let g = z2();
        assert_eq!(
            g.separate(&[w(&g, "a")], &w(&g, "a^3")),
            Err(EffError::MemberViolation)
        );
    }

    #[test]
    fn separate_property_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let kq = kg().quotient_by_fg_normal(&[w(&kg(), "c^5")]).unwrap();
        for g in [z2(), kg(), kq] {
            let mut done = 0;
            while done < 10 {
                let gens: Vec<Word> = (0..2)
                    .map(|_| random_word(&mut rng, g.alphabet.len(), 4))
                    .collect();
                let target = random_word(&mut rng, g.alphabet.len(), 4);
                if g.member(&gens, &target).unwrap() {
                    continue;
                }
                let hom = g.separate(&gens, &target).unwrap();
                let sub = closure(
                    hom.degree(),
                    &gens.iter().map(|x| hom.eval(x)).collect::<Vec<_>>(),
                    100_000,
                )
                .unwrap();
                assert!(!sub.contains(&hom.eval(&target)));
                assert!(permgrp::check_hom(&g.defining_relators(), &hom));
                done += 1;
            }
        }
    }

    #[test]
    fn quotient_examples() {
        // Z^2 / <c> is free abelian of rank 1
        let g = z2();
        let q = g.quotient_by_fg_normal(&[w(&g, "c")]).unwrap();
        assert_eq!(q.invariants(), Some((1, vec![])));
        // Z^2 / <c^2> is Z x Z_2 (column-reduction oracle: diag(1) free + 2)
        let q = g.quotient_by_fg_normal(&[w(&g, "c^2")]).unwrap();
        assert_eq!(q.invariants(), Some((1, vec![2])));
        // klein / <c> is infinite cyclic on a
        let k = kg();
        let q = k.quotient_by_fg_normal(&[w(&k, "c")]).unwrap();
        assert_eq!(q.invariants(), Some((1, vec![])));
        assert!(q.is_identity_word(&w(&q, "c")));
        assert!(!q.is_identity_word(&w(&q, "a")));
        // klein / <c^2> is Z x Z_2
        let q = k.quotient_by_fg_normal(&[w(&k, "c^2")]).unwrap();
        assert_eq!(q.invariants(), Some((1, vec![2])));
        // klein / <a^2, c> is finite of order 2
        let q = k
            .quotient_by_fg_normal(&[w(&k, "a^2"), w(&k, "c")])
            .unwrap();
        match &q.class {
            GroupClass::Finite(d) => assert_eq!(d.group.order(), 2),
            other => panic!("expected finite class, got {other:?}"),
        }
        // klein / <c^3> stays wrapped (infinite, nonabelian)
        let q = k.quotient_by_fg_normal(&[w(&k, "c^3")]).unwrap();
        assert!(matches!(q.class, GroupClass::Quotient(_)));
        assert!(q.is_identity_word(&w(&q, "c^3")));
        assert!(!q.is_identity_word(&w(&q, "c")));
    }

    #[test]
    fn quotient_rejects_non_normal() {
        let k = kg();
        // <a> is not normal in the klein group: c^-1 a c = a c^2
        assert!(matches!(
            k.quotient_by_fg_normal(&[w(&k, "a")]),
            Err(EffError::NotNormal)
        ));
    }

    #[test]
    fn lemma_round_trip_quotient_separation() {
        // separation in G/N of (M/N, aN) succeeds exactly when separation of
        // the lifted data succeeds in G, and the quotient's homomorphism
        // kills N
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut checked = 0;
        while checked < 20 {
            let base: EffectiveGroup = if rng.gen_bool(0.5) { z2() } else { kg() };
            let n_gens = vec![random_word(&mut rng, 2, 3)];
            if !base.is_normal_subgroup(&n_gens).unwrap() {
                continue;
            }
            let quot = match base.quotient_by_fg_normal(&n_gens) {
                Ok(q) => q,
                Err(_) => continue,
            };
            let m_gens: Vec<Word> = (0..2).map(|_| random_word(&mut rng, 2, 3)).collect();
            let a = random_word(&mut rng, 2, 4);
            let mut lifted = m_gens.clone();
            lifted.extend(n_gens.iter().cloned());
            let base_member = base.member(&lifted, &a).unwrap();
            let quot_member = quot.member(&m_gens, &a).unwrap();
            assert_eq!(base_member, quot_member);
            if base_member {
                continue;
            }
            let base_hom = base.separate(&lifted, &a).unwrap();
            let quot_hom = quot.separate(&m_gens, &a).unwrap();
            // both succeed; the quotient hom kills N
            for n in &n_gens {
                assert!(quot_hom.eval(n).is_identity());
            }
            let _ = base_hom;
            checked += 1;
        }
    }

    #[test]
    fn coset_decompose_examples() {
        let g = z2();
        // H = <c>: (3,5) = (0,5)·(3,0)
        let (h, rep) = g.coset_decompose(&[w(&g, "c")], &w(&g, "a^3 c^5")).unwrap();
        assert_eq!(g.nf(&h), NormalFormElt::Abelian(vec![0, 5]));
        assert_eq!(rep, NormalFormElt::Abelian(vec![3, 0]));
        // members decompose with trivial representative
        let (h, rep) = g.coset_decompose(&[w(&g, "c")], &w(&g, "c^2")).unwrap();
        assert_eq!(rep, g.nf_identity());
        assert_eq!(g.nf(&h), g.nf(&w(&g, "c^2")));
        // klein, H = <c>: a^2 c^3 = c^3 · a^2
        let k = kg();
        let (h, rep) = k.coset_decompose(&[w(&k, "c")], &w(&k, "a^2 c^3")).unwrap();
        assert_eq!(k.nf(&h), NormalFormElt::Klein(KleinElt::new(0, 3)));
        assert_eq!(rep, NormalFormElt::Klein(KleinElt::new(2, 0)));
        // h · rep reassembles the element
        let reassembled = h.concat(&k.nf_to_word(&rep));
        assert_eq!(k.nf(&reassembled), k.nf(&w(&k, "a^2 c^3")));
    }

    #[test]
    fn coset_representative_is_coset_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for g in [z2(), kg()] {
            let h_gens = vec![w(&g, "c^2")];
            for _ in 0..40 {
                let x = random_word(&mut rng, 2, 5);
                let (h, rep) = g.coset_decompose(&h_gens, &x).unwrap();
                // x = h·rep and h in H
                assert!(g.member(&h_gens, &h).unwrap());
                let reassembled = h.concat(&g.nf_to_word(&rep));
                assert_eq!(g.nf(&reassembled), g.nf(&x));
                // multiplying on the left by subgroup elements keeps rep
                let shifted = w(&g, "c^2").concat(&x);
                let (_, rep2) = g.coset_decompose(&h_gens, &shifted).unwrap();
                assert_eq!(rep2, rep);
            }
        }
    }

    #[test]
    fn intersect_with_normal_examples() {
        let g = z2();
        // U = <a>, H = <c>: trivial intersection (lattice oracle)
        let v = g
            .intersect_with_normal(&[w(&g, "a")], &[w(&g, "c")], 3, 40)
            .unwrap();
        assert!(v.is_empty());
        // U = <(2,2)>, H = <c>: no nonzero multiple of (2,2) is vertical
        let v = g
            .intersect_with_normal(&[w(&g, "a^2 c^2")], &[w(&g, "c")], 3, 40)
            .unwrap();
        assert!(v.is_empty());
        // U containing H explicitly: the intersection is all of H
        let v = g
            .intersect_with_normal(&[w(&g, "c"), w(&g, "a^2")], &[w(&g, "c")], 3, 40)
            .unwrap();
        assert_eq!(
            g.subgroup_canonical(&v).unwrap(),
            g.subgroup_canonical(&[w(&g, "c")]).unwrap()
        );
        // a diagonal intersection: U = <(1,2)>, H = <c> meets in nothing,
        // but U = <(0,4),(2,0)> meets <c> in <c^4>
        let v = g
            .intersect_with_normal(&[w(&g, "c^4"), w(&g, "a^2")], &[w(&g, "c")], 3, 40)
            .unwrap();
        assert_eq!(
            g.subgroup_canonical(&v).unwrap(),
            g.subgroup_canonical(&[w(&g, "c^4")]).unwrap()
        );
    }

    #[test]
    fn congruence_stream_abelian_z() {
        let g = EffectiveGroup::abelian_free(Alphabet::new(["x"]).unwrap());
        let stream = g.congruence_stream();
        // orders 1, 2, 3, ... strictly increasing
        let mut last = 0;
        for k in 1..=6 {
            let hom = stream.nth(k, 10_000).unwrap().unwrap();
            let order = hom.image_group(10_000).unwrap().order();
            assert_eq!(order, k);
            assert!(order > last);
            last = order;
        }
    }

    #[test]
    fn congruence_stream_finite_single() {
        let fin = EffectiveGroup::finite(
            Alphabet::new(["s"]).unwrap(),
            vec![Perm::from_images(vec![1, 0]).unwrap()],
        )
        .unwrap();
        let stream = fin.congruence_stream();
        assert!(stream.nth(1, 1000).unwrap().is_some());
        assert!(stream.nth(2, 1000).unwrap().is_none());
    }

    #[test]
    fn congruence_stream_klein_orders() {
        let stream = kg().congruence_stream();
        // n-th member has order 2n^2; n = 2 gives the order-8 quotient
        let hom = stream.nth(2, 10_000).unwrap().unwrap();
        assert_eq!(hom.image_group(10_000).unwrap().order(), 8);
        assert!(hom.eval(&w(&kg(), "a^4")).is_identity());
        assert!(hom.eval(&w(&kg(), "c^2")).is_identity());
        assert!(!hom.eval(&w(&kg(), "c")).is_identity());
        // kernels shrink along the divisibility-ordered subsequence
        let h2 = stream.nth(2, 10_000).unwrap().unwrap();
        let h4 = stream.nth(4, 10_000).unwrap().unwrap();
        // every word killed by the n=4 member of the a^2n/c^n family whose
        // kernel is contained in the n=2 one: check on the generators of the
        // n=4 kernel
        for text in ["a^8", "c^4"] {
            assert!(h4.eval(&w(&kg(), text)).is_identity());
        }
        for text in ["a^4", "c^2"] {
            assert!(h2.eval(&w(&kg(), text)).is_identity());
        }
    }

    #[test]
    fn klein_stream_is_cofinal_up_to_order_200() {
        // brute-force enumeration of the finite-index normal subgroups M of
        // the Klein group with index <= 200: each is determined by the
        // minimal positive a-exponent p (with c-part r) and the c-part index
        // k, subject to the normality constraints k | 2r and, for odd p,
        // k | 2. The stream member with kernel {(i,j): 2n|i, n|j} must land
        // inside M for some n.
        let mut checked = 0;
        for p in 1i64..=200 {
            for k in 1i64..=(200 / p) {
                for r in 0..k {
                    if (2 * r) % k != 0 {
                        continue;
                    }
                    if p % 2 == 1 && k > 2 {
                        continue;
                    }
                    let m = KleinSubgroup::from_generators(&[
                        KleinElt::new(p, r),
                        KleinElt::new(0, k),
                    ]);
                    if m.finite_index() != Some(p * k) {
                        continue;
                    }
                    // normality double check via the group
                    let gens = vec![KleinElt::new(p, r).to_word(), KleinElt::new(0, k).to_word()];
                    if !kg().is_normal_subgroup(&gens).unwrap() {
                        continue;
                    }
                    let mut found = false;
                    for n in 1..=(2 * p * k) {
                        let lambda_in_m = m.contains(KleinElt::new(2 * n, 0))
                            && m.contains(KleinElt::new(0, n));
                        if lambda_in_m {
                            found = true;
                            break;
                        }
                    }
                    assert!(found, "no stream kernel inside M with p={p} r={r} k={k}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 100, "enumeration exercised {checked} subgroups");
    }

    #[test]
    fn subgroup_presentation_detects_isomorphism_mismatch() {
        // Z relation-check: <c> in Z^2 has no relations; <c> in Z x Z_2
        // torsion part has c^2 = 1
        let g = z2();
        let pres = g.subgroup_presentation(&[w(&g, "c")]).unwrap();
        assert!(pres.is_empty());
        let t = EffectiveGroup::abelian(Alphabet::new(["a", "c"]).unwrap(), vec![vec![0, 2]]);
        let pres_t = t.subgroup_presentation(&[w(&t, "c")]).unwrap();
        assert!(!pres_t.is_empty());
        // the torsion relation fails in the torsion-free side
        for relator in &pres_t {
            let image = substitute(relator, &[w(&g, "c")]);
            assert!(!g.is_identity_word(&image));
        }
    }

    #[test]
    fn verbal_power_gens_examples() {
        // abelian H: e·H
        let g = z2();
        let t = g.verbal_power_gens(&[w(&g, "c")], 2).unwrap();
        assert_eq!(
            g.subgroup_canonical(&t).unwrap(),
            g.subgroup_canonical(&[w(&g, "c^2")]).unwrap()
        );
        // klein-type subgroup: the whole group with e = 2 gives <a^2, c^2>
        let k = kg();
        let t = k
            .verbal_power_gens(&[w(&k, "a"), w(&k, "c")], 2)
            .unwrap();
        assert_eq!(
            k.subgroup_canonical(&t).unwrap(),
            k.subgroup_canonical(&[w(&k, "a^2"), w(&k, "c^2")]).unwrap()
        );
        // squares of arbitrary elements really land in it
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..50 {
            let x = random_word(&mut rng, 2, 5);
            let sq = x.concat(&x);
            assert!(k.member(&t, &sq).unwrap());
        }
        // odd exponent pulls in the full c-part
        let t3 = k
            .verbal_power_gens(&[w(&k, "a"), w(&k, "c")], 3)
            .unwrap();
        for _ in 0..50 {
            let x = random_word(&mut rng, 2, 5);
            let cube = x.concat(&x).concat(&x);
            assert!(k.member(&t3, &cube).unwrap());
        }
    }

    #[test]
    fn quotient_stream_kills_kernel() {
        let k = kg();
        let q = k.quotient_by_fg_normal(&[w(&k, "c^3")]).unwrap();
        let stream = q.congruence_stream();
        for idx in 1..=3 {
            if let Some(hom) = stream.nth(idx, 50_000).unwrap() {
                assert!(hom.eval(&w(&q, "c^3")).is_identity());
                assert!(permgrp::check_hom(&q.defining_relators(), &hom));
            }
        }
    }
}
