//! Amalgams of two finite groups along a common subgroup: coset normal
//! forms, the injective finite quotient built from the permutational
//! product, the free kernel of that quotient together with an explicit free
//! basis and rewriting into it, and exact membership/separation for
//! finitely generated subgroups.
//!
//! The free kernel machinery runs on the quotient graph of the action on
//! the associated tree: vertices are image cosets of the two factors, edges
//! are image cosets of the amalgamated subgroup, and a spanning tree of
//! this finite graph yields one free generator per leftover edge. No
//! presentation of the kernel is ever constructed; every kernel computation
//! happens in the basis alphabet.

use std::collections::HashMap;

use thiserror::Error;

use crate::certificates::Certificate;
use crate::permgrp::{
    self, closure, left_transversal, permutational_product, CommonSubgroup, FinGroup,
    FiniteQuotientHom, Perm, PermError,
};
use crate::presentations::{Alphabet, Letter, Word};
use crate::stallings;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FinAmalgamError {
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error("common subgroup pairs do not form matching subgroups: {0}")]
    BadCommonSubgroup(String),
    #[error("kernel rank mismatch: counted {counted}, Euler characteristic gives {expected}")]
    RankMismatch { counted: usize, expected: i64 },
    #[error("word does not lie in the kernel of the finite quotient")]
    NotKernelWord,
    #[error("separation requested for a member element")]
    MemberViolation,
    #[error("coset enumeration exceeded cap {0}")]
    IndexCap(usize),
}

/// An amalgam of two finite permutation groups. The alphabet concatenates
/// P's generator names and Q's; the common subgroup is a list of matched
/// element pairs forming isomorphic subgroups of the two factors.
#[derive(Debug, Clone)]
pub struct FiniteAmalgam {
    pub alphabet: Alphabet,
    pub p: FinGroup,
    pub q: FinGroup,
    pub w_pairs: Vec<(Perm, Perm)>,
    p_gen_count: usize,
    // decomposition tables: element -> (W pair index, canonical right-coset
    // representative element index), per factor
    p_decomp: Vec<(usize, usize)>,
    q_decomp: Vec<(usize, usize)>,
    // W pair composition table
    w_mul: Vec<Vec<usize>>,
    // canonical factor words per element, over the combined alphabet
    p_words: Vec<Word>,
    q_words: Vec<Word>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    P,
    Q,
}

/// Coset normal form of an amalgam element: a leading amalgamated-subgroup
/// part followed by alternating nontrivial coset representatives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AmalgamElt {
    w: usize,
    syllables: Vec<(Side, usize)>,
}

impl AmalgamElt {
    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }

    pub fn is_identity(&self) -> bool {
        self.w == 0 && self.syllables.is_empty()
    }

    pub fn factor_tags(&self) -> Vec<Side> {
        self.syllables.iter().map(|(s, _)| *s).collect()
    }
}

fn decomposition_table(group: &FinGroup, w_side: &[Perm]) -> Result<Vec<(usize, usize)>, String> {
    let w_index: HashMap<&Perm, usize> = w_side.iter().enumerate().map(|(i, p)| (p, i)).collect();
    if w_index.len() != w_side.len() {
        return Err("duplicate W elements".to_string());
    }
    let mut table = Vec::with_capacity(group.order());
    for e in group.elements() {
        // canonical representative of W·e: the least element of the coset in
        // enumeration order
        let mut rep_idx = usize::MAX;
        for w in w_side {
            let we = w.compose(e).expect("common degree");
            let idx = group
                .element_index(&we)
                .ok_or_else(|| "W element outside the factor".to_string())?;
            rep_idx = rep_idx.min(idx);
        }
        let rep = &group.elements()[rep_idx];
        let w_part = e.compose(&rep.inverse()).expect("common degree");
        let w_idx = *w_index
            .get(&w_part)
            .ok_or_else(|| "coset decomposition escaped W".to_string())?;
        table.push((w_idx, rep_idx));
    }
    Ok(table)
}

impl FiniteAmalgam {
    pub fn new(
        alphabet: Alphabet,
        p_gens: Vec<Perm>,
        q_gens: Vec<Perm>,
        w_pairs: Vec<(Perm, Perm)>,
    ) -> Result<Self, FinAmalgamError> {
        let p_gen_count = p_gens.len();
        assert_eq!(alphabet.len(), p_gens.len() + q_gens.len());
        let p_degree = p_gens.first().map(|g| g.degree()).unwrap_or(1);
        let q_degree = q_gens.first().map(|g| g.degree()).unwrap_or(1);
        let p = closure(p_degree, &p_gens, permgrp::DEFAULT_ELEMENT_CAP)?;
        let q = closure(q_degree, &q_gens, permgrp::DEFAULT_ELEMENT_CAP)?;
        // saturate the matched pairs into the full common subgroup
        let mut w_pairs = w_pairs;
        let id_pair = (Perm::identity(p_degree), Perm::identity(q_degree));
        if !w_pairs.contains(&id_pair) {
            w_pairs.insert(0, id_pair);
        }
        loop {
            let mut grew = false;
            let snapshot = w_pairs.clone();
            for (a1, b1) in &snapshot {
                let inv = (a1.inverse(), b1.inverse());
                if !w_pairs.contains(&inv) {
                    w_pairs.push(inv);
                    grew = true;
                }
                for (a2, b2) in &snapshot {
                    let prod = (a1.compose(a2)?, b1.compose(b2)?);
                    if !w_pairs.contains(&prod) {
                        if w_pairs.len() > permgrp::DEFAULT_ELEMENT_CAP {
                            return Err(FinAmalgamError::BadCommonSubgroup(
                                "pair closure exceeded the element cap".to_string(),
                            ));
                        }
                        w_pairs.push(prod);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        // identity pair must be first so that W-index 0 is the identity
        w_pairs.sort_by_key(|(a, _)| !a.is_identity());
        let common = CommonSubgroup {
            pairs: w_pairs.clone(),
        };
        // validation: subgroup, bijection, isomorphism
        permutational_product(
            &p,
            &q,
            &common,
            &left_transversal(&p, &w_side(&w_pairs, Side::P)),
            &left_transversal(&q, &w_side(&w_pairs, Side::Q)),
        )
        .map_err(|e| FinAmalgamError::BadCommonSubgroup(e.to_string()))?;

        let p_decomp = decomposition_table(&p, &w_side(&w_pairs, Side::P))
            .map_err(FinAmalgamError::BadCommonSubgroup)?;
        let q_decomp = decomposition_table(&q, &w_side(&w_pairs, Side::Q))
            .map_err(FinAmalgamError::BadCommonSubgroup)?;

        let pair_index: HashMap<Perm, usize> = w_pairs
            .iter()
            .enumerate()
            .map(|(i, (a, _))| (a.clone(), i))
            .collect();
        let mut w_mul = vec![vec![0usize; w_pairs.len()]; w_pairs.len()];
        for (i, (a, _)) in w_pairs.iter().enumerate() {
            for (j, (b, _)) in w_pairs.iter().enumerate() {
                let ab = a.compose(b).expect("common degree");
                w_mul[i][j] = *pair_index
                    .get(&ab)
                    .expect("pairs validated closed under products");
            }
        }

        let p_words = factor_words(&p, 0);
        let q_words = factor_words(&q, p_gen_count);

        Ok(FiniteAmalgam {
            alphabet,
            p,
            q,
            w_pairs,
            p_gen_count,
            p_decomp,
            q_decomp,
            w_mul,
            p_words,
            q_words,
        })
    }

    pub fn side_of(&self, sym: usize) -> Side {
        if sym < self.p_gen_count {
            Side::P
        } else {
            Side::Q
        }
    }

    fn factor(&self, side: Side) -> &FinGroup {
        match side {
            Side::P => &self.p,
            Side::Q => &self.q,
        }
    }

    fn decomp(&self, side: Side, elt_idx: usize) -> (usize, usize) {
        match side {
            Side::P => self.p_decomp[elt_idx],
            Side::Q => self.q_decomp[elt_idx],
        }
    }

    fn pair_component(&self, pair_idx: usize, side: Side) -> &Perm {
        match side {
            Side::P => &self.w_pairs[pair_idx].0,
            Side::Q => &self.w_pairs[pair_idx].1,
        }
    }

    fn gen_elt(&self, sym: usize, sign: i8) -> (Side, usize) {
        let side = self.side_of(sym);
        let group = self.factor(side);
        let g = match side {
            Side::P => group.generators()[sym].clone(),
            Side::Q => group.generators()[sym - self.p_gen_count].clone(),
        };
        let g = if sign > 0 { g } else { g.inverse() };
        (side, group.element_index(&g).expect("generator closure"))
    }

    pub fn identity_elt(&self) -> AmalgamElt {
        AmalgamElt {
            w: 0,
            syllables: Vec::new(),
        }
    }

    /// Multiply on the right by a factor element, maintaining the normal
    /// form: combine with the last syllable when the sides match, otherwise
    /// start a new syllable, and push the emerging amalgamated part to the
    /// front through the earlier syllables.
    fn mul_factor(&self, elt: &AmalgamElt, side: Side, x_idx: usize) -> AmalgamElt {
        let group = self.factor(side);
        let mut syllables = elt.syllables.clone();
        let carry_start;
        let mut carry;
        match syllables.last() {
            Some(&(last_side, rep_idx)) if last_side == side => {
                let y = group.elements()[rep_idx]
                    .compose(&group.elements()[x_idx])
                    .expect("common degree");
                let y_idx = group.element_index(&y).expect("closed");
                let (w_idx, new_rep) = self.decomp(side, y_idx);
                if new_rep == 0 {
                    syllables.pop();
                } else {
                    syllables.last_mut().expect("nonempty").1 = new_rep;
                }
                carry = w_idx;
                carry_start = syllables.len().saturating_sub(if new_rep == 0 { 0 } else { 1 });
            }
            _ => {
                let (w_idx, rep) = self.decomp(side, x_idx);
                if rep != 0 {
                    syllables.push((side, rep));
                }
                carry = w_idx;
                carry_start = syllables.len().saturating_sub(if rep == 0 { 0 } else { 1 });
            }
        }
        // move the carry left across the remaining syllables: rewrite
        // s_j · w  as  w' · s_j'
        for j in (0..carry_start).rev() {
            if carry == 0 {
                break;
            }
            let (sj_side, sj_idx) = syllables[j];
            let sj_group = self.factor(sj_side);
            let cw = self.pair_component(carry, sj_side);
            let y = sj_group.elements()[sj_idx]
                .compose(cw)
                .expect("common degree");
            let y_idx = sj_group.element_index(&y).expect("closed");
            let (w_idx, new_rep) = self.decomp(sj_side, y_idx);
            debug_assert_ne!(new_rep, 0, "coset representative cannot fall into W");
            syllables[j].1 = new_rep;
            carry = w_idx;
        }
        AmalgamElt {
            w: self.w_mul[elt.w][carry],
            syllables,
        }
    }

    pub fn mul_letter(&self, elt: &AmalgamElt, letter: Letter) -> AmalgamElt {
        let (side, idx) = self.gen_elt(letter.sym, letter.sign);
        self.mul_factor(elt, side, idx)
    }

    /// Canonical normal form of a word over the combined alphabet.
    pub fn elt_from_word(&self, w: &Word) -> AmalgamElt {
        let mut out = self.identity_elt();
        for l in w.letters() {
            out = self.mul_letter(&out, *l);
        }
        out
    }

    pub fn mul_elts(&self, a: &AmalgamElt, b: &AmalgamElt) -> AmalgamElt {
        let mut out = a.clone();
        // multiply by b written out as w · syllables
        if b.w != 0 {
            let wp = self.pair_component(b.w, Side::P).clone();
            let idx = self.p.element_index(&wp).expect("closed");
            out = self.mul_factor(&out, Side::P, idx);
        }
        for &(side, rep) in &b.syllables {
            out = self.mul_factor(&out, side, rep);
        }
        out
    }

    /// A canonical word over the combined alphabet evaluating to the element.
    pub fn elt_to_word(&self, elt: &AmalgamElt) -> Word {
        let mut out = Word::identity();
        if elt.w != 0 {
            let wp = self.pair_component(elt.w, Side::P);
            let idx = self.p.element_index(wp).expect("closed");
            out = out.concat(&self.p_words[idx]);
        }
        for &(side, rep) in &elt.syllables {
            let word = match side {
                Side::P => &self.p_words[rep],
                Side::Q => &self.q_words[rep],
            };
            out = out.concat(word);
        }
        out
    }

    /// Defining relators over the combined alphabet: multiplication-table
    /// presentations of both factors plus the amalgamation identities.
    pub fn relators(&self) -> Vec<Word> {
        let mut out = Vec::new();
        for (group, offset) in [(&self.p, 0usize), (&self.q, self.p_gen_count)] {
            let words = factor_words(group, offset);
            for (idx, e) in group.elements().iter().enumerate() {
                for (gi, g) in group.generators().iter().enumerate() {
                    let t = e.compose(g).expect("common degree");
                    let tidx = group.element_index(&t).expect("closed");
                    let relator = words[idx]
                        .concat(&Word::from_letters([Letter::new(offset + gi, 1)]))
                        .concat(&words[tidx].inverse());
                    if !relator.is_identity() {
                        out.push(relator);
                    }
                }
            }
        }
        for (wp, wq) in &self.w_pairs {
            let pi = self.p.element_index(wp).expect("closed");
            let qi = self.q.element_index(wq).expect("closed");
            let relator = self.p_words[pi].concat(&self.q_words[qi].inverse());
            if !relator.is_identity() {
                out.push(relator);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

fn w_side(pairs: &[(Perm, Perm)], side: Side) -> Vec<Perm> {
    pairs
        .iter()
        .map(|(a, b)| match side {
            Side::P => a.clone(),
            Side::Q => b.clone(),
        })
        .collect()
}

fn factor_words(group: &FinGroup, offset: usize) -> Vec<Word> {
    group
        .element_words()
        .into_iter()
        .map(|w| Word::from_letters(w.into_iter().map(|(g, s)| Letter::new(offset + g, s))))
        .collect()
}

/// The permutational-product homomorphism: injective on both factors, of
/// degree `|P|·|Q|/|W|`, with the factor embeddings agreeing on W.
pub fn injective_quotient(am: &FiniteAmalgam) -> Result<FiniteQuotientHom, FinAmalgamError> {
    let w = CommonSubgroup {
        pairs: am.w_pairs.clone(),
    };
    let s = left_transversal(&am.p, &w_side(&am.w_pairs, Side::P));
    let t = left_transversal(&am.q, &w_side(&am.w_pairs, Side::Q));
    let product = permutational_product(&am.p, &am.q, &w, &s, &t)?;
    let mut images = product.p_gen_images().to_vec();
    images.extend(product.q_gen_images().iter().cloned());
    let hom = FiniteQuotientHom::new(am.alphabet.clone(), images, am.relators());
    debug_assert!(permgrp::check_hom(&am.relators(), &hom));
    Ok(hom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeClass {
    Tree,
    Basis(usize),
}

/// The free kernel of the injective finite quotient: an explicit basis (one
/// word per non-tree edge of the quotient graph of the tree action) plus
/// everything needed to rewrite kernel words over it.
#[derive(Debug, Clone)]
pub struct KernelData {
    pub theta: FiniteQuotientHom,
    pub image: FinGroup,
    pub rank: usize,
    pub basis: Vec<Word>,
    /// label of the W-coset of each image element
    w_label: Vec<usize>,
    /// edge label -> class
    edge_class: HashMap<usize, EdgeClass>,
}

fn coset_labels(image: &FinGroup, sub: &[Perm]) -> Vec<usize> {
    // label of the left coset f·S: the least element index in the coset
    let mut labels = vec![usize::MAX; image.order()];
    for (i, f) in image.elements().iter().enumerate() {
        let mut label = usize::MAX;
        for h in sub {
            let fh = f.compose(h).expect("common degree");
            label = label.min(image.element_index(&fh).expect("closed"));
        }
        labels[i] = label;
    }
    labels
}

pub fn kernel_data(
    am: &FiniteAmalgam,
    theta: &FiniteQuotientHom,
) -> Result<KernelData, FinAmalgamError> {
    let image = theta.image_group(permgrp::DEFAULT_ELEMENT_CAP)?;
    // images of each factor element and of W
    let theta_p: Vec<Perm> = am.p_words.iter().map(|w| theta.eval(w)).collect();
    let theta_q: Vec<Perm> = am.q_words.iter().map(|w| theta.eval(w)).collect();
    let theta_w: Vec<Perm> = am
        .w_pairs
        .iter()
        .map(|(wp, _)| theta_p[am.p.element_index(wp).expect("closed")].clone())
        .collect();
    let p_label = coset_labels(&image, &theta_p);
    let q_label = coset_labels(&image, &theta_q);
    let w_label = coset_labels(&image, &theta_w);

    // graph: vertices are distinct p/q labels, edges distinct w labels
    let mut edge_labels: Vec<usize> = w_label.clone();
    edge_labels.sort_unstable();
    edge_labels.dedup();
    let mut p_vertices: Vec<usize> = p_label.clone();
    p_vertices.sort_unstable();
    p_vertices.dedup();
    let mut q_vertices: Vec<usize> = q_label.clone();
    q_vertices.sort_unstable();
    q_vertices.dedup();

    // breadth-first spanning tree, lifting each vertex to a group word
    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    enum V {
        P(usize),
        Q(usize),
    }
    let mut lift: HashMap<V, Word> = HashMap::new();
    let mut edge_class: HashMap<usize, EdgeClass> = HashMap::new();
    let base = V::P(p_label[0]);
    lift.insert(base, Word::identity());
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(base);
    while let Some(u) = queue.pop_front() {
        let g_u = lift[&u].clone();
        let theta_gu = theta.eval(&g_u);
        // incident edges in canonical order
        for &e in &edge_labels {
            if edge_class.contains_key(&e) {
                continue;
            }
            match u {
                V::P(pl) => {
                    if p_label[e] != pl {
                        continue;
                    }
                    // find p in P with θ(g_u)·θ(p) in the edge coset
                    let p_idx = (0..am.p.order())
                        .find(|&i| {
                            let cand = theta_gu.compose(&theta_p[i]).expect("common degree");
                            w_label[image.element_index(&cand).expect("closed")] == e
                        })
                        .expect("edge incident to the vertex");
                    let g_next = g_u.concat(&am.p_words[p_idx]);
                    let v = V::Q(q_label[image
                        .element_index(&theta.eval(&g_next))
                        .expect("closed")]);
                    if let std::collections::hash_map::Entry::Vacant(slot) = lift.entry(v) {
                        slot.insert(g_next);
                        edge_class.insert(e, EdgeClass::Tree);
                        queue.push_back(v);
                    }
                }
                V::Q(ql) => {
                    if q_label[e] != ql {
                        continue;
                    }
                    let q_idx = (0..am.q.order())
                        .find(|&i| {
                            let cand = theta_gu.compose(&theta_q[i]).expect("common degree");
                            w_label[image.element_index(&cand).expect("closed")] == e
                        })
                        .expect("edge incident to the vertex");
                    let g_next = g_u.concat(&am.q_words[q_idx]);
                    let v = V::P(p_label[image
                        .element_index(&theta.eval(&g_next))
                        .expect("closed")]);
                    if let std::collections::hash_map::Entry::Vacant(slot) = lift.entry(v) {
                        slot.insert(g_next);
                        edge_class.insert(e, EdgeClass::Tree);
                        queue.push_back(v);
                    }
                }
            }
        }
    }

    // second pass: every unclassified edge becomes a basis element, lifted
    // at its P endpoint and closed up through the Q endpoint's tree word
    let mut basis = Vec::new();
    let theta_q_index: HashMap<Perm, usize> = theta_q
        .iter()
        .enumerate()
        .map(|(i, p)| (p.clone(), i))
        .collect();
    for &e in &edge_labels {
        if edge_class.contains_key(&e) {
            continue;
        }
        let g_u = lift[&V::P(p_label[e])].clone();
        let theta_gu = theta.eval(&g_u);
        let p_idx = (0..am.p.order())
            .find(|&i| {
                let cand = theta_gu.compose(&theta_p[i]).expect("common degree");
                w_label[image.element_index(&cand).expect("closed")] == e
            })
            .expect("edge incident to its own P endpoint");
        let g_v = lift[&V::Q(q_label[e])].clone();
        // q' is the unique element of Q with θ(g_u p q') = θ(g_v)
        let need = theta_gu
            .compose(&theta_p[p_idx])
            .expect("common degree")
            .inverse()
            .compose(&theta.eval(&g_v))
            .expect("common degree");
        let q_idx = *theta_q_index
            .get(&need)
            .expect("edge incident to its own Q endpoint");
        let n_e = g_u
            .concat(&am.p_words[p_idx])
            .concat(&am.q_words[q_idx])
            .concat(&g_v.inverse());
        debug_assert!(theta.eval(&n_e).is_identity());
        edge_class.insert(e, EdgeClass::Basis(basis.len()));
        basis.push(n_e);
    }

    let counted = basis.len();
    debug_assert_eq!(
        counted,
        edge_labels.len() + 1 - p_vertices.len() - q_vertices.len()
    );
    let f = image.order() as i64;
    let expected = 1 - f / am.p.order() as i64 - f / am.q.order() as i64
        + f / am.w_pairs.len() as i64;
    if counted as i64 != expected {
        return Err(FinAmalgamError::RankMismatch { counted, expected });
    }

    Ok(KernelData {
        theta: theta.clone(),
        image,
        rank: counted,
        basis,
        w_label,
        edge_class,
    })
}

/// Rewrite a kernel word into the free basis: walk the word through the
/// quotient graph, reading off the non-tree edges it crosses. Q-side letters
/// cross two edges (forward out of the current P-vertex, backward into the
/// next); P-side letters stay at the same vertex.
pub fn rewrite_in_kernel(
    am: &FiniteAmalgam,
    kd: &KernelData,
    w: &Word,
) -> Result<Word, FinAmalgamError> {
    if !kd.theta.eval(w).is_identity() {
        return Err(FinAmalgamError::NotKernelWord);
    }
    let mut letters: Vec<Letter> = Vec::new();
    let push = |l: Letter, letters: &mut Vec<Letter>| {
        match letters.last() {
            Some(top) if top.sym == l.sym && top.sign == -l.sign => {
                letters.pop();
            }
            _ => letters.push(l),
        };
    };
    let mut cur = Perm::identity(kd.theta.degree());
    for l in w.letters() {
        let step = {
            let g = &kd.theta.images[l.sym];
            if l.sign > 0 {
                g.clone()
            } else {
                g.inverse()
            }
        };
        if matches!(am.side_of(l.sym), Side::Q) {
            let e1 = kd.w_label[kd.image.element_index(&cur).expect("closed")];
            let next = cur.compose(&step).expect("common degree");
            let e2 = kd.w_label[kd.image.element_index(&next).expect("closed")];
            if let EdgeClass::Basis(b) = kd.edge_class[&e1] {
                push(Letter::new(b, 1), &mut letters);
            }
            if let EdgeClass::Basis(b) = kd.edge_class[&e2] {
                push(Letter::new(b, -1), &mut letters);
            }
            cur = next;
        } else {
            cur = cur.compose(&step).expect("common degree");
        }
    }
    Ok(Word::from_letters(letters))
}

/// Data shared by membership and separation: the image of the subgroup, its
/// canonical coset representative words, and the kernel-side generators of
/// `U ∩ N` rewritten into the basis.
struct SubgroupSplit {
    fu: FinGroup,
    rep_words: Vec<Word>,
    kernel_gens: Vec<Word>,
}

fn split_subgroup(
    am: &FiniteAmalgam,
    kd: &KernelData,
    u_gens: &[Word],
) -> Result<SubgroupSplit, FinAmalgamError> {
    let u_images: Vec<Perm> = u_gens.iter().map(|u| kd.theta.eval(u)).collect();
    let fu = closure(kd.theta.degree(), &u_images, permgrp::DEFAULT_ELEMENT_CAP)?;
    let rep_words: Vec<Word> = fu
        .element_words()
        .into_iter()
        .map(|w| {
            let mut out = Word::identity();
            for (gi, s) in w {
                let g = &u_gens[gi];
                out = out.concat(&if s > 0 { g.clone() } else { g.inverse() });
            }
            out
        })
        .collect();
    // Schreier generators of U ∩ N over the coset representatives
    let mut kernel_gens = Vec::new();
    for (i, rep) in rep_words.iter().enumerate() {
        let f = &fu.elements()[i];
        for (k, u) in u_gens.iter().enumerate() {
            let moved = f.compose(&u_images[k]).expect("common degree");
            let m = fu.element_index(&moved).expect("closed");
            let sg = rep.concat(u).concat(&rep_words[m].inverse());
            let rewritten = rewrite_in_kernel(am, kd, &sg)?;
            if !rewritten.is_identity() {
                kernel_gens.push(rewritten);
            }
        }
    }
    Ok(SubgroupSplit {
        fu,
        rep_words,
        kernel_gens,
    })
}

/// Exact membership of `g` in the subgroup generated by `u_gens`.
pub fn member_finamalg(
    am: &FiniteAmalgam,
    kd: &KernelData,
    u_gens: &[Word],
    g: &Word,
) -> Result<bool, FinAmalgamError> {
    let split = split_subgroup(am, kd, u_gens)?;
    let g_image = kd.theta.eval(g);
    let coset = match split.fu.element_index(&g_image) {
        None => return Ok(false),
        Some(i) => i,
    };
    let n_part = split.rep_words[coset].inverse().concat(g);
    let rewritten = rewrite_in_kernel(am, kd, &n_part)?;
    let graph = stallings::core_graph(kd.rank.max(1), &split.kernel_gens);
    Ok(stallings::member_free(&graph, &rewritten))
}

/// Stabilizer generators of the base vertex of a complete graph: one
/// Schreier generator per edge outside a spanning tree.
fn complete_graph_stabilizer_gens(complete: &stallings::CompleteGraph) -> Vec<Word> {
    let graph = complete.graph();
    let n = graph.num_vertices();
    let mut path: Vec<Option<Word>> = vec![None; n];
    path[graph.base()] = Some(Word::identity());
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(graph.base());
    let mut tree_edges: Vec<(usize, usize)> = Vec::new(); // (vertex, sym) used forward
    while let Some(v) = queue.pop_front() {
        let pv = path[v].clone().expect("visited");
        for sym in 0..graph.num_symbols() {
            for sign in [1i8, -1] {
                if let Some(u) = graph.step(v, sym, sign) {
                    if path[u].is_none() {
                        path[u] = Some(pv.concat(&Word::from_letters([Letter::new(sym, sign)])));
                        if sign > 0 {
                            tree_edges.push((v, sym));
                        } else {
                            tree_edges.push((u, sym));
                        }
                        queue.push_back(u);
                    }
                }
            }
        }
    }
    let mut gens = Vec::new();
    for v in 0..n {
        for sym in 0..graph.num_symbols() {
            if tree_edges.contains(&(v, sym)) {
                continue;
            }
            let u = graph.step(v, sym, 1).expect("complete");
            let gen = path[v]
                .clone()
                .expect("connected")
                .concat(&Word::from_letters([Letter::new(sym, 1)]))
                .concat(&path[u].clone().expect("connected").inverse());
            if !gen.is_identity() {
                gens.push(gen);
            }
        }
    }
    gens
}

/// Produce a verified separation certificate for `g` outside `⟨u_gens⟩`.
///
/// When the finite quotient already separates, its homomorphism is the
/// certificate. Otherwise the difference `u_j⁻¹·g` lies in the free kernel
/// and misses `U ∩ N`; a completed subgroup graph there gives a finite-index
/// subgroup M, the intersection M' of its conjugates under the subgroup
/// generators is U-invariant, and the action of the amalgam on the cosets
/// of `U·M'` separates.
pub fn separate_finamalg(
    am: &FiniteAmalgam,
    kd: &KernelData,
    u_gens: &[Word],
    g: &Word,
    index_cap: usize,
) -> Result<Certificate, FinAmalgamError> {
    let split = split_subgroup(am, kd, u_gens)?;
    let g_image = kd.theta.eval(g);
    let coset = match split.fu.element_index(&g_image) {
        None => {
            // θ itself separates
            return Ok(Certificate {
                alphabet: am.alphabet.clone(),
                relators: am.relators(),
                images: kd.theta.images.clone(),
                subgroup: u_gens.to_vec(),
                target: g.clone(),
                meta: Default::default(),
            });
        }
        Some(i) => i,
    };
    let n_part = split.rep_words[coset].inverse().concat(g);
    let n_rewritten = rewrite_in_kernel(am, kd, &n_part)?;
    let rank = kd.rank.max(1);
    {
        let u_graph = stallings::core_graph(rank, &split.kernel_gens);
        if stallings::member_free(&u_graph, &n_rewritten) {
            return Err(FinAmalgamError::MemberViolation);
        }
    }

    // finite-index subgroup of the kernel containing U∩N but not the
    // difference, from the completed subgroup graph
    let mut extended = stallings::core_graph(rank, &split.kernel_gens);
    extended.trace_or_extend(&n_rewritten);
    let complete = stallings::hall_complete(&extended);
    let m_gens_basis = complete_graph_stabilizer_gens(&complete);
    // conjugate closure under the subgroup generators, represented by
    // canonical core graphs over the basis alphabet
    let substitute_basis = |w: &Word| -> Word {
        let mut out = Word::identity();
        for l in w.letters() {
            let b = &kd.basis[l.sym];
            out = out.concat(&if l.sign > 0 { b.clone() } else { b.inverse() });
        }
        out
    };
    let m_gens_amalgam: Vec<Word> = m_gens_basis.iter().map(&substitute_basis).collect();
    let mut family: Vec<(stallings::CanonicalGraph, stallings::StallingsGraph)> = Vec::new();
    let mut pending: Vec<Vec<Word>> = vec![m_gens_amalgam];
    while let Some(gens_amalgam) = pending.pop() {
        let gens_basis: Result<Vec<Word>, _> = gens_amalgam
            .iter()
            .map(|w| rewrite_in_kernel(am, kd, w))
            .collect();
        let graph = stallings::core_graph(rank, &gens_basis?);
        let key = graph.canonical_form();
        if family.iter().any(|(k, _)| *k == key) {
            continue;
        }
        if family.len() > 64 {
            return Err(FinAmalgamError::IndexCap(index_cap));
        }
        for u in u_gens {
            for conj_by in [u.clone(), u.inverse()] {
                let conj: Vec<Word> = gens_amalgam
                    .iter()
                    .map(|m| conj_by.concat(m).concat(&conj_by.inverse()))
                    .collect();
                pending.push(conj);
            }
        }
        family.push((key, graph));
    }
    let in_m_prime = |word_basis: &Word| -> bool {
        family
            .iter()
            .all(|(_, graph)| stallings::member_free(graph, word_basis))
    };
    debug_assert!(split
        .kernel_gens
        .iter()
        .all(|kgen| in_m_prime(kgen)));
    debug_assert!(!in_m_prime(&n_rewritten));

    // membership in X = U·M': image coset must land in θ(U), and the
    // kernel-side difference must lie in every conjugate graph
    let in_x = |z: &Word| -> Result<bool, FinAmalgamError> {
        let zi = kd.theta.eval(z);
        match split.fu.element_index(&zi) {
            None => Ok(false),
            Some(i) => {
                let y = split.rep_words[i].inverse().concat(z);
                let yb = rewrite_in_kernel(am, kd, &y)?;
                Ok(in_m_prime(&yb))
            }
        }
    };

    // right-coset action of the amalgam on X\G by breadth-first enumeration
    let mut reps: Vec<Word> = vec![Word::identity()];
    let mut images: Vec<Vec<usize>> = vec![Vec::new(); am.alphabet.len()];
    let mut head = 0;
    while head < reps.len() {
        let rep = reps[head].clone();
        for sym in 0..am.alphabet.len() {
            let moved = rep.concat(&Word::from_letters([Letter::new(sym, 1)]));
            let mut found = None;
            for (i, other) in reps.iter().enumerate() {
                if in_x(&moved.concat(&other.inverse()))? {
                    found = Some(i);
                    break;
                }
            }
            let point = match found {
                Some(i) => i,
                None => {
                    if reps.len() >= index_cap {
                        return Err(FinAmalgamError::IndexCap(index_cap));
                    }
                    reps.push(moved);
                    reps.len() - 1
                }
            };
            if images[sym].len() <= head {
                images[sym].resize(head + 1, usize::MAX);
            }
            images[sym][head] = point;
        }
        head += 1;
    }
    let degree = reps.len();
    let perms: Result<Vec<Perm>, PermError> = images
        .into_iter()
        .map(|mut img| {
            img.resize(degree, usize::MAX);
            Perm::from_images(img)
        })
        .collect();
    let cert = Certificate {
        alphabet: am.alphabet.clone(),
        relators: am.relators(),
        images: perms?,
        subgroup: u_gens.to_vec(),
        target: g.clone(),
        meta: Default::default(),
    };
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{verify, Verdict};
    use crate::presentations::parse_word;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cyclic_gen(n: usize) -> Perm {
        let mut images: Vec<usize> = (1..n).collect();
        images.push(0);
        Perm::from_images(images).unwrap()
    }

    /// Z2 * Z2 on generators s, t with trivial amalgamation.
    fn z2_star_z2() -> FiniteAmalgam {
        FiniteAmalgam::new(
            Alphabet::new(["s", "t"]).unwrap(),
            vec![cyclic_gen(2)],
            vec![cyclic_gen(2)],
            vec![],
        )
        .unwrap()
    }

    fn z2_star_z3() -> FiniteAmalgam {
        FiniteAmalgam::new(
            Alphabet::new(["s", "t"]).unwrap(),
            vec![cyclic_gen(2)],
            vec![cyclic_gen(3)],
            vec![],
        )
        .unwrap()
    }

    /// Z4 *_{Z2} Z4 on generators s, t with s^2 = t^2.
    fn z4_amalg_z4() -> FiniteAmalgam {
        let g = cyclic_gen(4);
        FiniteAmalgam::new(
            Alphabet::new(["s", "t"]).unwrap(),
            vec![g.clone()],
            vec![g.clone()],
            vec![(g.pow(2), g.pow(2))],
        )
        .unwrap()
    }

    fn w(am: &FiniteAmalgam, text: &str) -> Word {
        parse_word(text, &am.alphabet).unwrap()
    }

    #[test]
    fn injective_quotient_examples() {
        // Z2 * Z2 over the trivial subgroup: degree 4, image of order 4,
        // both generators faithful
        let am = z2_star_z2();
        let theta = injective_quotient(&am).unwrap();
        assert_eq!(theta.degree(), 4);
        let image = theta.image_group(1000).unwrap();
        assert_eq!(image.order(), 4);
        assert!(!theta.eval(&w(&am, "s")).is_identity());
        assert!(!theta.eval(&w(&am, "t")).is_identity());

        // Z4 *_{Z2} Z4: degree 16/2 = 8, both factors embed
        let am = z4_amalg_z4();
        let theta = injective_quotient(&am).unwrap();
        assert_eq!(theta.degree(), 8);
        for k in 1..4 {
            assert!(!theta.eval(&w(&am, &format!("s^{k}"))).is_identity());
            assert!(!theta.eval(&w(&am, &format!("t^{k}"))).is_identity());
        }
        // the amalgamation identity holds in the image
        assert!(theta.eval(&w(&am, "s^2 t^-2")).is_identity());

        // P = Q = W: the quotient is the regular representation, kernel
        // trivial
        let g = cyclic_gen(3);
        let pairs: Vec<(Perm, Perm)> = (0..3).map(|k| (g.pow(k), g.pow(k))).collect();
        let am = FiniteAmalgam::new(
            Alphabet::new(["s", "t"]).unwrap(),
            vec![g.clone()],
            vec![g.clone()],
            pairs,
        )
        .unwrap();
        let theta = injective_quotient(&am).unwrap();
        assert_eq!(theta.degree(), 3);
        let kd = kernel_data(&am, &theta).unwrap();
        assert_eq!(kd.rank, 0);
        assert!(kd.basis.is_empty());
    }

    #[test]
    fn kernel_rank_formula_examples() {
        // Z2 * Z2: image order 4, chi = 1/2 + 1/2 - 1 = 0, rank 1
        let am = z2_star_z2();
        let theta = injective_quotient(&am).unwrap();
        let kd = kernel_data(&am, &theta).unwrap();
        assert_eq!(kd.rank, 1);
        // the basis element is (ts)^2 up to inversion/cyclic choice
        assert_eq!(kd.basis.len(), 1);
        let b = am.elt_from_word(&kd.basis[0]);
        let tsts = am.elt_from_word(&w(&am, "t s t s"));
        let stst = am.elt_from_word(&w(&am, "s t s t"));
        assert!(b == tsts || b == stst, "basis {b:?}");

        // Z2 * Z3: image order 6, chi = -1/6, rank 2
        let am = z2_star_z3();
        let theta = injective_quotient(&am).unwrap();
        let kd = kernel_data(&am, &theta).unwrap();
        assert_eq!(theta.image_group(1000).unwrap().order(), 6);
        assert_eq!(kd.rank, 2);

        // every basis element evaluates to the identity under θ
        for b in &kd.basis {
            assert!(theta.eval(b).is_identity());
            assert!(!am.elt_from_word(b).is_identity());
        }
    }

    #[test]
    fn rewrite_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for am in [z2_star_z2(), z2_star_z3(), z4_amalg_z4()] {
            let theta = injective_quotient(&am).unwrap();
            let kd = kernel_data(&am, &theta).unwrap();
            if kd.rank == 0 {
                continue;
            }
            // identity rewrites to the empty basis word
            assert!(rewrite_in_kernel(&am, &kd, &Word::identity())
                .unwrap()
                .is_identity());
            // each basis element rewrites to its own single letter
            for (i, b) in kd.basis.iter().enumerate() {
                let rw = rewrite_in_kernel(&am, &kd, b).unwrap();
                assert_eq!(rw.letters().len(), 1);
                assert_eq!(rw.letters()[0], Letter::new(i, 1));
            }
            // a product of two basis elements rewrites to the two letters
            if kd.rank >= 2 {
                let prod = kd.basis[0].concat(&kd.basis[1]);
                let rw = rewrite_in_kernel(&am, &kd, &prod).unwrap();
                assert_eq!(
                    rw,
                    Word::from_letters([Letter::new(0, 1), Letter::new(1, 1)])
                );
            }
            // random kernel words: substitute the basis back into the
            // rewritten word and compare normal forms
            for _ in 0..200 {
                let mut kw = Word::identity();
                for _ in 0..rng.gen_range(0..6) {
                    let i = rng.gen_range(0..kd.basis.len());
                    kw = kw.concat(&if rng.gen_bool(0.5) {
                        kd.basis[i].clone()
                    } else {
                        kd.basis[i].inverse()
                    });
                }
                // also conjugate by a random short word to leave the span
                // of plain basis products
                let conj_letters: Vec<Letter> = (0..rng.gen_range(0..3))
                    .map(|_| {
                        Letter::new(
                            rng.gen_range(0..am.alphabet.len()),
                            if rng.gen_bool(0.5) { 1 } else { -1 },
                        )
                    })
                    .collect();
                let conj = Word::from_letters(conj_letters);
                let kw = conj.concat(&kw).concat(&conj.inverse());
                assert!(kd.theta.eval(&kw).is_identity());
                let rw = rewrite_in_kernel(&am, &kd, &kw).unwrap();
                let mut back = Word::identity();
                for l in rw.letters() {
                    let b = &kd.basis[l.sym];
                    back = back.concat(&if l.sign > 0 { b.clone() } else { b.inverse() });
                }
                assert_eq!(
                    am.elt_from_word(&back),
                    am.elt_from_word(&kw),
                    "round trip failed"
                );
            }
        }
    }

    #[test]
    fn rewrite_rejects_non_kernel_words() {
        let am = z2_star_z2();
        let theta = injective_quotient(&am).unwrap();
        let kd = kernel_data(&am, &theta).unwrap();
        assert!(matches!(
            rewrite_in_kernel(&am, &kd, &w(&am, "s")),
            Err(FinAmalgamError::NotKernelWord)
        ));
    }

    #[test]
    fn member_examples() {
        let am = z2_star_z2();
        let theta = injective_quotient(&am).unwrap();
        let kd = kernel_data(&am, &theta).unwrap();
        // generators are members
        assert!(member_finamalg(&am, &kd, &[w(&am, "t s")], &w(&am, "t s")).unwrap());
        // st = (ts)^-1 since both generators are involutions, so it IS a
        // member of <ts>; the enumeration oracle below confirms
        let ball = oracle_ball(&am, &[w(&am, "t s")], 3);
        assert!(ball.contains(&am.elt_from_word(&w(&am, "s t"))));
        assert!(member_finamalg(&am, &kd, &[w(&am, "t s")], &w(&am, "s t")).unwrap());
        assert!(member_finamalg(&am, &kd, &[w(&am, "t s")], &w(&am, "t s t s")).unwrap());
        // single letters are not: every element of <ts> has even syllable
        // length
        assert!(!member_finamalg(&am, &kd, &[w(&am, "t s")], &w(&am, "s")).unwrap());
        assert!(!member_finamalg(&am, &kd, &[w(&am, "t s")], &w(&am, "t")).unwrap());
        // st is outside <(ts)^2>: squares have syllable length 0 or >= 4
        assert!(!member_finamalg(&am, &kd, &[w(&am, "t s t s")], &w(&am, "s t")).unwrap());
    }

    /// Enumeration oracle via the coset normal form.
    fn oracle_ball(am: &FiniteAmalgam, gens: &[Word], depth: usize) -> Vec<AmalgamElt> {
        let mut seen = vec![am.identity_elt()];
        let mut frontier = seen.clone();
        for _ in 0..depth {
            let mut next = Vec::new();
            for u in &frontier {
                for g in gens {
                    for step in [g.clone(), g.inverse()] {
                        let cand = am.mul_elts(u, &am.elt_from_word(&step));
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
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for am in [z2_star_z2(), z2_star_z3(), z4_amalg_z4()] {
            let theta = injective_quotient(&am).unwrap();
            let kd = kernel_data(&am, &theta).unwrap();
            for _ in 0..6 {
                let gens: Vec<Word> = (0..2)
                    .map(|_| {
                        Word::from_letters((0..rng.gen_range(1..5)).map(|_| {
                            Letter::new(
                                rng.gen_range(0..am.alphabet.len()),
                                if rng.gen_bool(0.5) { 1 } else { -1 },
                            )
                        }))
                    })
                    .collect();
                let members = oracle_ball(&am, &gens, 5);
                for elt in members.iter().take(40) {
                    let word = am.elt_to_word(elt);
                    assert!(
                        member_finamalg(&am, &kd, &gens, &word).unwrap(),
                        "oracle member rejected: {word:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn separate_examples() {
        // Z2*Z3: separating t from <s> works through θ already
        let am = z2_star_z3();
        let theta = injective_quotient(&am).unwrap();
        let kd = kernel_data(&am, &theta).unwrap();
        let cert = separate_finamalg(&am, &kd, &[w(&am, "s")], &w(&am, "t"), 10_000).unwrap();
        assert_eq!(verify(&cert), Verdict::Valid);

        // Z2*Z2: separating st from <(ts)^2> needs the kernel step
        let am = z2_star_z2();
        let theta = injective_quotient(&am).unwrap();
        let kd = kernel_data(&am, &theta).unwrap();
        assert!(!member_finamalg(&am, &kd, &[w(&am, "t s t s")], &w(&am, "s t")).unwrap());
        let cert =
            separate_finamalg(&am, &kd, &[w(&am, "t s t s")], &w(&am, "s t"), 10_000).unwrap();
        assert!(cert.degree() >= 4);
        assert_eq!(verify(&cert), Verdict::Valid);

        // U trivial: residual finiteness of the amalgam
        let cert = separate_finamalg(&am, &kd, &[], &w(&am, "s t s t"), 10_000).unwrap();
        assert_eq!(verify(&cert), Verdict::Valid);

        // member violation is reported
        assert!(matches!(
            separate_finamalg(&am, &kd, &[w(&am, "t s")], &w(&am, "t s t s"), 10_000),
            Err(FinAmalgamError::MemberViolation)
        ));
    }

    #[test]
    fn separation_random_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for am in [z2_star_z2(), z2_star_z3(), z4_amalg_z4()] {
            let theta = injective_quotient(&am).unwrap();
            let kd = kernel_data(&am, &theta).unwrap();
            let mut done = 0;
            let mut tries = 0;
            while done < 6 && tries < 200 {
                tries += 1;
                let gens: Vec<Word> = (0..rng.gen_range(1..3))
                    .map(|_| {
                        Word::from_letters((0..rng.gen_range(1..5)).map(|_| {
                            Letter::new(
                                rng.gen_range(0..am.alphabet.len()),
                                if rng.gen_bool(0.5) { 1 } else { -1 },
                            )
                        }))
                    })
                    .collect();
                let target = Word::from_letters((0..rng.gen_range(1..6)).map(|_| {
                    Letter::new(
                        rng.gen_range(0..am.alphabet.len()),
                        if rng.gen_bool(0.5) { 1 } else { -1 },
                    )
                }));
                if member_finamalg(&am, &kd, &gens, &target).unwrap() {
                    continue;
                }
                let cert = separate_finamalg(&am, &kd, &gens, &target, 50_000).unwrap();
                assert_eq!(verify(&cert), Verdict::Valid);
                done += 1;
            }
            assert!(done >= 3, "too few separations exercised");
        }
    }

    #[test]
    fn normal_form_is_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for am in [z2_star_z2(), z4_amalg_z4()] {
            for _ in 0..200 {
                let letters: Vec<Letter> = (0..rng.gen_range(0..8))
                    .map(|_| {
                        Letter::new(
                            rng.gen_range(0..am.alphabet.len()),
                            if rng.gen_bool(0.5) { 1 } else { -1 },
                        )
                    })
                    .collect();
                let word = Word::from_letters(letters);
                let elt = am.elt_from_word(&word);
                // the canonical word evaluates back to the same element
                assert_eq!(am.elt_from_word(&am.elt_to_word(&elt)), elt);
                // multiplying by the inverse gives the identity
                let inv = word.inverse();
                let prod = am.elt_from_word(&word.concat(&inv));
                assert!(prod.is_identity());
            }
        }
    }
}
