//! Finite permutation groups: composition, generated closure, membership,
//! coset actions, homomorphism checking, and the permutational product used
//! to glue two finite groups along a common subgroup.
//!
//! Everything here enumerates closures exactly (breadth first, capped)
//! instead of using stabilizer chains; orders at play are desk scale and the
//! certificate verifier stays auditable that way. The action convention is
//! fixed crate-wide: permutations act on the right, composition `p * q` means
//! "apply p, then q".

use std::collections::HashMap;

use thiserror::Error;

use crate::presentations::{Alphabet, Word};

pub const DEFAULT_ELEMENT_CAP: usize = 200_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    #[error("image array {0:?} is not a permutation")]
    NotAPermutation(Vec<usize>),
    #[error("degree mismatch: {0} vs {1}")]
    DegreeMismatch(usize, usize),
    #[error("closure exceeded element cap {cap}")]
    CapExceeded { cap: usize },
    #[error("subgroup generator lies outside the ambient group")]
    NotInAmbient,
    #[error("coset index exceeded cap {cap}")]
    IndexCapExceeded { cap: usize },
    #[error("transversal invalid: {0}")]
    BadTransversal(String),
    #[error("common subgroup data invalid: {0}")]
    BadCommonSubgroup(String),
}

/// A permutation of `{0..n-1}`, stored as its image array.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm {
    images: Vec<usize>,
}

impl Perm {
    pub fn identity(degree: usize) -> Self {
        Perm {
            images: (0..degree).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self, PermError> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &i in &images {
            if i >= n || seen[i] {
                return Err(PermError::NotAPermutation(images));
            }
            seen[i] = true;
        }
        Ok(Perm { images })
    }

    /// Build from disjoint cycle notation over `degree` points.
    pub fn from_cycles(degree: usize, cycles: &[&[usize]]) -> Self {
        let mut images: Vec<usize> = (0..degree).collect();
        for cycle in cycles {
            for i in 0..cycle.len() {
                images[cycle[i]] = cycle[(i + 1) % cycle.len()];
            }
        }
        Perm::from_images(images).expect("cycles must be disjoint and in range")
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, point: usize) -> usize {
        self.images[point]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// `self` then `other` (right action, left-to-right composition).
    pub fn compose(&self, other: &Perm) -> Result<Perm, PermError> {
        if self.degree() != other.degree() {
            return Err(PermError::DegreeMismatch(self.degree(), other.degree()));
        }
        Ok(Perm {
            images: self.images.iter().map(|&i| other.images[i]).collect(),
        })
    }

    pub fn inverse(&self) -> Perm {
        let mut images = vec![0; self.images.len()];
        for (i, &j) in self.images.iter().enumerate() {
            images[j] = i;
        }
        Perm { images }
    }

    pub fn pow(&self, k: i64) -> Perm {
        let base = if k < 0 { self.inverse() } else { self.clone() };
        let mut out = Perm::identity(self.degree());
        for _ in 0..k.unsigned_abs() {
            out = out.compose(&base).expect("same degree");
        }
        out
    }

    pub fn order(&self) -> usize {
        let mut p = self.clone();
        let mut n = 1;
        while !p.is_identity() {
            p = p.compose(self).expect("same degree");
            n += 1;
        }
        n
    }

    /// One-line serialization `[i0 i1 ... i(n-1)]`, as used in certificates.
    pub fn to_line(&self) -> String {
        let parts: Vec<String> = self.images.iter().map(|i| i.to_string()).collect();
        format!("[{}]", parts.join(" "))
    }
}

/// A finite permutation group given by generators, with its full element set
/// enumerated breadth first at construction.
#[derive(Debug, Clone)]
pub struct FinGroup {
    degree: usize,
    generators: Vec<Perm>,
    elements: Vec<Perm>,
    index: HashMap<Perm, usize>,
}

impl FinGroup {
    pub fn trivial(degree: usize) -> Self {
        closure(degree, &[], DEFAULT_ELEMENT_CAP).expect("trivial group is within any cap")
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn generators(&self) -> &[Perm] {
        &self.generators
    }

    /// Elements in breadth-first enumeration order; index 0 is the identity.
    pub fn elements(&self) -> &[Perm] {
        &self.elements
    }

    pub fn contains(&self, p: &Perm) -> bool {
        p.degree() == self.degree && self.index.contains_key(p)
    }

    pub fn element_index(&self, p: &Perm) -> Option<usize> {
        self.index.get(p).copied()
    }

    /// Canonical word in the generators for each element, from the same
    /// breadth-first search that enumerated the closure. Entry `i` lists
    /// (generator index, sign) pairs whose product is `elements[i]`.
    pub fn element_words(&self) -> Vec<Vec<(usize, i8)>> {
        // re-run the BFS, tracking words; generator inverses are explored
        // after the generators themselves, matching `closure`
        let mut words: Vec<Vec<(usize, i8)>> = vec![Vec::new()];
        let mut index: HashMap<Perm, usize> = HashMap::new();
        index.insert(Perm::identity(self.degree), 0);
        let mut order: Vec<Perm> = vec![Perm::identity(self.degree)];
        let mut head = 0;
        while head < order.len() {
            let cur = order[head].clone();
            let cur_word = words[head].clone();
            for (gi, step_sign, step) in gen_steps(&self.generators) {
                let next = cur.compose(&step).expect("same degree");
                if !index.contains_key(&next) {
                    index.insert(next.clone(), order.len());
                    order.push(next);
                    let mut w = cur_word.clone();
                    w.push((gi, step_sign));
                    words.push(w);
                }
            }
            head += 1;
        }
        debug_assert_eq!(order, self.elements);
        words
    }
}

fn gen_steps(generators: &[Perm]) -> impl Iterator<Item = (usize, i8, Perm)> + '_ {
    generators
        .iter()
        .enumerate()
        .map(|(i, g)| (i, 1i8, g.clone()))
        .chain(
            generators
                .iter()
                .enumerate()
                .map(|(i, g)| (i, -1i8, g.inverse())),
        )
}

/// Breadth-first closure of a generating set. Fails with `CapExceeded` once
/// more than `cap` elements are found; never truncates silently.
pub fn closure(degree: usize, generators: &[Perm], cap: usize) -> Result<FinGroup, PermError> {
    for g in generators {
        if g.degree() != degree {
            return Err(PermError::DegreeMismatch(degree, g.degree()));
        }
    }
    let mut elements = vec![Perm::identity(degree)];
    let mut index = HashMap::new();
    index.insert(elements[0].clone(), 0);
    let mut head = 0;
    while head < elements.len() {
        let cur = elements[head].clone();
        for (_, _, step) in gen_steps(generators) {
            let next = cur.compose(&step)?;
            if !index.contains_key(&next) {
                if elements.len() >= cap {
                    return Err(PermError::CapExceeded { cap });
                }
                index.insert(next.clone(), elements.len());
                elements.push(next);
            }
        }
        head += 1;
    }
    Ok(FinGroup {
        degree,
        generators: generators.to_vec(),
        elements,
        index,
    })
}

/// A homomorphism onto a finite permutation group, described by one image per
/// alphabet symbol plus the relator words it claims to kill.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteQuotientHom {
    pub alphabet: Alphabet,
    pub images: Vec<Perm>,
    pub relators: Vec<Word>,
}

impl FiniteQuotientHom {
    pub fn new(alphabet: Alphabet, images: Vec<Perm>, relators: Vec<Word>) -> Self {
        debug_assert_eq!(alphabet.len(), images.len());
        FiniteQuotientHom {
            alphabet,
            images,
            relators,
        }
    }

    pub fn degree(&self) -> usize {
        self.images.first().map(|p| p.degree()).unwrap_or(1)
    }

    pub fn eval(&self, w: &Word) -> Perm {
        let mut out = Perm::identity(self.degree());
        for l in w.letters() {
            let g = &self.images[l.sym];
            let step = if l.sign > 0 { g.clone() } else { g.inverse() };
            out = out.compose(&step).expect("common degree");
        }
        out
    }

    /// Image group generated by the symbol images.
    pub fn image_group(&self, cap: usize) -> Result<FinGroup, PermError> {
        closure(self.degree(), &self.images, cap)
    }
}

/// True iff every relator evaluates to the identity under the given images.
pub fn check_hom(relators: &[Word], hom: &FiniteQuotientHom) -> bool {
    let degree = hom.degree();
    if hom.images.iter().any(|p| p.degree() != degree) {
        return false;
    }
    relators.iter().all(|r| hom.eval(r).is_identity())
}

/// Action of the ambient group's generators on the right cosets of the
/// subgroup generated by `sub_gens`. Point 0 is the subgroup's own coset, so
/// subgroup elements fix 0. Returns one permutation per ambient generator.
pub fn coset_action(
    ambient: &FinGroup,
    sub_gens: &[Perm],
    index_cap: usize,
) -> Result<Vec<Perm>, PermError> {
    for g in sub_gens {
        if !ambient.contains(g) {
            return Err(PermError::NotInAmbient);
        }
    }
    let sub = closure(ambient.degree(), sub_gens, ambient.order().max(1))?;
    // canonical label of the coset H*x: the least element of the coset in
    // breadth-first enumeration order of the ambient group
    let coset_label = |x: &Perm| -> usize {
        sub.elements()
            .iter()
            .map(|h| {
                let hx = h.compose(x).expect("same degree");
                ambient.element_index(&hx).expect("closed under product")
            })
            .min()
            .expect("subgroup nonempty")
    };
    let mut reps: Vec<Perm> = vec![Perm::identity(ambient.degree())];
    let mut label_to_point: HashMap<usize, usize> = HashMap::new();
    label_to_point.insert(coset_label(&reps[0]), 0);
    let mut images: Vec<Vec<usize>> = vec![Vec::new(); ambient.generators().len()];
    let mut head = 0;
    while head < reps.len() {
        let rep = reps[head].clone();
        for (gi, g) in ambient.generators().iter().enumerate() {
            let moved = rep.compose(g)?;
            let label = coset_label(&moved);
            let point = match label_to_point.get(&label) {
                Some(&p) => p,
                None => {
                    if reps.len() >= index_cap {
                        return Err(PermError::IndexCapExceeded { cap: index_cap });
                    }
                    let p = reps.len();
                    reps.push(moved);
                    label_to_point.insert(label, p);
                    p
                }
            };
            if images[gi].len() <= head {
                images[gi].resize(head + 1, usize::MAX);
            }
            images[gi][head] = point;
        }
        head += 1;
    }
    let n = reps.len();
    let mut out = Vec::with_capacity(images.len());
    for img in images {
        let mut full = img;
        full.resize(n, usize::MAX);
        // every point got an image because BFS processed each rep
        debug_assert!(full.iter().all(|&p| p != usize::MAX));
        out.push(Perm::from_images(full)?);
    }
    Ok(out)
}

/// A common subgroup shared by two permutation groups: explicit element pairs
/// `(in P, in Q)` that match up under an isomorphism. Must contain the
/// identity pair and be closed under products.
#[derive(Debug, Clone)]
pub struct CommonSubgroup {
    pub pairs: Vec<(Perm, Perm)>,
}

impl CommonSubgroup {
    pub fn trivial(p_degree: usize, q_degree: usize) -> Self {
        CommonSubgroup {
            pairs: vec![(Perm::identity(p_degree), Perm::identity(q_degree))],
        }
    }

    pub fn order(&self) -> usize {
        self.pairs.len()
    }

    fn validate(&self, p: &FinGroup, q: &FinGroup) -> Result<(), PermError> {
        let mut p_to_q: HashMap<&Perm, &Perm> = HashMap::new();
        let mut q_seen: HashMap<&Perm, ()> = HashMap::new();
        for (wp, wq) in &self.pairs {
            if !p.contains(wp) || !q.contains(wq) {
                return Err(PermError::BadCommonSubgroup(
                    "pair element outside its factor".to_string(),
                ));
            }
            if p_to_q.insert(wp, wq).is_some() || q_seen.insert(wq, ()).is_some() {
                return Err(PermError::BadCommonSubgroup(
                    "pair map is not a bijection".to_string(),
                ));
            }
        }
        // isomorphism check: the pairing respects products (identity and
        // inverses follow)
        for (ap, aq) in &self.pairs {
            for (bp, bq) in &self.pairs {
                let prod_p = ap.compose(bp)?;
                let prod_q = aq.compose(bq)?;
                match p_to_q.get(&prod_p) {
                    Some(&expected) if *expected == prod_q => {}
                    _ => {
                        return Err(PermError::BadCommonSubgroup(
                            "pair map is not an isomorphism".to_string(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn q_of_p(&self, wp: &Perm) -> Option<&Perm> {
        self.pairs.iter().find(|(p, _)| p == wp).map(|(_, q)| q)
    }

    pub fn p_of_q(&self, wq: &Perm) -> Option<&Perm> {
        self.pairs.iter().find(|(_, q)| q == wq).map(|(p, _)| p)
    }
}

/// Transversal for the coset family `{ s·W }` in `group`: breadth-first,
/// lexicographically least representatives.
pub fn left_transversal(group: &FinGroup, w_elements: &[Perm]) -> Vec<Perm> {
    let mut reps = Vec::new();
    let mut covered: HashMap<Perm, ()> = HashMap::new();
    for e in group.elements() {
        if covered.contains_key(e) {
            continue;
        }
        reps.push(e.clone());
        for w in w_elements {
            let sw = e.compose(w).expect("same degree");
            covered.insert(sw, ());
        }
    }
    reps
}

/// The permutational product of `p` and `q` along a common subgroup `w`:
/// both groups act faithfully on `S × T × W` and the two embeddings agree on
/// `W` pointwise.
///
/// Every element of `p` factors uniquely as `s·w` with `s` in the transversal
/// `S`; the action of `x ∈ P` sends `(s, t, w)` to `(s', t, w')` where
/// `s·w·x = s'·w'`, and symmetrically `y ∈ Q` acts through the `(t, w)`
/// coordinates.
#[derive(Debug, Clone)]
pub struct PermProduct {
    pub degree: usize,
    s_reps: Vec<Perm>,
    t_reps: Vec<Perm>,
    w_pairs: Vec<(Perm, Perm)>,
    p_gen_images: Vec<Perm>,
    q_gen_images: Vec<Perm>,
    p: FinGroup,
    q: FinGroup,
}

impl PermProduct {
    pub fn p_gen_images(&self) -> &[Perm] {
        &self.p_gen_images
    }

    pub fn q_gen_images(&self) -> &[Perm] {
        &self.q_gen_images
    }

    fn point(&self, si: usize, ti: usize, wi: usize) -> usize {
        (si * self.t_reps.len() + ti) * self.w_pairs.len() + wi
    }

    /// Factor an element of P as `s·w`; returns (s index, w index).
    fn factor_p(&self, x: &Perm) -> (usize, usize) {
        for (si, s) in self.s_reps.iter().enumerate() {
            let rest = s.inverse().compose(x).expect("same degree");
            if let Some(wi) = self.w_pairs.iter().position(|(wp, _)| *wp == rest) {
                return (si, wi);
            }
        }
        unreachable!("transversal validated to cover P")
    }

    fn factor_q(&self, x: &Perm) -> (usize, usize) {
        for (ti, t) in self.t_reps.iter().enumerate() {
            let rest = t.inverse().compose(x).expect("same degree");
            if let Some(wi) = self.w_pairs.iter().position(|(_, wq)| *wq == rest) {
                return (ti, wi);
            }
        }
        unreachable!("transversal validated to cover Q")
    }

    /// Image of an arbitrary element of P under the left embedding.
    pub fn embed_p(&self, x: &Perm) -> Perm {
        assert!(self.p.contains(x), "element must lie in P");
        let mut images = vec![0usize; self.degree];
        for si in 0..self.s_reps.len() {
            for wi in 0..self.w_pairs.len() {
                let moved = self.s_reps[si]
                    .compose(&self.w_pairs[wi].0)
                    .and_then(|sw| sw.compose(x))
                    .expect("same degree");
                let (si2, wi2) = self.factor_p(&moved);
                for ti in 0..self.t_reps.len() {
                    images[self.point(si, ti, wi)] = self.point(si2, ti, wi2);
                }
            }
        }
        Perm::from_images(images).expect("group action is a bijection")
    }

    /// Image of an arbitrary element of Q under the right embedding.
    pub fn embed_q(&self, y: &Perm) -> Perm {
        assert!(self.q.contains(y), "element must lie in Q");
        let mut images = vec![0usize; self.degree];
        for ti in 0..self.t_reps.len() {
            for wi in 0..self.w_pairs.len() {
                let moved = self.t_reps[ti]
                    .compose(&self.w_pairs[wi].1)
                    .and_then(|tw| tw.compose(y))
                    .expect("same degree");
                let (ti2, wi2) = self.factor_q(&moved);
                for si in 0..self.s_reps.len() {
                    images[self.point(si, ti, wi)] = self.point(si, ti2, wi2);
                }
            }
        }
        Perm::from_images(images).expect("group action is a bijection")
    }
}

/// Build the permutational product. `s_reps` and `t_reps` must be
/// transversals of the `s·W` coset families in P and Q respectively; pass the
/// output of [`left_transversal`] for the canonical choice.
pub fn permutational_product(
    p: &FinGroup,
    q: &FinGroup,
    w: &CommonSubgroup,
    s_reps: &[Perm],
    t_reps: &[Perm],
) -> Result<PermProduct, PermError> {
    w.validate(p, q)?;
    let w_p: Vec<Perm> = w.pairs.iter().map(|(a, _)| a.clone()).collect();
    let w_q: Vec<Perm> = w.pairs.iter().map(|(_, b)| b.clone()).collect();
    validate_transversal(p, &w_p, s_reps)?;
    validate_transversal(q, &w_q, t_reps)?;
    let degree = s_reps.len() * t_reps.len() * w.pairs.len();
    let product = PermProduct {
        degree,
        s_reps: s_reps.to_vec(),
        t_reps: t_reps.to_vec(),
        w_pairs: w.pairs.clone(),
        p_gen_images: Vec::new(),
        q_gen_images: Vec::new(),
        p: p.clone(),
        q: q.clone(),
    };
    let p_gen_images: Vec<Perm> = p.generators().iter().map(|g| product.embed_p(g)).collect();
    let q_gen_images: Vec<Perm> = q.generators().iter().map(|g| product.embed_q(g)).collect();
    Ok(PermProduct {
        p_gen_images,
        q_gen_images,
        ..product
    })
}

fn validate_transversal(
    group: &FinGroup,
    w_elements: &[Perm],
    reps: &[Perm],
) -> Result<(), PermError> {
    if reps.len() * w_elements.len() != group.order() {
        return Err(PermError::BadTransversal(format!(
            "{} reps × {} subgroup elements ≠ group order {}",
            reps.len(),
            w_elements.len(),
            group.order()
        )));
    }
    let mut covered: HashMap<Perm, ()> = HashMap::new();
    for s in reps {
        if !group.contains(s) {
            return Err(PermError::BadTransversal(
                "representative outside the group".to_string(),
            ));
        }
        for w in w_elements {
            let sw = s.compose(w)?;
            if covered.insert(sw, ()).is_some() {
                return Err(PermError::BadTransversal(
                    "cosets overlap: duplicated element".to_string(),
                ));
            }
        }
    }
    Ok(())
}
