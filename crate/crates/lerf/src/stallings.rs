//! Subgroup graphs for finitely generated subgroups of free groups: folded
//! core graphs, membership by path tracing, completion of the partial edge
//! maps to permutations, and separation certificates.
//!
//! A graph stores, per generator symbol, a partial injection on the vertex
//! set ("the outgoing x-edge"). Folded means no vertex has two outgoing or
//! two incoming x-edges; the words readable as closed paths at the base
//! vertex are then exactly the elements of the subgroup the graph was built
//! from.

use thiserror::Error;

use crate::certificates::Certificate;
use crate::permgrp::Perm;
use crate::presentations::{Alphabet, Word};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StallingsError {
    #[error("cannot separate: the word is a member of the subgroup")]
    MemberViolation,
}

/// Folded, based, edge-labeled graph. `fwd[sym][v]` is the endpoint of the
/// outgoing `sym`-edge at `v`, `bwd[sym][v]` the start of the incoming one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StallingsGraph {
    num_symbols: usize,
    base: usize,
    fwd: Vec<Vec<Option<usize>>>,
    bwd: Vec<Vec<Option<usize>>>,
}

/// A Stallings graph whose edge maps are total, i.e. one permutation of the
/// vertex set per symbol. Reading the vertex action off a complete graph
/// gives a homomorphism to a finite symmetric group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompleteGraph {
    graph: StallingsGraph,
}

/// Multigraph under construction, before folding: an explicit edge list.
#[derive(Debug, Clone)]
struct RawGraph {
    num_symbols: usize,
    num_vertices: usize,
    base: usize,
    edges: Vec<(usize, usize, usize)>, // (source, symbol, target)
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the smaller index as root so vertex numbering stays stable
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

impl StallingsGraph {
    /// Single base vertex, no edges: the graph of the trivial subgroup.
    pub fn trivial(num_symbols: usize) -> Self {
        StallingsGraph {
            num_symbols,
            base: 0,
            fwd: vec![vec![None]; num_symbols],
            bwd: vec![vec![None]; num_symbols],
        }
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    pub fn num_vertices(&self) -> usize {
        self.fwd.first().map(|m| m.len()).unwrap_or(1)
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn step(&self, vertex: usize, sym: usize, sign: i8) -> Option<usize> {
        if sign > 0 {
            self.fwd[sym][vertex]
        } else {
            self.bwd[sym][vertex]
        }
    }

    /// Trace a word from `start`; `None` as soon as an edge is missing.
    pub fn trace(&self, start: usize, w: &Word) -> Option<usize> {
        let mut v = start;
        for l in w.letters() {
            v = self.step(v, l.sym, l.sign)?;
        }
        Some(v)
    }

    fn add_vertex(&mut self) -> usize {
        let v = self.num_vertices();
        for sym in 0..self.num_symbols {
            self.fwd[sym].push(None);
            self.bwd[sym].push(None);
        }
        v
    }

    fn set_edge(&mut self, u: usize, sym: usize, v: usize) {
        debug_assert!(self.fwd[sym][u].is_none() && self.bwd[sym][v].is_none());
        self.fwd[sym][u] = Some(v);
        self.bwd[sym][v] = Some(u);
    }

    /// Trace `w` from the base, creating fresh vertices and edges wherever
    /// the path leaves the graph. Keeps the graph folded because every new
    /// edge is attached at a slot that was empty. Returns the end vertex.
    pub fn trace_or_extend(&mut self, w: &Word) -> usize {
        let mut v = self.base;
        for l in w.letters() {
            v = match self.step(v, l.sym, l.sign) {
                Some(next) => next,
                None => {
                    let fresh = self.add_vertex();
                    if l.sign > 0 {
                        self.set_edge(v, l.sym, fresh);
                    } else {
                        self.set_edge(fresh, l.sym, v);
                    }
                    fresh
                }
            };
        }
        v
    }

    /// Degree of a vertex counting both edge directions; a loop contributes 2.
    fn degree(&self, v: usize) -> usize {
        (0..self.num_symbols)
            .map(|s| self.fwd[s][v].iter().count() + self.bwd[s][v].iter().count())
            .sum()
    }

    /// Remove non-base vertices of degree <= 1 until none remain.
    fn prune(&mut self) {
        loop {
            let n = self.num_vertices();
            let dead: Vec<usize> = (0..n)
                .filter(|&v| v != self.base && self.degree(v) <= 1)
                .collect();
            if dead.is_empty() {
                return;
            }
            let mut keep: Vec<bool> = vec![true; n];
            for v in dead {
                keep[v] = false;
            }
            let mut relabel = vec![usize::MAX; n];
            let mut next = 0;
            for v in 0..n {
                if keep[v] {
                    relabel[v] = next;
                    next += 1;
                }
            }
            let mut fwd = vec![vec![None; next]; self.num_symbols];
            let mut bwd = vec![vec![None; next]; self.num_symbols];
            for sym in 0..self.num_symbols {
                for u in 0..n {
                    if !keep[u] {
                        continue;
                    }
                    if let Some(v) = self.fwd[sym][u] {
                        if keep[v] {
                            fwd[sym][relabel[u]] = Some(relabel[v]);
                            bwd[sym][relabel[v]] = Some(relabel[u]);
                        }
                    }
                }
            }
            self.base = relabel[self.base];
            self.fwd = fwd;
            self.bwd = bwd;
        }
    }

    /// Canonical relabeling by deterministic breadth-first traversal from the
    /// base: per vertex the symbols are scanned in order, forward direction
    /// first. Folded graphs are deterministic automata, so two based graphs
    /// are isomorphic exactly when their canonical forms are equal.
    pub fn canonical_form(&self) -> CanonicalGraph {
        let n = self.num_vertices();
        let mut order = vec![usize::MAX; n];
        let mut queue = std::collections::VecDeque::new();
        order[self.base] = 0;
        queue.push_back(self.base);
        let mut next = 1;
        while let Some(v) = queue.pop_front() {
            for sym in 0..self.num_symbols {
                for sign in [1i8, -1] {
                    if let Some(u) = self.step(v, sym, sign) {
                        if order[u] == usize::MAX {
                            order[u] = next;
                            next += 1;
                            queue.push_back(u);
                        }
                    }
                }
            }
        }
        let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.num_symbols];
        for sym in 0..self.num_symbols {
            for u in 0..n {
                if let Some(v) = self.fwd[sym][u] {
                    if order[u] != usize::MAX && order[v] != usize::MAX {
                        edges[sym].push((order[u], order[v]));
                    }
                }
            }
            edges[sym].sort_unstable();
        }
        CanonicalGraph {
            num_vertices: next,
            edges,
        }
    }

    /// Line-oriented dump for debugging and tests: one adjacency line per
    /// symbol, base vertex marked.
    pub fn dump(&self, alphabet: &Alphabet) -> String {
        let mut out = format!(
            "vertices {} base {}\n",
            self.num_vertices(),
            self.base
        );
        for sym in 0..self.num_symbols {
            let mut pairs = Vec::new();
            for u in 0..self.num_vertices() {
                if let Some(v) = self.fwd[sym][u] {
                    pairs.push(format!("{u}->{v}"));
                }
            }
            out.push_str(&format!("{} {}\n", alphabet.name(sym), pairs.join(" ")));
        }
        out
    }
}

/// Base-rooted canonical form; equal iff the based labeled graphs are
/// isomorphic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalGraph {
    pub num_vertices: usize,
    pub edges: Vec<Vec<(usize, usize)>>,
}

fn fold_raw(raw: RawGraph, mut pick: impl FnMut(usize) -> usize) -> StallingsGraph {
    let mut uf = UnionFind::new(raw.num_vertices);
    let mut edges = raw.edges;
    loop {
        // collect current conflicts: two edges with the same source root and
        // symbol but different target roots, or the mirror condition
        let mut conflicts: Vec<(usize, usize)> = Vec::new();
        {
            use std::collections::HashMap;
            let mut out_map: HashMap<(usize, usize), usize> = HashMap::new();
            let mut in_map: HashMap<(usize, usize), usize> = HashMap::new();
            for &(u, sym, v) in &edges {
                let (ru, rv) = (uf.find(u), uf.find(v));
                if let Some(&prev) = out_map.get(&(ru, sym)) {
                    if prev != rv {
                        conflicts.push((prev, rv));
                    }
                } else {
                    out_map.insert((ru, sym), rv);
                }
                if let Some(&prev) = in_map.get(&(rv, sym)) {
                    if prev != ru {
                        conflicts.push((prev, ru));
                    }
                } else {
                    in_map.insert((rv, sym), ru);
                }
            }
        }
        if conflicts.is_empty() {
            break;
        }
        let chosen = conflicts[pick(conflicts.len()) % conflicts.len()];
        uf.union(chosen.0, chosen.1);
        for e in edges.iter_mut() {
            e.0 = uf.find(e.0);
            e.2 = uf.find(e.2);
        }
        edges.sort_unstable();
        edges.dedup();
    }

    // compact to consecutive vertex indices
    let mut label = vec![usize::MAX; raw.num_vertices];
    let mut next = 0;
    let mut roots: Vec<usize> = (0..raw.num_vertices).map(|v| uf.find(v)).collect();
    roots.sort_unstable();
    roots.dedup();
    for r in roots {
        label[r] = next;
        next += 1;
    }
    let mut graph = StallingsGraph {
        num_symbols: raw.num_symbols,
        base: label[uf.find(raw.base)],
        fwd: vec![vec![None; next]; raw.num_symbols],
        bwd: vec![vec![None; next]; raw.num_symbols],
    };
    for (u, sym, v) in edges {
        let (cu, cv) = (label[uf.find(u)], label[uf.find(v)]);
        graph.fwd[sym][cu] = Some(cv);
        graph.bwd[sym][cv] = Some(cu);
    }
    graph
}

fn wedge_of_loops(num_symbols: usize, gens: &[Word]) -> RawGraph {
    let mut raw = RawGraph {
        num_symbols,
        num_vertices: 1,
        base: 0,
        edges: Vec::new(),
    };
    for g in gens {
        let letters = g.letters();
        if letters.is_empty() {
            continue;
        }
        let mut prev = raw.base;
        for (i, l) in letters.iter().enumerate() {
            let next = if i + 1 == letters.len() {
                raw.base
            } else {
                raw.num_vertices += 1;
                raw.num_vertices - 1
            };
            if l.sign > 0 {
                raw.edges.push((prev, l.sym, next));
            } else {
                raw.edges.push((next, l.sym, prev));
            }
            prev = next;
        }
    }
    raw
}

/// The folded core graph of the subgroup generated by `gens` in the free
/// group on `num_symbols` generators.
pub fn core_graph(num_symbols: usize, gens: &[Word]) -> StallingsGraph {
    let mut graph = fold_raw(wedge_of_loops(num_symbols, gens), |_| 0);
    graph.prune();
    graph
}

/// Same construction, but with fold conflicts resolved in an order chosen by
/// `pick` — folding is confluent, so the canonical form must not depend on
/// the choices. Exposed for the confluence tests.
pub fn core_graph_with_fold_order(
    num_symbols: usize,
    gens: &[Word],
    pick: impl FnMut(usize) -> usize,
) -> StallingsGraph {
    let mut graph = fold_raw(wedge_of_loops(num_symbols, gens), pick);
    graph.prune();
    graph
}

/// Fold an arbitrary edge-listed graph (used by tests to exercise folding on
/// graphs other than generator wedges).
pub fn fold(
    num_symbols: usize,
    num_vertices: usize,
    base: usize,
    edges: &[(usize, usize, usize)],
) -> StallingsGraph {
    fold_raw(
        RawGraph {
            num_symbols,
            num_vertices,
            base,
            edges: edges.to_vec(),
        },
        |_| 0,
    )
}

/// Membership in the subgroup a folded graph represents: `w` must be
/// readable as a closed path at the base.
pub fn member_free(graph: &StallingsGraph, w: &Word) -> bool {
    graph.trace(graph.base(), w) == Some(graph.base())
}

impl CompleteGraph {
    pub fn graph(&self) -> &StallingsGraph {
        &self.graph
    }

    /// The vertex action: one permutation of the vertex set per symbol.
    pub fn vertex_action(&self) -> Vec<Perm> {
        let n = self.graph.num_vertices();
        (0..self.graph.num_symbols)
            .map(|sym| {
                let images: Vec<usize> = (0..n)
                    .map(|v| self.graph.fwd[sym][v].expect("complete graph"))
                    .collect();
                Perm::from_images(images).expect("total injection is a permutation")
            })
            .collect()
    }
}

/// Extend each symbol's partial injection to a permutation of the vertex set
/// (no new vertices): unsaturated tails are matched to unsaturated heads in
/// index order. The subgroup read at the base can only grow.
pub fn hall_complete(graph: &StallingsGraph) -> CompleteGraph {
    let mut g = graph.clone();
    let n = g.num_vertices();
    for sym in 0..g.num_symbols {
        let tails: Vec<usize> = (0..n).filter(|&v| g.fwd[sym][v].is_none()).collect();
        let heads: Vec<usize> = (0..n).filter(|&v| g.bwd[sym][v].is_none()).collect();
        debug_assert_eq!(tails.len(), heads.len());
        for (&u, &v) in tails.iter().zip(heads.iter()) {
            g.fwd[sym][u] = Some(v);
            g.bwd[sym][v] = Some(u);
        }
    }
    CompleteGraph { graph: g }
}

/// Produce a separation certificate for `g` outside the subgroup generated
/// by `gens` in the free group over `alphabet`.
///
/// The core graph is first extended with the path of `g` (fresh vertices
/// where needed, no folding required), so `g` reads to a definite non-base
/// vertex; completing the extended graph then gives a vertex action in which
/// every subgroup generator fixes the base while `g` moves it. Since the
/// subgroup generators' images all stabilize the base, the closure of the
/// subgroup image cannot contain the image of `g`.
pub fn separate_free(
    alphabet: &Alphabet,
    gens: &[Word],
    g: &Word,
) -> Result<Certificate, StallingsError> {
    let core = core_graph(alphabet.len(), gens);
    if member_free(&core, g) {
        return Err(StallingsError::MemberViolation);
    }
    let mut extended = core;
    let end = extended.trace_or_extend(g);
    debug_assert_ne!(end, extended.base());
    let complete = hall_complete(&extended);
    let images = complete.vertex_action();
    debug_assert!(gens.iter().all(|w| {
        complete.graph().trace(complete.graph().base(), w) == Some(complete.graph().base())
    }));
    Ok(Certificate {
        alphabet: alphabet.clone(),
        relators: Vec::new(),
        images,
        subgroup: gens.to_vec(),
        target: g.clone(),
        meta: std::collections::BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{verify, Verdict};
    use crate::presentations::parse_word;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn fxy() -> Alphabet {
        Alphabet::new(["x", "y"]).unwrap()
    }

    fn w(text: &str, a: &Alphabet) -> Word {
        parse_word(text, a).unwrap()
    }

    #[test]
    fn core_graph_trivial_subgroup() {
        let g = core_graph(2, &[]);
        assert_eq!(g.num_vertices(), 1);
        assert!(g.step(0, 0, 1).is_none());
        assert!(g.step(0, 1, 1).is_none());
    }

    #[test]
    fn core_graph_single_generator_loop() {
        let a = fxy();
        let g = core_graph(2, &[w("x", &a)]);
        assert_eq!(g.num_vertices(), 1);
        assert_eq!(g.step(0, 0, 1), Some(0));
        assert!(g.step(0, 1, 1).is_none());
    }

    #[test]
    fn core_graph_x2_y() {
        // fold the wedge of the x^2 loop and the y loop by hand: two
        // vertices, x-edges in a 2-cycle, y-loop at the base
        let a = fxy();
        let g = core_graph(2, &[w("x^2", &a), w("y", &a)]);
        assert_eq!(g.num_vertices(), 2);
        let b = g.base();
        let other = 1 - b;
        assert_eq!(g.step(b, 0, 1), Some(other));
        assert_eq!(g.step(other, 0, 1), Some(b));
        assert_eq!(g.step(b, 1, 1), Some(b));
        assert!(g.step(other, 1, 1).is_none());
    }

    #[test]
    fn fold_identifies_double_edges() {
        // two x-edges out of the base to distinct vertices fold to one
        let g = fold(1, 3, 0, &[(0, 0, 1), (0, 0, 2)]);
        assert_eq!(g.num_vertices(), 2);
        assert!(g.step(0, 0, 1).is_some());
    }

    #[test]
    fn fold_idempotent_on_folded_graph() {
        let a = fxy();
        let g = core_graph(2, &[w("x^2", &a), w("y", &a)]);
        let refolded = fold(
            2,
            g.num_vertices(),
            g.base(),
            &{
                let mut edges = Vec::new();
                for sym in 0..2 {
                    for u in 0..g.num_vertices() {
                        if let Some(v) = g.step(u, sym, 1) {
                            edges.push((u, sym, v));
                        }
                    }
                }
                edges
            },
        );
        assert_eq!(refolded.canonical_form(), g.canonical_form());
    }

    fn random_word(rng: &mut ChaCha8Rng, num_symbols: usize, max_len: usize) -> Word {
        let len = rng.gen_range(1..=max_len);
        Word::from_letters((0..len).map(|_| {
            crate::presentations::Letter::new(
                rng.gen_range(0..num_symbols),
                if rng.gen_bool(0.5) { 1 } else { -1 },
            )
        }))
    }

    #[test]
    fn folding_is_confluent_under_random_orders() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let gens: Vec<Word> = (0..4).map(|_| random_word(&mut rng, 2, 6)).collect();
            let reference = core_graph(2, &gens).canonical_form();
            for _ in 0..5 {
                let mut order_rng = ChaCha8Rng::seed_from_u64(rng.gen());
                let shuffled =
                    core_graph_with_fold_order(2, &gens, |n| order_rng.gen_range(0..n.max(1)));
                assert_eq!(shuffled.canonical_form(), reference);
            }
        }
    }

    /// Expression enumeration: all products of up to `depth` generators,
    /// deduplicated by reduced word.
    fn subgroup_ball(gens: &[Word], depth: usize) -> std::collections::HashSet<Word> {
        let mut seen = std::collections::HashSet::new();
        seen.insert(Word::identity());
        let mut frontier = vec![Word::identity()];
        for _ in 0..depth {
            let mut next = Vec::new();
            for u in &frontier {
                for g in gens {
                    for cand in [u.concat(g), u.concat(&g.inverse())] {
                        if seen.insert(cand.clone()) {
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
    fn membership_examples() {
        let a = fxy();
        let gens = [w("x^2", &a), w("y", &a)];
        let graph = core_graph(2, &gens);
        assert!(member_free(&graph, &Word::identity()));
        // oracle: x does not appear among products of up to 6 generators
        let ball = subgroup_ball(&gens, 6);
        assert!(!ball.contains(&w("x", &a)));
        assert!(!member_free(&graph, &w("x", &a)));
        // x^4 y = (x^2)(x^2)(y)
        assert!(ball.contains(&w("x^4 y", &a)));
        assert!(member_free(&graph, &w("x^4 y", &a)));
    }

    #[test]
    fn membership_agrees_with_enumeration_on_random_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..40 {
            let gens: Vec<Word> = (0..3).map(|_| random_word(&mut rng, 2, 5)).collect();
            let graph = core_graph(2, &gens);
            for _ in 0..5 {
                // a random product of the generators must be a member
                let mut prod = Word::identity();
                for _ in 0..rng.gen_range(1..6) {
                    let g = &gens[rng.gen_range(0..gens.len())];
                    prod = if rng.gen_bool(0.5) {
                        prod.concat(g)
                    } else {
                        prod.concat(&g.inverse())
                    };
                }
                assert!(member_free(&graph, &prod));
            }
        }
    }

    #[test]
    fn hall_complete_examples() {
        let a = fxy();
        // graph of <x^2, y>: x already total on 2 vertices, y extends to fix
        // the non-base vertex
        let g = core_graph(2, &[w("x^2", &a), w("y", &a)]);
        let c = hall_complete(&g);
        let action = c.vertex_action();
        assert_eq!(action[0], Perm::from_images(vec![1, 0]).unwrap());
        assert_eq!(action[1], Perm::identity(2));

        // an already complete graph is unchanged
        let again = hall_complete(c.graph());
        assert_eq!(again.graph(), c.graph());

        // trivial subgroup: every generator becomes a loop
        let t = hall_complete(&core_graph(2, &[]));
        assert_eq!(t.graph().num_vertices(), 1);
        assert!(t.vertex_action().iter().all(|p| p.is_identity()));
    }

    /// Brute force over all homomorphisms to the symmetric group on 2
    /// points: returns images (x, y) separating g from the subgroup, if any.
    fn s2_hom_oracle(gens: &[Word], g: &Word) -> Option<(Perm, Perm)> {
        let opts = [Perm::identity(2), Perm::from_images(vec![1, 0]).unwrap()];
        for xi in &opts {
            for yi in &opts {
                let eval = |word: &Word| {
                    let mut acc = Perm::identity(2);
                    for l in word.letters() {
                        let base = if l.sym == 0 { xi } else { yi };
                        let step = if l.sign > 0 {
                            base.clone()
                        } else {
                            base.inverse()
                        };
                        acc = acc.compose(&step).unwrap();
                    }
                    acc
                };
                let sub: Vec<Perm> = gens.iter().map(&eval).collect();
                let closure = crate::permgrp::closure(2, &sub, 100).unwrap();
                if !closure.contains(&eval(g)) {
                    return Some((xi.clone(), yi.clone()));
                }
            }
        }
        None
    }

    #[test]
    fn separate_free_examples() {
        let a = fxy();

        // U = <x>, g = y: oracle confirms a degree-2 separation exists
        let gens = [w("x", &a)];
        let target = w("y", &a);
        let (ox, oy) = s2_hom_oracle(&gens, &target).unwrap();
        assert!(ox.is_identity());
        assert_eq!(oy, Perm::from_images(vec![1, 0]).unwrap());
        let cert = separate_free(&a, &gens, &target).unwrap();
        assert_eq!(cert.degree(), 2);
        assert_eq!(cert.images[0], ox);
        assert_eq!(cert.images[1], oy);
        assert_eq!(verify(&cert), Verdict::Valid);

        // U = <x^2, y>, g = x
        let gens = [w("x^2", &a), w("y", &a)];
        let target = w("x", &a);
        let (ox, oy) = s2_hom_oracle(&gens, &target).unwrap();
        assert_eq!(ox, Perm::from_images(vec![1, 0]).unwrap());
        assert!(oy.is_identity());
        let cert = separate_free(&a, &gens, &target).unwrap();
        assert_eq!(cert.degree(), 2);
        assert_eq!(cert.images[0], ox);
        assert_eq!(cert.images[1], oy);
        assert_eq!(verify(&cert), Verdict::Valid);

        // U trivial, g = x: degree-2 with x acting nontrivially
        let cert = separate_free(&a, &[], &w("x", &a)).unwrap();
        assert_eq!(cert.degree(), 2);
        assert!(!cert.images[0].is_identity());
        assert_eq!(verify(&cert), Verdict::Valid);
    }

    #[test]
    fn separate_free_rejects_members() {
        let a = fxy();
        assert_eq!(
            separate_free(&a, &[w("x", &a)], &w("x^3", &a)),
            Err(StallingsError::MemberViolation)
        );
    }

    #[test]
    fn separation_certificates_always_verify() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = fxy();
        let mut separated = 0;
        while separated < 60 {
            let gens: Vec<Word> = (0..rng.gen_range(1..=4))
                .map(|_| random_word(&mut rng, 2, 6))
                .collect();
            let graph = core_graph(2, &gens);
            let cand = random_word(&mut rng, 2, 6);
            if member_free(&graph, &cand) {
                continue;
            }
            let cert = separate_free(&a, &gens, &cand).unwrap();
            // certificate validity independently proves non-membership
            assert_eq!(verify(&cert), Verdict::Valid);
            // the image of the target must move the base while generators fix it
            separated += 1;
        }
    }

    #[test]
    fn dump_is_line_oriented() {
        let a = fxy();
        let g = core_graph(2, &[w("x^2", &a), w("y", &a)]);
        let dump = g.dump(&a);
        assert!(dump.starts_with("vertices 2 base"));
        assert!(dump.lines().count() == 3);
    }
}
