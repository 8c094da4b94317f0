//! The decision engine for generalized free products `G = (A * B; H = K, φ)`
//! with amalgamated subgroups normal in the factors: hypothesis validation,
//! coset-representative normal forms, the projection onto the free product
//! modulo the amalgamated subgroup, and the two-case separation search with
//! its membership decider.
//!
//! Queries live over the combined alphabet (A's generators followed by B's).
//! The amalgamated subgroup identification is positional: the i-th generator
//! word of H corresponds to the i-th generator word of K.

mod search;

pub use search::{
    case2_data, decide_membership, separate_amalgam, Case2Data, Decision, Limits, SearchError,
    TraceEvent,
};

use std::collections::HashMap;

use thiserror::Error;

use crate::effgroups::{substitute, EffError, EffectiveGroup, NormalFormElt};
use crate::presentations::{
    Alphabet, AmalgamSpec, FactorClassSpec, FactorSpec, Letter, ParseError, Word,
};

/// How finely we probe whether the amalgamated subgroup is finite.
const H_ENUM_CAP: usize = 4_096;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AmalgamError {
    #[error("amalgamated generator lists have different lengths")]
    ArityMismatch,
    #[error("the subgroup {side} is not normal in its factor")]
    NotNormal { side: char },
    #[error("factor {side}: amalgamated subgroup violates the maximum condition")]
    MaxCondition { side: char },
    #[error("the positional generator pairing does not extend to an isomorphism")]
    PhiNotIsomorphism,
    #[error(transparent)]
    Eff(#[from] EffError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    A,
    B,
}

/// A validated amalgam of two effective groups.
#[derive(Debug, Clone)]
pub struct AmalgamGroup {
    pub a: EffectiveGroup,
    pub b: EffectiveGroup,
    pub combined: Alphabet,
    /// Generators of H over A's local alphabet.
    pub h_gens: Vec<Word>,
    /// Generators of K over B's local alphabet, positionally paired with H.
    pub k_gens: Vec<Word>,
    a_len: usize,
}

/// Alternating-syllable normal form: a leading amalgamated part (stored as
/// an A-side normal form) followed by nontrivial canonical coset
/// representatives from alternating factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ReducedSequence {
    pub amalgam_part: NormalFormElt,
    pub syllables: Vec<(Side, NormalFormElt)>,
}

impl ReducedSequence {
    pub fn syllable_count(&self) -> usize {
        self.syllables.len()
    }

    pub fn factor_tags(&self) -> Vec<Side> {
        self.syllables.iter().map(|(s, _)| *s).collect()
    }
}

/// Build and validate an amalgam from a parsed description.
pub fn build_amalgam(spec: &AmalgamSpec) -> Result<AmalgamGroup, AmalgamError> {
    let a = EffectiveGroup::from_factor_spec(&spec.factor_a)?;
    let b = EffectiveGroup::from_factor_spec(&spec.factor_b)?;
    AmalgamGroup::new(a, b, spec.h_gens.clone(), spec.k_gens.clone())
}

impl AmalgamGroup {
    pub fn new(
        a: EffectiveGroup,
        b: EffectiveGroup,
        h_gens: Vec<Word>,
        k_gens: Vec<Word>,
    ) -> Result<Self, AmalgamError> {
        if h_gens.len() != k_gens.len() {
            return Err(AmalgamError::ArityMismatch);
        }
        let combined = a.alphabet.join(&b.alphabet)?;
        let a_len = a.alphabet.len();
        let g = AmalgamGroup {
            a,
            b,
            combined,
            h_gens,
            k_gens,
            a_len,
        };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<(), AmalgamError> {
        if !self.a.is_normal_subgroup(&self.h_gens)? {
            return Err(AmalgamError::NotNormal { side: 'H' });
        }
        if !self.b.is_normal_subgroup(&self.k_gens)? {
            return Err(AmalgamError::NotNormal { side: 'K' });
        }
        // maximum condition: every supported class satisfies it except free
        // groups of rank >= 2, whose only admissible amalgamated subgroup is
        // trivial (a nontrivial normal finitely generated subgroup would
        // have finite index and be free of rank >= 2)
        self.check_max_condition(&self.a, &self.h_gens, 'H')?;
        self.check_max_condition(&self.b, &self.k_gens, 'K')?;
        // the positional pairing extends to an isomorphism exactly when the
        // relations of each side hold in the other
        let pres_h = self
            .a
            .subgroup_presentation(&self.h_gens)
            .map_err(|_| AmalgamError::PhiNotIsomorphism)?;
        for relator in &pres_h {
            let image = substitute(relator, &self.k_gens);
            if !self.b.is_identity_word(&image) {
                return Err(AmalgamError::PhiNotIsomorphism);
            }
        }
        let pres_k = self
            .b
            .subgroup_presentation(&self.k_gens)
            .map_err(|_| AmalgamError::PhiNotIsomorphism)?;
        for relator in &pres_k {
            let image = substitute(relator, &self.h_gens);
            if !self.a.is_identity_word(&image) {
                return Err(AmalgamError::PhiNotIsomorphism);
            }
        }
        Ok(())
    }

    fn check_max_condition(
        &self,
        factor: &EffectiveGroup,
        gens: &[Word],
        side: char,
    ) -> Result<(), AmalgamError> {
        if factor.class_name() == "free"
            && factor.alphabet.len() >= 2
            && gens.iter().any(|w| !factor.is_identity_word(w))
        {
            return Err(AmalgamError::MaxCondition { side });
        }
        Ok(())
    }

    pub fn factor(&self, side: Side) -> &EffectiveGroup {
        match side {
            Side::A => &self.a,
            Side::B => &self.b,
        }
    }

    pub fn amalgamated_gens(&self, side: Side) -> &[Word] {
        match side {
            Side::A => &self.h_gens,
            Side::B => &self.k_gens,
        }
    }

    pub fn side_of(&self, sym: usize) -> Side {
        if sym < self.a_len {
            Side::A
        } else {
            Side::B
        }
    }

    pub fn a_len(&self) -> usize {
        self.a_len
    }

    /// Move a local factor word into the combined alphabet.
    pub fn to_combined(&self, side: Side, w: &Word) -> Word {
        match side {
            Side::A => w.clone(),
            Side::B => w.map_symbols(|s| s + self.a_len),
        }
    }

    /// Interpret a one-sided combined word in its factor's local alphabet.
    pub fn to_local(&self, side: Side, w: &Word) -> Word {
        match side {
            Side::A => w.clone(),
            Side::B => w.map_symbols(|s| s - self.a_len),
        }
    }

    /// Is the amalgamated subgroup finite? Finite amalgamated subgroups send
    /// the separation search straight to the finite-amalgam machinery.
    pub fn amalgam_subgroup_finite(&self) -> bool {
        self.a.enumerate_subgroup(&self.h_gens, H_ENUM_CAP).is_some()
    }

    pub fn amalgam_is_trivial(&self) -> bool {
        self.h_gens.iter().all(|w| self.a.is_identity_word(w))
    }

    /// Transport an amalgamated-subgroup element between the factor sides
    /// through the positional generator pairing.
    pub fn transport(
        &self,
        from: Side,
        word_local: &Word,
    ) -> Result<Word, AmalgamError> {
        let (factor, own_gens, other_gens) = match from {
            Side::A => (&self.a, &self.h_gens, &self.k_gens),
            Side::B => (&self.b, &self.k_gens, &self.h_gens),
        };
        let expr = factor
            .express(own_gens, word_local)?
            .ok_or(AmalgamError::PhiNotIsomorphism)?;
        Ok(substitute(&expr, other_gens))
    }

    /// The canonical reduced sequence of a word over the combined alphabet.
    /// Two words are equal in the amalgam exactly when their sequences are
    /// equal.
    pub fn reduce(&self, w: &Word) -> Result<ReducedSequence, AmalgamError> {
        let mut seq = ReducedSequence {
            amalgam_part: self.a.nf_identity(),
            syllables: Vec::new(),
        };
        for l in w.letters() {
            self.push_letter(&mut seq, *l)?;
        }
        Ok(seq)
    }

    fn push_letter(&self, seq: &mut ReducedSequence, l: Letter) -> Result<(), AmalgamError> {
        let side = self.side_of(l.sym);
        let factor = self.factor(side);
        let local = self.to_local(side, &Word::from_letters([l]));
        let (carry_local, carry_start) = match seq.syllables.last() {
            Some(&(last_side, ref rep)) if last_side == side => {
                let y = factor.nf_to_word(rep).concat(&local);
                let (h, rep2) = factor.coset_split(self.amalgamated_gens(side), &y)?;
                let trivial = rep2 == factor.nf_identity();
                if trivial {
                    seq.syllables.pop();
                } else {
                    seq.syllables.last_mut().expect("nonempty").1 = rep2;
                }
                let start = seq.syllables.len() - usize::from(!trivial);
                (h, start)
            }
            _ => {
                let (h, rep2) = factor.coset_split(self.amalgamated_gens(side), &local)?;
                let trivial = rep2 == factor.nf_identity();
                if !trivial {
                    seq.syllables.push((side, rep2));
                }
                let start = seq.syllables.len() - usize::from(!trivial);
                (h, start)
            }
        };
        // push the amalgamated part to the front: H is normal in both
        // factors, so crossing a syllable conjugates the carry but leaves
        // the representative unchanged
        let mut carry_side = side;
        let mut carry = carry_local;
        for j in (0..carry_start).rev() {
            let (sj_side, ref sj_rep) = seq.syllables[j];
            if carry_side != sj_side {
                carry = self.transport(carry_side, &carry)?;
                carry_side = sj_side;
            }
            let sj_factor = self.factor(sj_side);
            let sj_word = sj_factor.nf_to_word(sj_rep);
            let conj = sj_word.concat(&carry).concat(&sj_word.inverse());
            carry = sj_factor.nf_to_word(&sj_factor.nf(&conj));
        }
        if carry_side != Side::A {
            carry = self.transport(carry_side, &carry)?;
        }
        seq.amalgam_part = self.a.nf_mul(&seq.amalgam_part, &self.a.nf(&carry));
        Ok(())
    }

    /// A canonical combined-alphabet word evaluating to the sequence.
    pub fn seq_to_word(&self, seq: &ReducedSequence) -> Word {
        let mut out = self.a.nf_to_word(&seq.amalgam_part);
        for (side, rep) in &seq.syllables {
            let local = self.factor(*side).nf_to_word(rep);
            out = out.concat(&self.to_combined(*side, &local));
        }
        out
    }

    pub fn is_identity(&self, w: &Word) -> Result<bool, AmalgamError> {
        let seq = self.reduce(w)?;
        Ok(seq.syllables.is_empty() && seq.amalgam_part == self.a.nf_identity())
    }

    /// Membership of a word in the amalgamated subgroup, with the element
    /// returned as a word over A's local alphabet.
    pub fn in_amalgamated_subgroup(&self, w: &Word) -> Result<Option<Word>, AmalgamError> {
        let seq = self.reduce(w)?;
        if !seq.syllables.is_empty() {
            return Ok(None);
        }
        let a_word = self.a.nf_to_word(&seq.amalgam_part);
        if self.a.member(&self.h_gens, &a_word)? {
            Ok(Some(a_word))
        } else {
            // the amalgam part always lies in H by construction
            Ok(None)
        }
    }

    /// The projection onto the free product `(A/H) * (B/K)` with trivial
    /// amalgamation. Words over the combined alphabet project to themselves.
    pub fn project_mod_amalgam(&self) -> Result<AmalgamGroup, AmalgamError> {
        let a_quot = self.a.quotient_by_fg_normal(&self.h_gens)?;
        let b_quot = self.b.quotient_by_fg_normal(&self.k_gens)?;
        AmalgamGroup::new(a_quot, b_quot, Vec::new(), Vec::new())
    }

    /// Defining relators of the amalgam over the combined alphabet: both
    /// factors' relators plus the amalgamation identities.
    pub fn relators(&self) -> Vec<Word> {
        let mut out: Vec<Word> = self.a.defining_relators();
        out.extend(
            self.b
                .defining_relators()
                .into_iter()
                .map(|w| self.to_combined(Side::B, &w)),
        );
        for (h, k) in self.h_gens.iter().zip(self.k_gens.iter()) {
            let relator = h.concat(&self.to_combined(Side::B, k).inverse());
            if !relator.is_identity() {
                out.push(relator);
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Breadth-first enumeration of products of subgroup generators inside an
/// amalgam, deduplicated by reduced sequence and carrying witness
/// expressions over the generator symbols.
pub struct ProductEnumerator<'g> {
    group: &'g AmalgamGroup,
    gens: Vec<Word>,
    pub seen: HashMap<ReducedSequence, Word>,
    frontier: Vec<(ReducedSequence, Word)>,
    state_cap: usize,
}

impl<'g> ProductEnumerator<'g> {
    pub fn new(group: &'g AmalgamGroup, gens: &[Word], state_cap: usize) -> Self {
        let id = ReducedSequence {
            amalgam_part: group.a.nf_identity(),
            syllables: Vec::new(),
        };
        let mut seen = HashMap::new();
        seen.insert(id.clone(), Word::identity());
        ProductEnumerator {
            group,
            gens: gens.to_vec(),
            seen,
            frontier: vec![(id, Word::identity())],
            state_cap,
        }
    }

    /// Extend the enumeration by one generator layer. Returns false once
    /// saturated or capped.
    pub fn advance(&mut self) -> Result<bool, AmalgamError> {
        let mut next = Vec::new();
        for (seq, expr) in std::mem::take(&mut self.frontier) {
            let word = self.group.seq_to_word(&seq);
            for (i, g) in self.gens.iter().enumerate() {
                for sign in [1i8, -1] {
                    let step = if sign > 0 { g.clone() } else { g.inverse() };
                    let cand = self.group.reduce(&word.concat(&step))?;
                    if !self.seen.contains_key(&cand) {
                        if self.seen.len() >= self.state_cap {
                            self.frontier = next;
                            return Ok(false);
                        }
                        let cand_expr = expr.concat(&Word::from_letters([Letter::new(i, sign)]));
                        self.seen.insert(cand.clone(), cand_expr.clone());
                        next.push((cand, cand_expr));
                    }
                }
            }
        }
        self.frontier = next;
        Ok(!self.frontier.is_empty())
    }

    pub fn witness(&self, target: &ReducedSequence) -> Option<&Word> {
        self.seen.get(target)
    }
}

/// The Baumslag–Solitar group `G(m, ±m)` presented as an amalgam: for the
/// plus sign the first factor is free abelian on `a, c`, for the minus sign
/// it is the Klein group; the second factor is infinite cyclic on `b`, and
/// `c` is identified with `b^m`.
pub fn bs_amalgam(m: u32, sign: i32) -> Result<AmalgamSpec, AmalgamError> {
    if m == 0 {
        return Err(AmalgamError::ArityMismatch);
    }
    let factor_a = FactorSpec {
        names: vec!["a".to_string(), "c".to_string()],
        class: if sign >= 0 {
            FactorClassSpec::Abelian {
                rank: 2,
                torsion: vec![],
            }
        } else {
            FactorClassSpec::Klein
        },
    };
    let factor_b = FactorSpec {
        names: vec!["b".to_string()],
        class: FactorClassSpec::Abelian {
            rank: 1,
            torsion: vec![],
        },
    };
    let h_gens = vec![Word::generator(1)];
    let k_gens = vec![Word::generator(0).pow(m as i64)];
    Ok(AmalgamSpec {
        factor_a,
        factor_b,
        h_gens,
        k_gens,
        query: None,
    })
}

/// The spec-file text for `bs_amalgam`, as written by the command line.
pub fn bs_spec_document(m: u32, sign: i32) -> String {
    let class_a = if sign >= 0 {
        "abelian rank=2 names=a,c"
    } else {
        "klein names=a,c"
    };
    format!(
        "# Baumslag-Solitar G({m},{}{m}) as an amalgam\n\
         factor A {class_a}\n\
         factor B abelian rank=1 names=b\n\
         amalgam H = c\n\
         amalgam K = b^{m}\n",
        if sign >= 0 { "" } else { "-" }
    )
}
