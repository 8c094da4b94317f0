//! The Klein bottle group `⟨a, c | a⁻¹ c a = c⁻¹⟩` in its normal form
//! `aⁱ cʲ`, and exact canonical data for its finitely generated subgroups.
//!
//! Conjugation by a (or a⁻¹) inverts c, so multiplication on normal forms is
//! `(i₁,j₁)·(i₂,j₂) = (i₁+i₂, (−1)^{i₂} j₁ + j₂)`. Every subgroup is
//! generated by at most two elements: an a-carrying generator `w₀ = (p, r)`
//! with minimal positive a-exponent (if any) and a c-part generator `c^q`.

use crate::presentations::{Letter, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct KleinElt {
    pub a: i64,
    pub c: i64,
}

fn sign_pow(i: i64) -> i64 {
    if i.rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

impl KleinElt {
    pub const IDENTITY: KleinElt = KleinElt { a: 0, c: 0 };

    pub fn new(a: i64, c: i64) -> Self {
        KleinElt { a, c }
    }

    pub fn mul(self, other: KleinElt) -> KleinElt {
        KleinElt {
            a: self.a + other.a,
            c: sign_pow(other.a) * self.c + other.c,
        }
    }

    pub fn inv(self) -> KleinElt {
        // (i,j)^-1 = (-i, -(-1)^i j)
        KleinElt {
            a: -self.a,
            c: -sign_pow(self.a) * self.c,
        }
    }

    pub fn pow(self, k: i64) -> KleinElt {
        let base = if k < 0 { self.inv() } else { self };
        let mut out = KleinElt::IDENTITY;
        for _ in 0..k.unsigned_abs() {
            out = out.mul(base);
        }
        out
    }

    pub fn is_identity(self) -> bool {
        self == KleinElt::IDENTITY
    }

    /// Evaluate a word over a two-letter alphabet where symbol 0 is `a` and
    /// symbol 1 is `c`.
    pub fn from_word(w: &Word) -> KleinElt {
        let mut out = KleinElt::IDENTITY;
        for l in w.letters() {
            let step = match (l.sym, l.sign > 0) {
                (0, true) => KleinElt::new(1, 0),
                (0, false) => KleinElt::new(-1, 0),
                (1, true) => KleinElt::new(0, 1),
                (1, false) => KleinElt::new(0, -1),
                _ => panic!("klein words use exactly two symbols"),
            };
            out = out.mul(step);
        }
        out
    }

    /// The canonical word `a^i c^j`.
    pub fn to_word(self) -> Word {
        let mut letters = Vec::new();
        let asign = if self.a >= 0 { 1 } else { -1 };
        for _ in 0..self.a.unsigned_abs() {
            letters.push(Letter::new(0, asign));
        }
        let csign = if self.c >= 0 { 1 } else { -1 };
        for _ in 0..self.c.unsigned_abs() {
            letters.push(Letter::new(1, csign));
        }
        Word::from_letters(letters)
    }
}

/// Expression of a subgroup element as a word in subgroup generator symbols.
pub type GenWord = Word;

/// Canonical data for a finitely generated subgroup of the Klein group.
///
/// The subgroup equals `⟨w₀⟩ · ⟨c^q⟩` where `w₀ = (p, r)` (present iff
/// `p > 0`) and `q ≥ 0` (`q = 0` means trivial c-part). `0 ≤ r < q` whenever
/// both parts are present. Witnesses express the canonical generators as
/// words in the original generator symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KleinSubgroup {
    pub p: i64,
    pub r: i64,
    pub q: i64,
    pub w0_witness: Option<GenWord>,
    pub c_witness: Option<GenWord>,
}

/// Extended gcd on group elements: combines two (element, witness) pairs into
/// one whose a-exponent is gcd of the inputs' a-exponents.
fn gcd_combine(
    x: (KleinElt, GenWord),
    y: (KleinElt, GenWord),
) -> ((KleinElt, GenWord), Option<(KleinElt, GenWord)>) {
    // classical euclidean loop on the a-parts, carried out on group elements
    let (mut big, mut small) = if x.0.a.abs() >= y.0.a.abs() {
        (x, y)
    } else {
        (y, x)
    };
    loop {
        if small.0.a == 0 {
            return (big, Some(small));
        }
        let q = big.0.a.div_euclid(small.0.a);
        let elt = big.0.mul(small.0.pow(-q));
        let word = big.1.concat(&small.1.pow(-q));
        big = small;
        small = (elt, word);
    }
}

impl KleinSubgroup {
    pub fn from_generators(gens: &[KleinElt]) -> Self {
        let pairs: Vec<(KleinElt, GenWord)> = gens
            .iter()
            .enumerate()
            .map(|(i, &g)| (g, Word::generator(i)))
            .collect();

        let mut c_parts: Vec<(KleinElt, GenWord)> = Vec::new();
        let mut w0: Option<(KleinElt, GenWord)> = None;
        for pair in pairs {
            if pair.0.is_identity() {
                continue;
            }
            if pair.0.a == 0 {
                c_parts.push(pair);
                continue;
            }
            w0 = Some(match w0.take() {
                None => pair,
                Some(cur) => {
                    // euclidean combination preserves the generated subgroup
                    // and deposits an a-free residual
                    let (g, leftover) = gcd_combine(cur, pair);
                    if let Some(l) = leftover {
                        if !l.0.is_identity() {
                            c_parts.push(l);
                        }
                    }
                    g
                }
            });
        }
        // w0 gets a positive a-exponent
        let w0 = w0.map(|(e, w)| {
            if e.a < 0 {
                (e.inv(), w.inverse())
            } else {
                (e, w)
            }
        });

        // U ∩ <c> is generated by the residuals and the pure-c generators:
        // conjugation by w0 only flips their signs, which a gcd ignores
        let mut c_gen: Option<(i64, GenWord)> = None;
        for (elt, word) in &c_parts {
            debug_assert_eq!(elt.a, 0);
            c_gen = Some(match c_gen.take() {
                None => (elt.c, word.clone()),
                Some((q0, w)) => {
                    let (mut aa, mut ww) = (q0, w);
                    let (mut bb, mut vv) = (elt.c, word.clone());
                    while bb != 0 {
                        let qq = aa.div_euclid(bb);
                        let rr = aa - qq * bb;
                        let rw = ww.concat(&vv.pow(-qq));
                        aa = bb;
                        ww = vv;
                        bb = rr;
                        vv = rw;
                    }
                    (aa, ww)
                }
            });
        }
        // orient the c witness so it evaluates to (0, +q)
        let (q, c_witness) = match c_gen {
            None => (0, None),
            Some((q, w)) if q >= 0 => (q, Some(w)),
            Some((q, w)) => (-q, Some(w.inverse())),
        };

        let mut out = KleinSubgroup {
            p: w0.as_ref().map(|(e, _)| e.a).unwrap_or(0),
            r: w0.as_ref().map(|(e, _)| e.c).unwrap_or(0),
            q,
            w0_witness: w0.map(|(_, w)| w),
            c_witness,
        };
        // reduce r into [0, q): w0 := w0 · (c^q)^-k shifts r by -kq
        if out.p > 0 && out.q > 0 {
            let k = out.r.div_euclid(out.q);
            if k != 0 {
                out.r -= k * out.q;
                let cw = out.c_witness.clone().expect("q > 0 has a witness");
                let w0w = out.w0_witness.take().expect("p > 0 has a witness");
                out.w0_witness = Some(w0w.concat(&cw.pow(-k)));
            }
        }
        if cfg!(debug_assertions) {
            if let Some(w) = &out.w0_witness {
                debug_assert_eq!(eval_gen_word(w, gens), KleinElt::new(out.p, out.r));
            }
            if let Some(w) = &out.c_witness {
                debug_assert_eq!(eval_gen_word(w, gens), KleinElt::new(0, out.q));
            }
        }
        out
    }

    /// Decompose `x` over the subgroup: returns (m, t) with
    /// `x = w₀^m · (c-gen)^t`, or None if `x` is not a member.
    pub fn decompose(&self, x: KleinElt) -> Option<(i64, i64)> {
        let m = if self.p == 0 {
            if x.a != 0 {
                return None;
            }
            0
        } else {
            if x.a.rem_euclid(self.p) != 0 {
                return None;
            }
            x.a / self.p
        };
        let w0 = KleinElt::new(self.p, self.r);
        // left-divide so the returned exponents match the product order
        let rest = w0.pow(m).inv().mul(x);
        debug_assert_eq!(rest.a, 0);
        if self.q == 0 {
            if rest.c != 0 {
                return None;
            }
            Some((m, 0))
        } else {
            if rest.c.rem_euclid(self.q) != 0 {
                return None;
            }
            Some((m, rest.c / self.q))
        }
    }

    pub fn contains(&self, x: KleinElt) -> bool {
        self.decompose(x).is_some()
    }

    /// Canonical representative of the right coset `x·U`: a-exponent reduced
    /// into `[0, p)` by w₀, then c-part reduced into `[0, q)`.
    pub fn coset_representative(&self, x: KleinElt) -> KleinElt {
        let mut rep = x;
        if self.p > 0 {
            let k = rep.a.div_euclid(self.p);
            rep = rep.mul(KleinElt::new(self.p, self.r).pow(-k));
        }
        if self.q > 0 {
            let k = rep.c.div_euclid(self.q);
            rep = rep.mul(KleinElt::new(0, self.q).pow(-k));
        }
        rep
    }

    /// Index of the subgroup when finite (both parts present), else None.
    pub fn finite_index(&self) -> Option<i64> {
        if self.p > 0 && self.q > 0 {
            Some(self.p * self.q)
        } else {
            None
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.p == 0 && self.q == 0
    }

    /// Express a member as a word over the original generator symbols.
    pub fn express(&self, x: KleinElt) -> Option<GenWord> {
        let (m, t) = self.decompose(x)?;
        let mut out = Word::identity();
        if m != 0 {
            out = out.concat(&self.w0_witness.as_ref()?.pow(m));
        }
        if t != 0 {
            out = out.concat(&self.c_witness.as_ref()?.pow(t));
        }
        Some(out)
    }
}

/// Evaluate a generator-symbol word against concrete generator elements.
pub fn eval_gen_word(w: &GenWord, gens: &[KleinElt]) -> KleinElt {
    let mut out = KleinElt::IDENTITY;
    for l in w.letters() {
        let g = gens[l.sym];
        out = out.mul(if l.sign > 0 { g } else { g.inv() });
    }
    out
}
