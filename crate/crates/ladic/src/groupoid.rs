//! Two-object layer over the free model: path-torsor elements on a formal
//! base path `p0`, finite group algebras over the prime field with their
//! augmentation-ideal vanishing index, and a randomized verifier for the
//! five compatibility diagrams of the composition / coproduct / counit /
//! antipode structure.
//!
//! The torsor is a free rank-1 left module on `p0`; the right action is
//! transported through `p0`, which on the free model with shared generator
//! names is the identity on coefficients. Grouplike torsor elements are
//! exactly (grouplike element)`*p0`.

use crate::error::{Error, Result};
use crate::freealg::{AlgebraElement, AlgebraSignature, Exponent, Word};
use crate::padic::PadicScalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Element of the path torsor: coefficients of `word * p0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorsorElement {
    inner: AlgebraElement,
}

impl TorsorElement {
    /// The base path itself.
    pub fn base_point(sig: &Arc<AlgebraSignature>) -> Self {
        TorsorElement {
            inner: AlgebraElement::one(sig),
        }
    }

    /// Wrap coefficients: the element `a * p0`.
    pub fn from_algebra(a: AlgebraElement) -> Self {
        TorsorElement { inner: a }
    }

    /// Coefficient view: the unique `a` with `self = a * p0`.
    pub fn as_algebra(&self) -> &AlgebraElement {
        &self.inner
    }

    pub fn signature(&self) -> &Arc<AlgebraSignature> {
        self.inner.signature()
    }

    pub fn is_zero(&self) -> bool {
        self.inner.is_zero()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Ok(TorsorElement {
            inner: self.inner.add(&other.inner)?,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        Ok(TorsorElement {
            inner: self.inner.sub(&other.inner)?,
        })
    }

    /// Coefficient of the bare base path; the torsor counit.
    pub fn augment(&self) -> PadicScalar {
        self.inner.augment()
    }

    /// Antipode into the opposite torsor: `x * p0` maps to the reversed
    /// path with coefficient `S(x)` transported back through `p0`. The
    /// transport is the identity on the free model, so the opposite-torsor
    /// element is returned in the same coefficient representation.
    pub fn antipode(&self) -> TorsorElement {
        TorsorElement {
            inner: self.inner.antipode(),
        }
    }

    /// Canonical text form: the coefficient serialization with a trailing
    /// `*p0` on every word, the bare path spelled `1*p0`.
    pub fn to_text(&self) -> String {
        self.inner
            .to_text()
            .lines()
            .map(|line| {
                let (word, rest) = line.split_once('\t').expect("canonical line");
                format!("{word}*p0\t{rest}\n")
            })
            .collect()
    }

    pub fn from_text(sig: &Arc<AlgebraSignature>, text: &str) -> Result<Self> {
        let mut stripped = String::new();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (word, rest) = line.split_once('\t').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: "expected tab-separated fields".into(),
            })?;
            let base = if word == "p0" {
                "1"
            } else {
                word.strip_suffix("*p0").ok_or_else(|| Error::Parse {
                    line: line_no,
                    msg: format!("torsor word {word:?} lacks the *p0 marker"),
                })?
            };
            stripped.push_str(base);
            stripped.push('\t');
            stripped.push_str(rest);
            stripped.push('\n');
        }
        Ok(TorsorElement {
            inner: AlgebraElement::from_text(sig, &stripped)?,
        })
    }
}

impl fmt::Display for TorsorElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

/// Left action `a * (w * p0) = (a w) * p0`.
pub fn torsor_compose(a: &AlgebraElement, t: &TorsorElement) -> Result<TorsorElement> {
    Ok(TorsorElement {
        inner: a.mul(&t.inner)?,
    })
}

/// Right action `(w * p0) * b = (w b) * p0`, with `b` transported through
/// `p0` (the transport is the identity on the free model).
pub fn torsor_compose_right(t: &TorsorElement, b: &AlgebraElement) -> Result<TorsorElement> {
    Ok(TorsorElement {
        inner: t.inner.mul(b)?,
    })
}

/// Class of a torsor augmentation-ideal element modulo squared ideal,
/// computed by composing with the inverse base path. The result is the
/// degree-1 part, one coefficient per generator.
pub fn abelianization_iso(t: &TorsorElement) -> Result<AlgebraElement> {
    if !t.augment().is_zero() {
        return Err(Error::Invalid(
            "element is not in the torsor augmentation submodule".into(),
        ));
    }
    Ok(degree_one_part(&t.inner))
}

/// Same class computed through the translated path `g * p0` for a grouplike
/// `g`; agrees with [`abelianization_iso`] for any choice.
pub fn abelianization_iso_via(t: &TorsorElement, g: &AlgebraElement) -> Result<AlgebraElement> {
    if !t.augment().is_zero() {
        return Err(Error::Invalid(
            "element is not in the torsor augmentation submodule".into(),
        ));
    }
    if !g.structure_tests().grouplike {
        return Err(Error::Invalid("translate must be grouplike".into()));
    }
    Ok(degree_one_part(&t.inner.mul(&g.inv()?)?))
}

fn degree_one_part(a: &AlgebraElement) -> AlgebraElement {
    let sig = a.signature();
    let mut out = AlgebraElement::zero(sig);
    for (w, c) in a.terms() {
        if w.len() == 1 {
            out = out
                .add(&AlgebraElement::monomial(sig, w.clone(), c.clone()))
                .expect("same signature");
        }
    }
    out
}

/// Finite group of prime-power order given by its multiplication table,
/// with coefficients in the prime field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroupAlgebra {
    ell: u64,
    order: usize,
    table: Vec<Vec<usize>>,
    identity: usize,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct GroupTableFile {
    ell: u64,
    order: usize,
    table: Vec<Vec<usize>>,
}

impl FiniteGroupAlgebra {
    pub fn new(ell: u64, table: Vec<Vec<usize>>) -> Result<Self> {
        PadicScalar::zero(ell, 1)?;
        let n = table.len();
        if n == 0 {
            return Err(Error::Invalid("empty multiplication table".into()));
        }
        let mut m = n;
        let mut a = 0;
        while m % ell as usize == 0 {
            m /= ell as usize;
            a += 1;
        }
        if m != 1 || a > 4 {
            return Err(Error::Invalid(format!(
                "group order {n} is not a power of {ell} with exponent at most 4"
            )));
        }
        if table.iter().any(|r| r.len() != n)
            || table.iter().flatten().any(|&x| x >= n)
        {
            return Err(Error::Invalid("malformed multiplication table".into()));
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e][g] == g && table[g][e] == g))
            .ok_or_else(|| Error::Invalid("table has no identity element".into()))?;
        for g in 0..n {
            if !(0..n).any(|h| table[g][h] == identity && table[h][g] == identity) {
                return Err(Error::Invalid(format!("element {g} has no inverse")));
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    if table[table[x][y]][z] != table[x][table[y][z]] {
                        return Err(Error::Invalid(format!(
                            "table is not associative at ({x}, {y}, {z})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroupAlgebra {
            ell,
            order: n,
            table,
            identity,
        })
    }

    /// Cyclic group of order `ell^a`.
    pub fn cyclic(ell: u64, a: u32) -> Result<Self> {
        let n = (ell as usize).pow(a);
        let table = (0..n)
            .map(|i| (0..n).map(|j| (i + j) % n).collect())
            .collect();
        Self::new(ell, table)
    }

    /// Direct product of two groups over the same prime.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.ell != other.ell {
            return Err(Error::Invalid("mismatched primes in product".into()));
        }
        let (n, m) = (self.order, other.order);
        let idx = |i: usize, j: usize| i * m + j;
        let mut table = vec![vec![0; n * m]; n * m];
        for i1 in 0..n {
            for j1 in 0..m {
                for i2 in 0..n {
                    for j2 in 0..m {
                        table[idx(i1, j1)][idx(i2, j2)] =
                            idx(self.table[i1][i2], other.table[j1][j2]);
                    }
                }
            }
        }
        Self::new(self.ell, table)
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GroupTableFile {
            ell: self.ell,
            order: self.order,
            table: self.table.clone(),
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: GroupTableFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        if f.table.len() != f.order {
            return Err(Error::Invalid(format!(
                "declared order {} does not match table size {}",
                f.order,
                f.table.len()
            )));
        }
        Self::new(f.ell, f.table)
    }

    /// Least `c` with the `c`-th power of the augmentation ideal zero in the
    /// prime-field group algebra, by iterated span of products of the
    /// `g - e` basis vectors.
    pub fn nilpotency_index(&self) -> u32 {
        let n = self.order;
        let p = self.ell;
        // Current power of the ideal as a row-echelon basis over the prime
        // field; start with the ideal itself.
        let gens: Vec<Vec<u64>> = (0..n)
            .filter(|&g| g != self.identity)
            .map(|g| {
                let mut v = vec![0u64; n];
                v[g] = 1;
                v[self.identity] = p - 1;
                v
            })
            .collect();
        let mut basis = echelon_ff(p, gens);
        let mut c = 1;
        while !basis.is_empty() {
            let mut next = Vec::new();
            for g in 0..n {
                if g == self.identity {
                    continue;
                }
                for b in &basis {
                    // (e_g - e_id) * b: permute coordinates by left
                    // multiplication, subtract b.
                    let mut v = vec![0u64; n];
                    for (y, &coef) in b.iter().enumerate() {
                        if coef == 0 {
                            continue;
                        }
                        let gy = self.table[g][y];
                        v[gy] = (v[gy] + coef) % p;
                        v[y] = (v[y] + p - coef) % p;
                    }
                    next.push(v);
                }
            }
            basis = echelon_ff(p, next);
            c += 1;
        }
        c
    }
}

/// Row echelon form over the prime field; returns a basis of the row span.
fn echelon_ff(p: u64, rows: Vec<Vec<u64>>) -> Vec<Vec<u64>> {
    let mut basis: Vec<Vec<u64>> = Vec::new();
    for mut r in rows {
        for b in &basis {
            let lead = b.iter().position(|&x| x != 0).expect("nonzero basis row");
            if r[lead] != 0 {
                let f = r[lead] * inv_ff(p, b[lead]) % p;
                for (x, &y) in r.iter_mut().zip(b.iter()) {
                    *x = (*x + (p - f) * y) % p;
                }
            }
        }
        if r.iter().any(|&x| x != 0) {
            basis.push(r);
            basis.sort_by_key(|b| b.iter().position(|&x| x != 0));
        }
    }
    basis
}

fn inv_ff(p: u64, a: u64) -> u64 {
    // Fermat inverse; p prime, a nonzero.
    let mut acc = 1u64;
    let mut base = a % p;
    let mut e = p - 2;
    while e > 0 {
        if e & 1 == 1 {
            acc = (acc as u128 * base as u128 % p as u128) as u64;
        }
        base = (base as u128 * base as u128 % p as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Outcome of one diagram check.
#[derive(Debug, Clone)]
pub struct DiagramResult {
    pub name: &'static str,
    pub passed: bool,
    pub samples: usize,
    pub witness: Option<String>,
}

/// Report of [`verify_hopf_axioms`]: one row per diagram.
#[derive(Debug, Clone)]
pub struct HopfReport {
    pub diagrams: Vec<DiagramResult>,
}

impl HopfReport {
    pub fn all_passed(&self) -> bool {
        self.diagrams.iter().all(|d| d.passed)
    }
}

type Triple = BTreeMap<(Word, Word, Word), PadicScalar>;

fn triple_insert(map: &mut Triple, key: (Word, Word, Word), c: PadicScalar) {
    if c.is_zero() {
        return;
    }
    match map.entry(key) {
        Entry::Vacant(e) => {
            e.insert(c);
        }
        Entry::Occupied(mut e) => {
            let s = e.get().add(&c).expect("matching scalar structure");
            if s.is_zero() {
                e.remove();
            } else {
                *e.get_mut() = s;
            }
        }
    }
}

/// Both triple coproducts, compared in the total-degree quotient.
fn coassociative_at_truncation(x: &AlgebraElement) -> bool {
    let sig = x.signature();
    let d = sig.max_degree() as usize;
    let delta = x.coproduct();
    let mut left: Triple = BTreeMap::new();
    let mut right: Triple = BTreeMap::new();
    for ((w1, w2), c) in delta.terms() {
        let m1 = AlgebraElement::monomial(sig, w1.clone(), c.clone());
        for ((a, b), cc) in m1.coproduct().terms() {
            if a.len() + b.len() + w2.len() <= d {
                triple_insert(&mut left, (a.clone(), b.clone(), w2.clone()), cc.clone());
            }
        }
        let m2 = AlgebraElement::monomial(sig, w2.clone(), c.clone());
        for ((b, cw), cc) in m2.coproduct().terms() {
            if w1.len() + b.len() + cw.len() <= d {
                triple_insert(&mut right, (w1.clone(), b.clone(), cw.clone()), cc.clone());
            }
        }
    }
    left == right
}

fn sample_element(
    sig: &Arc<AlgebraSignature>,
    rng: &mut ChaCha8Rng,
) -> AlgebraElement {
    let d = sig.max_degree();
    let g = sig.generators().len();
    let mut acc = AlgebraElement::zero(sig);
    let terms = rng.gen_range(1..=4);
    for _ in 0..terms {
        let len = rng.gen_range(0..=d) as usize;
        let letters: Vec<u8> = (0..len).map(|_| rng.gen_range(0..g) as u8).collect();
        let mut c: i128 = rng.gen_range(1..=9);
        if rng.gen_bool(0.5) {
            c = -c;
        }
        if rng.gen_bool(0.3) {
            c *= sig.ell() as i128;
        }
        acc = acc
            .add(&AlgebraElement::monomial(
                sig,
                Word::new(letters),
                sig.scalar_from_int(c),
            ))
            .expect("same signature");
    }
    acc
}

fn sample_grouplike(sig: &Arc<AlgebraSignature>, rng: &mut ChaCha8Rng) -> AlgebraElement {
    let g = sig.generators().len();
    let factors = rng.gen_range(1..=3);
    let word: Vec<(usize, Exponent)> = (0..factors)
        .map(|_| {
            let j = rng.gen_range(0..g);
            let e = loop {
                let e = rng.gen_range(-3i64..=3);
                if e != 0 {
                    break e;
                }
            };
            (j, Exponent::Int(e))
        })
        .collect();
    AlgebraElement::group_element(sig, &word).expect("valid word")
}

/// Randomized check of the five compatibility diagrams over the two-object
/// groupoid (the base algebra plus its torsor). Failures are report
/// content, never errors.
pub fn verify_hopf_axioms(
    sig: &Arc<AlgebraSignature>,
    samples: usize,
    seed: u64,
) -> HopfReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = sig.max_degree();
    let one = AlgebraElement::one(sig);

    let mut coassoc = DiagramResult {
        name: "coassociativity",
        passed: true,
        samples,
        witness: None,
    };
    let mut comp = DiagramResult {
        name: "coproduct-composition",
        passed: true,
        samples,
        witness: None,
    };
    let mut counit = DiagramResult {
        name: "counit-composition",
        passed: true,
        samples,
        witness: None,
    };
    let mut anti_l = DiagramResult {
        name: "antipode-left",
        passed: true,
        samples,
        witness: None,
    };
    let mut anti_r = DiagramResult {
        name: "antipode-right",
        passed: true,
        samples,
        witness: None,
    };

    for i in 0..samples {
        // First sample is the base path itself (grouplike), the rest are
        // random mixed elements and a random torsor coefficient.
        let x = if i == 0 {
            one.clone()
        } else if i % 3 == 0 {
            sample_grouplike(sig, &mut rng)
        } else {
            sample_element(sig, &mut rng)
        };
        let t = TorsorElement::from_algebra(if i % 2 == 0 {
            sample_element(sig, &mut rng)
        } else {
            sample_grouplike(sig, &mut rng)
        });
        let y = sample_element(sig, &mut rng);

        if coassoc.passed && !(coassociative_at_truncation(&x)
            && coassociative_at_truncation(t.as_algebra()))
        {
            coassoc.passed = false;
            coassoc.witness = Some(format!("sample {i}:\n{}", x.to_text()));
        }

        if comp.passed {
            let xt = torsor_compose(&x, &t).expect("same signature");
            let lhs_alg = x.mul(&y).expect("same signature").coproduct().truncate_total(d);
            let rhs_alg = x
                .coproduct()
                .mul(&y.coproduct())
                .expect("same signature")
                .truncate_total(d);
            let lhs_t = xt.as_algebra().coproduct().truncate_total(d);
            let rhs_t = x
                .coproduct()
                .mul(&t.as_algebra().coproduct())
                .expect("same signature")
                .truncate_total(d);
            if lhs_alg != rhs_alg || lhs_t != rhs_t {
                comp.passed = false;
                comp.witness = Some(format!("sample {i}:\n{}{}", x.to_text(), y.to_text()));
            }
        }

        if counit.passed {
            let lhs = x.mul(&y).expect("same signature").augment();
            let rhs = x.augment().mul(&y.augment()).expect("matching scalars");
            let lhs_t = torsor_compose(&x, &t).expect("same signature").augment();
            let rhs_t = x.augment().mul(&t.augment()).expect("matching scalars");
            if lhs != rhs || lhs_t != rhs_t {
                counit.passed = false;
                counit.witness = Some(format!("sample {i}:\n{}{}", x.to_text(), y.to_text()));
            }
        }

        if anti_l.passed {
            let lhs = x.coproduct().map_antipode(true).collapse();
            let expect = AlgebraElement::from_scalar(sig, x.augment());
            let lhs_t = t.as_algebra().coproduct().map_antipode(true).collapse();
            let expect_t = AlgebraElement::from_scalar(sig, t.augment());
            if lhs != expect || lhs_t != expect_t {
                anti_l.passed = false;
                anti_l.witness = Some(format!("sample {i}:\n{}", x.to_text()));
            }
        }

        if anti_r.passed {
            let rhs = x.coproduct().map_antipode(false).collapse();
            let expect = AlgebraElement::from_scalar(sig, x.augment());
            let rhs_t = t.as_algebra().coproduct().map_antipode(false).collapse();
            let expect_t = AlgebraElement::from_scalar(sig, t.augment());
            if rhs != expect || rhs_t != expect_t {
                anti_r.passed = false;
                anti_r.witness = Some(format!("sample {i}:\n{}", x.to_text()));
            }
        }
    }

    HopfReport {
        diagrams: vec![coassoc, comp, counit, anti_l, anti_r],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::Valuation;

    fn sig2() -> Arc<AlgebraSignature> {
        AlgebraSignature::new(3, 5, 4, &[("X", 1), ("Y", 1)]).unwrap()
    }

    #[test]
    fn unit_acts_trivially() {
        let s = sig2();
        let p0 = TorsorElement::base_point(&s);
        let one = AlgebraElement::one(&s);
        assert_eq!(torsor_compose(&one, &p0).unwrap(), p0);
    }

    #[test]
    fn actions_associate() {
        let s = sig2();
        let x = AlgebraElement::generator(&s, 0).unwrap();
        let g = AlgebraElement::group_element(&s, &[(1, Exponent::Int(-1))]).unwrap();
        let t = torsor_compose(&x, &TorsorElement::base_point(&s)).unwrap();
        let left = torsor_compose_right(&torsor_compose(&g, &t).unwrap(), &g).unwrap();
        let right = torsor_compose(&g, &torsor_compose_right(&t, &g).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    #[test]
    fn ideal_action_deepens_filtration() {
        let s = sig2();
        let x = AlgebraElement::generator(&s, 0).unwrap();
        let y = AlgebraElement::generator(&s, 1).unwrap();
        let t = torsor_compose(&y, &TorsorElement::base_point(&s)).unwrap();
        let deep = torsor_compose(&x, &t).unwrap();
        let (i, _) = deep.as_algebra().filtration_degree();
        assert!(i >= Valuation::Finite(2));
    }

    #[test]
    fn abelianization_examples() {
        let s = sig2();
        let x = AlgebraElement::generator(&s, 0).unwrap();
        let t = torsor_compose(&x, &TorsorElement::base_point(&s)).unwrap();
        assert_eq!(abelianization_iso(&t).unwrap(), x);

        // (gamma - 1) * p0 via gamma*p0 - p0.
        let g = AlgebraElement::group_element(&s, &[(0, Exponent::Int(1))]).unwrap();
        let gm1 = TorsorElement::from_algebra(g.clone())
            .sub(&TorsorElement::base_point(&s))
            .unwrap();
        assert_eq!(abelianization_iso(&gm1).unwrap(), x);

        // Independence of the chosen path.
        let h = AlgebraElement::group_element(
            &s,
            &[(0, Exponent::Int(2)), (1, Exponent::Int(-1))],
        )
        .unwrap();
        let mixed = torsor_compose(
            &x.mul(&x).unwrap().add(&x).unwrap(),
            &TorsorElement::base_point(&s),
        )
        .unwrap();
        assert_eq!(
            abelianization_iso(&mixed).unwrap(),
            abelianization_iso_via(&mixed, &h).unwrap()
        );
        assert!(abelianization_iso(&TorsorElement::base_point(&s)).is_err());
    }

    #[test]
    fn abelianization_rank_is_generator_count() {
        let s = sig2();
        let mut classes = Vec::new();
        for j in 0..s.generators().len() {
            let g = AlgebraElement::group_element(&s, &[(j, Exponent::Int(1))]).unwrap();
            let t = TorsorElement::from_algebra(g)
                .sub(&TorsorElement::base_point(&s))
                .unwrap();
            classes.push(abelianization_iso(&t).unwrap());
        }
        // Distinct generators map to distinct basis monomials.
        for (j, c) in classes.iter().enumerate() {
            assert_eq!(c, &AlgebraElement::generator(&s, j).unwrap());
        }
    }

    #[test]
    fn torsor_text_round_trip() {
        let s = sig2();
        let x = AlgebraElement::generator(&s, 0).unwrap();
        let t = torsor_compose(
            &AlgebraElement::one(&s).add(&x).unwrap(),
            &TorsorElement::base_point(&s),
        )
        .unwrap();
        let text = t.to_text();
        assert_eq!(text, "1*p0\t0\t1\nX*p0\t0\t1\n");
        assert_eq!(TorsorElement::from_text(&s, &text).unwrap(), t);
        assert!(TorsorElement::from_text(&s, "X\t0\t1\n").is_err());
    }

    #[test]
    fn torsor_antipode_is_an_involution() {
        let s = sig2();
        let g = AlgebraElement::group_element(
            &s,
            &[(0, Exponent::Int(2)), (1, Exponent::Int(-1))],
        )
        .unwrap();
        let t = torsor_compose(&g, &TorsorElement::base_point(&s)).unwrap();
        assert_eq!(t.antipode().antipode(), t);
        let mixed = TorsorElement::from_algebra(
            g.add(&AlgebraElement::generator(&s, 0).unwrap()).unwrap(),
        );
        assert_eq!(mixed.antipode().antipode(), mixed);
    }

    #[test]
    fn group_table_validation() {
        assert!(FiniteGroupAlgebra::cyclic(3, 1).is_ok());
        assert!(FiniteGroupAlgebra::cyclic(3, 5).is_err());
        // Non-associative 3-element table.
        let bad = vec![vec![0, 1, 2], vec![1, 0, 0], vec![2, 0, 1]];
        assert!(FiniteGroupAlgebra::new(3, bad).is_err());
        // Order not a power of the prime.
        assert!(FiniteGroupAlgebra::new(2, vec![
            vec![0, 1, 2],
            vec![1, 2, 0],
            vec![2, 0, 1]
        ])
        .is_err());
    }

    #[test]
    fn nilpotency_examples() {
        assert_eq!(FiniteGroupAlgebra::cyclic(3, 0).unwrap().nilpotency_index(), 1);
        assert_eq!(FiniteGroupAlgebra::cyclic(3, 1).unwrap().nilpotency_index(), 3);
        let z3 = FiniteGroupAlgebra::cyclic(3, 1).unwrap();
        assert_eq!(z3.product(&z3).unwrap().nilpotency_index(), 5);
        assert_eq!(FiniteGroupAlgebra::cyclic(2, 2).unwrap().nilpotency_index(), 4);
    }

    #[test]
    fn nilpotency_closed_forms_by_brute_span() {
        for ell in [2u64, 3] {
            let g = FiniteGroupAlgebra::cyclic(ell, 1).unwrap();
            assert_eq!(g.nilpotency_index() as u64, ell);
            let gg = g.product(&g).unwrap();
            assert_eq!(gg.nilpotency_index() as u64, 2 * ell - 1);
        }
    }

    #[test]
    fn group_table_json_round_trip() {
        let g = FiniteGroupAlgebra::cyclic(3, 1).unwrap();
        let j = g.to_json();
        assert_eq!(FiniteGroupAlgebra::from_json(&j).unwrap(), g);
    }

    #[test]
    fn hopf_selftest_passes() {
        let s = AlgebraSignature::new(3, 5, 3, &[("X", 1)]).unwrap();
        let report = verify_hopf_axioms(&s, 50, 17);
        for d in &report.diagrams {
            assert!(d.passed, "{} failed: {:?}", d.name, d.witness);
        }
        let s2 = AlgebraSignature::new(2, 6, 3, &[("X", 1), ("C", 2)]).unwrap();
        assert!(verify_hopf_axioms(&s2, 25, 3).all_passed());
    }
}
