//! Degree-`q` scalar actions on the truncated free model and their
//! consequences: verification of the graded eigenvalue property, lifting of
//! graded classes to genuine eigenvectors with certified denominator
//! bookkeeping, the canonical fixed path on the torsor attached to an
//! integral cocycle, and annihilator exponents for two-step filtered
//! blocks.
//!
//! The action is determined by its generator images
//! `X_j -> (1 + X_j)^(q^{d_j}) - 1 + P_j` with the perturbation `P_j`
//! supported in grade at least `d_j + 1`; on grade-`m` classes it is then
//! multiplication by `q^m` modulo higher grade.

use crate::error::{Error, Result};
use crate::freealg::{enumerate_words, AlgebraElement, AlgebraSignature, Exponent, Word};
use crate::groupoid::{torsor_compose, TorsorElement};
use crate::linalg::{diagonalize, invert, MatZ, ModCtx};
use crate::padic::{cbound, PadicScalar, RationalBound, Valuation};
use num::bigint::BigInt;
use num::{BigUint, One, Zero};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Multiplicative action of a degree-`q` scalar on the free model.
#[derive(Debug, Clone)]
pub struct QuasiScalar {
    sig: Arc<AlgebraSignature>,
    q: u128,
    q_big: BigUint,
    images: Vec<AlgebraElement>,
    perturbations: Vec<Option<AlgebraElement>>,
}

/// Result of checking the graded eigenvalue property on every basis word.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuasiScalarCheck {
    pub ok: bool,
    pub first_failing_grade: Option<u32>,
}

fn big_vp(ell: u64, n: &BigUint) -> u64 {
    let l = BigUint::from(ell);
    let mut n = n.clone();
    let mut v = 0;
    while !n.is_zero() && (&n % &l).is_zero() {
        n /= &l;
        v += 1;
    }
    v
}

impl QuasiScalar {
    /// Action with trivial perturbations. `q` must be at least 2 and a unit
    /// modulo the prime of the signature.
    pub fn new(sig: &Arc<AlgebraSignature>, q: u128) -> Result<Self> {
        if q < 2 {
            return Err(Error::Invalid("degree must be at least 2".into()));
        }
        if q % sig.ell() as u128 == 0 {
            return Err(Error::Invalid(format!(
                "degree {q} is not a unit modulo {}",
                sig.ell()
            )));
        }
        let q_big = BigUint::from(q);
        let mut images = Vec::new();
        for (j, gen) in sig.generators().iter().enumerate() {
            let e = q_big.pow(gen.grade as u32);
            let exp = match u64::try_from(&e) {
                Ok(v) if v <= i64::MAX as u64 => Exponent::Int(v as i64),
                _ => Exponent::Scalar(sig.scalar_from_bigint(&BigInt::from(e))),
            };
            let img = AlgebraElement::group_element(sig, &[(j, exp)])?.augmentation_part();
            images.push(img);
        }
        Ok(QuasiScalar {
            sig: sig.clone(),
            q,
            q_big,
            perturbations: vec![None; images.len()],
            images,
        })
    }

    /// Replace the image of generator `j` by its base series plus `p`; the
    /// perturbation must sit in grade at least `d_j + 1`.
    pub fn with_perturbation(mut self, j: usize, p: AlgebraElement) -> Result<Self> {
        let gen = self
            .sig
            .generators()
            .get(j)
            .ok_or_else(|| Error::Invalid(format!("no generator with index {j}")))?;
        let min_grade = gen.grade as u32 + 1;
        if p.terms().any(|(w, _)| w.grade(&self.sig) < min_grade) {
            return Err(Error::Invalid(format!(
                "perturbation of generator {j} must have grade at least {min_grade}"
            )));
        }
        let base = self.images[j].sub(
            self.perturbations[j]
                .as_ref()
                .unwrap_or(&AlgebraElement::zero(&self.sig)),
        )?;
        self.images[j] = base.add(&p)?;
        self.perturbations[j] = Some(p);
        Ok(self)
    }

    pub fn signature(&self) -> &Arc<AlgebraSignature> {
        &self.sig
    }

    pub fn degree(&self) -> u128 {
        self.q
    }

    pub fn image(&self, j: usize) -> &AlgebraElement {
        &self.images[j]
    }

    /// `q^m` as an exact scalar.
    fn scalar_qpow(&self, m: u32) -> PadicScalar {
        self.sig
            .scalar_from_bigint(&BigInt::from(self.q_big.pow(m)))
    }

    /// `q^k - 1` as an exact scalar; errors when its valuation meets the
    /// working window, since dividing by it would leave nothing certified.
    fn gap_scalar(&self, k: u32) -> Result<PadicScalar> {
        let n = self.q_big.pow(k) - BigUint::one();
        let v = big_vp(self.sig.ell(), &n);
        if v >= self.sig.precision() as u64 {
            return Err(Error::RootOfUnity(format!(
                "q^{k} is 1 to the working precision (valuation {v})"
            )));
        }
        Ok(self.sig.scalar_from_bigint(&BigInt::from(n)))
    }

    fn ensure_cached(
        &self,
        w: &Word,
        cache: &mut BTreeMap<Word, AlgebraElement>,
    ) -> Result<()> {
        let letters = w.letters();
        for i in 1..=letters.len() {
            let prefix = Word::new(letters[..i].to_vec());
            if cache.contains_key(&prefix) {
                continue;
            }
            let base = if i == 1 {
                AlgebraElement::one(&self.sig)
            } else {
                cache[&Word::new(letters[..i - 1].to_vec())].clone()
            };
            let img = &self.images[letters[i - 1] as usize];
            cache.insert(prefix, base.mul(img)?);
        }
        Ok(())
    }

    fn apply_cached(
        &self,
        x: &AlgebraElement,
        cache: &mut BTreeMap<Word, AlgebraElement>,
    ) -> Result<AlgebraElement> {
        let mut acc = AlgebraElement::zero(&self.sig);
        for (w, c) in x.terms() {
            if w.is_empty() {
                acc = acc.add(&AlgebraElement::from_scalar(&self.sig, c.clone()))?;
                continue;
            }
            self.ensure_cached(w, cache)?;
            acc = acc.add(&cache[w].scalar_mul(c))?;
        }
        Ok(acc)
    }

    /// Apply the action to an arbitrary element.
    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        let mut cache = BTreeMap::new();
        self.apply_cached(x, &mut cache)
    }

    /// Check `sigma(w) = q^grade(w) * w` modulo higher grade on every word
    /// of the truncated model.
    pub fn verify(&self) -> QuasiScalarCheck {
        let mut cache = BTreeMap::new();
        let mut failing: Option<u32> = None;
        for w in enumerate_words(&self.sig, self.sig.max_degree() as usize) {
            let m = w.grade(&self.sig);
            let mono = AlgebraElement::monomial(&self.sig, w.clone(), self.sig.one_scalar());
            let sw = match self.apply_cached(&mono, &mut cache) {
                Ok(x) => x,
                Err(_) => {
                    failing = Some(failing.map_or(m, |f| f.min(m)));
                    continue;
                }
            };
            let diff = sw
                .sub(&mono.scalar_mul(&self.scalar_qpow(m)))
                .expect("same signature");
            if diff.terms().any(|(u, _)| u.grade(&self.sig) <= m) {
                failing = Some(failing.map_or(m, |f| f.min(m)));
            }
        }
        QuasiScalarCheck {
            ok: failing.is_none(),
            first_failing_grade: failing,
        }
    }

    #[cfg(test)]
    fn with_raw_image_for_tests(mut self, j: usize, img: AlgebraElement) -> Self {
        self.images[j] = img;
        self
    }

    /// Lift a homogeneous integral class to an eigenvector modulo grade
    /// beyond `grade_cap`, dividing each graded defect by `q^m (q^k - 1)`.
    pub fn eigen_lift(&self, seed: &AlgebraElement, grade_cap: u32) -> Result<EigenLift> {
        let check = self.verify();
        if !check.ok {
            return Err(Error::Invalid(
                "action fails the graded eigenvalue property".into(),
            ));
        }
        let mut cache = BTreeMap::new();
        self.lift_inner(seed, grade_cap, &mut cache)
    }

    fn lift_inner(
        &self,
        seed: &AlgebraElement,
        grade_cap: u32,
        cache: &mut BTreeMap<Word, AlgebraElement>,
    ) -> Result<EigenLift> {
        if seed.is_zero() {
            return Err(Error::Invalid("seed class is zero".into()));
        }
        let mut grades = seed.terms().map(|(w, _)| w.grade(&self.sig));
        let m = grades.next().expect("nonzero element");
        if grades.any(|g| g != m) {
            return Err(Error::Invalid("seed class is not homogeneous".into()));
        }
        for (_, c) in seed.terms() {
            if matches!(c.valuation(), Valuation::Finite(v) if v < 0) {
                return Err(Error::Invalid("seed class is not integral".into()));
            }
        }
        if grade_cap < m {
            return Err(Error::Invalid("grade cap below the seed grade".into()));
        }
        self.check_grade_representable(grade_cap)?;

        let qm = self.scalar_qpow(m);
        let mut v = seed.clone();
        let mut sv = self.apply_cached(&v, cache)?;
        for g in m + 1..=grade_cap {
            let defect = grade_part(&sv, g)
                .sub(&grade_part(&v, g).scalar_mul(&qm))
                .expect("same signature");
            if defect.is_zero() {
                continue;
            }
            let denom = qm.mul(&self.gap_scalar(g - m)?)?;
            let corr = defect.scalar_mul(&denom.inv()?).neg();
            v = v.add(&corr)?;
            sv = sv.add(&self.apply_cached(&corr, cache)?)?;
        }
        let measured_period = element_period(&v);
        Ok(EigenLift {
            vector: v,
            measured_period,
        })
    }

    fn check_grade_representable(&self, grade_cap: u32) -> Result<()> {
        let gmin = self
            .sig
            .generators()
            .iter()
            .map(|g| g.grade as u32)
            .min()
            .expect("nonempty generator list");
        if grade_cap > self.sig.max_degree() * gmin {
            return Err(Error::Invalid(format!(
                "grade cap {grade_cap} exceeds the representable range \
                 {} of the truncated model",
                self.sig.max_degree() * gmin
            )));
        }
        Ok(())
    }

    /// Lift every basis word of grade at most `grade_cap`, reporting the
    /// worst measured period per grade against the valuation budget.
    pub fn eigenbasis(&self, grade_cap: u32) -> Result<EigenBasisReport> {
        let check = self.verify();
        if !check.ok {
            return Err(Error::Invalid(
                "action fails the graded eigenvalue property".into(),
            ));
        }
        self.check_grade_representable(grade_cap)?;
        let mut cache = BTreeMap::new();
        let mut entries = Vec::new();
        let mut worst: BTreeMap<u32, u32> = BTreeMap::new();
        for w in enumerate_words(&self.sig, self.sig.max_degree() as usize) {
            let m = w.grade(&self.sig);
            if m > grade_cap {
                continue;
            }
            let mono = AlgebraElement::monomial(&self.sig, w.clone(), self.sig.one_scalar());
            let lift = self.lift_inner(&mono, grade_cap, &mut cache)?;
            let e = worst.entry(m).or_insert(0);
            *e = (*e).max(lift.measured_period);
            entries.push(EigenEntry {
                word: w,
                vector: lift.vector,
                measured_period: lift.measured_period,
            });
        }
        let mut per_grade = Vec::new();
        for (grade, worst_period) in worst {
            let bound = cbound(self.q, self.sig.ell(), (grade_cap - grade) as u64)?;
            let within_bound = RationalBound::from_int(worst_period as i128) <= bound;
            per_grade.push(GradeDiagnostic {
                grade,
                worst_period,
                bound,
                within_bound,
            });
        }
        Ok(EigenBasisReport { entries, per_grade })
    }
}

/// A lifted eigenvector together with its measured denominator exponent.
#[derive(Debug, Clone)]
pub struct EigenLift {
    pub vector: AlgebraElement,
    pub measured_period: u32,
}

#[derive(Debug, Clone)]
pub struct EigenEntry {
    pub word: Word,
    pub vector: AlgebraElement,
    pub measured_period: u32,
}

#[derive(Debug, Clone)]
pub struct GradeDiagnostic {
    pub grade: u32,
    pub worst_period: u32,
    pub bound: RationalBound,
    pub within_bound: bool,
}

#[derive(Debug, Clone)]
pub struct EigenBasisReport {
    pub entries: Vec<EigenEntry>,
    pub per_grade: Vec<GradeDiagnostic>,
}

fn grade_part(x: &AlgebraElement, g: u32) -> AlgebraElement {
    let sig = x.signature();
    let mut out = AlgebraElement::zero(sig);
    for (w, c) in x.terms() {
        if w.grade(sig) == g {
            out = out
                .add(&AlgebraElement::monomial(sig, w.clone(), c.clone()))
                .expect("same signature");
        }
    }
    out
}

fn element_period(v: &AlgebraElement) -> u32 {
    let mut period = 0i64;
    for (_, c) in v.terms() {
        if let Valuation::Finite(t) = c.valuation() {
            period = period.max(-t);
        }
    }
    period.max(0) as u32
}

/// Twisted action on the torsor: `a * p0` maps to `sigma(a) u * p0` for an
/// integral cocycle `u` of augmentation 1.
#[derive(Debug, Clone)]
pub struct TorsorCocycle {
    sigma: QuasiScalar,
    u: AlgebraElement,
}

impl TorsorCocycle {
    pub fn new(sigma: QuasiScalar, u: AlgebraElement) -> Result<Self> {
        if u.augment() != sigma.sig.one_scalar() {
            return Err(Error::Invalid("cocycle must have augmentation 1".into()));
        }
        for (_, c) in u.terms() {
            if matches!(c.valuation(), Valuation::Finite(v) if v < 0) {
                return Err(Error::Invalid("cocycle must be integral".into()));
            }
        }
        Ok(TorsorCocycle { sigma, u })
    }

    pub fn sigma(&self) -> &QuasiScalar {
        &self.sigma
    }

    pub fn cocycle(&self) -> &AlgebraElement {
        &self.u
    }

    pub fn apply(&self, t: &TorsorElement) -> Result<TorsorElement> {
        let moved = self.sigma.apply(t.as_algebra())?.mul(&self.u)?;
        torsor_compose(&moved, &TorsorElement::base_point(&self.sigma.sig))
    }
}

/// The fixed path of a torsor cocycle together with its per-level
/// denominator exponents `b0_n` for `n = 1..=grade_cap`.
#[derive(Debug, Clone)]
pub struct CanonicalPath {
    pub path: TorsorElement,
    pub periods: Vec<u32>,
}

/// Solve `sigma(w) u = w` with augmentation 1, grade by grade, dividing the
/// level-`g` defect by `1 - q^g`.
pub fn canonical_path(c: &TorsorCocycle, grade_cap: u32) -> Result<CanonicalPath> {
    canonical_path_ordered(c, grade_cap, false)
}

pub(crate) fn canonical_path_ordered(
    c: &TorsorCocycle,
    grade_cap: u32,
    reverse: bool,
) -> Result<CanonicalPath> {
    let sigma = &c.sigma;
    let check = sigma.verify();
    if !check.ok {
        return Err(Error::Invalid(
            "action fails the graded eigenvalue property".into(),
        ));
    }
    sigma.check_grade_representable(grade_cap)?;
    let sig = &sigma.sig;
    let mut cache = BTreeMap::new();
    let mut w = AlgebraElement::one(sig);
    for g in 1..=grade_cap {
        let f = sigma.apply_cached(&w, &mut cache)?.mul(&c.u)?.sub(&w)?;
        let mut terms: Vec<(Word, PadicScalar)> = f
            .terms()
            .filter(|(u, _)| u.grade(sig) == g)
            .map(|(u, c)| (u.clone(), c.clone()))
            .collect();
        if reverse {
            terms.reverse();
        }
        if terms.is_empty() {
            continue;
        }
        // 1 - q^g = -(q^g - 1).
        let denom = sigma.gap_scalar(g)?.neg();
        let inv = denom.inv()?;
        let mut corr = AlgebraElement::zero(sig);
        for (u, coeff) in terms {
            corr = corr.add(&AlgebraElement::monomial(sig, u, coeff.mul(&inv)?))?;
        }
        w = w.add(&corr)?;
    }

    let mut periods = vec![0u32; grade_cap as usize];
    for (u, coeff) in w.terms() {
        let g = u.grade(sig);
        if let Valuation::Finite(t) = coeff.valuation() {
            let p = (-t).max(0) as u32;
            for n in (g + 1)..=grade_cap {
                let slot = &mut periods[(n - 1) as usize];
                *slot = (*slot).max(p);
            }
        }
    }
    Ok(CanonicalPath {
        path: TorsorElement::from_algebra(w),
        periods,
    })
}

/// A filtered square block over the working ring: top-left `w` columns span
/// the subobject, the lower-left block vanishes, and the whole matrix is
/// invertible modulo the prime.
#[derive(Debug, Clone)]
pub struct PeriodTriple {
    ell: u64,
    precision: u32,
    w: usize,
    mat: MatZ,
}

/// Annihilator exponent: finite, or beyond the working window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PeriodValue {
    Finite(u32),
    InfiniteAtPrecision,
}

impl fmt::Display for PeriodValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PeriodValue::Finite(e) => write!(f, "{e}"),
            PeriodValue::InfiniteAtPrecision => write!(f, "inf"),
        }
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct PeriodTripleFile {
    ell: u64,
    precision: u32,
    w: usize,
    matrix: Vec<Vec<String>>,
}

impl PeriodTriple {
    pub fn new(ell: u64, precision: u32, w: usize, rows: &[Vec<i128>]) -> Result<Self> {
        let ctx = ModCtx::new(ell, precision)?;
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid("matrix is not square".into()));
        }
        if w > n {
            return Err(Error::Invalid(
                "subobject dimension exceeds the total dimension".into(),
            ));
        }
        let reduced: Vec<Vec<u128>> = rows
            .iter()
            .map(|r| r.iter().map(|&x| ctx.reduce_i128(x)).collect())
            .collect();
        for (i, row) in reduced.iter().enumerate().skip(w) {
            for (j, &x) in row.iter().enumerate().take(w) {
                if x != 0 {
                    return Err(Error::Invalid(format!(
                        "lower-left block must vanish; entry ({i}, {j}) is {x}"
                    )));
                }
            }
        }
        let mat = MatZ::from_rows(ctx, &reduced)?;
        let ctx1 = ModCtx::new(ell, 1)?;
        let residue: Vec<Vec<u128>> = reduced
            .iter()
            .map(|r| r.iter().map(|&x| x % ell as u128).collect())
            .collect();
        if invert(&MatZ::from_rows(ctx1, &residue)?).is_none() {
            return Err(Error::Invalid(
                "matrix is not invertible modulo the prime".into(),
            ));
        }
        Ok(PeriodTriple {
            ell,
            precision,
            w,
            mat,
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.rows
    }

    pub fn sub_dim(&self) -> usize {
        self.w
    }

    /// Least `e` such that `ell^e` times the projection to the quotient
    /// block factors through a compatible splitting, by diagonalizing the
    /// two-sided block commutator equation.
    pub fn integral_period(&self) -> PeriodValue {
        let n = self.dim();
        let w = self.w;
        let m = self.precision;
        if w == 0 || w == n {
            return PeriodValue::Finite(0);
        }
        let ctx = self.mat.ctx;
        let h = n - w;
        let dim = w * h;
        // Row (i, j) of the operator T -> T Fbar - F_W T over entries
        // t_{(i, k)} and t_{(k, j)}.
        let mut l = MatZ::zero(ctx, dim, dim);
        let mut b = vec![0u128; dim];
        for i in 0..w {
            for j in 0..h {
                let r = i * h + j;
                for k in 0..h {
                    let c = i * h + k;
                    let cur = l.get(r, c);
                    l.set(r, c, ctx.add(cur, self.mat.get(w + k, w + j)));
                }
                for k in 0..w {
                    let c = k * h + j;
                    let cur = l.get(r, c);
                    l.set(r, c, ctx.sub(cur, self.mat.get(i, k)));
                }
                b[r] = self.mat.get(i, w + j);
            }
        }
        let diag = diagonalize(&l, false, Some(b));
        let c = diag.rhs.expect("rhs was supplied");
        let mut e = 0u32;
        for (t, &d) in diag.dvals.iter().enumerate() {
            let need = d.min(m) as i64 - ctx.vp(c[t]) as i64;
            e = e.max(need.max(0) as u32);
        }
        if e >= m {
            PeriodValue::InfiniteAtPrecision
        } else {
            PeriodValue::Finite(e)
        }
    }

    pub fn to_json(&self) -> String {
        let matrix = (0..self.dim())
            .map(|i| self.mat.row(i).iter().map(|x| x.to_string()).collect())
            .collect();
        serde_json::to_string_pretty(&PeriodTripleFile {
            ell: self.ell,
            precision: self.precision,
            w: self.w,
            matrix,
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: PeriodTripleFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let rows = f
            .matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.iter()
                    .map(|s| {
                        s.parse::<i128>().map_err(|_| Error::Parse {
                            line: i + 1,
                            msg: format!("bad matrix entry {s:?}"),
                        })
                    })
                    .collect::<Result<Vec<i128>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(f.ell, f.precision, f.w, &rows)
    }
}

/// Annihilator exponent of the extension block determined by two unit
/// eigenvalues: the valuation of `1 - lambda_sub / lambda_quot`.
pub fn ext_annihilator(
    ell: u64,
    precision: u32,
    lambda_sub: i128,
    lambda_quot: i128,
) -> Result<PeriodValue> {
    let ctx = ModCtx::new(ell, precision)?;
    let a = ctx.reduce_i128(lambda_sub);
    let b = ctx.reduce_i128(lambda_quot);
    let binv = ctx
        .inv_unit(b)
        .ok_or_else(|| Error::Invalid("quotient eigenvalue is not a unit".into()))?;
    if ctx.vp(a) != 0 {
        return Err(Error::Invalid("subobject eigenvalue is not a unit".into()));
    }
    let r = ctx.sub(1, ctx.mul(a, binv));
    if r == 0 {
        Ok(PeriodValue::InfiniteAtPrecision)
    } else {
        Ok(PeriodValue::Finite(ctx.vp(r)))
    }
}

#[derive(serde::Serialize, serde::Deserialize)]
struct QuasiScalarFile {
    ell: u64,
    precision: u32,
    max_degree: u32,
    degree_q: String,
    generators: Vec<GeneratorSpecFile>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct GeneratorSpecFile {
    name: String,
    grade: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    perturbation: Option<String>,
}

impl QuasiScalar {
    pub fn to_json(&self) -> String {
        let generators = self
            .sig
            .generators()
            .iter()
            .zip(&self.perturbations)
            .map(|(g, p)| GeneratorSpecFile {
                name: g.name.clone(),
                grade: g.grade,
                perturbation: p.as_ref().map(|e| e.to_text()),
            })
            .collect();
        serde_json::to_string_pretty(&QuasiScalarFile {
            ell: self.sig.ell(),
            precision: self.sig.precision(),
            max_degree: self.sig.max_degree(),
            degree_q: self.q.to_string(),
            generators,
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: QuasiScalarFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let gens: Vec<(&str, u8)> = f
            .generators
            .iter()
            .map(|g| (g.name.as_str(), g.grade))
            .collect();
        let sig = AlgebraSignature::new(f.ell, f.precision, f.max_degree, &gens)?;
        let q = f.degree_q.parse::<u128>().map_err(|_| Error::Parse {
            line: 1,
            msg: format!("bad degree {:?}", f.degree_q),
        })?;
        let mut action = QuasiScalar::new(&sig, q)?;
        for (j, g) in f.generators.iter().enumerate() {
            if let Some(p) = &g.perturbation {
                let elem = AlgebraElement::from_text(&sig, p)?;
                action = action.with_perturbation(j, elem)?;
            }
        }
        Ok(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn action(ell: u64, precision: u32, d: u32, q: u128) -> QuasiScalar {
        let sig = AlgebraSignature::new(ell, precision, d, &[("X", 1)]).unwrap();
        QuasiScalar::new(&sig, q).unwrap()
    }

    #[test]
    fn generator_image_is_binomial_series() {
        let a = action(3, 6, 4, 4);
        let img = a.image(0);
        assert_eq!(img.coefficient(&[0]), a.sig.scalar_from_int(4));
        assert_eq!(img.coefficient(&[0, 0]), a.sig.scalar_from_int(6));
        assert_eq!(img.coefficient(&[0, 0, 0]), a.sig.scalar_from_int(4));
        assert_eq!(img.coefficient(&[0, 0, 0, 0]), a.sig.scalar_from_int(1));
        assert_eq!(img.coefficient(&[]), a.sig.zero_scalar());
    }

    #[test]
    fn degree_must_be_a_unit() {
        let sig = AlgebraSignature::new(3, 5, 3, &[("X", 1)]).unwrap();
        assert!(QuasiScalar::new(&sig, 6).is_err());
        assert!(QuasiScalar::new(&sig, 1).is_err());
        assert!(QuasiScalar::new(&sig, 4).is_ok());
    }

    #[test]
    fn verification_accepts_legal_perturbations() {
        let sig = AlgebraSignature::new(3, 5, 4, &[("X", 1), ("C", 2)]).unwrap();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        let xxx = x.mul(&x).unwrap().mul(&x).unwrap();
        let a = QuasiScalar::new(&sig, 2)
            .unwrap()
            .with_perturbation(1, xxx)
            .unwrap();
        let check = a.verify();
        assert!(check.ok, "failing grade {:?}", check.first_failing_grade);
    }

    #[test]
    fn verification_rejects_low_grade_perturbation() {
        let sig = AlgebraSignature::new(3, 5, 4, &[("X", 1)]).unwrap();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        assert!(QuasiScalar::new(&sig, 2)
            .unwrap()
            .with_perturbation(0, x)
            .is_err());
    }

    #[test]
    fn verification_flags_broken_images() {
        let sig = AlgebraSignature::new(3, 5, 3, &[("X", 1)]).unwrap();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        // Image 2X + X*X pretends the degree is 4: wrong eigenvalue in
        // grade 1.
        let fake = x.scalar_mul(&sig.scalar_from_int(2)).add(&x.mul(&x).unwrap()).unwrap();
        let a = QuasiScalar::new(&sig, 4)
            .unwrap()
            .with_raw_image_for_tests(0, fake);
        let check = a.verify();
        assert!(!check.ok);
        assert_eq!(check.first_failing_grade, Some(1));
    }

    #[test]
    fn eigen_lift_matches_logarithm() {
        // Lifting the grade-1 class for sigma(1+X) = (1+X)^4 recovers the
        // truncated logarithm of 1+X, coefficient 1/k in degree k.
        let a = action(3, 6, 9, 4);
        let sig = a.signature().clone();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        let lift = a.eigen_lift(&x, 9).unwrap();
        assert_eq!(lift.measured_period, 2);
        for k in 1..=9usize {
            let expect = if k % 2 == 1 {
                sig.scalar_from_ratio(1, k as i128).unwrap()
            } else {
                sig.scalar_from_ratio(-1, k as i128).unwrap()
            };
            assert_eq!(lift.vector.coefficient(&vec![0u8; k]), expect, "degree {k}");
        }
        // Eigenvector property modulo grade > 9 with eigenvalue q.
        let sv = a.apply(&lift.vector).unwrap();
        let diff = sv
            .sub(&lift.vector.scalar_mul(&sig.scalar_from_int(4)))
            .unwrap();
        assert!(diff.terms().all(|(w, _)| w.grade(&sig) > 9));
    }

    #[test]
    fn eigen_lift_validates_seeds() {
        let a = action(3, 5, 4, 4);
        let sig = a.signature().clone();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        let inhomogeneous = x.add(&x.mul(&x).unwrap()).unwrap();
        assert!(a.eigen_lift(&inhomogeneous, 4).is_err());
        let fractional = x.scalar_mul(&sig.scalar_from_ratio(1, 3).unwrap());
        assert!(a.eigen_lift(&fractional, 4).is_err());
        assert!(a.eigen_lift(&AlgebraElement::zero(&sig), 4).is_err());
        assert!(a.eigen_lift(&x, 5).is_err());
    }

    #[test]
    fn eigenbasis_is_triangular_and_bounded() {
        let sig = AlgebraSignature::new(3, 7, 4, &[("X", 1), ("Y", 1)]).unwrap();
        let a = QuasiScalar::new(&sig, 2).unwrap();
        let report = a.eigenbasis(4).unwrap();
        assert_eq!(
            report.entries.len(),
            enumerate_words(&sig, 4).len()
        );
        for e in &report.entries {
            let m = e.word.grade(&sig);
            let lead = e.vector.coefficient(e.word.letters());
            assert_eq!(lead, sig.one_scalar());
            for (w, _) in e.vector.terms() {
                assert!(w.grade(&sig) == m || w.grade(&sig) > m);
                assert!(w == &e.word || w.grade(&sig) > m);
            }
        }
        for d in &report.per_grade {
            assert!(d.within_bound, "grade {} exceeds budget", d.grade);
        }
    }

    #[test]
    fn canonical_path_example() {
        let a = action(3, 8, 6, 4);
        let sig = a.signature().clone();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        let u = AlgebraElement::one(&sig).add(&x).unwrap();
        let c = TorsorCocycle::new(a, u).unwrap();
        let cp = canonical_path(&c, 6).unwrap();
        let w = cp.path.as_algebra();
        assert_eq!(w.coefficient(&[]), sig.one_scalar());
        assert_eq!(w.coefficient(&[0]), sig.scalar_from_ratio(-1, 3).unwrap());
        assert_eq!(w.coefficient(&[0, 0]), sig.scalar_from_ratio(2, 9).unwrap());
        assert_eq!(
            w.coefficient(&[0, 0, 0]),
            sig.scalar_from_ratio(-14, 81).unwrap()
        );
        assert_eq!(cp.periods[0], 0);
        assert_eq!(cp.periods[1], 1);
        assert_eq!(cp.periods[3], 4);

        // Fixed modulo grade > cap under the twisted action.
        let moved = c.apply(&cp.path).unwrap();
        let diff = moved.as_algebra().sub(w).unwrap();
        assert!(diff.terms().all(|(v, _)| v.grade(&sig) > 6));

        // Uniqueness: elimination order inside a level is immaterial.
        let cp2 = canonical_path_ordered(&c, 6, true).unwrap();
        assert_eq!(cp2.path, cp.path);
    }

    #[test]
    fn cocycle_validation() {
        let a = action(3, 5, 3, 4);
        let sig = a.signature().clone();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        assert!(TorsorCocycle::new(a.clone(), x.clone()).is_err());
        let fractional = AlgebraElement::one(&sig)
            .add(&x.scalar_mul(&sig.scalar_from_ratio(1, 3).unwrap()))
            .unwrap();
        assert!(TorsorCocycle::new(a.clone(), fractional).is_err());
        assert!(TorsorCocycle::new(a, AlgebraElement::one(&sig)).is_ok());
    }

    #[test]
    fn integral_period_examples() {
        let t = PeriodTriple::new(3, 5, 1, &[vec![1, 1], vec![0, 10]]).unwrap();
        assert_eq!(t.integral_period(), PeriodValue::Finite(2));
        let t = PeriodTriple::new(3, 5, 1, &[vec![1, 0], vec![0, 10]]).unwrap();
        assert_eq!(t.integral_period(), PeriodValue::Finite(0));
        let t = PeriodTriple::new(3, 5, 1, &[vec![1, 3], vec![0, 10]]).unwrap();
        assert_eq!(t.integral_period(), PeriodValue::Finite(1));
        // Non-split unipotent block: no finite exponent at the window.
        let t = PeriodTriple::new(3, 5, 1, &[vec![1, 1], vec![0, 1]]).unwrap();
        assert_eq!(t.integral_period(), PeriodValue::InfiniteAtPrecision);
        // Degenerate splittings.
        let t = PeriodTriple::new(3, 5, 0, &[vec![1, 1], vec![0, 10]]).unwrap();
        assert_eq!(t.integral_period(), PeriodValue::Finite(0));
        let t = PeriodTriple::new(3, 5, 2, &[vec![1, 1], vec![0, 10]]).unwrap();
        assert_eq!(t.integral_period(), PeriodValue::Finite(0));
    }

    #[test]
    fn period_triple_validation() {
        assert!(PeriodTriple::new(3, 5, 1, &[vec![1, 1], vec![1, 10]]).is_err());
        assert!(PeriodTriple::new(3, 5, 3, &[vec![1, 1], vec![0, 10]]).is_err());
        assert!(PeriodTriple::new(3, 5, 1, &[vec![3, 1], vec![0, 10]]).is_err());
        assert!(PeriodTriple::new(3, 5, 1, &[vec![1, 1, 0], vec![0, 1, 0]]).is_err());
    }

    #[test]
    fn period_triple_json_round_trip() {
        let t = PeriodTriple::new(3, 5, 1, &[vec![1, 1], vec![0, 10]]).unwrap();
        let j = t.to_json();
        let back = PeriodTriple::from_json(&j).unwrap();
        assert_eq!(back.integral_period(), PeriodValue::Finite(2));
        assert_eq!(back.to_json(), j);
    }

    #[test]
    fn ext_annihilator_examples() {
        assert_eq!(
            ext_annihilator(3, 6, 1, 4).unwrap(),
            PeriodValue::Finite(1)
        );
        assert_eq!(
            ext_annihilator(3, 6, 1, 64).unwrap(),
            PeriodValue::Finite(2)
        );
        assert_eq!(
            ext_annihilator(3, 6, 7, 7).unwrap(),
            PeriodValue::InfiniteAtPrecision
        );
        assert!(ext_annihilator(3, 6, 3, 4).is_err());
        assert!(ext_annihilator(3, 6, 1, 9).is_err());
    }

    #[test]
    fn quasi_scalar_json_round_trip() {
        let sig = AlgebraSignature::new(3, 5, 4, &[("X", 1), ("C", 2)]).unwrap();
        let x = AlgebraElement::generator(&sig, 0).unwrap();
        let xxx = x.mul(&x).unwrap().mul(&x).unwrap();
        let a = QuasiScalar::new(&sig, 2)
            .unwrap()
            .with_perturbation(1, xxx)
            .unwrap();
        let j = a.to_json();
        let back = QuasiScalar::from_json(&j).unwrap();
        assert_eq!(back.degree(), 2);
        assert_eq!(back.image(1).to_text(), a.image(1).to_text());
        assert!(back.verify().ok);
    }
}
