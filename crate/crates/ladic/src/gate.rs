//! Unipotence gate: the congruence depth past which a residually unipotent
//! representation twisted by a degree-`q` character must be genuinely
//! unipotent, a flag-building unipotence decision certified against the
//! working window, and the combined verdict.

use crate::convergent::RepSpec;
use crate::error::{Error, Result};
use crate::linalg::{diagonalize, invert, MatZ};
use crate::padic::{order_mod, RationalBound};
use num::{BigUint, One, Zero};
use serde_json::json;

/// The character data of the gate: prime, window, and the degree `q`,
/// either explicit or a topological generator of the unit group.
#[derive(Debug, Clone)]
pub struct CyclotomicSpec {
    ell: u64,
    precision: u32,
    q: u128,
}

impl CyclotomicSpec {
    pub fn new(ell: u64, precision: u32, q: u128) -> Result<Self> {
        crate::padic::PadicScalar::zero(ell, precision)?;
        if q < 2 {
            return Err(Error::Invalid(
                "degree must be an integer of size at least 2".into(),
            ));
        }
        if q % ell as u128 == 0 {
            return Err(Error::Invalid(format!("degree {q} is divisible by {ell}")));
        }
        Ok(CyclotomicSpec { ell, precision, q })
    }

    /// Take `q` to be a topological generator of the units: the smallest
    /// primitive root modulo `ell^2` for odd primes, and 3 for 2.
    pub fn surjective(ell: u64, precision: u32) -> Result<Self> {
        crate::padic::PadicScalar::zero(ell, precision)?;
        if ell == 2 {
            return Self::new(2, precision, 3);
        }
        let target = ell as u128 * (ell as u128 - 1);
        let m = ell as u128 * ell as u128;
        for g in 2..m {
            if g % ell as u128 == 0 {
                continue;
            }
            let mut x = g % m;
            let mut ord = 1;
            while x != 1 {
                x = x * g % m;
                ord += 1;
            }
            if ord == target {
                return Self::new(ell, precision, g);
            }
        }
        unreachable!("the unit group modulo an odd prime square is cyclic");
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn q(&self) -> u128 {
        self.q
    }
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

/// The congruence bound and the least integer level strictly above it:
/// `(1/s)(v(q^s - 1) + 1/(ell - 1) + eps)` with `s` the residual order of
/// `q` and `eps` the wild correction for the even prime.
pub fn threshold(spec: &CyclotomicSpec) -> Result<(RationalBound, u32)> {
    let s = order_mod(spec.q, spec.ell)? as u64;
    let gap = BigUint::from(spec.q).pow(s as u32) - BigUint::one();
    let v = big_vp(spec.ell, &gap);
    let eps = u64::from(spec.ell == 2);
    let bound = RationalBound::from_int(v as i128)
        .add(&RationalBound::new(1, spec.ell as i128 - 1)?)
        .add(&RationalBound::from_int(eps as i128))
        .mul(&RationalBound::new(1, s as i128)?);
    let n = bound.floor_int() + 1;
    Ok((bound, n as u32))
}

/// Largest `k` with every generator congruent to the identity modulo
/// `ell^k`, clamped at the window.
pub fn triviality_level(rep: &RepSpec) -> u32 {
    let m = rep.precision();
    let mut level = m;
    for j in 0..rep.num_generators() {
        level = level.min(rep.gen_minus_one(j).min_valuation());
    }
    level
}

/// Outcome of the flag search: a full flag of common fixed vectors, a
/// certified obstruction, or an obstruction too deep to trust at the
/// window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnipotenceResult {
    Unipotent {
        /// Fixed vectors in original coordinates, one per level.
        flag: Vec<Vec<u128>>,
    },
    NotUnipotent {
        level: usize,
        remaining_dim: usize,
        obstruction_valuation: u32,
    },
    Undetermined {
        level: usize,
        remaining_dim: usize,
        obstruction_valuation: u32,
        guard: u32,
    },
}

impl UnipotenceResult {
    pub fn is_unipotent(&self) -> bool {
        matches!(self, UnipotenceResult::Unipotent { .. })
    }
}

/// Decide unipotence by repeatedly extracting a primitive common fixed
/// vector from the stacked shifted generators and passing to the quotient.
/// An obstruction of valuation within `remaining dimension` of the window
/// is reported as undetermined rather than refuting.
pub fn is_unipotent(rep: &RepSpec) -> UnipotenceResult {
    let ctx = rep.ctx();
    let m = rep.precision();
    let n = rep.dim();
    let d = rep.num_generators();
    let mut mats: Vec<MatZ> = (0..d).map(|j| rep.gen_matrix(j).clone()).collect();
    // Columns map current quotient coordinates to original ones.
    let mut embed = MatZ::identity(ctx, n);
    let mut flag: Vec<Vec<u128>> = Vec::new();
    let mut g = n;

    while g > 0 {
        let mut stacked = MatZ::zero(ctx, d * g, g);
        for (j, a) in mats.iter().enumerate() {
            for i in 0..g {
                for k in 0..g {
                    stacked.set(j * g + i, k, ctx.sub(a.get(i, k), (i == k) as u128));
                }
            }
        }
        let diag = diagonalize(&stacked, true, None);
        let dmax = *diag.dvals.last().expect("at least one invariant factor");
        if dmax < m {
            let level = flag.len();
            if dmax >= m.saturating_sub(g as u32) {
                return UnipotenceResult::Undetermined {
                    level,
                    remaining_dim: g,
                    obstruction_valuation: dmax,
                    guard: g as u32,
                };
            }
            return UnipotenceResult::NotUnipotent {
                level,
                remaining_dim: g,
                obstruction_valuation: dmax,
            };
        }
        let v = diag
            .col_transform
            .expect("column transform was requested")
            .column(g - 1);
        // Record the fixed vector in original coordinates.
        let mut orig = vec![0u128; n];
        for (r, slot) in orig.iter_mut().enumerate() {
            let mut acc = 0u128;
            for (c, &vc) in v.iter().enumerate() {
                acc = ctx.add(acc, ctx.mul(embed.get(r, c), vc));
            }
            *slot = acc;
        }
        flag.push(orig);
        if g == 1 {
            break;
        }
        // Unimodular completion with the fixed vector first.
        let p = v
            .iter()
            .position(|&x| ctx.vp(x) == 0)
            .expect("column of a unimodular transform is primitive");
        let mut u = MatZ::zero(ctx, g, g);
        for (i, &vi) in v.iter().enumerate() {
            u.set(i, 0, vi);
        }
        let mut col = 1;
        for k in 0..g {
            if k == p {
                continue;
            }
            u.set(k, col, 1);
            col += 1;
        }
        let uinv = invert(&u).expect("completion is residually invertible");
        let mut next = Vec::with_capacity(d);
        for a in &mats {
            let t = uinv.mul(&a.mul(&u));
            let mut q = MatZ::zero(ctx, g - 1, g - 1);
            for i in 1..g {
                for k in 1..g {
                    q.set(i - 1, k - 1, t.get(i, k));
                }
            }
            next.push(q);
        }
        mats = next;
        let mut next_embed = MatZ::zero(ctx, n, g - 1);
        for r in 0..n {
            for c in 1..g {
                let mut acc = 0u128;
                for k in 0..g {
                    acc = ctx.add(acc, ctx.mul(embed.get(r, k), u.get(k, c)));
                }
                next_embed.set(r, c - 1, acc);
            }
        }
        embed = next_embed;
        g -= 1;
    }
    UnipotenceResult::Unipotent { flag }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Unipotent,
    Excluded,
    Inconclusive,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Unipotent => "UNIPOTENT",
            Classification::Excluded => "EXCLUDED",
            Classification::Inconclusive => "INCONCLUSIVE",
        }
    }
}

/// Combined decision: the threshold data, the congruence depth of the
/// representation, the unipotence search, and the classification they
/// force.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub classification: Classification,
    pub bound: RationalBound,
    pub threshold: u32,
    pub triviality_level: u32,
    pub unipotence: UnipotenceResult,
    pub caveats: Vec<String>,
}

pub fn verdict(spec: &CyclotomicSpec, rep: &RepSpec) -> Result<Verdict> {
    if spec.ell != rep.ell() || spec.precision != rep.precision() {
        return Err(Error::Invalid(
            "character and representation disagree on the working ring".into(),
        ));
    }
    let (bound, n) = threshold(spec)?;
    let k = triviality_level(rep);
    let unipotence = is_unipotent(rep);
    let mut caveats = Vec::new();
    if k >= rep.precision() {
        caveats.push(format!(
            "congruence level saturates the window: level {k} means at least {k}",
            k = rep.precision()
        ));
    }
    let classification = match &unipotence {
        UnipotenceResult::Unipotent { .. } => Classification::Unipotent,
        UnipotenceResult::NotUnipotent { .. } => {
            if k >= n {
                Classification::Excluded
            } else {
                caveats.push(format!(
                    "congruence level {k} is below the threshold {n}; \
                     non-unipotence excludes nothing at this depth"
                ));
                Classification::Inconclusive
            }
        }
        UnipotenceResult::Undetermined {
            obstruction_valuation,
            guard,
            ..
        } => {
            caveats.push(format!(
                "unipotence undetermined: obstruction at valuation \
                 {obstruction_valuation} within the guard {guard} of the window"
            ));
            Classification::Inconclusive
        }
    };
    Ok(Verdict {
        classification,
        bound,
        threshold: n,
        triviality_level: k,
        unipotence,
        caveats,
    })
}

impl Verdict {
    pub fn to_json_value(&self) -> serde_json::Value {
        let unipotence = match &self.unipotence {
            UnipotenceResult::Unipotent { flag } => json!({
                "status": "unipotent",
                "flag": flag
                    .iter()
                    .map(|v| v.iter().map(|x| x.to_string()).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            }),
            UnipotenceResult::NotUnipotent {
                level,
                remaining_dim,
                obstruction_valuation,
            } => json!({
                "status": "not_unipotent",
                "level": level,
                "remaining_dim": remaining_dim,
                "obstruction_valuation": obstruction_valuation,
            }),
            UnipotenceResult::Undetermined {
                level,
                remaining_dim,
                obstruction_valuation,
                guard,
            } => json!({
                "status": "undetermined",
                "level": level,
                "remaining_dim": remaining_dim,
                "obstruction_valuation": obstruction_valuation,
                "guard": guard,
            }),
        };
        json!({
            "classification": self.classification.as_str(),
            "bound": self.bound.to_string(),
            "threshold": self.threshold,
            "triviality_level": self.triviality_level,
            "unipotence": unipotence,
            "caveats": self.caveats,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_examples() {
        let (b, n) = threshold(&CyclotomicSpec::new(3, 6, 2).unwrap()).unwrap();
        assert_eq!(b, RationalBound::new(3, 4).unwrap());
        assert_eq!(n, 1);
        let (b, n) = threshold(&CyclotomicSpec::new(5, 6, 2).unwrap()).unwrap();
        assert_eq!(b, RationalBound::new(5, 16).unwrap());
        assert_eq!(n, 1);
        let (b, n) = threshold(&CyclotomicSpec::new(2, 6, 3).unwrap()).unwrap();
        assert_eq!(b, RationalBound::new(5, 2).unwrap());
        assert_eq!(n, 3);
        // Integer bound still rounds strictly up.
        let (b, n) = threshold(&CyclotomicSpec::new(3, 6, 10).unwrap()).unwrap();
        assert_eq!(b, RationalBound::new(5, 2).unwrap());
        assert_eq!(n, 3);
    }

    #[test]
    fn surjective_degrees() {
        assert_eq!(CyclotomicSpec::surjective(2, 6).unwrap().q(), 3);
        assert_eq!(CyclotomicSpec::surjective(3, 6).unwrap().q(), 2);
        assert_eq!(CyclotomicSpec::surjective(5, 6).unwrap().q(), 2);
        assert_eq!(CyclotomicSpec::surjective(7, 6).unwrap().q(), 3);
    }

    #[test]
    fn spec_validation() {
        assert!(CyclotomicSpec::new(3, 6, 1).is_err());
        assert!(CyclotomicSpec::new(3, 6, 6).is_err());
        assert!(CyclotomicSpec::new(4, 6, 3).is_err());
    }

    #[test]
    fn triviality_levels() {
        let id = RepSpec::new(3, 6, 2, &[vec![vec![1, 0], vec![0, 1]]]).unwrap();
        assert_eq!(triviality_level(&id), 6);
        let a = RepSpec::new(3, 6, 2, &[vec![vec![4, 3], vec![3, 4]]]).unwrap();
        assert_eq!(triviality_level(&a), 1);
        let b = RepSpec::new(3, 6, 2, &[vec![vec![1, 9], vec![0, 1]]]).unwrap();
        assert_eq!(triviality_level(&b), 2);
    }

    #[test]
    fn unipotence_decisions() {
        let id = RepSpec::new(3, 6, 2, &[vec![vec![1, 0], vec![0, 1]]]).unwrap();
        match is_unipotent(&id) {
            UnipotenceResult::Unipotent { flag } => assert_eq!(flag.len(), 2),
            other => panic!("expected unipotent, got {other:?}"),
        }

        let tri = RepSpec::new(3, 6, 2, &[vec![vec![1, 1], vec![0, 1]]]).unwrap();
        assert!(is_unipotent(&tri).is_unipotent());

        let diag = RepSpec::new(3, 6, 2, &[vec![vec![1, 0], vec![0, 4]]]).unwrap();
        match is_unipotent(&diag) {
            UnipotenceResult::NotUnipotent {
                obstruction_valuation,
                ..
            } => assert_eq!(obstruction_valuation, 1),
            other => panic!("expected a refutation, got {other:?}"),
        }

        // Obstruction at valuation M - 1 sits inside the dimension guard.
        let deep = RepSpec::new(3, 6, 2, &[vec![vec![1, 243], vec![243, 1]]]).unwrap();
        match is_unipotent(&deep) {
            UnipotenceResult::Undetermined {
                obstruction_valuation,
                guard,
                ..
            } => {
                assert_eq!(obstruction_valuation, 5);
                assert_eq!(guard, 2);
            }
            other => panic!("expected undetermined, got {other:?}"),
        }

        // One flag step, then a certified obstruction in the quotient.
        let mixed = RepSpec::new(3, 6, 2, &[vec![vec![4, 3], vec![3, 4]]]).unwrap();
        match is_unipotent(&mixed) {
            UnipotenceResult::NotUnipotent {
                level,
                remaining_dim,
                obstruction_valuation,
            } => {
                assert_eq!(level, 1);
                assert_eq!(remaining_dim, 1);
                assert_eq!(obstruction_valuation, 1);
            }
            other => panic!("expected a refutation, got {other:?}"),
        }
    }

    #[test]
    fn flag_vectors_are_fixed() {
        let rep = RepSpec::new(
            3,
            6,
            3,
            &[
                vec![vec![1, 1, 5], vec![0, 1, 2], vec![0, 0, 1]],
                vec![vec![1, 3, 0], vec![0, 1, 7], vec![0, 0, 1]],
            ],
        )
        .unwrap();
        match is_unipotent(&rep) {
            UnipotenceResult::Unipotent { flag } => {
                assert_eq!(flag.len(), 3);
                let ctx = rep.ctx();
                // The first flag vector is fixed by every generator.
                let v = &flag[0];
                for j in 0..rep.num_generators() {
                    let a = rep.gen_matrix(j);
                    for i in 0..3 {
                        let mut acc = 0u128;
                        for k in 0..3 {
                            acc = ctx.add(acc, ctx.mul(a.get(i, k), v[k]));
                        }
                        assert_eq!(acc, v[i]);
                    }
                }
            }
            other => panic!("expected unipotent, got {other:?}"),
        }
    }

    #[test]
    fn verdict_examples() {
        let spec = CyclotomicSpec::new(3, 6, 2).unwrap();
        let rep = RepSpec::new(3, 6, 2, &[vec![vec![4, 3], vec![3, 4]]]).unwrap();
        let v = verdict(&spec, &rep).unwrap();
        assert_eq!(v.classification, Classification::Excluded);
        assert_eq!(v.threshold, 1);
        assert_eq!(v.triviality_level, 1);

        let tri = RepSpec::new(3, 6, 2, &[vec![vec![1, 1], vec![0, 1]]]).unwrap();
        let v = verdict(&spec, &tri).unwrap();
        assert_eq!(v.classification, Classification::Unipotent);

        // Shallow congruence level cannot exclude for a degree close to 1.
        let spec_deep = CyclotomicSpec::new(3, 6, 10).unwrap();
        let v = verdict(&spec_deep, &rep).unwrap();
        assert_eq!(v.classification, Classification::Inconclusive);
        assert!(!v.caveats.is_empty());

        let json = v.to_json_value();
        assert_eq!(json["classification"], "INCONCLUSIVE");
        assert_eq!(json["threshold"], 3);
    }
}
