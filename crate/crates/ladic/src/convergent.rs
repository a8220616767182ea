//! Convergence bookkeeping: valuation profiles of truncated elements,
//! membership reports for a chosen radius, a certified lower bound for the
//! convergence radius of a matrix representation, evaluation of convergent
//! elements under such a representation, and the superadditivity check for
//! valuation profiles of products.

use crate::error::{Error, Result};
use crate::freealg::AlgebraElement;
use crate::linalg::{howell, reduce_against, MatZ, ModCtx};
use crate::padic::{PadicScalar, RationalBound, Valuation};

/// Profile `v_n` for `n = 1..=n_max`: the least coefficient valuation among
/// words of length below `n`, infinite when the truncation is zero.
pub fn valuation_sequence(x: &AlgebraElement, n_max: u32) -> Vec<Valuation> {
    let mut out = Vec::with_capacity(n_max as usize);
    let mut cur = Valuation::Infinite;
    for n in 1..=n_max as usize {
        for (w, c) in x.terms() {
            if w.len() == n - 1 {
                cur = cur.min(c.valuation());
            }
        }
        out.push(cur);
    }
    out
}

pub fn sequence_to_tsv(seq: &[Valuation]) -> String {
    seq.iter()
        .enumerate()
        .map(|(i, v)| format!("{}\t{v}\n", i + 1))
        .collect()
}

pub fn sequence_from_tsv(text: &str) -> Result<Vec<Valuation>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let (n, v) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected tab-separated index and valuation".into(),
        })?;
        let n: usize = n.parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad index {n:?}"),
        })?;
        if n != out.len() + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("indices must be consecutive from 1, got {n}"),
            });
        }
        let v = if v == "inf" {
            Valuation::Infinite
        } else {
            Valuation::Finite(v.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad valuation {v:?}"),
            })?)
        };
        out.push(v);
    }
    Ok(out)
}

/// Verdict of a radius membership report at the truncation window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RadiusVerdict {
    MemberAtWindow,
    NonMemberWitness { delta: RationalBound },
    Inconclusive,
}

/// Margins `v_n + r n` and their tail behaviour over the last third of the
/// window. `None` margins are infinite (zero truncation).
#[derive(Debug, Clone)]
pub struct RadiusReport {
    pub margins: Vec<Option<RationalBound>>,
    pub min_margin: Option<RationalBound>,
    pub trend: Option<RationalBound>,
    pub verdict: RadiusVerdict,
}

fn margin_ge(a: &Option<RationalBound>, b: &Option<RationalBound>) -> bool {
    match (a, b) {
        (None, _) => true,
        (Some(_), None) => false,
        (Some(x), Some(y)) => x >= y,
    }
}

/// Classify the margins of a valuation profile at radius `r`: membership at
/// the window needs a non-sinking tail, a non-membership witness needs a
/// certified strictly negative tail slope.
pub fn radius_report(seq: &[Valuation], r: &RationalBound) -> RadiusReport {
    let margins: Vec<Option<RationalBound>> = seq
        .iter()
        .enumerate()
        .map(|(i, v)| match v {
            Valuation::Infinite => None,
            Valuation::Finite(t) => Some(
                RationalBound::from_int(*t as i128)
                    .add(&r.mul(&RationalBound::from_int(i as i128 + 1))),
            ),
        })
        .collect();
    let min_margin = margins.iter().flatten().min().copied();

    let n = margins.len();
    let tail_len = n.div_ceil(3);
    let tail = &margins[n - tail_len..];
    let verdict = if tail.len() < 2 {
        RadiusVerdict::Inconclusive
    } else if margin_ge(&tail[tail.len() - 1], &tail[0]) {
        RadiusVerdict::MemberAtWindow
    } else {
        let mut worst_drop: Option<RationalBound> = None;
        let mut strictly_down = true;
        for pair in tail.windows(2) {
            match (&pair[0], &pair[1]) {
                (Some(a), Some(b)) if b < a => {
                    let drop = b.sub(a);
                    worst_drop = Some(match worst_drop {
                        None => drop,
                        Some(w) => w.max(drop),
                    });
                }
                _ => {
                    strictly_down = false;
                    break;
                }
            }
        }
        match (strictly_down, worst_drop) {
            (true, Some(d)) => RadiusVerdict::NonMemberWitness {
                delta: RationalBound::from_int(0).sub(&d),
            },
            _ => RadiusVerdict::Inconclusive,
        }
    };

    let trend = if tail.len() >= 2 {
        match (&tail[0], &tail[tail.len() - 1]) {
            (Some(a), Some(b)) => Some(
                b.sub(a)
                    .mul(&RationalBound::new(1, tail.len() as i128 - 1).expect("nonzero")),
            ),
            _ => None,
        }
    } else {
        None
    };

    RadiusReport {
        margins,
        min_margin,
        trend,
        verdict,
    }
}

/// Matrix representation over the working ring whose generators are
/// residually unipotent.
#[derive(Debug, Clone)]
pub struct RepSpec {
    ell: u64,
    precision: u32,
    dim: usize,
    gens: Vec<MatZ>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct RepSpecFile {
    ell: u64,
    precision: u32,
    dim: usize,
    generators: Vec<Vec<String>>,
}

impl RepSpec {
    /// Each generator is given as `dim` rows; it must reduce to a unipotent
    /// matrix modulo the prime.
    pub fn new(
        ell: u64,
        precision: u32,
        dim: usize,
        generators: &[Vec<Vec<i128>>],
    ) -> Result<Self> {
        let ctx = ModCtx::new(ell, precision)?;
        if dim == 0 {
            return Err(Error::Invalid("dimension must be positive".into()));
        }
        if generators.is_empty() {
            return Err(Error::Invalid("at least one generator is required".into()));
        }
        let ctx1 = ModCtx::new(ell, 1)?;
        let mut gens = Vec::new();
        for (j, g) in generators.iter().enumerate() {
            if g.len() != dim || g.iter().any(|r| r.len() != dim) {
                return Err(Error::Invalid(format!(
                    "generator {j} is not a {dim} by {dim} matrix"
                )));
            }
            let rows: Vec<Vec<u128>> = g
                .iter()
                .map(|r| r.iter().map(|&x| ctx.reduce_i128(x)).collect())
                .collect();
            let a = MatZ::from_rows(ctx, &rows)?;
            // Residual unipotence: (A - I)^dim vanishes modulo the prime.
            let res: Vec<Vec<u128>> = (0..dim)
                .map(|i| {
                    (0..dim)
                        .map(|k| ctx1.sub(a.get(i, k) % ell as u128, (i == k) as u128))
                        .collect()
                })
                .collect();
            let b = MatZ::from_rows(ctx1, &res)?;
            let mut p = MatZ::identity(ctx1, dim);
            for _ in 0..dim {
                p = p.mul(&b);
            }
            if !p.is_zero() {
                return Err(Error::Invalid(format!(
                    "generator {j} is not unipotent modulo {ell}"
                )));
            }
            gens.push(a);
        }
        Ok(RepSpec {
            ell,
            precision,
            dim,
            gens,
        })
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_generators(&self) -> usize {
        self.gens.len()
    }

    pub fn to_json(&self) -> String {
        let generators = self
            .gens
            .iter()
            .map(|g| g.data.iter().map(|x| x.to_string()).collect())
            .collect();
        serde_json::to_string_pretty(&RepSpecFile {
            ell: self.ell,
            precision: self.precision,
            dim: self.dim,
            generators,
        })
        .expect("serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: RepSpecFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: e.to_string(),
        })?;
        let mut gens = Vec::new();
        for (j, flat) in f.generators.iter().enumerate() {
            if flat.len() != f.dim * f.dim {
                return Err(Error::Invalid(format!(
                    "generator {j} has {} entries, expected {}",
                    flat.len(),
                    f.dim * f.dim
                )));
            }
            let rows: Vec<Vec<i128>> = flat
                .chunks(f.dim)
                .map(|ch| {
                    ch.iter()
                        .map(|s| {
                            s.parse::<i128>().map_err(|_| Error::Parse {
                                line: 1,
                                msg: format!("bad entry {s:?} in generator {j}"),
                            })
                        })
                        .collect::<Result<Vec<i128>>>()
                })
                .collect::<Result<Vec<_>>>()?;
            gens.push(rows);
        }
        Self::new(f.ell, f.precision, f.dim, &gens)
    }

    pub(crate) fn ctx(&self) -> ModCtx {
        self.gens[0].ctx
    }

    pub(crate) fn gen_matrix(&self, j: usize) -> &MatZ {
        &self.gens[j]
    }

    pub(crate) fn gen_minus_one(&self, j: usize) -> MatZ {
        let i = MatZ::identity(self.ctx(), self.dim);
        self.gens[j].sub(&i)
    }
}

/// Lower bound for the convergence radius, or certified unipotence inside
/// the window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LowerBound {
    Finite(RationalBound),
    Infinite,
}

/// Valuation growth of the iterated augmentation modules.
#[derive(Debug, Clone)]
pub struct R0Estimate {
    /// `m_s` for `s = 1..=s_max`, clamped at the working precision.
    pub m_s: Vec<u32>,
    pub r0_lower: LowerBound,
    /// Some module vanished at the window; valuations are exact group-level
    /// statements only above the window.
    pub unipotent_detected: bool,
    pub precision_capped: bool,
}

/// Smallest multiplication-closed module containing `seed` rows, as a
/// canonical form over the working ring.
fn closed_span(rep: &RepSpec, seed: &[Vec<u128>]) -> Vec<Vec<u128>> {
    let ctx = rep.ctx();
    let n = rep.dim;
    let n2 = n * n;
    let mut form = howell(ctx, seed, n2);
    loop {
        let mut added = false;
        let basis = form.clone();
        for row in &basis {
            let b = MatZ::from_rows(
                ctx,
                &row.chunks(n).map(|c| c.to_vec()).collect::<Vec<_>>(),
            )
            .expect("square chunking");
            for a in &rep.gens {
                for cand in [a.mul(&b), b.mul(a)] {
                    let residual = reduce_against(ctx, &form, &cand.data);
                    if residual.iter().any(|&x| x != 0) {
                        let mut rows = form.clone();
                        rows.push(residual);
                        form = howell(ctx, &rows, n2);
                        added = true;
                    }
                }
            }
        }
        if !added {
            return form;
        }
    }
}

/// Track the minimum valuation `m_s` of the multiplication-closed module
/// generated by `s`-fold products of the shifted generators, and bound the
/// convergence radius from below by the tail of `m_s / s`.
pub fn estimate_r0(rep: &RepSpec, s_max: u32) -> Result<R0Estimate> {
    if s_max == 0 {
        return Err(Error::Invalid("window length must be positive".into()));
    }
    let ctx = rep.ctx();
    let m = rep.precision;
    let n = rep.dim;
    let seed: Vec<Vec<u128>> = (0..rep.num_generators())
        .map(|j| rep.gen_minus_one(j).data)
        .collect();
    let mut basis = closed_span(rep, &seed);
    let mut m_s = Vec::with_capacity(s_max as usize);
    let mut detected_at: Option<u32> = None;
    for s in 1..=s_max {
        if basis.is_empty() {
            detected_at = detected_at.or(Some(s));
            m_s.push(m);
            continue;
        }
        let min_val = basis
            .iter()
            .flat_map(|r| r.iter().filter(|&&x| x != 0).map(|&x| ctx.vp(x)))
            .min()
            .unwrap_or(m);
        m_s.push(min_val.min(m));
        if s == s_max {
            break;
        }
        let mut next_seed = Vec::new();
        for row in &basis {
            let b = MatZ::from_rows(
                ctx,
                &row.chunks(n).map(|c| c.to_vec()).collect::<Vec<_>>(),
            )
            .expect("square chunking");
            for j in 0..rep.num_generators() {
                let t = rep.gen_minus_one(j);
                next_seed.push(t.mul(&b).data);
                next_seed.push(b.mul(&t).data);
            }
        }
        basis = closed_span(rep, &next_seed);
    }

    let unipotent_detected = detected_at.is_some();
    let precision_capped = m_s.iter().any(|&x| x >= m);
    let r0_lower = if unipotent_detected {
        LowerBound::Infinite
    } else {
        let lo = (s_max as usize + 1) / 2;
        let best = (lo..=s_max as usize)
            .map(|s| RationalBound::new(m_s[s - 1] as i128, s as i128).expect("positive"))
            .min()
            .expect("nonempty tail");
        LowerBound::Finite(best)
    };
    Ok(R0Estimate {
        m_s,
        r0_lower,
        unipotent_detected,
        precision_capped,
    })
}

/// Matrix with window-certified scalar entries.
pub type PadicMatrix = Vec<Vec<PadicScalar>>;

pub fn padic_matrix_mul(a: &PadicMatrix, b: &PadicMatrix) -> Result<PadicMatrix> {
    let n = a.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = a[i][0].mul(&b[0][j])?;
            for (k, x) in a[i].iter().enumerate().skip(1) {
                acc = acc.add(&x.mul(&b[k][j])?)?;
            }
            row.push(acc);
        }
        out.push(row);
    }
    Ok(out)
}

/// Evaluate a convergent element under the representation: each letter maps
/// to the shifted generator, words to products, and the series is summed by
/// word length. Errors when the length-graded increments fail to stabilize
/// at the truncation window.
pub fn evaluate_rho_r(x: &AlgebraElement, rep: &RepSpec) -> Result<PadicMatrix> {
    let sig = x.signature();
    if sig.ell() != rep.ell || sig.precision() != rep.precision {
        return Err(Error::Invalid(
            "element and representation disagree on the working ring".into(),
        ));
    }
    if sig.generators().len() != rep.num_generators() {
        return Err(Error::Invalid(format!(
            "element has {} generators, representation has {}",
            sig.generators().len(),
            rep.num_generators()
        )));
    }
    let ctx = rep.ctx();
    let n = rep.dim;
    let d = sig.max_degree() as usize;
    let zero_scalar = PadicScalar::zero(rep.ell, rep.precision)?;
    let mut total: PadicMatrix = vec![vec![zero_scalar.clone(); n]; n];
    let mut increment_vals: Vec<Valuation> = Vec::with_capacity(d + 1);

    // Word products share prefixes in the canonical term order.
    let mut prefix: Vec<MatZ> = vec![MatZ::identity(ctx, n)];
    let mut prefix_letters: Vec<u8> = Vec::new();
    for len in 0..=d {
        let mut inc_val = Valuation::Infinite;
        let mut touched = false;
        for (w, c) in x.terms() {
            if w.len() != len {
                continue;
            }
            touched = true;
            let letters = w.letters();
            let mut common = 0;
            while common < prefix_letters.len()
                && common < letters.len()
                && prefix_letters[common] == letters[common]
            {
                common += 1;
            }
            prefix.truncate(common + 1);
            prefix_letters.truncate(common);
            for &j in &letters[common..] {
                let last = prefix.last().expect("never empty");
                prefix.push(last.mul(&rep.gen_minus_one(j as usize)));
                prefix_letters.push(j);
            }
            let mat = prefix.last().expect("never empty");
            for i in 0..n {
                for k in 0..n {
                    let entry = PadicScalar::from_residue(rep.ell, rep.precision, mat.get(i, k))?;
                    let term = entry.mul(c)?;
                    if term.is_zero() && !term.is_exhausted() {
                        continue;
                    }
                    inc_val = inc_val.min(term.valuation());
                    total[i][k] = total[i][k].add(&term)?;
                }
            }
        }
        if touched {
            increment_vals.push(inc_val);
        } else {
            increment_vals.push(Valuation::Infinite);
        }
    }

    // Stabilization at the window edge: the last increment must vanish or
    // sit strictly above the one before it.
    if d >= 1 {
        let last = increment_vals[d];
        let before = increment_vals[d - 1];
        if last != Valuation::Infinite && last <= before {
            return Err(Error::Invalid(
                "series does not stabilize within the truncation window".into(),
            ));
        }
    }
    Ok(total)
}

fn vadd(a: Valuation, b: Valuation) -> Valuation {
    match (a, b) {
        (Valuation::Finite(x), Valuation::Finite(y)) => Valuation::Finite(x + y),
        _ => Valuation::Infinite,
    }
}

/// Superadditivity of valuation profiles under products:
/// `v_n(xy) >= min over a + b = n + 1 of v_a(x) + v_b(y)`.
pub fn product_bound_check(x: &AlgebraElement, y: &AlgebraElement, n_max: u32) -> Result<bool> {
    let vx = valuation_sequence(x, n_max);
    let vy = valuation_sequence(y, n_max);
    let vxy = valuation_sequence(&x.mul(y)?, n_max);
    for n in 1..=n_max as usize {
        let bound = (1..=n)
            .map(|a| vadd(vx[a - 1], vy[n - a]))
            .min()
            .expect("nonempty range");
        if vxy[n - 1] < bound {
            return Ok(false);
        }
    }
    Ok(true)
}
