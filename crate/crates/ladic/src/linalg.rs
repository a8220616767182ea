//! Dense linear algebra over the residue ring of `ell^precision`.
//!
//! Everything here is crate-internal plumbing shared by the period, radius
//! and gate modules: valuation-pivoted diagonalization (with optional
//! tracking of column operations or a right-hand side), Howell canonical
//! forms for row spans, kernels, and inversion of residually invertible
//! matrices. Entries are residues in `[0, ell^precision)`; valuations are
//! clamped to the precision, with a zero entry reported at the clamp.

use crate::error::{Error, Result};

/// Modulus context: prime, digit count, and the cached modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct ModCtx {
    pub ell: u64,
    pub m: u32,
    pub modulus: u128,
}

impl ModCtx {
    pub fn new(ell: u64, m: u32) -> Result<Self> {
        if !crate::padic::is_prime_u64(ell) {
            return Err(Error::Invalid(format!("{ell} is not prime")));
        }
        if m == 0 {
            return Err(Error::Invalid("precision must be at least 1".into()));
        }
        let mut modulus: u128 = 1;
        for _ in 0..m {
            modulus = modulus
                .checked_mul(ell as u128)
                .filter(|&x| x < (1u128 << 63))
                .ok_or_else(|| Error::Invalid(format!("{ell}^{m} exceeds 2^63")))?;
        }
        Ok(ModCtx { ell, m, modulus })
    }

    pub fn reduce_i128(&self, x: i128) -> u128 {
        x.rem_euclid(self.modulus as i128) as u128
    }

    /// Valuation of a residue, clamped to `m`; zero maps to `m`.
    pub fn vp(&self, x: u128) -> u32 {
        if x % self.modulus == 0 {
            return self.m;
        }
        let mut x = x % self.modulus;
        let p = self.ell as u128;
        let mut v = 0;
        while x % p == 0 {
            x /= p;
            v += 1;
        }
        v
    }

    /// `ell^k` as a residue (zero for `k >= m`).
    pub fn pow_ell(&self, k: u32) -> u128 {
        if k >= self.m {
            0
        } else {
            (self.ell as u128).pow(k)
        }
    }

    pub fn add(&self, a: u128, b: u128) -> u128 {
        (a + b) % self.modulus
    }

    pub fn sub(&self, a: u128, b: u128) -> u128 {
        (self.modulus + a % self.modulus - b % self.modulus) % self.modulus
    }

    pub fn mul(&self, a: u128, b: u128) -> u128 {
        (a % self.modulus) * (b % self.modulus) % self.modulus
    }

    /// Inverse of a unit residue.
    pub fn inv_unit(&self, a: u128) -> Option<u128> {
        let (mut r0, mut r1) = (self.modulus as i128, (a % self.modulus) as i128);
        let (mut t0, mut t1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (t0, t1) = (t1, t0 - q * t1);
        }
        if r0 != 1 {
            return None;
        }
        Some(t0.rem_euclid(self.modulus as i128) as u128)
    }
}

/// Row-major dense matrix of residues.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct MatZ {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u128>,
    pub ctx: ModCtx,
}

impl MatZ {
    pub fn zero(ctx: ModCtx, rows: usize, cols: usize) -> Self {
        MatZ {
            rows,
            cols,
            data: vec![0; rows * cols],
            ctx,
        }
    }

    pub fn identity(ctx: ModCtx, n: usize) -> Self {
        let mut m = Self::zero(ctx, n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(ctx: ModCtx, rows: &[Vec<u128>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).unwrap_or(0);
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Invalid("ragged matrix rows".into()));
        }
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            for &x in row {
                data.push(x % ctx.modulus);
            }
        }
        Ok(MatZ {
            rows: r,
            cols: c,
            data,
            ctx,
        })
    }

    pub fn get(&self, i: usize, j: usize) -> u128 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, x: u128) {
        self.data[i * self.cols + j] = x % self.ctx.modulus;
    }

    pub fn row(&self, i: usize) -> &[u128] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    pub fn mul(&self, other: &MatZ) -> MatZ {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let mut out = MatZ::zero(self.ctx, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let x = self.ctx.add(out.get(i, j), self.ctx.mul(a, other.get(k, j)));
                    out.set(i, j, x);
                }
            }
        }
        out
    }

    pub fn sub(&self, other: &MatZ) -> MatZ {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (x, &y) in out.data.iter_mut().zip(other.data.iter()) {
            *x = self.ctx.sub(*x, y);
        }
        out
    }

    /// Minimum entry valuation, clamped to the precision.
    pub fn min_valuation(&self) -> u32 {
        self.data
            .iter()
            .map(|&x| self.ctx.vp(x))
            .min()
            .unwrap_or(self.ctx.m)
    }

    pub fn column(&self, j: usize) -> Vec<u128> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    /// `row[a] -= f * row[b]`.
    fn row_axpy(&mut self, a: usize, b: usize, f: u128) {
        for j in 0..self.cols {
            let x = self.ctx.sub(self.get(a, j), self.ctx.mul(f, self.get(b, j)));
            self.set(a, j, x);
        }
    }

    /// `col[a] -= f * col[b]`.
    fn col_axpy(&mut self, a: usize, b: usize, f: u128) {
        for i in 0..self.rows {
            let x = self.ctx.sub(self.get(i, a), self.ctx.mul(f, self.get(i, b)));
            self.set(i, a, x);
        }
    }
}

/// Output of [`diagonalize`]: invariant-factor valuations `dvals[t]` (clamped
/// to the precision, length `min(rows, cols)`), the accumulated column
/// transform when requested, and the row-transformed right-hand side when
/// one was supplied.
pub(crate) struct Diag {
    pub dvals: Vec<u32>,
    pub col_transform: Option<MatZ>,
    pub rhs: Option<Vec<u128>>,
}

/// Valuation-pivoted two-sided elimination. After the call the implicit
/// relation is `U * A * V = D` with `U` the (untracked) row operations
/// applied to `rhs` and `V` the tracked column operations. Pivots are chosen
/// by minimal valuation with smallest-index tie-breaks, so the invariant
/// factors come out in non-decreasing valuation order.
pub(crate) fn diagonalize(a: &MatZ, track_cols: bool, rhs: Option<Vec<u128>>) -> Diag {
    let ctx = a.ctx;
    let mut w = a.clone();
    let mut v = track_cols.then(|| MatZ::identity(ctx, a.cols));
    let mut b = rhs;
    if let Some(ref b) = b {
        assert_eq!(b.len(), a.rows, "rhs length mismatch");
    }
    let steps = a.rows.min(a.cols);
    let mut dvals = vec![ctx.m; steps];
    for t in 0..steps {
        let mut best: Option<(u32, usize, usize)> = None;
        for i in t..a.rows {
            for j in t..a.cols {
                let vp = ctx.vp(w.get(i, j));
                if vp < ctx.m && best.map_or(true, |(bv, _, _)| vp < bv) {
                    best = Some((vp, i, j));
                }
            }
        }
        let Some((delta, pi, pj)) = best else {
            break;
        };
        w.swap_rows(t, pi);
        if let Some(ref mut b) = b {
            b.swap(t, pi);
        }
        w.swap_cols(t, pj);
        if let Some(ref mut v) = v {
            v.swap_cols(t, pj);
        }
        let pivot = w.get(t, t);
        let unit = pivot / ctx.pow_ell(delta).max(1);
        let unit_inv = ctx.inv_unit(unit).expect("pivot unit");
        for i in t + 1..a.rows {
            let x = w.get(i, t);
            if x == 0 {
                continue;
            }
            let f = ctx.mul(x / ctx.pow_ell(delta).max(1), unit_inv);
            w.row_axpy(i, t, f);
            if let Some(ref mut b) = b {
                b[i] = ctx.sub(b[i], ctx.mul(f, b[t]));
            }
        }
        for j in t + 1..a.cols {
            let x = w.get(t, j);
            if x == 0 {
                continue;
            }
            let f = ctx.mul(x / ctx.pow_ell(delta).max(1), unit_inv);
            w.col_axpy(j, t, f);
            if let Some(ref mut v) = v {
                v.col_axpy(j, t, f);
            }
        }
        dvals[t] = delta;
    }
    Diag {
        dvals,
        col_transform: v,
        rhs: b,
    }
}

/// Gauss-Jordan inverse; `None` when the matrix is not invertible over the
/// residue ring (equivalently, not invertible mod `ell`).
pub(crate) fn invert(a: &MatZ) -> Option<MatZ> {
    if a.rows != a.cols {
        return None;
    }
    let ctx = a.ctx;
    let n = a.rows;
    let mut w = a.clone();
    let mut inv = MatZ::identity(ctx, n);
    for t in 0..n {
        let pi = (t..n).find(|&i| ctx.vp(w.get(i, t)) == 0)?;
        w.swap_rows(t, pi);
        inv.swap_rows(t, pi);
        let f = ctx.inv_unit(w.get(t, t)).expect("unit pivot");
        for j in 0..n {
            w.set(t, j, ctx.mul(w.get(t, j), f));
            inv.set(t, j, ctx.mul(inv.get(t, j), f));
        }
        for i in 0..n {
            if i == t {
                continue;
            }
            let g = w.get(i, t);
            if g == 0 {
                continue;
            }
            w.row_axpy(i, t, g);
            inv.row_axpy(i, t, g);
        }
    }
    Some(inv)
}

/// Canonical Howell form of the span of `rows` inside the free module of
/// rank `cols`. Two generating sets span the same submodule exactly when
/// their Howell forms are equal, and membership is decidable by reduction
/// against the form.
pub(crate) fn howell(ctx: ModCtx, rows: &[Vec<u128>], cols: usize) -> Vec<Vec<u128>> {
    let mut work: Vec<Vec<u128>> = rows
        .iter()
        .map(|r| {
            assert_eq!(r.len(), cols, "row length mismatch");
            r.iter().map(|&x| x % ctx.modulus).collect()
        })
        .collect();
    let mut basis: Vec<(usize, u32, Vec<u128>)> = Vec::new();
    for j in 0..cols {
        loop {
            // Smallest valuation in column j among unplaced rows.
            let mut best: Option<(u32, usize)> = None;
            for (i, r) in work.iter().enumerate() {
                let vp = ctx.vp(r[j]);
                if vp < ctx.m && best.map_or(true, |(bv, _)| vp < bv) {
                    best = Some((vp, i));
                }
            }
            let Some((delta, idx)) = best else {
                break;
            };
            let mut piv = work.swap_remove(idx);
            let unit = piv[j] / ctx.pow_ell(delta).max(1);
            let uinv = ctx.inv_unit(unit).expect("unit");
            for x in piv.iter_mut() {
                *x = ctx.mul(*x, uinv);
            }
            // Eliminate column j from the remaining rows.
            for r in work.iter_mut() {
                if r[j] == 0 {
                    continue;
                }
                let f = r[j] / ctx.pow_ell(delta).max(1);
                for (x, &p) in r.iter_mut().zip(piv.iter()) {
                    *x = ctx.sub(*x, ctx.mul(f, p));
                }
            }
            // The tail of the pivot row re-enters the queue so that span
            // members with no column-j component are still represented.
            if delta > 0 {
                let scale = ctx.pow_ell(ctx.m - delta);
                let tail: Vec<u128> = piv.iter().map(|&x| ctx.mul(x, scale)).collect();
                if tail.iter().any(|&x| x != 0) {
                    work.push(tail);
                }
            }
            basis.push((j, delta, piv));
            break;
        }
        work.retain(|r| r.iter().any(|&x| x != 0));
    }
    // Reduce entries above each pivot into canonical range.
    for k in (0..basis.len()).rev() {
        let (j, delta, piv) = basis[k].clone();
        let step = ctx.pow_ell(delta).max(1);
        for (_, _, r) in basis.iter_mut().take(k) {
            let f = r[j] / step;
            if f == 0 {
                continue;
            }
            for (x, &p) in r.iter_mut().zip(piv.iter()) {
                *x = ctx.sub(*x, ctx.mul(f, p));
            }
        }
    }
    basis.into_iter().map(|(_, _, r)| r).collect()
}

/// Reduce `row` against a Howell form; returns the residual. A zero residual
/// certifies membership of the span.
pub(crate) fn reduce_against(ctx: ModCtx, form: &[Vec<u128>], row: &[u128]) -> Vec<u128> {
    let mut r: Vec<u128> = row.iter().map(|&x| x % ctx.modulus).collect();
    for piv in form {
        let j = match piv.iter().position(|&x| x != 0) {
            Some(j) => j,
            None => continue,
        };
        let delta = ctx.vp(piv[j]);
        if ctx.vp(r[j]) < delta {
            continue;
        }
        let f = r[j] / ctx.pow_ell(delta).max(1);
        if f == 0 {
            continue;
        }
        for (x, &p) in r.iter_mut().zip(piv.iter()) {
            *x = ctx.sub(*x, ctx.mul(f, p));
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(ell: u64, m: u32) -> ModCtx {
        ModCtx::new(ell, m).unwrap()
    }

    /// Kernel generators of `a`: scaled columns of the diagonalizing
    /// transform, one per invariant factor with positive valuation.
    fn kernel(a: &MatZ) -> Vec<Vec<u128>> {
        let ctx = a.ctx;
        let d = diagonalize(a, true, None);
        let v = d.col_transform.expect("tracked");
        let mut gens = Vec::new();
        for j in 0..a.cols {
            let delta = d.dvals.get(j).copied().unwrap_or(ctx.m);
            if delta == 0 {
                continue;
            }
            let scale = ctx.pow_ell(ctx.m - delta);
            let scale = if delta >= ctx.m { 1 } else { scale };
            let col = v.column(j);
            gens.push(col.iter().map(|&x| ctx.mul(x, scale)).collect());
        }
        gens
    }

    #[test]
    fn diagonalize_reads_off_invariant_factors() {
        let c = ctx(3, 4);
        let a = MatZ::from_rows(c, &[vec![3, 1], vec![9, 27]]).unwrap();
        let d = diagonalize(&a, false, None);
        assert_eq!(d.dvals[0], 0);
        // det = 81 - 9 = 72, v3 = 2, so the second factor has valuation 2.
        assert_eq!(d.dvals[1], 2);
    }

    #[test]
    fn kernel_vectors_annihilate() {
        let c = ctx(3, 4);
        let a = MatZ::from_rows(c, &[vec![1, 1], vec![0, 9]]).unwrap();
        for g in kernel(&a) {
            let x = MatZ::from_rows(c, &[vec![g[0]], vec![g[1]]]).unwrap();
            assert!(a.mul(&x).is_zero(), "kernel vector fails: {g:?}");
        }
    }

    #[test]
    fn invert_round_trips() {
        let c = ctx(3, 4);
        let a = MatZ::from_rows(c, &[vec![1, 5], vec![3, 2]]).unwrap();
        let inv = invert(&a).unwrap();
        assert_eq!(a.mul(&inv), MatZ::identity(c, 2));
        assert_eq!(inv.mul(&a), MatZ::identity(c, 2));
        let sing = MatZ::from_rows(c, &[vec![3, 0], vec![0, 1]]).unwrap();
        assert!(invert(&sing).is_none());
    }

    #[test]
    fn howell_is_canonical_for_equal_spans() {
        let c = ctx(2, 3);
        // Same span written two ways.
        let a = howell(c, &[vec![2, 4], vec![0, 8]], 2);
        let b = howell(c, &[vec![2, 4], vec![2, 12], vec![4, 8]], 2);
        assert_eq!(a, b);
        // Howell property: (0, 4) = 2*(2, 4)*... actually 4*(2,4) = (8,16) =
        // (0,0); the span contains (0, 8) which plain echelon of `a` would
        // hide. Membership must hold.
        let r = reduce_against(c, &a, &[0, 8]);
        assert!(r.iter().all(|&x| x == 0));
    }

    #[test]
    fn membership_reduction() {
        let c = ctx(3, 3);
        let form = howell(c, &[vec![3, 1, 0], vec![0, 9, 3]], 3);
        let member = reduce_against(c, &form, &[3, 10, 3]);
        assert!(member.iter().all(|&x| x == 0));
        let non = reduce_against(c, &form, &[1, 0, 0]);
        assert!(non.iter().any(|&x| x != 0));
    }
}
