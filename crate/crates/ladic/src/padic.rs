//! Scalars of a fixed prime `ell` known to a fixed number of digits, plus the
//! elementary valuation arithmetic the rest of the crate leans on.
//!
//! A scalar is stored as `unit * ell^val` where `unit` is a residue coprime to
//! `ell`, normalized into `[1, ell^precision)`. The valuation is exact; the
//! unit is a window of `precision` digits. Subtraction that cancels past the
//! window cannot certify its output, so it returns zero-at-precision and sets
//! a sticky `exhausted` flag that propagates through later operations.

use crate::error::{Error, Result};
use num::bigint::BigUint;
use num::rational::Ratio;
use num::{One, Zero};
use std::cmp::Ordering;
use std::fmt;

/// Valuation of a scalar: every nonzero value has a finite one, zero sits at
/// the top of the order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(i64),
    Infinite,
}

impl Valuation {
    pub fn is_finite(self) -> bool {
        matches!(self, Valuation::Finite(_))
    }

    /// Finite value, or `None` for the infinite sentinel.
    pub fn finite(self) -> Option<i64> {
        match self {
            Valuation::Finite(v) => Some(v),
            Valuation::Infinite => None,
        }
    }
}

impl PartialOrd for Valuation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Valuation {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Valuation::Infinite, Valuation::Infinite) => Ordering::Equal,
            (Valuation::Infinite, _) => Ordering::Greater,
            (_, Valuation::Infinite) => Ordering::Less,
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Finite(v) => write!(f, "{v}"),
            Valuation::Infinite => write!(f, "inf"),
        }
    }
}

/// Exponent-of-`ell` count of an unsigned integer. `None` for zero.
fn vp_u128(ell: u64, mut n: u128) -> Option<i64> {
    if n == 0 {
        return None;
    }
    let p = ell as u128;
    let mut v = 0i64;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    Some(v)
}

fn vp_biguint(ell: u64, n: &BigUint) -> Option<u64> {
    if n.is_zero() {
        return None;
    }
    let p = BigUint::from(ell);
    let mut v = 0u64;
    let mut m = n.clone();
    loop {
        let (q, r) = num::Integer::div_rem(&m, &p);
        if !r.is_zero() {
            return Some(v);
        }
        m = q;
        v += 1;
    }
}

/// Inverse of `a` modulo `m` (`m` odd prime power or any modulus with
/// `gcd(a, m) = 1`). Extended Euclid over i128; `m < 2^63` keeps it exact.
fn inv_mod(a: u128, m: u128) -> Option<u128> {
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u128)
}

pub(crate) fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n % 2 == 0 {
        return n == 2;
    }
    let mut d = 3u64;
    while (d as u128) * (d as u128) <= n as u128 {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// A scalar `unit * ell^val` carried to at most `precision` digits of the
/// unit.
///
/// Freshly constructed values certify the full window of `precision` digits.
/// Cancellation in addition shrinks the certified digit count (`rel`): the
/// unit is then stored reduced modulo `ell^rel`, so uncertified digits are
/// never invented. When cancellation eats the whole window the value
/// degrades to zero-at-precision and the sticky `exhausted` flag is set.
#[derive(Debug, Clone)]
pub struct PadicScalar {
    ell: u64,
    precision: u32,
    modulus: u128,
    val: Valuation,
    unit: u128,
    rel: u32,
    exhausted: bool,
}

impl PartialEq for PadicScalar {
    /// Equality of value at the shared certified precision; the exhausted
    /// flag is bookkeeping, not part of the value.
    fn eq(&self, other: &Self) -> bool {
        if self.ell != other.ell || self.precision != other.precision || self.val != other.val {
            return false;
        }
        if self.val == Valuation::Infinite {
            return true;
        }
        let r = self.rel.min(other.rel);
        let p = (self.ell as u128).pow(r);
        self.unit % p == other.unit % p
    }
}

impl Eq for PadicScalar {}

impl PadicScalar {
    fn check_params(ell: u64, precision: u32) -> Result<u128> {
        if !is_prime_u64(ell) {
            return Err(Error::Invalid(format!("{ell} is not prime")));
        }
        if precision == 0 {
            return Err(Error::Invalid("precision must be at least 1".into()));
        }
        let mut m: u128 = 1;
        for _ in 0..precision {
            m = m
                .checked_mul(ell as u128)
                .filter(|&m| m < (1u128 << 63))
                .ok_or_else(|| {
                    Error::Invalid(format!("ell^precision = {ell}^{precision} exceeds 2^63"))
                })?;
        }
        Ok(m)
    }

    pub fn zero(ell: u64, precision: u32) -> Result<Self> {
        let modulus = Self::check_params(ell, precision)?;
        Ok(PadicScalar {
            ell,
            precision,
            modulus,
            val: Valuation::Infinite,
            unit: 0,
            rel: precision,
            exhausted: false,
        })
    }

    pub fn one(ell: u64, precision: u32) -> Result<Self> {
        Self::from_integer(ell, precision, 1)
    }

    pub fn from_integer(ell: u64, precision: u32, n: i128) -> Result<Self> {
        let modulus = Self::check_params(ell, precision)?;
        if n == 0 {
            return Self::zero(ell, precision);
        }
        let a = n.unsigned_abs();
        let v = vp_u128(ell, a).expect("nonzero");
        let mut unit = (a / (ell as u128).pow(v as u32)) % modulus;
        if n < 0 {
            unit = modulus - unit;
        }
        Ok(PadicScalar {
            ell,
            precision,
            modulus,
            val: Valuation::Finite(v),
            unit,
            rel: precision,
            exhausted: false,
        })
    }

    pub fn from_ratio(ell: u64, precision: u32, num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        let n = Self::from_integer(ell, precision, num)?;
        let d = Self::from_integer(ell, precision, den)?;
        n.div(&d)
    }

    /// Scalar from a residue known only modulo `ell^precision`: the unit is
    /// certified for `precision - val` digits, and a zero residue is a
    /// flagged zero at the window.
    pub fn from_residue(ell: u64, precision: u32, residue: u128) -> Result<Self> {
        let modulus = Self::check_params(ell, precision)?;
        let r = residue % modulus;
        if r == 0 {
            return Ok(Self::zero(ell, precision)?.with_exhausted(true));
        }
        let v = vp_u128(ell, r).expect("nonzero");
        let rel = precision - v as u32;
        let unit = (r / (ell as u128).pow(v as u32)) % (ell as u128).pow(rel);
        Ok(PadicScalar {
            ell,
            precision,
            modulus,
            val: Valuation::Finite(v),
            unit,
            rel,
            exhausted: false,
        })
    }

    /// Assemble from an explicit valuation and unit residue.
    pub fn from_parts(ell: u64, precision: u32, val: i64, unit: u128) -> Result<Self> {
        let modulus = Self::check_params(ell, precision)?;
        let u = unit % modulus;
        if u == 0 || u % ell as u128 == 0 {
            return Err(Error::Invalid(format!(
                "unit residue {unit} is not coprime to {ell}"
            )));
        }
        Ok(PadicScalar {
            ell,
            precision,
            modulus,
            val: Valuation::Finite(val),
            unit: u,
            rel: precision,
            exhausted: false,
        })
    }

    pub fn ell(&self) -> u64 {
        self.ell
    }

    pub fn precision(&self) -> u32 {
        self.precision
    }

    pub fn valuation(&self) -> Valuation {
        self.val
    }

    /// Unit residue in `[1, ell^certified_digits())`; 0 exactly when the
    /// value is zero at precision.
    pub fn unit(&self) -> u128 {
        self.unit
    }

    /// Number of certified digits of the unit (equals the precision unless
    /// cancellation has shrunk the window).
    pub fn certified_digits(&self) -> u32 {
        self.rel
    }

    pub fn is_zero(&self) -> bool {
        self.val == Valuation::Infinite
    }

    /// True when some ancestor subtraction cancelled past the precision
    /// window, so downstream zeroes may hide small nonzero values.
    pub fn is_exhausted(&self) -> bool {
        self.exhausted
    }

    pub fn with_exhausted(mut self, flag: bool) -> Self {
        self.exhausted = flag;
        self
    }

    fn same_structure(&self, other: &Self) -> Result<()> {
        if self.ell != other.ell || self.precision != other.precision {
            return Err(Error::MismatchedScalars(
                self.ell,
                self.precision,
                other.ell,
                other.precision,
            ));
        }
        Ok(())
    }

    fn zero_exhausted(&self) -> Self {
        PadicScalar {
            ell: self.ell,
            precision: self.precision,
            modulus: self.modulus,
            val: Valuation::Infinite,
            unit: 0,
            rel: self.precision,
            exhausted: true,
        }
    }

    /// Sum `sign_a*ua*ell^va + sign_b*ub*ell^vb` as an exact i128 around the
    /// smaller valuation, then renormalize. Exactness holds because
    /// `ell^precision < 2^63` bounds every intermediate by `2^126`. The
    /// result certifies digits only up to the weaker operand's absolute
    /// certainty; cancellation past that point yields zero-at-precision.
    fn add_signed(&self, other: &Self, negate_other: bool) -> Result<Self> {
        self.same_structure(other)?;
        let exhausted = self.exhausted || other.exhausted;
        match (self.val, other.val) {
            (Valuation::Infinite, _) => {
                let mut r = other.clone();
                if negate_other {
                    r = r.neg();
                }
                let flag = exhausted || r.exhausted;
                return Ok(r.with_exhausted(flag));
            }
            (_, Valuation::Infinite) => {
                return Ok(self.clone().with_exhausted(exhausted));
            }
            _ => {}
        }
        let (va, vb) = (
            self.val.finite().expect("finite"),
            other.val.finite().expect("finite"),
        );
        // One operand entirely inside the other's uncertainty: the sum
        // equals the dominant operand within its certified digits.
        if va >= vb + other.rel as i64 {
            let mut r = other.clone();
            if negate_other {
                r = r.neg();
            }
            let flag = exhausted || r.exhausted;
            return Ok(r.with_exhausted(flag));
        }
        if vb >= va + self.rel as i64 {
            return Ok(self.clone().with_exhausted(exhausted));
        }
        let abs = (va + self.rel as i64).min(vb + other.rel as i64);
        let v = va.min(vb);
        let pa = (self.ell as i128).pow((va - v) as u32);
        let pb = (self.ell as i128).pow((vb - v) as u32);
        let sb = if negate_other { -1 } else { 1 };
        let s = self.unit as i128 * pa + sb * other.unit as i128 * pb;
        if s == 0 {
            return Ok(self.zero_exhausted());
        }
        let t = vp_u128(self.ell, s.unsigned_abs()).expect("nonzero");
        let val = v + t;
        if val >= abs {
            return Ok(self.zero_exhausted());
        }
        let rel = ((abs - val) as u32).min(self.precision);
        let pr = (self.ell as u128).pow(rel);
        let mag = s.unsigned_abs() / (self.ell as u128).pow(t as u32);
        let mut unit = mag % pr;
        if s < 0 {
            unit = pr - unit;
        }
        Ok(PadicScalar {
            ell: self.ell,
            precision: self.precision,
            modulus: self.modulus,
            val: Valuation::Finite(val),
            unit,
            rel,
            exhausted,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.add_signed(other, false)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_signed(other, true)
    }

    pub fn neg(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        PadicScalar {
            unit: (self.ell as u128).pow(self.rel) - self.unit,
            ..self.clone()
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.same_structure(other)?;
        let exhausted = self.exhausted || other.exhausted;
        match (self.val.finite(), other.val.finite()) {
            (Some(va), Some(vb)) => {
                let rel = self.rel.min(other.rel);
                Ok(PadicScalar {
                    ell: self.ell,
                    precision: self.precision,
                    modulus: self.modulus,
                    val: Valuation::Finite(va + vb),
                    unit: (self.unit * other.unit) % (self.ell as u128).pow(rel),
                    rel,
                    exhausted,
                })
            }
            _ => {
                let mut z = PadicScalar::zero(self.ell, self.precision).expect("valid params");
                z.exhausted = exhausted;
                Ok(z)
            }
        }
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        self.same_structure(other)?;
        if other.is_zero() {
            return Err(Error::DivisionByZero);
        }
        let exhausted = self.exhausted || other.exhausted;
        let vb = other.val.finite().expect("nonzero");
        match self.val.finite() {
            None => {
                let mut z = PadicScalar::zero(self.ell, self.precision).expect("valid params");
                z.exhausted = exhausted;
                Ok(z)
            }
            Some(va) => {
                let rel = self.rel.min(other.rel);
                let pr = (self.ell as u128).pow(rel);
                let inv = inv_mod(other.unit, pr).ok_or(Error::DivisionByZero)?;
                Ok(PadicScalar {
                    ell: self.ell,
                    precision: self.precision,
                    modulus: self.modulus,
                    val: Valuation::Finite(va - vb),
                    unit: (self.unit % pr) * inv % pr,
                    rel,
                    exhausted,
                })
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        PadicScalar::one(self.ell, self.precision)?.div(self)
    }

    /// Integer power; negative exponents invert first.
    pub fn pow(&self, e: i64) -> Result<Self> {
        let base = if e < 0 { self.inv()? } else { self.clone() };
        let mut acc = PadicScalar::one(self.ell, self.precision)?;
        acc.exhausted = self.exhausted;
        for _ in 0..e.unsigned_abs() {
            acc = acc.mul(&base)?;
        }
        Ok(acc)
    }

    /// Multiply by `ell^k` (exact shift of the valuation).
    pub fn shift(&self, k: i64) -> Self {
        match self.val {
            Valuation::Infinite => self.clone(),
            Valuation::Finite(v) => PadicScalar {
                val: Valuation::Finite(v + k),
                ..self.clone()
            },
        }
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.val {
            Valuation::Infinite => write!(f, "0"),
            Valuation::Finite(v) => write!(f, "{}*{}^{}", self.unit, self.ell, v),
        }
    }
}

/// Arithmetic selector for [`scalar_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Validated scalar arithmetic: both operands must share prime and precision.
pub fn scalar_arith(a: &PadicScalar, b: &PadicScalar, op: ScalarOp) -> Result<PadicScalar> {
    match op {
        ScalarOp::Add => a.add(b),
        ScalarOp::Sub => a.sub(b),
        ScalarOp::Mul => a.mul(b),
        ScalarOp::Div => a.div(b),
    }
}

/// Multiplicative order of `q` in the group that steers digit growth: the
/// units mod `ell` for odd `ell`, the units mod 4 when `ell = 2`. Requires
/// `q` coprime to `ell` (for `ell = 2` the caller must pass `q` faithful mod
/// 4, which any integer or residue at precision >= 2 is).
pub fn order_mod(q: u128, ell: u64) -> Result<u32> {
    if !is_prime_u64(ell) {
        return Err(Error::Invalid(format!("{ell} is not prime")));
    }
    if q % ell as u128 == 0 {
        return Err(Error::Invalid(format!("q = {q} is divisible by {ell}")));
    }
    if ell == 2 {
        return Ok(if q % 4 == 1 { 1 } else { 2 });
    }
    let p = ell as u128;
    let q0 = q % p;
    let mut acc = q0;
    let mut s = 1u32;
    while acc != 1 {
        acc = acc * q0 % p;
        s += 1;
    }
    Ok(s)
}

/// Exact digit count of `q^s - 1` in base `ell`, where `s` is the order from
/// [`order_mod`]. Big-integer computation, no overflow at any size.
fn base_val(q: u128, ell: u64, s: u32) -> u64 {
    let n = BigUint::from(q).pow(s) - BigUint::one();
    vp_biguint(ell, &n).expect("q^s > 1")
}

/// Closed form for the `ell`-digit count of `q^k - 1`. Requires `q != 1`
/// coprime to `ell`; `k >= 1`.
pub fn val_qpow(q: u128, k: u64, ell: u64) -> Result<u64> {
    if q <= 1 {
        return Err(Error::Invalid(format!("base q = {q} must be at least 2")));
    }
    if k == 0 {
        return Err(Error::Invalid("exponent k must be at least 1".into()));
    }
    let s = order_mod(q, ell)? as u64;
    if k % s != 0 {
        // Off-order exponents: units mod ell (odd case) give no digits at
        // all; for ell = 2 an odd power of a 3-mod-4 base lands at exactly
        // one digit.
        return Ok(if ell == 2 { 1 } else { 0 });
    }
    let extra = vp_u128(ell, (k / s) as u128).map(|v| v as u64).unwrap_or(0);
    Ok(base_val(q, ell, s as u32) + extra)
}

/// Reference implementation of [`val_qpow`] by direct expansion of `q^k - 1`.
pub fn brute_val_qpow(q: u128, k: u64, ell: u64) -> Result<u64> {
    if q <= 1 {
        return Err(Error::Invalid(format!("base q = {q} must be at least 2")));
    }
    if k == 0 {
        return Err(Error::Invalid("exponent k must be at least 1".into()));
    }
    if !is_prime_u64(ell) {
        return Err(Error::Invalid(format!("{ell} is not prime")));
    }
    if q % ell as u128 == 0 {
        return Err(Error::Invalid(format!("q = {q} is divisible by {ell}")));
    }
    let n = BigUint::from(q).pow(k as u32) - BigUint::one();
    Ok(vp_biguint(ell, &n).expect("q^k > 1"))
}

/// Exact rational with positive reduced denominator, used for digit budgets
/// and thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RationalBound(Ratio<i128>);

impl RationalBound {
    pub fn new(num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(Error::DivisionByZero);
        }
        Ok(RationalBound(Ratio::new(num, den)))
    }

    pub fn from_int(n: i128) -> Self {
        RationalBound(Ratio::from_integer(n))
    }

    pub fn numerator(&self) -> i128 {
        *self.0.numer()
    }

    pub fn denominator(&self) -> i128 {
        *self.0.denom()
    }

    pub fn add(&self, other: &Self) -> Self {
        RationalBound(self.0 + other.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        RationalBound(self.0 - other.0)
    }

    pub fn mul(&self, other: &Self) -> Self {
        RationalBound(self.0 * other.0)
    }

    pub fn floor_int(&self) -> i128 {
        self.0.floor().to_integer()
    }

    pub fn is_integer(&self) -> bool {
        self.0.is_integer()
    }
}

impl fmt::Display for RationalBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl PartialEq<i128> for RationalBound {
    fn eq(&self, other: &i128) -> bool {
        self.0 == Ratio::from_integer(*other)
    }
}

impl PartialOrd<i128> for RationalBound {
    fn partial_cmp(&self, other: &i128) -> Option<Ordering> {
        self.0.partial_cmp(&Ratio::from_integer(*other))
    }
}

/// Cumulative digit budget: an exact upper bound for
/// `sum_{j=1..k} val_qpow(q, j, ell)`. Zero when `k = 0`.
pub fn cbound(q: u128, ell: u64, k: u64) -> Result<RationalBound> {
    if k == 0 {
        return Ok(RationalBound::from_int(0));
    }
    if q <= 1 {
        return Err(Error::Invalid(format!("base q = {q} must be at least 2")));
    }
    let s = order_mod(q, ell)? as i128;
    let base = base_val(q, ell, order_mod(q, ell)?) as i128;
    let k = k as i128;
    if ell != 2 {
        // (k/s) * (base + 1/(ell-1))
        let per = Ratio::new(base * (ell as i128 - 1) + 1, ell as i128 - 1);
        Ok(RationalBound(Ratio::new(k, s) * per))
    } else {
        // (k/s) * (base + 2) + 1/s
        let per = Ratio::from_integer(base + 2);
        Ok(RationalBound(
            Ratio::new(k, s) * per + Ratio::new(1, s),
        ))
    }
}
