//! Truncated unramified coefficient rings `W(F_q)/p^N`, the residue field `F_q`,
//! and exact rational valuations.
//!
//! Elements of `W(F_q)/p^N` are stored in the basis `1, g, ..., g^{h-1}` over
//! `Z/p^N`, where `g` is a root of a fixed monic lift of a Conway polynomial.
//! The stored relation is `g^h = c_0 + c_1 g + ... + c_{h-1} g^{h-1}` with every
//! `c_i` in `[0, p)`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use num::rational::Ratio;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exact rationals used for exponents, radii and valuations.
pub type Q = Ratio<i64>;

/// Largest supported unramified degree.
pub const MAX_H: usize = 3;

/// Conway polynomials over `F_p`, lowest coefficient first, leading 1 omitted.
fn conway(p: u64, h: u32) -> Option<&'static [u64]> {
    Some(match (p, h) {
        (_, 1) => &[],
        (2, 2) => &[1, 1],
        (2, 3) => &[1, 1, 0],
        (3, 2) => &[2, 2],
        (3, 3) => &[1, 2, 0],
        (5, 2) => &[2, 4],
        (5, 3) => &[3, 3, 0],
        (7, 2) => &[3, 6],
        (7, 3) => &[4, 0, 6],
        _ => return None,
    })
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

/// `v_p(n)` for nonzero `n`.
pub fn vp_i128(mut n: i128, p: u64) -> u32 {
    debug_assert!(n != 0);
    let p = p as i128;
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

/// Parameters `(p, h, N)` of `W(F_{p^h})/p^N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ScalarRing {
    pub p: u64,
    pub h: u32,
    pub n: u32,
}

impl ScalarRing {
    pub fn new(p: u64, h: u32, n: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::Parameter(format!("p = {p} is not prime")));
        }
        if n == 0 {
            return Err(Error::Parameter("precision N must be positive".into()));
        }
        if conway(p, h).is_none() {
            return Err(Error::Parameter(format!(
                "no stored defining polynomial for p = {p}, h = {h}"
            )));
        }
        // products of two residues must fit in u128
        let ok = (p as u128).checked_pow(n).map(|m| m < (1u128 << 63)).unwrap_or(false);
        if !ok {
            return Err(Error::Parameter(format!("p^N too large for p = {p}, N = {n}")));
        }
        Ok(ScalarRing { p, h, n })
    }

    pub fn modulus(&self) -> u64 {
        self.p.pow(self.n)
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.h)
    }

    /// Same `(p, h)` at a different precision.
    pub fn with_precision(&self, n: u32) -> Result<Self> {
        ScalarRing::new(self.p, self.h, n)
    }

    fn relation(&self) -> &'static [u64] {
        conway(self.p, self.h).expect("validated at construction")
    }

    /// The defining relation `g^h = sum c_i g^i` as used by multiplication.
    pub fn defining_relation(&self) -> Vec<u64> {
        self.relation()
            .iter()
            .map(|&c| (self.p - c % self.p) % self.p)
            .collect()
    }
}

fn mul_ext(ring: &ScalarRing, modulus: u64, a: &[u64; MAX_H], b: &[u64; MAX_H]) -> [u64; MAX_H] {
    let h = ring.h as usize;
    let m = modulus as u128;
    let mut prod = [0u128; 2 * MAX_H];
    for i in 0..h {
        if a[i] == 0 {
            continue;
        }
        for j in 0..h {
            prod[i + j] = (prod[i + j] + a[i] as u128 * b[j] as u128) % m;
        }
    }
    // g^h = -(conway_0 + ... ) = sum rel_i g^i with rel_i in [0, p)
    let conw = ring.relation();
    let rel: Vec<u128> = conw
        .iter()
        .map(|&c| ((ring.p - c % ring.p) % ring.p) as u128)
        .collect();
    for k in (h..2 * h - 1).rev() {
        let top = prod[k];
        if top == 0 {
            continue;
        }
        prod[k] = 0;
        for (i, &r) in rel.iter().enumerate() {
            prod[k - h + i] = (prod[k - h + i] + top * r) % m;
        }
    }
    let mut out = [0u64; MAX_H];
    for i in 0..h {
        out[i] = prod[i] as u64;
    }
    out
}

/// An element of `W(F_q)/p^N`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PadicScalar {
    ring: ScalarRing,
    c: [u64; MAX_H],
}

impl fmt::Debug for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for PadicScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ring.h == 1 {
            return write!(f, "{}", self.c[0]);
        }
        write!(f, "[")?;
        for i in 0..self.ring.h as usize {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.c[i])?;
        }
        write!(f, "]")
    }
}

/// Result of `scalar_val`: either the exact valuation or a lower bound `N`
/// when the element vanishes to the working precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarVal {
    Exact(u32),
    AtLeast(u32),
}

impl ScalarVal {
    pub fn exact(self) -> Option<u32> {
        match self {
            ScalarVal::Exact(v) => Some(v),
            ScalarVal::AtLeast(_) => None,
        }
    }
}

impl PadicScalar {
    pub fn zero(ring: ScalarRing) -> Self {
        PadicScalar { ring, c: [0; MAX_H] }
    }

    pub fn one(ring: ScalarRing) -> Self {
        Self::from_int(ring, 1)
    }

    pub fn from_int(ring: ScalarRing, v: i128) -> Self {
        let m = ring.modulus() as i128;
        let mut c = [0; MAX_H];
        c[0] = v.rem_euclid(m) as u64;
        PadicScalar { ring, c }
    }

    /// The basis element `g` of the unramified extension (requires `h >= 2`).
    pub fn generator(ring: ScalarRing) -> Self {
        let mut c = [0; MAX_H];
        if ring.h >= 2 {
            c[1] = 1;
        } else {
            c[0] = 1;
        }
        PadicScalar { ring, c }
    }

    pub fn from_coeffs(ring: ScalarRing, coeffs: &[i128]) -> Result<Self> {
        if coeffs.len() != ring.h as usize {
            return Err(Error::Parameter(format!(
                "expected {} coordinates, got {}",
                ring.h,
                coeffs.len()
            )));
        }
        let m = ring.modulus() as i128;
        let mut c = [0; MAX_H];
        for (i, &v) in coeffs.iter().enumerate() {
            c[i] = v.rem_euclid(m) as u64;
        }
        Ok(PadicScalar { ring, c })
    }

    pub fn ring(&self) -> ScalarRing {
        self.ring
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.c[..self.ring.h as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.ring != other.ring {
            return Err(Error::Parameter(format!(
                "scalar parameters differ: {:?} vs {:?}",
                self.ring, other.ring
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(self.add(o))
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(self.sub(o))
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(self.mul(o))
    }

    // Unchecked variants; callers guarantee equal rings.
    pub fn add(&self, o: &Self) -> Self {
        debug_assert_eq!(self.ring, o.ring);
        let m = self.ring.modulus();
        let mut c = [0; MAX_H];
        for i in 0..MAX_H {
            c[i] = ((self.c[i] as u128 + o.c[i] as u128) % m as u128) as u64;
        }
        PadicScalar { ring: self.ring, c }
    }

    pub fn neg(&self) -> Self {
        let m = self.ring.modulus();
        let mut c = [0; MAX_H];
        for i in 0..MAX_H {
            c[i] = (m - self.c[i]) % m;
        }
        PadicScalar { ring: self.ring, c }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        debug_assert_eq!(self.ring, o.ring);
        PadicScalar {
            ring: self.ring,
            c: mul_ext(&self.ring, self.ring.modulus(), &self.c, &o.c),
        }
    }

    pub fn mul_int(&self, k: i128) -> Self {
        self.mul(&PadicScalar::from_int(self.ring, k))
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = *self;
        let mut acc = PadicScalar::one(self.ring);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// `p`-adic valuation: the least `n < N` with `a` nonzero mod `p^{n+1}`.
    pub fn val(&self) -> ScalarVal {
        let mut best: Option<u32> = None;
        for &x in self.coeffs() {
            if x != 0 {
                let v = vp_i128(x as i128, self.ring.p);
                best = Some(best.map_or(v, |b: u32| b.min(v)));
            }
        }
        match best {
            Some(v) => ScalarVal::Exact(v),
            None => ScalarVal::AtLeast(self.ring.n),
        }
    }

    pub fn is_unit(&self) -> bool {
        self.val() == ScalarVal::Exact(0)
    }

    /// Exact division by `p^k`. The result is only meaningful modulo
    /// `p^{N-k}`; it is returned at the same nominal precision with the top
    /// digits set to zero.
    pub fn div_p_pow(&self, k: u32) -> Result<Self> {
        let pk = self.ring.p.pow(k);
        let mut c = [0; MAX_H];
        for i in 0..self.ring.h as usize {
            if self.c[i] % pk != 0 {
                return Err(Error::Integrity(format!(
                    "{} is not divisible by p^{}",
                    self, k
                )));
            }
            c[i] = self.c[i] / pk;
        }
        Ok(PadicScalar { ring: self.ring, c })
    }

    /// Change precision: reduces when lowering, pads with zero digits when raising.
    pub fn with_precision(&self, n: u32) -> Result<Self> {
        let ring = self.ring.with_precision(n)?;
        let m = ring.modulus();
        let mut c = [0; MAX_H];
        for i in 0..MAX_H {
            c[i] = self.c[i] % m;
        }
        Ok(PadicScalar { ring, c })
    }

    pub fn residue(&self) -> ResidueScalar {
        let mut c = [0; MAX_H];
        for i in 0..MAX_H {
            c[i] = self.c[i] % self.ring.p;
        }
        ResidueScalar { p: self.ring.p, h: self.ring.h, c }
    }

    /// Inverse of a unit, by Newton iteration from the Teichmüller lift of the
    /// residue inverse.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_unit() {
            return Err(Error::NotInvertible(format!("{} is not a unit", self)));
        }
        let mut x = teichmuller_lift(self.ring, &self.residue().inverse()?);
        let two = PadicScalar::from_int(self.ring, 2);
        for _ in 0..=self.ring.n.ilog2() + 1 {
            x = x.mul(&two.sub(&self.mul(&x)));
        }
        debug_assert_eq!(self.mul(&x), PadicScalar::one(self.ring));
        Ok(x)
    }

    /// The Witt-vector Frobenius `sigma`, lifting `x -> x^p`; computed digit-wise
    /// on the Teichmüller expansion.
    pub fn frobenius(&self) -> Self {
        if self.ring.h == 1 {
            return *self;
        }
        let digits = teichmuller_digits(self);
        from_teichmuller_digits(
            self.ring,
            &digits.iter().map(|d| d.pow(self.ring.p)).collect::<Vec<_>>(),
        )
    }

    pub fn frobenius_pow(&self, k: u32) -> Self {
        let k = k % self.ring.h;
        (0..k).fold(*self, |a, _| a.frobenius())
    }

    /// Canonical signed representative of a `h = 1` scalar.
    pub fn to_signed(&self) -> i128 {
        let m = self.ring.modulus() as i128;
        let v = self.c[0] as i128;
        if v > m / 2 {
            v - m
        } else {
            v
        }
    }
}

/// Teichmüller lift `[a]` in `W(F_q)/p^N`: any lift raised to `q^{N-1}`.
pub fn teichmuller_lift(ring: ScalarRing, a: &ResidueScalar) -> PadicScalar {
    let mut c = [0; MAX_H];
    c[..MAX_H].copy_from_slice(&a.c);
    let mut x = PadicScalar { ring, c };
    for _ in 0..(ring.h * (ring.n - 1)) {
        x = x.pow(ring.p);
    }
    x
}

/// Digits `a_0, ..., a_{N-1}` with `a = sum p^n [a_n] mod p^N`.
pub fn teichmuller_digits(a: &PadicScalar) -> Vec<ResidueScalar> {
    let ring = a.ring;
    let mut rest = *a;
    let mut out = Vec::with_capacity(ring.n as usize);
    for n in 0..ring.n {
        let d = rest.residue();
        out.push(d);
        let t = teichmuller_lift(ring, &d);
        rest = rest.sub(&t);
        if n + 1 < ring.n {
            rest = rest.div_p_pow(1).expect("digit subtraction leaves a multiple of p");
        }
    }
    out
}

pub fn from_teichmuller_digits(ring: ScalarRing, digits: &[ResidueScalar]) -> PadicScalar {
    let mut acc = PadicScalar::zero(ring);
    let mut pn = PadicScalar::one(ring);
    let p = PadicScalar::from_int(ring, ring.p as i128);
    for d in digits.iter().take(ring.n as usize) {
        acc = acc.add(&pn.mul(&teichmuller_lift(ring, d)));
        pn = pn.mul(&p);
    }
    acc
}

/// An element of the residue field `F_q`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResidueScalar {
    p: u64,
    h: u32,
    c: [u64; MAX_H],
}

impl fmt::Debug for ResidueScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for ResidueScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.h == 1 {
            return write!(f, "{}", self.c[0]);
        }
        write!(f, "{:?}", &self.c[..self.h as usize])
    }
}

impl ResidueScalar {
    fn ring(&self) -> ScalarRing {
        ScalarRing { p: self.p, h: self.h, n: 1 }
    }

    pub fn zero(p: u64, h: u32) -> Self {
        ResidueScalar { p, h, c: [0; MAX_H] }
    }

    pub fn from_int(p: u64, h: u32, v: i128) -> Self {
        let mut c = [0; MAX_H];
        c[0] = v.rem_euclid(p as i128) as u64;
        ResidueScalar { p, h, c }
    }

    pub fn one(p: u64, h: u32) -> Self {
        Self::from_int(p, h, 1)
    }

    pub fn from_coeffs(p: u64, h: u32, coeffs: &[i128]) -> Self {
        let mut c = [0; MAX_H];
        for (i, &v) in coeffs.iter().enumerate().take(h as usize) {
            c[i] = v.rem_euclid(p as i128) as u64;
        }
        ResidueScalar { p, h, c }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn h(&self) -> u32 {
        self.h
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.c[..self.h as usize]
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut c = [0; MAX_H];
        for i in 0..MAX_H {
            c[i] = (self.c[i] + o.c[i]) % self.p;
        }
        ResidueScalar { p: self.p, h: self.h, c }
    }

    pub fn neg(&self) -> Self {
        let mut c = [0; MAX_H];
        for i in 0..MAX_H {
            c[i] = (self.p - self.c[i]) % self.p;
        }
        ResidueScalar { p: self.p, h: self.h, c }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        ResidueScalar {
            p: self.p,
            h: self.h,
            c: mul_ext(&self.ring(), self.p, &self.c, &o.c),
        }
    }

    pub fn pow(&self, mut e: u64) -> Self {
        let mut base = *self;
        let mut acc = ResidueScalar::one(self.p, self.h);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    pub fn inverse(&self) -> Result<Self> {
        if self.is_zero() {
            return Err(Error::NotInvertible("zero residue".into()));
        }
        Ok(self.pow(self.p.pow(self.h) - 2))
    }

    /// Inverse Frobenius `x -> x^{1/p}` on `F_q`.
    pub fn pth_root(&self) -> Self {
        self.pow(self.p.pow(self.h - 1))
    }
}

/// An exact rational valuation or `+infinity`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Valuation {
    Finite(Q),
    Infinity,
}

impl Valuation {
    pub fn int(v: i64) -> Self {
        Valuation::Finite(Q::from_integer(v))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Valuation::Infinity)
    }

    pub fn finite(&self) -> Option<Q> {
        match self {
            Valuation::Finite(q) => Some(*q),
            Valuation::Infinity => None,
        }
    }

    pub fn min(self, other: Self) -> Self {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }

    pub fn scale(self, k: Q) -> Self {
        match self {
            Valuation::Finite(q) => Valuation::Finite(q * k),
            Valuation::Infinity => Valuation::Infinity,
        }
    }

    /// `self - other`, with `inf - finite = inf`. `None` when `other` is infinite.
    pub fn minus(self, other: Self) -> Option<Self> {
        match (self, other) {
            (_, Valuation::Infinity) => None,
            (Valuation::Infinity, _) => Some(Valuation::Infinity),
            (Valuation::Finite(a), Valuation::Finite(b)) => Some(Valuation::Finite(a - b)),
        }
    }
}

impl From<ScalarVal> for Valuation {
    fn from(v: ScalarVal) -> Self {
        match v {
            ScalarVal::Exact(n) => Valuation::int(n as i64),
            ScalarVal::AtLeast(_) => Valuation::Infinity,
        }
    }
}

impl Add for Valuation {
    type Output = Valuation;
    fn add(self, o: Valuation) -> Valuation {
        match (self, o) {
            (Valuation::Finite(a), Valuation::Finite(b)) => Valuation::Finite(a + b),
            _ => Valuation::Infinity,
        }
    }
}

impl Add<Q> for Valuation {
    type Output = Valuation;
    fn add(self, o: Q) -> Valuation {
        self + Valuation::Finite(o)
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
            (Valuation::Infinity, Valuation::Infinity) => Ordering::Equal,
            (Valuation::Infinity, _) => Ordering::Greater,
            (_, Valuation::Infinity) => Ordering::Less,
            (Valuation::Finite(a), Valuation::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Infinity => write!(f, "inf"),
            Valuation::Finite(q) => write!(f, "{}", fmt_q(q)),
        }
    }
}

impl Serialize for Valuation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

pub fn fmt_q(q: &Q) -> String {
    if q.is_integer() {
        q.to_integer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Usage(format!("not a rational number: {s:?}"));
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        Ok(Q::new(a, b))
    } else {
        Ok(Q::from_integer(s.parse().map_err(|_| bad())?))
    }
}

/// `floor(q)` as an integer.
pub fn q_floor(q: &Q) -> i64 {
    q.floor().to_integer()
}

pub fn q_is_positive(q: &Q) -> bool {
    q.is_positive()
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

pub fn q_one() -> Q {
    Q::one()
}

pub fn q_zero() -> Q {
    Q::zero()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: u64, h: u32, n: u32) -> ScalarRing {
        ScalarRing::new(p, h, n).unwrap()
    }

    #[test]
    fn basic_arith() {
        let ring = r(3, 1, 2);
        let one = PadicScalar::one(ring);
        assert_eq!(one.add(&one), PadicScalar::from_int(ring, 2));
        let x = PadicScalar::from_int(ring, 7);
        assert!(x.mul(&PadicScalar::zero(ring)).is_zero());
    }

    #[test]
    fn generator_relation_p2_h2() {
        // g^2 = g + 1 over Z/8, cross-checked by reducing the polynomial product by hand
        let ring = r(2, 2, 3);
        let g = PadicScalar::generator(ring);
        let g2 = g.mul(&g);
        assert_eq!(g2, PadicScalar::from_coeffs(ring, &[1, 1]).unwrap());
        // g^3 = g*g + g = 2g + 1
        assert_eq!(g2.mul(&g), PadicScalar::from_coeffs(ring, &[1, 2]).unwrap());
    }

    #[test]
    fn mismatched_parameters() {
        let a = PadicScalar::one(r(3, 1, 2));
        let b = PadicScalar::one(r(3, 1, 3));
        assert!(matches!(a.try_add(&b), Err(Error::Parameter(_))));
    }

    #[test]
    fn valuations() {
        assert_eq!(PadicScalar::from_int(r(3, 1, 4), 9).val(), ScalarVal::Exact(2));
        assert_eq!(PadicScalar::zero(r(3, 1, 4)).val(), ScalarVal::AtLeast(4));
        assert_eq!(PadicScalar::from_int(r(2, 1, 5), 6).val(), ScalarVal::Exact(1));
    }

    #[test]
    fn frobenius_cases() {
        let ring = r(3, 1, 3);
        assert_eq!(PadicScalar::from_int(ring, 5).frobenius(), PadicScalar::from_int(ring, 5));
        // h = 2, p = 2: sigma(g) is the other root of X^2 - X - 1, namely 1 - g,
        // which reduces to g^2 = g + 1 mod 2.
        let ring = r(2, 2, 3);
        let g = PadicScalar::generator(ring);
        let s = g.frobenius();
        assert_eq!(s, PadicScalar::from_coeffs(ring, &[1, -1]).unwrap());
        assert_eq!(s.residue(), g.mul(&g).residue());
        // digit-wise oracle: sigma([g]) = [g^p]
        let tg = teichmuller_lift(ring, &g.residue());
        assert_eq!(tg.frobenius(), teichmuller_lift(ring, &g.residue().pow(2)));
    }

    #[test]
    fn frobenius_is_ring_hom_of_order_h() {
        for (p, h) in [(2, 2), (3, 2), (2, 3), (5, 2)] {
            let ring = r(p, h, 3);
            let m = ring.modulus() as i128;
            for s in 0..40i128 {
                let a = PadicScalar::from_coeffs(ring, &(0..h as i128).map(|i| (s * 7 + i * 13) % m).collect::<Vec<_>>()).unwrap();
                let b = PadicScalar::from_coeffs(ring, &(0..h as i128).map(|i| (s * 11 + i * 5 + 3) % m).collect::<Vec<_>>()).unwrap();
                assert_eq!(a.mul(&b).frobenius(), a.frobenius().mul(&b.frobenius()));
                assert_eq!(a.add(&b).frobenius(), a.frobenius().add(&b.frobenius()));
                assert_eq!(a.frobenius_pow(h), a);
                let mut it = a;
                for _ in 0..h {
                    it = it.frobenius();
                }
                assert_eq!(it, a);
            }
        }
    }

    #[test]
    fn teichmuller_digit_examples() {
        let ring = r(3, 1, 3);
        let d = teichmuller_digits(&PadicScalar::one(ring));
        assert_eq!(d.iter().map(|x| x.coeffs()[0]).collect::<Vec<_>>(), vec![1, 0, 0]);
        let d = teichmuller_digits(&PadicScalar::from_int(ring, 3));
        assert_eq!(d.iter().map(|x| x.coeffs()[0]).collect::<Vec<_>>(), vec![0, 1, 0]);
        // [2] mod 27 is the root of x^3 = x congruent to 2, i.e. 26 = -1.
        let t2 = teichmuller_lift(ring, &ResidueScalar::from_int(3, 1, 2));
        assert_eq!(t2, PadicScalar::from_int(ring, 26));
        // 2 - 26 = -24 = 3 * (-8); -8 = 19 mod 27 has residue 1; [1] = 1;
        // (-8 - 1)/3 = -3 has residue 0.
        let d = teichmuller_digits(&PadicScalar::from_int(ring, 2));
        assert_eq!(d.iter().map(|x| x.coeffs()[0]).collect::<Vec<_>>(), vec![2, 1, 0]);
    }

    #[test]
    fn digits_round_trip() {
        let ring = r(2, 2, 4);
        for s in 0..200i128 {
            let a = PadicScalar::from_coeffs(ring, &[s * 37 % 16, s * 91 % 16]).unwrap();
            assert_eq!(from_teichmuller_digits(ring, &teichmuller_digits(&a)), a);
        }
    }

    #[test]
    fn inverses() {
        let ring = r(3, 2, 4);
        let a = PadicScalar::from_coeffs(ring, &[2, 5]).unwrap();
        assert_eq!(a.mul(&a.inverse().unwrap()), PadicScalar::one(ring));
        assert!(PadicScalar::from_int(ring, 3).inverse().is_err());
    }

    #[test]
    fn conway_table_is_irreducible() {
        // degree <= 3: irreducible iff no roots in F_p
        for p in [2u64, 3, 5, 7] {
            for h in [2u32, 3] {
                let c = conway(p, h).unwrap();
                for x in 0..p {
                    let mut v = 1u64;
                    for _ in 0..h {
                        v = v * x % p;
                    }
                    let mut xi = 1u64;
                    for &ci in c {
                        v = (v + ci * xi) % p;
                        xi = xi * x % p;
                    }
                    assert_ne!(v, 0, "p={p} h={h} root {x}");
                }
            }
        }
    }

    #[test]
    fn valuation_order() {
        assert!(Valuation::Infinity > Valuation::int(100));
        assert_eq!(Valuation::int(2) + Valuation::Infinity, Valuation::Infinity);
        assert_eq!(Valuation::int(1).min(Valuation::Infinity), Valuation::int(1));
    }
}
