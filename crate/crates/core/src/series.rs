//! Sparse truncated multivariate Laurent series with weighted Gauss norms.
//!
//! Variable 0 is `π`, followed by the `T` variables and then the `U` variables.
//! Exponents are stored as integer numerators over the ring's fractional
//! denominator `D`, so `π^{1/p}` is representable once `D` is a multiple of `p`.
//!
//! A stored series stands for a coset: the stored terms plus anything divisible
//! by `p^N` supported on exponents `>= lo`, plus any terms whose exponent in some
//! variable exceeds that variable's `hi` bound. Gauss norms are certified only
//! when the computed minimum is strictly below every valuation such unknown terms
//! could have.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, Zero};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::scalars::{
    fmt_q, PadicScalar, ResidueScalar, ScalarRing, ScalarVal, Valuation, Q,
};
use crate::status::Status;

/// Coefficient types a series can carry.
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display {
    fn zero_for(ring: &RingDescriptor) -> Self;
    fn from_int_for(ring: &RingDescriptor, v: i128) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn is_zero(&self) -> bool;
    /// Valuation of the coefficient; zero maps to `Infinity`.
    fn val(&self) -> Valuation;
    /// Precision beyond which coefficients are unknown, if any.
    fn precision(ring: &RingDescriptor) -> Option<u32>;
    fn frobenius(&self) -> Self;
    fn coords(&self) -> Vec<u64>;

    fn one_for(ring: &RingDescriptor) -> Self {
        Self::from_int_for(ring, 1)
    }

    fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }
}

impl Coeff for PadicScalar {
    fn zero_for(ring: &RingDescriptor) -> Self {
        PadicScalar::zero(ring.scalars)
    }
    fn from_int_for(ring: &RingDescriptor, v: i128) -> Self {
        PadicScalar::from_int(ring.scalars, v)
    }
    fn add(&self, o: &Self) -> Self {
        PadicScalar::add(self, o)
    }
    fn neg(&self) -> Self {
        PadicScalar::neg(self)
    }
    fn mul(&self, o: &Self) -> Self {
        PadicScalar::mul(self, o)
    }
    fn is_zero(&self) -> bool {
        PadicScalar::is_zero(self)
    }
    fn val(&self) -> Valuation {
        match PadicScalar::val(self) {
            ScalarVal::Exact(v) => Valuation::int(v as i64),
            ScalarVal::AtLeast(_) => Valuation::Infinity,
        }
    }
    fn precision(ring: &RingDescriptor) -> Option<u32> {
        Some(ring.scalars.n)
    }
    fn frobenius(&self) -> Self {
        PadicScalar::frobenius(self)
    }
    fn coords(&self) -> Vec<u64> {
        self.coeffs().to_vec()
    }
}

impl Coeff for ResidueScalar {
    fn zero_for(ring: &RingDescriptor) -> Self {
        ResidueScalar::zero(ring.scalars.p, ring.scalars.h)
    }
    fn from_int_for(ring: &RingDescriptor, v: i128) -> Self {
        ResidueScalar::from_int(ring.scalars.p, ring.scalars.h, v)
    }
    fn add(&self, o: &Self) -> Self {
        ResidueScalar::add(self, o)
    }
    fn neg(&self) -> Self {
        ResidueScalar::neg(self)
    }
    fn mul(&self, o: &Self) -> Self {
        ResidueScalar::mul(self, o)
    }
    fn is_zero(&self) -> bool {
        ResidueScalar::is_zero(self)
    }
    fn val(&self) -> Valuation {
        if self.is_zero() {
            Valuation::Infinity
        } else {
            Valuation::int(0)
        }
    }
    fn precision(_: &RingDescriptor) -> Option<u32> {
        None
    }
    fn frobenius(&self) -> Self {
        self.pow(self.p())
    }
    fn coords(&self) -> Vec<u64> {
        self.coeffs().to_vec()
    }
}

fn ser_q<S: Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(q))
}

/// Variables, weights and precision of a series ring.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RingDescriptor {
    pub scalars: ScalarRing,
    pub nvars_t: usize,
    pub nvars_u: usize,
    pub weights: Vec<Q>,
    pub frac_den: i64,
}

impl Serialize for RingDescriptor {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct W<'a>(&'a Q);
        impl Serialize for W<'_> {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                ser_q(self.0, s)
            }
        }
        let mut st = s.serialize_struct("RingDescriptor", 7)?;
        st.serialize_field("p", &self.scalars.p)?;
        st.serialize_field("h", &self.scalars.h)?;
        st.serialize_field("N", &self.scalars.n)?;
        st.serialize_field("nvars_T", &self.nvars_t)?;
        st.serialize_field("nvars_U", &self.nvars_u)?;
        st.serialize_field("weights", &self.weights.iter().map(W).collect::<Vec<_>>())?;
        st.serialize_field("frac_denominator", &self.frac_den)?;
        st.end()
    }
}

impl RingDescriptor {
    pub fn new(
        scalars: ScalarRing,
        nvars_t: usize,
        nvars_u: usize,
        weights: Vec<Q>,
        frac_den: i64,
    ) -> Result<Self> {
        if weights.len() != 1 + nvars_t + nvars_u {
            return Err(Error::Parameter(format!(
                "expected {} weights, got {}",
                1 + nvars_t + nvars_u,
                weights.len()
            )));
        }
        if weights.iter().any(|w| w.is_negative()) || !weights[0].is_positive() {
            return Err(Error::Parameter("weights must be nonnegative with positive π-weight".into()));
        }
        let mut d = frac_den;
        while d > 1 && d % scalars.p as i64 == 0 {
            d /= scalars.p as i64;
        }
        if frac_den < 1 || d != 1 {
            return Err(Error::Parameter(format!(
                "fractional denominator {frac_den} is not a power of p"
            )));
        }
        Ok(RingDescriptor { scalars, nvars_t, nvars_u, weights, frac_den })
    }

    /// Weight 1 on `π`, 0 on each `T`, 1 on each `U`.
    pub fn standard(scalars: ScalarRing, nvars_t: usize, nvars_u: usize) -> Self {
        let mut w = vec![Q::from_integer(1)];
        w.extend(std::iter::repeat(Q::zero()).take(nvars_t));
        w.extend(std::iter::repeat(Q::from_integer(1)).take(nvars_u));
        RingDescriptor { scalars, nvars_t, nvars_u, weights: w, frac_den: 1 }
    }

    /// Variables `Y_0 = π, Y_1, ..., Y_{h-1}` with weights `1, p, ..., p^{h-1}`.
    pub fn berger(scalars: ScalarRing) -> Self {
        let h = scalars.h as usize;
        let w = (0..h).map(|i| Q::from_integer(scalars.p.pow(i as u32) as i64)).collect();
        RingDescriptor { scalars, nvars_t: h - 1, nvars_u: 0, weights: w, frac_den: 1 }
    }

    pub fn nvars(&self) -> usize {
        1 + self.nvars_t + self.nvars_u
    }

    pub fn p(&self) -> u64 {
        self.scalars.p
    }

    pub fn precision(&self) -> u32 {
        self.scalars.n
    }

    pub fn with_frac_den(&self, d: i64) -> Result<Self> {
        RingDescriptor::new(self.scalars, self.nvars_t, self.nvars_u, self.weights.clone(), d)
    }

    pub fn with_precision(&self, n: u32) -> Result<Self> {
        Ok(RingDescriptor { scalars: self.scalars.with_precision(n)?, ..self.clone() })
    }

    /// Weighted degree `<w, e>` of an exponent vector of numerators.
    pub fn wdeg(&self, e: &[i64]) -> Q {
        let s: Q = e
            .iter()
            .zip(&self.weights)
            .map(|(&x, w)| *w * Q::from_integer(x))
            .sum();
        s / Q::from_integer(self.frac_den)
    }

    fn var_name(&self, i: usize) -> String {
        if i == 0 {
            "pi".into()
        } else if i <= self.nvars_t {
            format!("T{i}")
        } else {
            format!("U{}", i - self.nvars_t)
        }
    }
}

/// Per-variable exponent bounds, as numerators over the fractional denominator.
/// `lo` is an exact lower bound on the support; `hi = None` means no terms were
/// dropped in that variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Window {
    pub lo: Vec<i64>,
    pub hi: Vec<Option<i64>>,
}

fn min_opt(a: Option<i64>, b: Option<i64>) -> Option<i64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, None) => x,
        (None, y) => y,
    }
}

impl Window {
    pub fn exact(nvars: usize) -> Self {
        Window { lo: vec![0; nvars], hi: vec![None; nvars] }
    }

    pub fn contains_hi(&self, e: &[i64]) -> bool {
        e.iter().zip(&self.hi).all(|(&x, h)| h.map_or(true, |h| x <= h))
    }

    fn add(&self, o: &Window) -> Window {
        Window {
            lo: self.lo.iter().zip(&o.lo).map(|(a, b)| *a.min(b)).collect(),
            hi: self.hi.iter().zip(&o.hi).map(|(a, b)| min_opt(*a, *b)).collect(),
        }
    }

    fn mul(&self, o: &Window) -> Window {
        let n = self.lo.len();
        Window {
            lo: (0..n).map(|i| self.lo[i] + o.lo[i]).collect(),
            hi: (0..n)
                .map(|i| {
                    min_opt(self.hi[i].map(|h| h + o.lo[i]), o.hi[i].map(|h| h + self.lo[i]))
                })
                .collect(),
        }
    }

    /// Intersection of the known regions.
    pub fn meet(&self, o: &Window) -> Window {
        Window {
            lo: self.lo.iter().zip(&o.lo).map(|(a, b)| *a.max(b)).collect(),
            hi: self.hi.iter().zip(&o.hi).map(|(a, b)| min_opt(*a, *b)).collect(),
        }
    }

    fn to_json(&self, den: i64) -> Value {
        let q = |x: i64| fmt_q(&Q::new(x, den));
        json!({
            "lo": self.lo.iter().map(|&x| q(x)).collect::<Vec<_>>(),
            "hi": self.hi.iter().map(|h| h.map(q)).collect::<Vec<_>>(),
        })
    }
}

/// Value of a Gauss norm in valuation form with its certification flag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussValue {
    pub r: Q,
    pub value: Valuation,
    pub certified: bool,
}

impl Serialize for GaussValue {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("GaussValue", 3)?;
        st.serialize_field("r", &fmt_q(&self.r))?;
        st.serialize_field("valuation", &self.value)?;
        st.serialize_field("certified", &self.certified)?;
        st.end()
    }
}

/// Three valuations compared by the interpolation inequality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HadamardWitness {
    pub status: Status,
    pub at_r: GaussValue,
    pub at_s: GaussValue,
    pub at_mid: GaussValue,
}

/// Sparse truncated series with coefficients of type `C`.
#[derive(Clone, PartialEq)]
pub struct Series<C: Coeff> {
    ring: RingDescriptor,
    terms: BTreeMap<Vec<i64>, C>,
    window: Window,
}

/// Series over `W(F_q)/p^N`.
pub type DaggerSeries = Series<PadicScalar>;
/// Series over `F_q`.
pub type CharPSeries = Series<ResidueScalar>;

impl<C: Coeff> fmt::Debug for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl<C: Coeff> fmt::Display for Series<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}", c)?;
            for (i, &x) in e.iter().enumerate() {
                if x != 0 {
                    let q = Q::new(x, self.ring.frac_den);
                    if q == Q::from_integer(1) {
                        write!(f, "*{}", self.ring.var_name(i))?;
                    } else {
                        write!(f, "*{}^({})", self.ring.var_name(i), fmt_q(&q))?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl<C: Coeff> Series<C> {
    /// Builds a series from terms and an explicit window. Terms past `hi` are
    /// dropped; terms below `lo` are rejected.
    pub fn from_parts(
        ring: &RingDescriptor,
        terms: impl IntoIterator<Item = (Vec<i64>, C)>,
        window: Window,
    ) -> Result<Self> {
        let n = ring.nvars();
        if window.lo.len() != n || window.hi.len() != n {
            return Err(Error::Parameter("window length does not match variable count".into()));
        }
        let mut out = Series { ring: ring.clone(), terms: BTreeMap::new(), window };
        for (e, c) in terms {
            if e.len() != n {
                return Err(Error::Parameter("exponent length does not match variable count".into()));
            }
            if e.iter().zip(&out.window.lo).any(|(x, l)| x < l) {
                return Err(Error::Parameter(format!("exponent {e:?} lies below the window")));
            }
            out.push(e, c);
        }
        Ok(out)
    }

    /// Exact finite sum of terms; `lo` is `min(0, support)` in each variable.
    pub fn polynomial(
        ring: &RingDescriptor,
        terms: impl IntoIterator<Item = (Vec<i64>, C)>,
    ) -> Result<Self> {
        let terms: Vec<_> = terms.into_iter().collect();
        let mut w = Window::exact(ring.nvars());
        for (e, _) in &terms {
            if e.len() != ring.nvars() {
                return Err(Error::Parameter("exponent length does not match variable count".into()));
            }
            for (l, &x) in w.lo.iter_mut().zip(e) {
                *l = (*l).min(x);
            }
        }
        Self::from_parts(ring, terms, w)
    }

    pub fn zero(ring: &RingDescriptor) -> Self {
        Series { ring: ring.clone(), terms: BTreeMap::new(), window: Window::exact(ring.nvars()) }
    }

    pub fn constant(ring: &RingDescriptor, c: C) -> Self {
        Self::polynomial(ring, [(vec![0; ring.nvars()], c)]).expect("constant term fits")
    }

    pub fn int(ring: &RingDescriptor, v: i128) -> Self {
        Self::constant(ring, C::from_int_for(ring, v))
    }

    pub fn one(ring: &RingDescriptor) -> Self {
        Self::int(ring, 1)
    }

    /// `c * prod x_i^{e_i / D}` for numerators `e`.
    pub fn monomial(ring: &RingDescriptor, e: Vec<i64>, c: C) -> Result<Self> {
        Self::polynomial(ring, [(e, c)])
    }

    /// The `i`-th variable (0 is `π`).
    pub fn var(ring: &RingDescriptor, i: usize) -> Self {
        let mut e = vec![0; ring.nvars()];
        e[i] = ring.frac_den;
        Self::polynomial(ring, [(e, C::one_for(ring))]).expect("variable fits")
    }

    pub fn ring(&self) -> &RingDescriptor {
        &self.ring
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i64>, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[i64]) -> C {
        self.terms.get(e).cloned().unwrap_or_else(|| C::zero_for(&self.ring))
    }

    pub fn constant_coeff(&self) -> C {
        self.coeff(&vec![0; self.ring.nvars()])
    }

    /// Smallest exponent numerator of variable `i` in the support.
    pub fn support_min(&self, i: usize) -> Option<i64> {
        self.terms.keys().map(|e| e[i]).min()
    }

    pub fn support_max(&self, i: usize) -> Option<i64> {
        self.terms.keys().map(|e| e[i]).max()
    }

    fn push(&mut self, e: Vec<i64>, c: C) {
        if c.is_zero() || !self.window.contains_hi(&e) {
            return;
        }
        match self.terms.entry(e) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = o.get().add(&c);
                if s.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    fn check(&self, o: &Self) -> Result<()> {
        if self.ring != o.ring {
            return Err(Error::Parameter("series ring descriptors differ".into()));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(self.add(o))
    }

    pub fn try_mul(&self, o: &Self) -> Result<Self> {
        self.check(o)?;
        Ok(self.mul(o))
    }

    /// Sum; panics if the descriptors differ (use `try_add` on untrusted input).
    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.ring, o.ring, "series ring descriptors differ");
        let mut out = Series {
            ring: self.ring.clone(),
            terms: BTreeMap::new(),
            window: self.window.add(&o.window),
        };
        for (e, c) in self.terms.iter().chain(o.terms.iter()) {
            out.push(e.clone(), c.clone());
        }
        out
    }

    /// In-place sum, for long accumulations.
    pub fn add_assign(&mut self, o: &Self) {
        assert_eq!(self.ring, o.ring, "series ring descriptors differ");
        let window = self.window.add(&o.window);
        if window.hi != self.window.hi {
            self.terms.retain(|e, _| window.contains_hi(e));
        }
        self.window = window;
        for (e, c) in &o.terms {
            self.push(e.clone(), c.clone());
        }
    }

    pub fn neg(&self) -> Self {
        Series {
            ring: self.ring.clone(),
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c.neg())).collect(),
            window: self.window.clone(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.ring, o.ring, "series ring descriptors differ");
        let mut out = Series {
            ring: self.ring.clone(),
            terms: BTreeMap::new(),
            window: self.window.mul(&o.window),
        };
        let mut key = vec![0i64; self.ring.nvars()];
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                for i in 0..key.len() {
                    key[i] = e1[i] + e2[i];
                }
                if !out.window.contains_hi(&key) {
                    continue;
                }
                out.push(key.clone(), c1.mul(c2));
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Series {
            ring: self.ring.clone(),
            terms: BTreeMap::new(),
            window: self.window.clone(),
        };
        for (e, x) in &self.terms {
            out.push(e.clone(), x.mul(c));
        }
        out
    }

    pub fn scale_int(&self, k: i128) -> Self {
        self.scale(&C::from_int_for(&self.ring, k))
    }

    /// Multiplies by the monomial with exponent numerators `e`, shifting the window.
    pub fn shift(&self, e: &[i64]) -> Self {
        let window = Window {
            lo: self.window.lo.iter().zip(e).map(|(a, b)| a + b).collect(),
            hi: self.window.hi.iter().zip(e).map(|(a, b)| a.map(|a| a + b)).collect(),
        };
        Series {
            ring: self.ring.clone(),
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.iter().zip(e).map(|(a, b)| a + b).collect(), c.clone()))
                .collect(),
            window,
        }
    }

    pub fn pow(&self, mut k: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one(&self.ring);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Caps variable `i` at exponent numerator `cap`, dropping terms beyond it.
    pub fn with_cap(&self, i: usize, cap: i64) -> Self {
        let mut window = self.window.clone();
        window.hi[i] = min_opt(window.hi[i], Some(cap));
        let terms = self.terms.iter().filter(|(e, _)| e[i] <= cap).map(|(e, c)| (e.clone(), c.clone()));
        Series { ring: self.ring.clone(), terms: terms.collect(), window }
    }

    /// Restricts to a smaller window (terms past its `hi` are dropped).
    pub fn restrict(&self, w: &Window) -> Self {
        let window = self.window.meet(w);
        let window = Window { lo: self.window.lo.clone(), hi: window.hi };
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| window.contains_hi(e))
            .map(|(e, c)| (e.clone(), c.clone()));
        Series { ring: self.ring.clone(), terms: terms.collect(), window }
    }

    /// Lowers `lo` so that a wider class of cosets is represented.
    pub fn with_lo(&self, lo: &[i64]) -> Self {
        let mut out = self.clone();
        for (a, &b) in out.window.lo.iter_mut().zip(lo) {
            *a = (*a).min(b);
        }
        out
    }

    /// Replaces `lo` by the support minimum (0 for an empty series).
    pub fn tighten_lo(&self) -> Self {
        let mut out = self.clone();
        for i in 0..self.ring.nvars() {
            out.window.lo[i] = self.support_min(i).unwrap_or(0);
        }
        out
    }

    /// Whether the two series agree on every exponent known to both.
    pub fn agrees_with(&self, o: &Self) -> bool {
        if self.ring != o.ring {
            return false;
        }
        let w = self.window.meet(&o.window);
        let a = self.terms.iter().filter(|(e, _)| w.contains_hi(e));
        let b = o.terms.iter().filter(|(e, _)| w.contains_hi(e));
        a.eq(b)
    }

    /// Terms whose exponents lie within both windows, compared exactly.
    pub fn same_terms(&self, o: &Self) -> bool {
        self.terms == o.terms
    }

    pub fn map_coeffs(&self, f: impl Fn(&C) -> C) -> Self {
        let mut out = Series {
            ring: self.ring.clone(),
            terms: BTreeMap::new(),
            window: self.window.clone(),
        };
        for (e, c) in &self.terms {
            out.push(e.clone(), f(c));
        }
        out
    }

    /// Applies the coefficient Frobenius to every coefficient.
    pub fn frobenius_coeffs(&self) -> Self {
        self.map_coeffs(|c| c.frobenius())
    }

    /// Re-expresses the series over a multiple of the fractional denominator.
    pub fn to_frac_den(&self, d: i64) -> Result<Self> {
        if d % self.ring.frac_den != 0 {
            return Err(Error::Parameter(format!(
                "denominator {d} is not a multiple of {}",
                self.ring.frac_den
            )));
        }
        let k = d / self.ring.frac_den;
        let ring = self.ring.with_frac_den(d)?;
        let window = Window {
            lo: self.window.lo.iter().map(|x| x * k).collect(),
            hi: self.window.hi.iter().map(|h| h.map(|h| h * k + k - 1)).collect(),
        };
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.iter().map(|x| x * k).collect(), c.clone()));
        Series::from_parts(&ring, terms, window)
    }

    /// Valuation `min(val(c) + r <w, e>)` over stored terms.
    fn raw_norm(&self, r: Q) -> Valuation {
        self.terms
            .iter()
            .map(|(e, c)| c.val() + r * self.ring.wdeg(e))
            .min()
            .unwrap_or(Valuation::Infinity)
    }

    /// Least valuation any unknown part of the coset could have at radius `r`.
    pub fn dropped_bound(&self, r: Q) -> Valuation {
        let base = r * self.ring.wdeg(&self.window.lo);
        let mut bound = match C::precision(&self.ring) {
            Some(n) => Valuation::Finite(base + Q::from_integer(n as i64)),
            None => Valuation::Infinity,
        };
        let d = Q::from_integer(self.ring.frac_den);
        for i in 0..self.ring.nvars() {
            if let Some(h) = self.window.hi[i] {
                let gap = Q::from_integer(h + 1 - self.window.lo[i]) / d;
                bound = bound.min(Valuation::Finite(base + r * self.ring.weights[i] * gap));
            }
        }
        bound
    }

    /// The `r`-Gauss norm in valuation form.
    pub fn gauss_norm(&self, r: Q) -> Result<GaussValue> {
        if !r.is_positive() {
            return Err(Error::Parameter(format!("radius {} must be positive", fmt_q(&r))));
        }
        let value = self.raw_norm(r);
        let certified = !value.is_infinite() && value < self.dropped_bound(r);
        Ok(GaussValue { r, value, certified })
    }

    /// Checks `v_u(x) >= t v_r(x) + (1-t) v_s(x)` at `u = t r + (1-t) s`.
    pub fn hadamard_check(&self, r: Q, s: Q, t: Q) -> Result<HadamardWitness> {
        if !s.is_positive() || s > r {
            return Err(Error::Parameter("need 0 < s <= r".into()));
        }
        if t.is_negative() || t > Q::from_integer(1) {
            return Err(Error::Parameter("need t in [0, 1]".into()));
        }
        let one = Q::from_integer(1);
        let u = t * r + (one - t) * s;
        let (at_r, at_s, at_mid) = (self.gauss_norm(r)?, self.gauss_norm(s)?, self.gauss_norm(u)?);
        let status = if !(at_r.certified && at_s.certified && at_mid.certified) {
            Status::Inconclusive
        } else {
            let rhs = at_r.value.scale(t) + at_s.value.scale(one - t);
            Status::from_bool(at_mid.value >= rhs)
        };
        Ok(HadamardWitness { status, at_r, at_s, at_mid })
    }

    /// Inverts `1 + y` by the geometric series, given `v_u(y) > 0` certified at
    /// both `u = s` and `u = r`.
    pub fn invert_one_plus_small(&self, r: Q, s: Q) -> Result<Self> {
        let y = self.sub(&Self::one(&self.ring));
        for u in [s, r] {
            let g = y.gauss_norm(u)?;
            if y.is_zero() {
                continue;
            }
            if !g.certified || g.value <= Valuation::int(0) {
                return Err(Error::NotInvertible(format!(
                    "|x - 1| at radius {} has valuation {} (certified: {})",
                    fmt_q(&u),
                    g.value,
                    g.certified
                )));
            }
        }
        let minus_y = y.neg();
        let mut term = Self::one(&self.ring);
        let mut acc = Self::one(&self.ring);
        for _ in 0..MAX_GEOMETRIC_TERMS {
            term = term.mul(&minus_y);
            if term.is_zero() {
                return Ok(acc);
            }
            acc = acc.add(&term);
        }
        Err(Error::InsufficientWindow(
            "geometric series did not terminate; cap the window of the input".into(),
        ))
    }

    pub fn to_json(&self) -> Value {
        let d = self.ring.frac_den;
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|(e, c)| {
                json!([
                    e.iter().map(|&x| fmt_q(&Q::new(x, d))).collect::<Vec<_>>(),
                    c.coords()
                ])
            })
            .collect();
        json!({
            "ring": serde_json::to_value(&self.ring).expect("descriptor serializes"),
            "terms": terms,
            "window": self.window.to_json(d),
        })
    }
}

/// Iteration cap for geometric series.
pub const MAX_GEOMETRIC_TERMS: usize = 4096;

impl DaggerSeries {
    /// Coefficient-wise reduction modulo `p`.
    pub fn reduce_mod_p(&self) -> CharPSeries {
        let mut out = CharPSeries {
            ring: self.ring.clone(),
            terms: BTreeMap::new(),
            window: self.window.clone(),
        };
        for (e, c) in &self.terms {
            out.push(e.clone(), c.residue());
        }
        out
    }

    /// Whether every coefficient is a multiple of `p^k`.
    pub fn divisible_by_p_pow(&self, k: u32) -> bool {
        self.terms.values().all(|c| match c.val() {
            ScalarVal::Exact(v) => v >= k,
            ScalarVal::AtLeast(_) => true,
        })
    }

    /// Exact division by `p^k`; the result is known modulo `p^{N-k}` and is
    /// returned at precision `N - k`.
    pub fn div_p_pow(&self, k: u32) -> Result<Self> {
        let n = self.ring.precision();
        if k >= n {
            return Err(Error::Precision(format!("cannot divide by p^{k} at precision {n}")));
        }
        let ring = self.ring.with_precision(n - k)?;
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            terms.push((e.clone(), c.div_p_pow(k)?.with_precision(n - k)?));
        }
        Series::from_parts(&ring, terms, self.window.clone())
    }

    /// Changes precision: lowering reduces, raising pads with zero digits.
    pub fn with_precision(&self, n: u32) -> Result<Self> {
        let ring = self.ring.with_precision(n)?;
        let mut terms = Vec::new();
        for (e, c) in &self.terms {
            terms.push((e.clone(), c.with_precision(n)?));
        }
        Series::from_parts(&ring, terms, self.window.clone())
    }

    /// Parses expressions such as `"pi^2*T1 + 3*pi^-1 - (1+pi)^3"`.
    ///
    /// Atoms are integers, `p`, `g` (the residue-field generator), `pi`, `Ti`,
    /// `Ui` and `Yi` (`Y0 = pi`, `Yi = Ti`). Monomial atoms accept negative or
    /// parenthesised rational exponents.
    pub fn parse(ring: &RingDescriptor, s: &str) -> Result<Self> {
        let mut parser = Parser { ring, src: s.as_bytes(), pos: 0 };
        let v = parser.expr()?;
        parser.skip_ws();
        if parser.pos != parser.src.len() {
            return Err(parser.err("trailing input"));
        }
        Ok(v)
    }
}

impl CharPSeries {
    /// `x^{p^k}`: exponents scale by `p^k`, coefficients by the Frobenius.
    pub fn frobenius_power(&self, k: u32) -> Self {
        let m = (self.ring.p() as i64).pow(k);
        let window = Window {
            lo: self.window.lo.iter().map(|x| x * m).collect(),
            hi: self.window.hi.iter().map(|h| h.map(|h| h * m + m - 1)).collect(),
        };
        let terms = self
            .terms
            .iter()
            .map(|(e, c)| (e.iter().map(|x| x * m).collect(), c.pow(m as u64)))
            .collect();
        CharPSeries { ring: self.ring.clone(), terms, window }
    }

    /// `x^k` through the base-`p` digits of `k`: `x^k = Π (x^{d_i})^{p^i}`.
    pub fn pow_frobenius(&self, k: u64) -> Self {
        let p = self.ring.p();
        let mut acc = Self::one(&self.ring);
        let (mut k, mut i) = (k, 0u32);
        while k > 0 {
            let d = (k % p) as u32;
            if d > 0 {
                acc = acc.mul(&self.pow(d).frobenius_power(i));
            }
            k /= p;
            i += 1;
        }
        acc
    }

    /// `x^{1/p}`; needs every exponent numerator divisible by `p`.
    pub fn pth_root(&self) -> Result<Self> {
        let p = self.ring.p() as i64;
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            if e.iter().any(|x| x % p != 0) {
                return Err(Error::Precision(format!(
                    "p-th root needs more exponent denominator headroom than {}",
                    self.ring.frac_den
                )));
            }
            terms.insert(e.iter().map(|x| x / p).collect(), c.pth_root());
        }
        let window = Window {
            lo: self.window.lo.iter().map(|x| x.div_euclid(p) + i64::from(x.rem_euclid(p) != 0)).collect(),
            hi: self.window.hi.iter().map(|h| h.map(|h| h.div_euclid(p))).collect(),
        };
        Ok(CharPSeries { ring: self.ring.clone(), terms, window })
    }

    /// Smallest weighted degree `<w, e>` in the support.
    pub fn min_wdeg(&self) -> Option<Q> {
        self.terms.keys().map(|e| self.ring.wdeg(e)).min()
    }
}

struct Parser<'a> {
    ring: &'a RingDescriptor,
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Usage(format!(
            "cannot parse series at offset {}: {msg}",
            self.pos
        ))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<DaggerSeries> {
        let mut acc = match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                self.term()?.neg()
            }
            Some(b'+') => {
                self.pos += 1;
                self.term()?
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<DaggerSeries> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = acc.mul(&self.factor()?);
        }
        Ok(acc)
    }

    fn integer(&mut self) -> Result<i64> {
        self.skip_ws();
        let start = self.pos;
        if self.pos < self.src.len() && self.src[self.pos] == b'-' {
            self.pos += 1;
        }
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| self.err("expected integer"))
    }

    fn exponent(&mut self) -> Result<Q> {
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let a = self.integer()?;
            let q = if self.peek() == Some(b'/') {
                self.pos += 1;
                let b = self.integer()?;
                if b == 0 {
                    return Err(self.err("zero denominator"));
                }
                Q::new(a, b)
            } else {
                Q::from_integer(a)
            };
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
            Ok(q)
        } else {
            Ok(Q::from_integer(self.integer()?))
        }
    }

    fn factor(&mut self) -> Result<DaggerSeries> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let k = self.exponent()?;
        if k.is_integer() && !k.is_negative() {
            return Ok(base.pow(k.to_integer() as u32));
        }
        // Negative or fractional powers only for unit-coefficient monomials.
        let mut it = base.terms();
        match (it.next(), it.next()) {
            (Some((e, c)), None) if *c == PadicScalar::one(self.ring.scalars) => {
                let mut out = Vec::with_capacity(e.len());
                for &x in e {
                    let y = k * Q::from_integer(x);
                    if !y.is_integer() {
                        return Err(self.err("exponent needs a larger fractional denominator"));
                    }
                    out.push(y.to_integer());
                }
                DaggerSeries::monomial(self.ring, out, c.clone())
            }
            _ => Err(self.err("negative or fractional powers need a monomial base")),
        }
    }

    fn atom(&mut self) -> Result<DaggerSeries> {
        let ring = self.ring;
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let v = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() => {
                let v = self.integer()?;
                Ok(DaggerSeries::int(ring, v as i128))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let ident = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                let idx = |s: &str| s.parse::<usize>().ok();
                match ident {
                    "p" => Ok(DaggerSeries::int(ring, ring.p() as i128)),
                    "g" => Ok(DaggerSeries::constant(ring, PadicScalar::generator(ring.scalars))),
                    "pi" => Ok(DaggerSeries::var(ring, 0)),
                    _ => {
                        let (head, tail) = ident.split_at(1);
                        let i = idx(tail).ok_or_else(|| self.err("unknown identifier"))?;
                        let var = match head {
                            "T" if (1..=ring.nvars_t).contains(&i) => i,
                            "U" if (1..=ring.nvars_u).contains(&i) => ring.nvars_t + i,
                            "Y" if i <= ring.nvars_t => i,
                            _ => return Err(self.err(&format!("unknown variable {ident}"))),
                        };
                        Ok(DaggerSeries::var(ring, var))
                    }
                }
            }
            _ => Err(self.err("expected atom")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a, b)
    }

    fn ring(p: u64, n: u32, t: usize) -> RingDescriptor {
        RingDescriptor::standard(ScalarRing::new(p, 1, n).unwrap(), t, 0)
    }

    #[test]
    fn norm_examples() {
        let r = ring(3, 4, 1);
        let x = DaggerSeries::parse(&r, "pi^2*T1").unwrap();
        let g = x.gauss_norm(q(1, 1)).unwrap();
        assert_eq!(g.value, Valuation::int(2));
        assert!(g.certified);
        let one = DaggerSeries::one(&r);
        for k in 1..5 {
            assert_eq!(one.gauss_norm(q(1, k)).unwrap().value, Valuation::int(0));
        }
        let x = DaggerSeries::parse(&r, "pi + p").unwrap();
        assert_eq!(x.gauss_norm(q(1, 2)).unwrap().value, Valuation::Finite(q(1, 2)));
        let z = DaggerSeries::zero(&r).gauss_norm(q(1, 1)).unwrap();
        assert_eq!(z.value, Valuation::Infinity);
        assert!(!z.certified);
        assert!(DaggerSeries::one(&r).gauss_norm(q(0, 1)).is_err());
    }

    #[test]
    fn arith_examples() {
        let r = ring(2, 4, 0);
        let pi = DaggerSeries::var(&r, 0);
        assert_eq!(pi.mul(&pi), DaggerSeries::parse(&r, "pi^2").unwrap());
        assert_eq!(pi.add(&DaggerSeries::zero(&r)), pi);
        let a = DaggerSeries::parse(&r, "1 + pi").unwrap();
        let expect = DaggerSeries::polynomial(
            &r,
            [(vec![0], PadicScalar::from_int(r.scalars, 1)), (vec![1], PadicScalar::from_int(r.scalars, 2)), (vec![2], PadicScalar::from_int(r.scalars, 1))],
        )
        .unwrap();
        assert_eq!(a.mul(&a), expect);
        let other = RingDescriptor::standard(ScalarRing::new(2, 1, 3).unwrap(), 0, 0);
        assert!(pi.try_add(&DaggerSeries::var(&other, 0)).is_err());
    }

    #[test]
    fn window_truncation_and_certification() {
        let r = ring(3, 3, 0);
        let x = DaggerSeries::parse(&r, "1 + pi").unwrap().with_cap(0, 4);
        let y = x.pow(10);
        assert!(y.support_max(0).unwrap() <= 4);
        // dropped terms start at pi^5, so values below 5r are certified
        let g = y.gauss_norm(q(1, 1)).unwrap();
        assert_eq!(g.value, Valuation::int(0));
        assert!(g.certified);
        let w = DaggerSeries::parse(&r, "pi^4").unwrap().with_cap(0, 4);
        let g = w.gauss_norm(q(1, 2)).unwrap();
        assert!(g.certified);
        assert!(!w.gauss_norm(q(3, 4)).unwrap().certified);
        // p^N swamps the value: pi^4 with r = 1 has value 4 > N = 3
        let g = DaggerSeries::parse(&r, "pi^4").unwrap().gauss_norm(q(1, 1)).unwrap();
        assert!(!g.certified);
    }

    #[test]
    fn hadamard_examples() {
        let r = ring(3, 3, 0);
        let x = DaggerSeries::parse(&r, "pi^3").unwrap();
        let w = x.hadamard_check(q(1, 2), q(1, 5), q(1, 3)).unwrap();
        assert_eq!(w.status, Status::Pass);
        assert_eq!(w.at_mid.value, w.at_r.value.scale(q(1, 3)) + w.at_s.value.scale(q(2, 3)));
        let x = DaggerSeries::parse(&r, "pi + p*pi^-1").unwrap();
        let w = x.hadamard_check(q(1, 1), q(1, 4), q(1, 2)).unwrap();
        assert_eq!(w.status, Status::Pass);
        assert_eq!(w.at_r.value, Valuation::int(0));
        assert_eq!(w.at_s.value, Valuation::Finite(q(1, 4)));
        assert_eq!(w.at_mid.value, Valuation::Finite(q(3, 8)));
        let w = x.hadamard_check(q(1, 1), q(1, 4), q(1, 1)).unwrap();
        assert_eq!(w.at_mid, w.at_r);
    }

    #[test]
    fn inversion_examples() {
        let r = ring(3, 3, 0);
        let one = DaggerSeries::one(&r);
        assert_eq!(one.invert_one_plus_small(q(1, 1), q(1, 2)).unwrap(), one);
        let x = DaggerSeries::parse(&r, "1 + p").unwrap();
        let z = x.invert_one_plus_small(q(1, 1), q(1, 2)).unwrap();
        assert_eq!(z, DaggerSeries::parse(&r, "1 - 3 + 9").unwrap());
        // at r = 1 the perturbation has norm exactly 1, outside the criterion
        let x = DaggerSeries::parse(&r, "1 + p*pi^-1").unwrap();
        assert!(x.invert_one_plus_small(q(1, 1), q(1, 2)).is_err());
        let z = x.invert_one_plus_small(q(3, 4), q(1, 2)).unwrap();
        assert!(z.same_terms(&DaggerSeries::parse(&r, "1 - p*pi^-1 + p^2*pi^-2").unwrap()));
        assert!(x.mul(&z).agrees_with(&one));
        assert!(matches!(
            DaggerSeries::parse(&r, "1 + pi^-1").unwrap().invert_one_plus_small(q(1, 1), q(1, 2)),
            Err(Error::NotInvertible(_))
        ));
    }

    #[test]
    fn reduction_examples() {
        let r = RingDescriptor::standard(ScalarRing::new(3, 1, 3).unwrap(), 1, 0);
        assert!(DaggerSeries::parse(&r, "p").unwrap().reduce_mod_p().is_zero());
        let x = DaggerSeries::parse(&r, "pi + p*T1").unwrap().reduce_mod_p();
        assert_eq!(x, DaggerSeries::var(&r, 0).reduce_mod_p());
        let x = DaggerSeries::parse(&r, "(1+pi)^3 - 1").unwrap().reduce_mod_p();
        assert_eq!(x, DaggerSeries::parse(&r, "pi^3").unwrap().reduce_mod_p());
    }

    #[test]
    fn fractional_roots() {
        let r = RingDescriptor::standard(ScalarRing::new(2, 2, 2).unwrap(), 0, 0).with_frac_den(4).unwrap();
        let x = DaggerSeries::parse(&r, "g*pi + pi^(1/2)").unwrap().reduce_mod_p();
        let y = x.pth_root().unwrap();
        assert_eq!(y.frobenius_power(1), x);
        assert!(y.pth_root().is_err());
    }

    #[test]
    fn digitwise_power() {
        let r = RingDescriptor::standard(ScalarRing::new(3, 2, 2).unwrap(), 1, 0);
        let x = DaggerSeries::parse(&r, "g*pi + T1^-1 + 2*pi^2*T1").unwrap().reduce_mod_p();
        for k in [0u32, 1, 2, 5, 9, 14, 27] {
            assert!(x.pow_frobenius(k as u64).same_terms(&x.pow(k)), "k = {k}");
        }
    }

    #[test]
    fn in_place_sum() {
        let r = ring(3, 3, 1);
        let a = DaggerSeries::parse(&r, "1 + pi + T1^2").unwrap();
        let b = DaggerSeries::parse(&r, "2 - pi + pi^3").unwrap().with_cap(0, 2);
        let mut acc = a.clone();
        acc.add_assign(&b);
        assert_eq!(acc, a.add(&b));
        assert_eq!(acc.window().hi[0], Some(2));
    }

    #[test]
    fn json_is_canonical() {
        let r = ring(3, 2, 1);
        let a = DaggerSeries::parse(&r, "T1 + pi^-1 + 2").unwrap();
        let b = DaggerSeries::parse(&r, "2 + pi^-1 + T1").unwrap();
        assert_eq!(a.to_json().to_string(), b.to_json().to_string());
        assert!(DaggerSeries::parse(&r, "T2").is_err());
        assert!(DaggerSeries::parse(&r, "pi +").is_err());
    }
}
