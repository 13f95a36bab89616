//! Finite-length `p`-typical Witt vectors over perfect char-`p` series, and the
//! Teichmüller embedding of integral series.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num::{BigInt, Integer, One, ToPrimitive, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::actions::ActionSpec;
use crate::error::{Error, Result};
use crate::scalars::{fmt_q, teichmuller_digits, ResidueScalar, Valuation, Q};
use crate::series::{CharPSeries, DaggerSeries, GaussValue, RingDescriptor};
use crate::status::Status;

/// Longest Witt vectors supported by default.
pub const MAX_WITT_LENGTH: u32 = 5;
/// Symbolic size bound for a single universal polynomial.
pub const MAX_POLY_TERMS: usize = 400_000;

/// Integer polynomial in `X_0..X_{n-1}, Y_0..Y_{n-1}` (indices `i` and `n + i`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IntPoly {
    pub terms: BTreeMap<Vec<u32>, BigInt>,
}

impl IntPoly {
    fn var(nv: usize, i: usize, k: u32) -> Self {
        let mut e = vec![0; nv];
        e[i] = k;
        IntPoly { terms: BTreeMap::from([(e, BigInt::one())]) }
    }

    fn add_scaled(&mut self, o: &IntPoly, k: &BigInt) {
        for (e, c) in &o.terms {
            let entry = self.terms.entry(e.clone()).or_insert_with(BigInt::zero);
            *entry += c * k;
            if entry.is_zero() {
                self.terms.remove(e);
            }
        }
    }

    fn mul(&self, o: &IntPoly) -> Result<IntPoly> {
        let mut out: HashMap<Vec<u32>, BigInt> = HashMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                *out.entry(e).or_insert_with(BigInt::zero) += c1 * c2;
            }
            if out.len() > MAX_POLY_TERMS {
                return Err(Error::Parameter("Witt polynomial exceeds the symbolic size bound".into()));
            }
        }
        Ok(IntPoly { terms: out.into_iter().filter(|(_, c)| !c.is_zero()).collect() })
    }

    fn pow_p(&self, p: u64) -> Result<IntPoly> {
        let mut acc = self.clone();
        for _ in 1..p {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    fn div_exact(&self, d: &BigInt) -> Option<IntPoly> {
        let mut terms = BTreeMap::new();
        for (e, c) in &self.terms {
            let (q, r) = c.div_rem(d);
            if !r.is_zero() {
                return None;
            }
            terms.insert(e.clone(), q);
        }
        Some(IntPoly { terms })
    }

    pub fn coeff(&self, e: &[u32]) -> BigInt {
        self.terms.get(e).cloned().unwrap_or_default()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Evaluates at integer points.
    pub fn eval(&self, x: &[BigInt]) -> BigInt {
        self.terms
            .iter()
            .map(|(e, c)| e.iter().zip(x).fold(c.clone(), |acc, (k, v)| acc * num::pow(v.clone(), *k as usize)))
            .sum()
    }
}

/// Universal sum and product polynomials `S_n`, `P_n` for `n < len`.
#[derive(Debug)]
pub struct WittPolyCache {
    pub p: u64,
    pub len: u32,
    pub sum: Vec<IntPoly>,
    pub prod: Vec<IntPoly>,
    sum_mod_p: Vec<Vec<(Vec<u32>, u64)>>,
    prod_mod_p: Vec<Vec<(Vec<u32>, u64)>>,
}

/// `w_m(Z) = Σ_{i ≤ m} p^i Z_i^{p^{m-i}}` with `Z_i` at index `offset + i`.
fn ghost(p: u64, nv: usize, offset: usize, m: u32) -> IntPoly {
    let mut out = IntPoly::default();
    for i in 0..=m {
        let k = p.pow(m - i) as u32;
        out.add_scaled(&IntPoly::var(nv, offset + i as usize, k), &BigInt::from(p).pow(i));
    }
    out
}

/// Solves `p^m Z_m = target_m − Σ_{i<m} p^i Z_i^{p^{m-i}}` for each `m`.
fn equalize(p: u64, len: u32, target: impl Fn(u32) -> Result<IntPoly>) -> Result<Vec<IntPoly>> {
    let mut polys: Vec<IntPoly> = Vec::new();
    // powers[i] holds Z_i^{p^k} for the latest k
    let mut powers: Vec<IntPoly> = Vec::new();
    for m in 0..len {
        let mut acc = target(m)?;
        for (i, pw) in powers.iter_mut().enumerate() {
            *pw = pw.pow_p(p)?;
            acc.add_scaled(pw, &-BigInt::from(p).pow(i as u32));
        }
        let d = BigInt::from(p).pow(m);
        let z = acc
            .div_exact(&d)
            .ok_or_else(|| Error::Integrity(format!("Witt polynomial {m} is not integral")))?;
        powers.push(z.clone());
        polys.push(z);
    }
    Ok(polys)
}

fn reduce_mod_p(poly: &IntPoly, p: u64) -> Vec<(Vec<u32>, u64)> {
    let pb = BigInt::from(p);
    poly.terms
        .iter()
        .filter_map(|(e, c)| {
            let r = c.mod_floor(&pb).to_u64().expect("residue fits");
            (r != 0).then(|| (e.clone(), r))
        })
        .collect()
}

impl WittPolyCache {
    pub fn build(p: u64, len: u32) -> Result<Self> {
        if len == 0 || len > MAX_WITT_LENGTH {
            return Err(Error::Parameter(format!("Witt length must lie in 1..={MAX_WITT_LENGTH}")));
        }
        let nv = 2 * len as usize;
        let off = len as usize;
        let sum = equalize(p, len, |m| {
            let mut t = ghost(p, nv, 0, m);
            t.add_scaled(&ghost(p, nv, off, m), &BigInt::one());
            Ok(t)
        })?;
        let prod = equalize(p, len, |m| ghost(p, nv, 0, m).mul(&ghost(p, nv, off, m)))?;
        let sum_mod_p = sum.iter().map(|s| reduce_mod_p(s, p)).collect();
        let prod_mod_p = prod.iter().map(|s| reduce_mod_p(s, p)).collect();
        Ok(WittPolyCache { p, len, sum, prod, sum_mod_p, prod_mod_p })
    }

    /// Recomputes both ghost identities symbolically.
    pub fn verify(&self) -> Result<bool> {
        let nv = 2 * self.len as usize;
        let off = self.len as usize;
        for m in 0..self.len {
            let mut ws = IntPoly::default();
            let mut wp = IntPoly::default();
            for i in 0..=m {
                let scale = BigInt::from(self.p).pow(i);
                let mut s = self.sum[i as usize].clone();
                let mut pr = self.prod[i as usize].clone();
                for _ in 0..(m - i) {
                    s = s.pow_p(self.p)?;
                    pr = pr.pow_p(self.p)?;
                }
                ws.add_scaled(&s, &scale);
                wp.add_scaled(&pr, &scale);
            }
            let mut ts = ghost(self.p, nv, 0, m);
            ts.add_scaled(&ghost(self.p, nv, off, m), &BigInt::one());
            let tp = ghost(self.p, nv, 0, m).mul(&ghost(self.p, nv, off, m))?;
            if ws != ts || wp != tp {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

static CACHE: OnceLock<Mutex<HashMap<(u64, u32), Arc<WittPolyCache>>>> = OnceLock::new();

/// Universal polynomials for length `len`, built once per `(p, len)`.
pub fn witt_polynomials(p: u64, len: u32) -> Result<Arc<WittPolyCache>> {
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(c) = cache.lock().expect("cache lock").get(&(p, len)) {
        return Ok(c.clone());
    }
    let built = Arc::new(WittPolyCache::build(p, len)?);
    cache.lock().expect("cache lock").insert((p, len), built.clone());
    Ok(built)
}

/// A Witt vector of length `N` with coordinates in a perfect char-`p` ring.
#[derive(Clone, Debug, PartialEq)]
pub struct WittVector {
    coords: Vec<CharPSeries>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WittOp {
    Add,
    Mul,
}

impl WittVector {
    pub fn new(coords: Vec<CharPSeries>) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_WITT_LENGTH as usize {
            return Err(Error::Parameter(format!("Witt length must lie in 1..={MAX_WITT_LENGTH}")));
        }
        if coords.iter().any(|c| c.ring() != coords[0].ring()) {
            return Err(Error::Parameter("Witt coordinates live over different rings".into()));
        }
        Ok(WittVector { coords })
    }

    pub fn zero(ring: &RingDescriptor, len: u32) -> Result<Self> {
        Self::new(vec![CharPSeries::zero(ring); len as usize])
    }

    pub fn one(ring: &RingDescriptor, len: u32) -> Result<Self> {
        teichmuller(&CharPSeries::one(ring), len)
    }

    pub fn len(&self) -> u32 {
        self.coords.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[CharPSeries] {
        &self.coords
    }

    pub fn ring(&self) -> &RingDescriptor {
        self.coords[0].ring()
    }

    /// `p·x = V F x = (0, x_0^p, x_1^p, ...)`.
    pub fn times_p(&self) -> Self {
        let mut coords = vec![CharPSeries::zero(self.ring())];
        coords.extend(self.coords.iter().take(self.coords.len() - 1).map(|c| c.frobenius_power(1)));
        WittVector { coords }
    }

    /// Teichmüller digits `x_n^{p^{-n}}`.
    pub fn digits(&self) -> Result<Vec<CharPSeries>> {
        self.coords
            .iter()
            .enumerate()
            .map(|(n, c)| (0..n).try_fold(c.clone(), |acc, _| acc.pth_root()))
            .collect()
    }

    /// Coordinate-wise agreement within each pair of windows.
    pub fn agrees_with(&self, o: &Self) -> bool {
        self.coords.len() == o.coords.len() && self.coords.iter().zip(&o.coords).all(|(a, b)| a.agrees_with(b))
    }

    pub fn to_json(&self) -> Value {
        json!({ "length": self.len(), "coordinates": self.coords.iter().map(|c| c.to_json()).collect::<Vec<_>>() })
    }
}

fn eval_mod_p(poly: &[(Vec<u32>, u64)], vars: &[&CharPSeries], ring: &RingDescriptor) -> CharPSeries {
    let h = ring.scalars.h;
    let p = ring.p();
    let exact_zero = |s: &CharPSeries| s.is_zero() && s.window().hi.iter().all(Option::is_none);
    let mut powers: HashMap<(usize, u32), CharPSeries> = HashMap::new();
    let mut acc = CharPSeries::zero(ring);
    'mono: for (e, c) in poly {
        let mut term = CharPSeries::constant(ring, ResidueScalar::from_int(p, h, *c as i128));
        for (i, &k) in e.iter().enumerate() {
            if k == 0 {
                continue;
            }
            if exact_zero(vars[i]) {
                continue 'mono;
            }
            let pw = powers.entry((i, k)).or_insert_with(|| vars[i].pow_frobenius(k as u64));
            term = term.mul(pw);
        }
        acc.add_assign(&term);
    }
    acc
}

/// Coordinate-wise evaluation of the cached universal polynomials.
pub fn witt_arith(a: &WittVector, b: &WittVector, op: WittOp) -> Result<WittVector> {
    if a.ring() != b.ring() || a.len() != b.len() {
        return Err(Error::Parameter("Witt vectors have different descriptors".into()));
    }
    let ring = a.ring().clone();
    let cache = witt_polynomials(ring.p(), a.len())?;
    let vars: Vec<&CharPSeries> = a.coords.iter().chain(&b.coords).collect();
    let polys = match op {
        WittOp::Add => &cache.sum_mod_p,
        WittOp::Mul => &cache.prod_mod_p,
    };
    let coords = polys.iter().map(|poly| eval_mod_p(poly, &vars, &ring)).collect();
    Ok(WittVector { coords })
}

/// `[x̄] = (x̄, 0, ..., 0)`.
pub fn teichmuller(x: &CharPSeries, len: u32) -> Result<WittVector> {
    let mut coords = vec![x.clone()];
    coords.extend((1..len).map(|_| CharPSeries::zero(x.ring())));
    WittVector::new(coords)
}

/// `v_r(x) = min_n (n + r·v(x̄_n))` with certification against dropped
/// coordinate terms and the unknown coordinates past the length.
pub fn witt_norm(x: &WittVector, r: Q) -> Result<GaussValue> {
    if r <= Q::zero() {
        return Err(Error::Parameter(format!("radius {} must be positive", fmt_q(&r))));
    }
    let ring = x.ring();
    let p = Q::from_integer(ring.p() as i64);
    let mut value = Valuation::Infinity;
    let mut lo_deg = Q::zero();
    let mut bound = Valuation::Infinity;
    for (n, c) in x.coords.iter().enumerate() {
        let scale = p.pow(n as i32);
        let g = c.gauss_norm(r / scale)?;
        let shift = Q::from_integer(n as i64);
        value = value.min(g.value + shift);
        bound = bound.min(c.dropped_bound(r / scale) + shift);
        lo_deg = lo_deg.min(ring.wdeg(&c.window().lo) / scale);
    }
    bound = bound.min(Valuation::Finite(Q::from_integer(x.len() as i64) + r * lo_deg));
    let certified = !value.is_infinite() && value < bound;
    Ok(GaussValue { r, value, certified })
}

/// Coordinate-wise `q`-th power, `q` a power of `p`.
pub fn witt_frobenius(x: &WittVector, q: u64) -> Result<WittVector> {
    let p = x.ring().p();
    let mut k = 0;
    let mut m = 1;
    while m < q {
        m *= p;
        k += 1;
    }
    if m != q {
        return Err(Error::Parameter(format!("{q} is not a power of {p}")));
    }
    Ok(WittVector { coords: x.coords.iter().map(|c| c.frobenius_power(k)).collect() })
}

/// Descriptor of the perfect coordinate ring for series over `ring`: the
/// exponent denominator grows by `p^{N-1}` so every digit has its roots.
pub fn perfect_descriptor(ring: &RingDescriptor) -> Result<RingDescriptor> {
    let n = ring.precision();
    ring.with_frac_den(ring.frac_den * (ring.p() as i64).pow(n - 1))
}

/// Sends `Σ c_m m` to `Σ c_m [m̄]`, expanding each `c_m = Σ p^n [d_n]` so the
/// term contributes the Witt vector with `(d_n m̄)^{p^n}` in coordinate `n`.
pub fn embed_robba(x: &DaggerSeries) -> Result<WittVector> {
    let ring = x.ring();
    let len = ring.precision();
    if len > MAX_WITT_LENGTH {
        return Err(Error::Parameter(format!("precision {len} exceeds the Witt length bound")));
    }
    let target = perfect_descriptor(ring)?;
    let p = ring.p() as i64;
    let scale = target.frac_den / ring.frac_den;
    let mut acc = WittVector::zero(&target, len)?;
    for (e, c) in x.terms() {
        let digits = teichmuller_digits(c);
        let mut coords = Vec::with_capacity(len as usize);
        for (n, d) in digits.iter().enumerate() {
            let k = p.pow(n as u32);
            let exps: Vec<i64> = e.iter().map(|v| v * scale * k).collect();
            coords.push(CharPSeries::monomial(&target, exps, d.pow(k as u64))?);
        }
        acc = witt_arith(&acc, &WittVector { coords }, WittOp::Add)?;
    }
    // unknown terms of x reach coordinate k at exponents ≥ hi + 1 + (p^k − 1)·lo
    let w = x.window();
    let coords = acc
        .coords
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let m = p.pow(k as u32);
            let lo: Vec<i64> = w.lo.iter().map(|l| l * scale * m).collect();
            let hi: Vec<Option<i64>> =
                w.hi.iter().zip(&w.lo).map(|(h, l)| h.map(|h| (h + (m - 1) * l) * scale + scale - 1)).collect();
            let mut out = c.with_lo(&lo);
            for (i, h) in hi.iter().enumerate() {
                if let Some(h) = h {
                    out = out.with_cap(i, *h);
                }
            }
            out
        })
        .collect();
    Ok(WittVector { coords })
}

/// Both sides of the isometry comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IsometryReport {
    pub series: GaussValue,
    pub witt: GaussValue,
    pub status: Status,
}

/// Compares `v_r(x)` with `v_r(embed_robba(x))`.
pub fn isometry_check(x: &DaggerSeries, r: Q) -> Result<IsometryReport> {
    let series = x.gauss_norm(r)?;
    let witt = witt_norm(&embed_robba(x)?, r)?;
    let status = if x.is_zero() {
        Status::Pass
    } else if series.certified && witt.certified {
        Status::from_bool(series.value == witt.value)
    } else {
        Status::Inconclusive
    };
    Ok(IsometryReport { series, witt, status })
}

/// `φ_W ∘ embed` against `embed ∘ φ`: agreement of coordinate 0, and of every
/// coordinate.
pub fn phi_equivariance(spec: &ActionSpec, x: &DaggerSeries) -> Result<(bool, bool)> {
    let lhs = witt_frobenius(&embed_robba(x)?, spec.q())?;
    let rhs = embed_robba(&spec.apply_phi(x)?)?;
    Ok((lhs.coords[0].agrees_with(&rhs.coords[0]), lhs.agrees_with(&rhs)))
}

impl Serialize for WittVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::ActionKind;
    use crate::scalars::ScalarRing;
    use num::rational::BigRational;

    fn same(a: &WittVector, b: &WittVector) -> bool {
        a.coords.len() == b.coords.len() && a.coords.iter().zip(&b.coords).all(|(x, y)| x.same_terms(y))
    }

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    /// Independent oracle: `S_1` over the rationals by ghost equalization.
    fn s1_oracle(p: u64) -> BTreeMap<(u32, u32), BigRational> {
        let mut out = BTreeMap::new();
        for i in 1..p as u32 {
            let c = BigRational::new(num::integer::binomial(big(p as i64), big(i as i64)), big(p as i64));
            out.insert((i, p as u32 - i), -c);
        }
        out
    }

    #[test]
    fn universal_polynomials() {
        for p in [2u64, 3] {
            let cache = witt_polynomials(p, 3).unwrap();
            assert!(cache.verify().unwrap());
            // S_0 = X_0 + Y_0, P_0 = X_0 Y_0
            assert_eq!(cache.sum[0].num_terms(), 2);
            assert_eq!(cache.sum[0].coeff(&[1, 0, 0, 0, 0, 0]), big(1));
            assert_eq!(cache.prod[0].num_terms(), 1);
            assert_eq!(cache.prod[0].coeff(&[1, 0, 0, 1, 0, 0]), big(1));
            let s1 = &cache.sum[1];
            assert_eq!(s1.coeff(&[0, 1, 0, 0, 0, 0]), big(1));
            assert_eq!(s1.coeff(&[0, 0, 0, 0, 1, 0]), big(1));
            for ((i, j), c) in s1_oracle(p) {
                assert!(c.is_integer());
                assert_eq!(s1.coeff(&[i, 0, 0, j, 0, 0]), c.to_integer());
            }
            assert_eq!(s1.num_terms(), 2 + (p as usize - 1));
        }
    }

    /// Ghost components at random integer points.
    #[test]
    fn ghost_identity_at_points() {
        let p = 3u64;
        let cache = witt_polynomials(p, 3).unwrap();
        let pts = [[2i64, -1, 5, 7, 0, 3], [1, 1, 1, 1, 1, 1], [-4, 2, 9, 3, -3, 11]];
        for pt in pts {
            let x: Vec<BigInt> = pt.iter().map(|v| big(*v)).collect();
            let s: Vec<BigInt> = cache.sum.iter().map(|f| f.eval(&x)).collect();
            let pr: Vec<BigInt> = cache.prod.iter().map(|f| f.eval(&x)).collect();
            let w = |z: &[BigInt], m: u32| -> BigInt {
                (0..=m).map(|i| big(p as i64).pow(i) * num::pow(z[i as usize].clone(), p.pow(m - i) as usize)).sum()
            };
            for m in 0..3 {
                assert_eq!(w(&s, m), w(&x[..3], m) + w(&x[3..], m));
                assert_eq!(w(&pr, m), w(&x[..3], m) * w(&x[3..], m));
            }
        }
    }

    fn char_ring(p: u64, n: u32) -> RingDescriptor {
        let base = RingDescriptor::standard(ScalarRing::new(p, 1, n).unwrap(), 1, 0);
        perfect_descriptor(&base).unwrap()
    }

    fn mono(ring: &RingDescriptor, e: &[i64]) -> CharPSeries {
        let e = e.iter().map(|x| x * ring.frac_den).collect();
        CharPSeries::monomial(ring, e, ResidueScalar::one(ring.p(), ring.scalars.h)).unwrap()
    }

    #[test]
    fn arith_examples() {
        let ring = char_ring(2, 2);
        let one = WittVector::one(&ring, 2).unwrap();
        let zero = WittVector::zero(&ring, 2).unwrap();
        assert!(same(&witt_arith(&one, &zero, WittOp::Add).unwrap(), &one));
        // [1] + [1] = (0, 1) = p·[1]
        let two = witt_arith(&one, &one, WittOp::Add).unwrap();
        assert!(two.coords[0].is_zero());
        assert!(two.coords[1].same_terms(&CharPSeries::one(&ring)));
        assert!(same(&two, &one.times_p()));
        let x = teichmuller(&mono(&ring, &[1, 0]), 2).unwrap();
        let y = teichmuller(&mono(&ring, &[-2, 1]), 2).unwrap();
        let xy = witt_arith(&x, &y, WittOp::Mul).unwrap();
        assert!(same(&xy, &teichmuller(&mono(&ring, &[-1, 1]), 2).unwrap()));
    }

    #[test]
    fn norm_examples() {
        let ring = char_ring(2, 3);
        let pi = teichmuller(&mono(&ring, &[1, 0]), 3).unwrap();
        let r = Q::new(1, 2);
        assert_eq!(witt_norm(&pi, r).unwrap().value, Valuation::Finite(r));
        let p1 = WittVector::one(&ring, 3).unwrap().times_p();
        assert_eq!(witt_norm(&p1, r).unwrap().value, Valuation::int(1));
        // [π̄] + p[π̄^{-4}] at r = 1/2: min(1/2, 1 − 2)
        let t = teichmuller(&mono(&ring, &[-4, 0]), 3).unwrap().times_p();
        let x = witt_arith(&pi, &t, WittOp::Add).unwrap();
        let v = witt_norm(&x, r).unwrap();
        assert_eq!(v.value, Valuation::int(-1));
        assert!(v.certified);
    }

    #[test]
    fn frobenius_examples() {
        let ring = char_ring(3, 2);
        let pi = teichmuller(&mono(&ring, &[1, 0]), 2).unwrap();
        let t = teichmuller(&mono(&ring, &[0, 1]), 2).unwrap();
        assert!(same(&witt_frobenius(&pi, 3).unwrap(), &teichmuller(&mono(&ring, &[3, 0]), 2).unwrap()));
        let s = witt_arith(&pi, &t, WittOp::Add).unwrap();
        let a = witt_frobenius(&s, 3).unwrap();
        let b = witt_arith(&witt_frobenius(&pi, 3).unwrap(), &witt_frobenius(&t, 3).unwrap(), WittOp::Add).unwrap();
        assert!(same(&a, &b));
        let y = witt_frobenius(&s.times_p(), 3).unwrap();
        assert!(same(&y, &witt_frobenius(&s, 3).unwrap().times_p()));
    }

    #[test]
    fn embed_examples() {
        let base = RingDescriptor::standard(ScalarRing::new(2, 1, 3).unwrap(), 1, 0);
        let ring = perfect_descriptor(&base).unwrap();
        let p = embed_robba(&DaggerSeries::int(&base, 2)).unwrap();
        assert!(same(&p, &WittVector::one(&ring, 3).unwrap().times_p()));
        let pi = embed_robba(&DaggerSeries::var(&base, 0)).unwrap();
        assert!(same(&pi, &teichmuller(&mono(&ring, &[1, 0]), 3).unwrap()));
        let x = embed_robba(&DaggerSeries::parse(&base, "1 + pi").unwrap()).unwrap();
        let expect = witt_arith(&WittVector::one(&ring, 3).unwrap(), &pi, WittOp::Add).unwrap();
        assert!(same(&x, &expect));
        // S_1 at ((1,0,0), (π̄,0,0)) over p = 2 is −π̄
        assert!(x.coords[1].same_terms(&mono(&ring, &[1, 0])));
    }

    #[test]
    fn isometry_examples() {
        let base = RingDescriptor::standard(ScalarRing::new(3, 1, 3).unwrap(), 1, 0);
        for (s, r) in [("pi", Q::new(1, 3)), ("3", Q::new(1, 8)), ("1 + pi + 3*pi^-1 + 9*T1*pi^-5", Q::new(1, 8))] {
            let x = DaggerSeries::parse(&base, s).unwrap();
            let rep = isometry_check(&x, r).unwrap();
            assert_eq!(rep.status, Status::Pass, "{s}");
        }
        let rep = isometry_check(&DaggerSeries::var(&base, 0), Q::new(1, 3)).unwrap();
        assert_eq!(rep.witt.value, Valuation::Finite(Q::new(1, 3)));
    }

    #[test]
    fn embedding_is_a_ring_map() {
        let base = RingDescriptor::standard(ScalarRing::new(2, 2, 2).unwrap(), 1, 0);
        let x = DaggerSeries::parse(&base, "g*pi + 3*T1 + pi^-1").unwrap();
        let y = DaggerSeries::parse(&base, "1 + g*T1^2 + 2*pi").unwrap();
        let ex = embed_robba(&x).unwrap();
        let ey = embed_robba(&y).unwrap();
        assert!(embed_robba(&x.add(&y)).unwrap().agrees_with(&witt_arith(&ex, &ey, WittOp::Add).unwrap()));
        assert!(embed_robba(&x.mul(&y)).unwrap().agrees_with(&witt_arith(&ex, &ey, WittOp::Mul).unwrap()));
    }

    #[test]
    fn equivariance() {
        let sc = ScalarRing::new(3, 1, 2).unwrap();
        let ab = ActionSpec::ab(sc, 1, 16).unwrap();
        let x = DaggerSeries::parse(&ab.ring, "pi + T1^2 + 3*pi^-1").unwrap();
        let (residue, full) = phi_equivariance(&ab, &x).unwrap();
        assert!(residue);
        assert!(!full);
        let plain = ActionSpec::new(ActionKind::Plain, RingDescriptor::standard(sc, 1, 0), 16).unwrap();
        assert_eq!(phi_equivariance(&plain, &x).unwrap(), (true, true));
    }
}
