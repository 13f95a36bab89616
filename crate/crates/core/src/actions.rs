//! Frobenius lifts and their group actions on series: the plain monomial lift,
//! the cyclotomic action `Z_p^× ⋉ Z_p^n` on `π, T_1..T_n`, and the Lubin-Tate
//! action of `(O_K^×)^h` on `Y_0..Y_{h-1}`.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalars::{fmt_q, vp_i128, PadicScalar, ScalarRing, Valuation, Q};
use crate::series::{DaggerSeries, RingDescriptor, Window, MAX_GEOMETRIC_TERMS};
use crate::status::Status;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Plain,
    CyclotomicAb,
    LubinTateBerger,
}

/// A Frobenius lift together with the data needed to expand group actions.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionSpec {
    pub kind: ActionKind,
    pub ring: RingDescriptor,
    /// Weighted-degree cap for truncated expansions.
    pub cap: i64,
}

/// Elements of the monoid acting on the ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupElement {
    Identity,
    /// The central Frobenius `φ`.
    Phi,
    /// `π ↦ (1+π)^a − 1`, `T_i ↦ (1+π)^{b_i} T_i`; integers are exact
    /// representatives modulo `ActionSpec::ab_modulus`.
    Ab { a: i128, b: Vec<i128> },
    /// `Y_i ↦ [u_i](Y_i)`, units at `ActionSpec::unit_precision`.
    Berger { units: Vec<PadicScalar> },
    /// The Lubin-Tate `φ_p` (cyclic shift of the variables).
    PhiP,
}

impl fmt::Display for GroupElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupElement::Identity => write!(f, "id"),
            GroupElement::Phi => write!(f, "phi"),
            GroupElement::PhiP => write!(f, "phi_p"),
            GroupElement::Ab { a, b } => write!(f, "ab(a={a}, b={b:?})"),
            GroupElement::Berger { units } => {
                let u: Vec<String> = units.iter().map(|u| u.to_string()).collect();
                write!(f, "lt({})", u.join(", "))
            }
        }
    }
}

/// `ceil(log_q(n))` for `n >= 1`.
fn ceil_log(q: u64, n: u64) -> u32 {
    let mut k = 0;
    let mut x = 1u64;
    while x < n {
        x = x.saturating_mul(q);
        k += 1;
    }
    k
}

fn modinv(a: i128, m: i128) -> i128 {
    let (mut r0, mut r1) = (a.rem_euclid(m), m);
    let (mut s0, mut s1) = (1i128, 0i128);
    while r1 != 0 {
        let t = r0 / r1;
        (r0, r1) = (r1, r0 - t * r1);
        (s0, s1) = (s1, s0 - t * s1);
    }
    debug_assert_eq!(r0, 1, "not invertible");
    s0.rem_euclid(m)
}

/// `v_p(n!)`.
fn vp_factorial(n: u64, p: u64) -> u32 {
    let mut v = 0;
    let mut k = p;
    while k <= n {
        v += (n / k) as u32;
        k = match k.checked_mul(p) {
            Some(x) => x,
            None => break,
        };
    }
    v
}

/// `C(γ, i) mod p^n` for `i = 0..=cap`, exactly, by tracking `p`-parts of the
/// falling factorial and of `i!` separately.
pub fn binomials_mod(gamma: i128, cap: u32, p: u64, n: u32) -> Vec<i128> {
    let m = (p as i128).pow(n);
    let pi = p as i128;
    let mut out = Vec::with_capacity(cap as usize + 1);
    out.push(1 % m);
    let (mut v, mut unit) = (0i64, 1i128);
    let mut vanished = false;
    for i in 1..=cap as i128 {
        let f = gamma - (i - 1);
        if f == 0 {
            vanished = true;
        }
        if vanished {
            out.push(0);
            continue;
        }
        let vf = vp_i128(f, p);
        let vi = vp_i128(i, p);
        v += vf as i64 - vi as i64;
        let uf = (f / pi.pow(vf)).rem_euclid(m);
        let ui = (i / pi.pow(vi)).rem_euclid(m);
        unit = unit * uf % m * modinv(ui, m) % m;
        debug_assert!(v >= 0);
        out.push(if v as u32 >= n { 0 } else { unit * pi.pow(v as u32) % m });
    }
    out
}

/// `(1 + x)^γ = Σ_{i ≤ cap} C(γ, i) x^i` for an exact integer `γ`.
///
/// Every term of `x` must have positive `π`-exponent or be divisible by `p`, and
/// no exponent may be negative.
pub fn binomial_unit_power(gamma: i128, x: &DaggerSeries, cap: u32) -> Result<DaggerSeries> {
    let ring = x.ring();
    let p = ring.p();
    let n = ring.precision();
    let mut all_positive = true;
    for (e, c) in x.terms() {
        if e.iter().any(|&k| k < 0) {
            return Err(Error::Parameter("binomial expansion needs nonnegative exponents".into()));
        }
        if e[0] == 0 {
            all_positive = false;
            if c.is_unit() {
                return Err(Error::Parameter(
                    "binomial expansion needs positive π-order modulo p".into(),
                ));
            }
        }
    }
    let cap_num = cap as i64 * ring.frac_den;
    // omitted terms i > cap have π-degree > cap, or > cap + 1 − N when x has a p-divisible constant part
    let hi = if all_positive { cap_num } else { cap_num + ring.frac_den * (1 - n as i64) };
    let x = x.with_lo(&vec![0; ring.nvars()]).with_cap(0, cap_num);
    let coeffs = binomials_mod(gamma, cap, p, n);
    let mut acc = DaggerSeries::one(ring).with_cap(0, hi);
    let mut power = DaggerSeries::one(ring);
    for c in coeffs.iter().skip(1) {
        power = power.mul(&x).with_cap(0, cap_num);
        if power.is_zero() {
            break;
        }
        acc = acc.add(&power.scale_int(*c));
    }
    Ok(acc.with_cap(0, hi))
}

/// Dense univariate truncated product.
fn poly_mul(a: &[PadicScalar], b: &[PadicScalar], cap: usize) -> Vec<PadicScalar> {
    let zero = PadicScalar::zero(a[0].ring());
    let mut out = vec![zero; cap + 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(cap + 1 - i.min(cap + 1)) {
            if i + j <= cap {
                out[i + j] = out[i + j].add(&x.mul(y));
            }
        }
    }
    out
}

fn poly_pow(a: &[PadicScalar], mut k: u64, cap: usize) -> Vec<PadicScalar> {
    let ring = a[0].ring();
    let mut acc = vec![PadicScalar::zero(ring); cap + 1];
    acc[0] = PadicScalar::one(ring);
    let mut base = a.to_vec();
    while k > 0 {
        if k & 1 == 1 {
            acc = poly_mul(&acc, &base, cap);
        }
        k >>= 1;
        if k > 0 {
            base = poly_mul(&base, &base, cap);
        }
    }
    acc
}

/// `f(g(T))` truncated, for `g` without constant term.
fn poly_compose(f: &[PadicScalar], g: &[PadicScalar], cap: usize) -> Vec<PadicScalar> {
    let ring = g[0].ring();
    let mut out = vec![PadicScalar::zero(ring); cap + 1];
    let mut power = vec![PadicScalar::zero(ring); cap + 1];
    power[0] = PadicScalar::one(ring);
    for (k, c) in f.iter().enumerate().take(cap + 1) {
        if k > 0 {
            power = poly_mul(&power, g, cap);
        }
        if !c.is_zero() {
            for i in 0..=cap {
                out[i] = out[i].add(&c.mul(&power[i]));
            }
        }
    }
    out
}

/// Coefficients `c_0..c_cap` of `[p](T) = pT + T^q` over `ring`.
fn lt_p_coeffs(ring: ScalarRing, cap: usize) -> Vec<PadicScalar> {
    let q = ring.q() as usize;
    let mut c = vec![PadicScalar::zero(ring); cap + 1];
    if cap >= 1 {
        c[1] = PadicScalar::from_int(ring, ring.p as i128);
    }
    if q <= cap {
        c[q] = c[q].add(&PadicScalar::one(ring));
    }
    c
}

/// Guard digits used when solving for Lubin-Tate endomorphisms up to `cap`.
pub fn lt_guard(q: u64, cap: usize) -> u32 {
    ceil_log(q, cap.max(1) as u64) + 2
}

/// Coefficients of `[a](T)` up to degree `cap`, reduced to precision `out_n`.
///
/// The recursion `c_n (p^n − p) = [T^n]([a]^q) − Σ_{k<n} c_k [T^n]([p]^k)` is run
/// at extra precision, since each step divides by `p`; the result is checked
/// against the commutation relation before it is returned.
pub fn lt_coeffs(a: &PadicScalar, cap: usize, out_n: u32) -> Result<Vec<PadicScalar>> {
    let base = a.ring();
    let g = lt_guard(base.q(), cap);
    let work = base.with_precision(out_n + 2 * g).map_err(|_| {
        Error::Parameter(format!("cap {cap} needs more working precision than fits"))
    })?;
    let q = base.q() as usize;
    let p = base.p as i128;
    let a = a.with_precision(work.n)?;
    let zero = PadicScalar::zero(work);
    let mut c = vec![zero; cap + 1];
    if cap >= 1 {
        c[1] = a;
    }
    // [p](T)^k = Σ_j C(k, j) p^{k−j} T^{k + j(q−1)}
    let modulus = num::BigUint::from(work.modulus());
    let binom = |k: usize, j: usize| -> i128 {
        let c = (0..j).fold(num::BigUint::from(1u32), |acc, t| acc * (k - t) / (t + 1));
        (c % &modulus).to_i128().expect("reduced below the modulus")
    };
    for n in 2..=cap {
        let aq = poly_pow(&c[..n], q as u64, n);
        let mut rhs = aq[n];
        for k in 1..n {
            if c[k].is_zero() || (n - k) % (q - 1) != 0 {
                continue;
            }
            let j = (n - k) / (q - 1);
            if j > k {
                continue;
            }
            let coef = PadicScalar::from_int(work, binom(k, j)).mul(&PadicScalar::from_int(work, p).pow((k - j) as u64));
            rhs = rhs.sub(&c[k].mul(&coef));
        }
        // c_n p (p^{n−1} − 1) = rhs
        let reduced = rhs.div_p_pow(1).map_err(|_| {
            Error::Integrity(format!("Lubin-Tate coefficient at degree {n} is not solvable"))
        })?;
        let unit = PadicScalar::from_int(work, p).pow(n as u64 - 1).sub(&PadicScalar::one(work)).inverse()?;
        c[n] = reduced.mul(&unit);
    }
    let out: Vec<PadicScalar> = c.iter().map(|x| x.with_precision(out_n)).collect::<Result<_>>()?;
    // verify [a]∘[p] = [p]∘[a] at the output precision
    let out_ring = base.with_precision(out_n)?;
    let lp = lt_p_coeffs(out_ring, cap);
    if cap >= 1 && poly_compose(&out, &lp, cap) != poly_compose(&lp, &out, cap) {
        return Err(Error::Integrity(format!(
            "Lubin-Tate series failed the commutation check up to degree {cap}"
        )));
    }
    Ok(out)
}

/// `[a](T)` as a univariate series over `a`'s scalar ring, truncated at `cap`.
pub fn lubin_tate_series(a: &PadicScalar, cap: usize) -> Result<DaggerSeries> {
    if cap < 1 {
        return Err(Error::Parameter("cap must be at least 1".into()));
    }
    let ring = RingDescriptor::standard(a.ring(), 0, 0);
    let c = lt_coeffs(a, cap, a.ring().n)?;
    let s = DaggerSeries::polynomial(&ring, c.into_iter().enumerate().map(|(i, x)| (vec![i as i64], x)))?;
    Ok(s.with_cap(0, cap as i64))
}

/// Result of a margin comparison.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MarginReport {
    pub margin: Valuation,
    #[serde(serialize_with = "ser_q")]
    pub threshold: Q,
    pub status: Status,
}

fn ser_q<S: serde::Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(q))
}

/// One line of an analyticity sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AnalyticSample {
    pub gamma: String,
    pub m: u32,
    #[serde(serialize_with = "ser_q")]
    pub s: Q,
    pub margin: Valuation,
    #[serde(serialize_with = "ser_q")]
    pub threshold: Q,
    pub status: Status,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AnalyticityReport {
    pub c_val: String,
    pub samples: Vec<AnalyticSample>,
}

/// Outcome of the congruence-subgroup search.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubgroupDepth {
    pub depth: u32,
    /// `(generator, element of A, margin)` at the returned depth.
    pub margins: Vec<(String, String, Valuation)>,
}

/// Partial binomial sums against the directly computed `γ^n(x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BinomialConvergence {
    /// `v_s(γ^n x − Σ_{i<I} C(n,i)(γ−1)^i x)` for `I = 1..=n+1`.
    pub margins: Vec<Valuation>,
    /// Entries below the working precision.
    pub saturated: Vec<bool>,
    pub status: Status,
    #[serde(skip)]
    pub partial: DaggerSeries,
}

impl ActionSpec {
    pub fn new(kind: ActionKind, ring: RingDescriptor, cap: i64) -> Result<Self> {
        if cap < 1 {
            return Err(Error::Parameter("degree cap must be positive".into()));
        }
        if kind != ActionKind::Plain && ring.frac_den != 1 {
            return Err(Error::Parameter("group actions need integral exponents".into()));
        }
        if kind == ActionKind::LubinTateBerger {
            let expect = RingDescriptor::berger(ring.scalars);
            if ring != expect {
                return Err(Error::Parameter("Lubin-Tate action needs the Berger descriptor".into()));
            }
        }
        if kind == ActionKind::CyclotomicAb && (ring.nvars_u != 0 || ring.weights[1..].iter().any(|w| !w.is_zero())) {
            return Err(Error::Parameter("cyclotomic action needs weight-0 T variables only".into()));
        }
        let spec = ActionSpec { kind, ring, cap };
        if kind == ActionKind::LubinTateBerger {
            // fail early when the Lubin-Tate working precision does not fit
            let g = lt_guard(spec.q(), cap as usize);
            spec.ring.scalars.with_precision(spec.ring.precision() + 3 * g)?;
        }
        Ok(spec)
    }

    /// The cyclotomic action on `n` variables `T_i`.
    pub fn ab(scalars: ScalarRing, n: usize, cap: i64) -> Result<Self> {
        Self::new(ActionKind::CyclotomicAb, RingDescriptor::standard(scalars, n, 0), cap)
    }

    /// The Lubin-Tate action with `[p](T) = pT + T^q`.
    pub fn berger(scalars: ScalarRing, cap: i64) -> Result<Self> {
        Self::new(ActionKind::LubinTateBerger, RingDescriptor::berger(scalars), cap)
    }

    pub fn plain(ring: RingDescriptor, cap: i64) -> Result<Self> {
        Self::new(ActionKind::Plain, ring, cap)
    }

    pub fn p(&self) -> u64 {
        self.ring.p()
    }

    /// `q` with `φ ≡ x ↦ x^q mod p`.
    pub fn q(&self) -> u64 {
        match self.kind {
            ActionKind::LubinTateBerger => self.ring.scalars.q(),
            _ => self.p(),
        }
    }

    /// Exponent cap of variable `i` (numerator units); `None` for weight-0 variables.
    pub fn var_cap(&self, i: usize) -> Option<i64> {
        let w = self.ring.weights[i];
        if w.is_zero() {
            None
        } else {
            Some((Q::from_integer(self.cap * self.ring.frac_den) / w).floor().to_integer())
        }
    }

    fn cap_all(&self, x: &DaggerSeries) -> DaggerSeries {
        let mut out = x.clone();
        for i in 0..self.ring.nvars() {
            if let Some(c) = self.var_cap(i) {
                out = out.with_cap(i, c);
            }
        }
        out
    }

    /// Modulus for the exact integers of cyclotomic group elements.
    pub fn ab_modulus(&self) -> i128 {
        let p = self.p();
        (p as i128).pow(self.ring.precision() + vp_factorial(self.cap as u64, p))
    }

    /// Precision at which Lubin-Tate units are stored.
    pub fn unit_precision(&self) -> u32 {
        self.ring.precision() + lt_guard(self.q(), self.cap as usize)
    }

    pub fn identity(&self) -> GroupElement {
        GroupElement::Identity
    }

    /// Cyclotomic element `(a, b)`.
    pub fn ab_element(&self, a: i128, b: Vec<i128>) -> Result<GroupElement> {
        if self.kind != ActionKind::CyclotomicAb {
            return Err(Error::Parameter("not a cyclotomic action".into()));
        }
        if a.rem_euclid(self.p() as i128) == 0 {
            return Err(Error::Parameter(format!("{a} is not a p-adic unit")));
        }
        if b.len() != self.ring.nvars_t {
            return Err(Error::Parameter("translation vector has the wrong length".into()));
        }
        let m = self.ab_modulus();
        Ok(GroupElement::Ab { a: a.rem_euclid(m), b: b.into_iter().map(|x| x.rem_euclid(m)).collect() })
    }

    /// Unit `γ ∈ Z_p^×` acting on `π`.
    pub fn ab_unit(&self, a: i128) -> Result<GroupElement> {
        self.ab_element(a, vec![0; self.ring.nvars_t])
    }

    /// Translation by `b` in the `i`-th coordinate (1-based, acting on `T_i`).
    pub fn ab_translation(&self, i: usize, b: i128) -> Result<GroupElement> {
        let mut v = vec![0; self.ring.nvars_t];
        if i == 0 || i > v.len() {
            return Err(Error::Parameter(format!("no variable T{i}")));
        }
        v[i - 1] = b;
        self.ab_element(1, v)
    }

    /// Unit `u` in the `i`-th factor (0-based) of `(O_K^×)^h`.
    pub fn berger_unit(&self, i: usize, u: &PadicScalar) -> Result<GroupElement> {
        if self.kind != ActionKind::LubinTateBerger {
            return Err(Error::Parameter("not a Lubin-Tate action".into()));
        }
        if !u.is_unit() {
            return Err(Error::Parameter(format!("{u} is not a unit")));
        }
        let h = self.ring.scalars.h as usize;
        if i >= h {
            return Err(Error::Parameter(format!("no factor {i}")));
        }
        let prec = self.unit_precision();
        let one = PadicScalar::one(self.ring.scalars.with_precision(prec)?);
        let mut units = vec![one; h];
        units[i] = u.with_precision(prec)?;
        Ok(GroupElement::Berger { units })
    }

    /// `g1 ∘ g2`.
    pub fn compose(&self, g1: &GroupElement, g2: &GroupElement) -> Result<GroupElement> {
        use GroupElement::*;
        Ok(match (g1, g2) {
            (Identity, g) | (g, Identity) => g.clone(),
            (Ab { a: a1, b: b1 }, Ab { a: a2, b: b2 }) => {
                let m = self.ab_modulus();
                Ab {
                    a: a1 * a2 % m,
                    b: b1.iter().zip(b2).map(|(x, y)| (x + a1 * y) % m).collect(),
                }
            }
            (Berger { units: u1 }, Berger { units: u2 }) => {
                Berger { units: u1.iter().zip(u2).map(|(x, y)| x.mul(y)).collect() }
            }
            _ => {
                return Err(Error::Parameter(format!(
                    "composition of {g1} and {g2} is not an exact group element"
                )))
            }
        })
    }

    /// `g^k` as an exact group element.
    pub fn power(&self, g: &GroupElement, mut k: u64) -> Result<GroupElement> {
        let mut acc = GroupElement::Identity;
        let mut base = g.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.compose(&acc, &base)?;
            }
            k >>= 1;
            if k > 0 {
                base = self.compose(&base, &base)?;
            }
        }
        Ok(acc)
    }

    fn check_ring(&self, x: &DaggerSeries) -> Result<()> {
        if *x.ring() != self.ring {
            return Err(Error::Parameter("series ring does not match the action".into()));
        }
        Ok(())
    }

    /// Applies `φ`.
    pub fn apply_phi(&self, x: &DaggerSeries) -> Result<DaggerSeries> {
        self.apply(&GroupElement::Phi, x)
    }

    /// Applies a group element.
    pub fn apply_gamma(&self, g: &GroupElement, x: &DaggerSeries) -> Result<DaggerSeries> {
        self.apply(g, x)
    }

    pub fn apply(&self, g: &GroupElement, x: &DaggerSeries) -> Result<DaggerSeries> {
        self.check_ring(x)?;
        let ring = &self.ring;
        let nv = ring.nvars();
        match (self.kind, g) {
            (_, GroupElement::Identity) => Ok(x.clone()),
            (ActionKind::Plain, GroupElement::Phi) => Ok(self.monomial_frobenius(x)),
            (ActionKind::CyclotomicAb, GroupElement::Phi) => {
                let p = self.p() as u32;
                let mut images = Vec::with_capacity(nv);
                let pi = DaggerSeries::var(ring, 0).add(&DaggerSeries::one(ring)).pow(p).sub(&DaggerSeries::one(ring));
                images.push(pi);
                for i in 1..nv {
                    images.push(DaggerSeries::var(ring, i).pow(p));
                }
                let w = scale_window(x.window(), &vec![self.p() as i64; nv]);
                self.substitute(x, &images, true, w, false)
            }
            (ActionKind::CyclotomicAb, GroupElement::Ab { a, b }) => {
                let pi = DaggerSeries::var(ring, 0);
                let cap = self.cap as u32;
                let mut images = vec![binomial_unit_power(*a, &pi, cap)?.sub(&DaggerSeries::one(ring)).tighten_lo()];
                for (i, bi) in b.iter().enumerate() {
                    let t = DaggerSeries::var(ring, i + 1);
                    images.push(if *bi == 0 { t } else { binomial_unit_power(*bi, &pi, cap)?.mul(&t) });
                }
                self.substitute(x, &images, false, x.window().clone(), true)
            }
            (ActionKind::LubinTateBerger, GroupElement::Phi) => {
                let q = self.q() as u32;
                let p = DaggerSeries::int(ring, self.p() as i128);
                let images: Vec<_> = (0..nv)
                    .map(|i| {
                        let y = DaggerSeries::var(ring, i);
                        p.mul(&y).add(&y.pow(q))
                    })
                    .collect();
                let w = scale_window(x.window(), &vec![self.q() as i64; nv]);
                // σ^h = id on W(F_q)
                self.substitute(x, &images, false, w, false)
            }
            (ActionKind::LubinTateBerger, GroupElement::PhiP) => {
                let q = self.q() as u32;
                let mut images: Vec<_> = (1..nv).map(|i| DaggerSeries::var(ring, i)).collect();
                let y0 = DaggerSeries::var(ring, 0);
                images.push(DaggerSeries::int(ring, self.p() as i128).mul(&y0).add(&y0.pow(q)));
                let win = x.window();
                let mut w = Window::exact(nv);
                for i in 0..nv {
                    let src = if i == 0 { nv - 1 } else { i - 1 };
                    let k = if i == 0 { self.q() as i64 } else { 1 };
                    w.lo[i] = win.lo[src] * k;
                    w.hi[i] = win.hi[src].map(|h| (h + 1) * k - 1);
                }
                self.substitute(x, &images, true, w, false)
            }
            (ActionKind::LubinTateBerger, GroupElement::Berger { units }) => {
                let mut images = Vec::with_capacity(nv);
                for (i, u) in units.iter().enumerate() {
                    let y = DaggerSeries::var(ring, i);
                    if *u == PadicScalar::one(u.ring()) {
                        images.push(y);
                        continue;
                    }
                    let cap = self.var_cap(i).expect("positive weight") as usize;
                    let c = lt_coeffs(u, cap, ring.precision())?;
                    let terms = c.into_iter().enumerate().filter(|(_, x)| !x.is_zero()).map(|(k, x)| {
                        let mut e = vec![0; nv];
                        e[i] = k as i64;
                        (e, x)
                    });
                    images.push(DaggerSeries::polynomial(ring, terms)?.with_cap(i, cap as i64).tighten_lo());
                }
                self.substitute(x, &images, false, x.window().clone(), true)
            }
            (kind, g) => Err(Error::Parameter(format!("{g} does not act in the {kind:?} family"))),
        }
    }

    fn monomial_frobenius(&self, x: &DaggerSeries) -> DaggerSeries {
        let p = self.p() as i64;
        let nv = self.ring.nvars();
        let w = scale_window(x.window(), &vec![p; nv]);
        let terms = x.terms().map(|(e, c)| (e.iter().map(|k| k * p).collect(), c.frobenius()));
        DaggerSeries::from_parts(&self.ring, terms, w).expect("scaled exponents stay in the scaled window")
    }

    /// Substitutes `images[i]` for variable `i`, with optional coefficient
    /// Frobenius, transported window `w` and optional action caps.
    fn substitute(
        &self,
        x: &DaggerSeries,
        images: &[DaggerSeries],
        sigma: bool,
        w: Window,
        capped: bool,
    ) -> Result<DaggerSeries> {
        let ring = &self.ring;
        let mut cache: BTreeMap<(usize, i64), DaggerSeries> = BTreeMap::new();
        let mut inverses: BTreeMap<usize, DaggerSeries> = BTreeMap::new();
        let mut acc = DaggerSeries::from_parts(ring, std::iter::empty(), w)?;
        for (e, c) in x.terms() {
            let mut term = DaggerSeries::constant(ring, if sigma { c.frobenius() } else { *c });
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let pw = self.image_power(i, k, images, &mut cache, &mut inverses, capped)?;
                term = term.mul(&pw);
                if capped {
                    term = self.cap_all(&term);
                }
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    fn image_power(
        &self,
        i: usize,
        k: i64,
        images: &[DaggerSeries],
        cache: &mut BTreeMap<(usize, i64), DaggerSeries>,
        inverses: &mut BTreeMap<usize, DaggerSeries>,
        capped: bool,
    ) -> Result<DaggerSeries> {
        if let Some(s) = cache.get(&(i, k)) {
            return Ok(s.clone());
        }
        let step = k.signum();
        let base = if k > 0 {
            images[i].clone()
        } else {
            if !inverses.contains_key(&i) {
                let inv = self.invert_image(&images[i], capped)?;
                inverses.insert(i, inv);
            }
            inverses[&i].clone()
        };
        let mut cur = if k.abs() == 1 {
            base.clone()
        } else {
            let prev = self.image_power(i, k - step, images, cache, inverses, capped)?;
            prev.mul(&base)
        };
        if capped {
            cur = self.cap_all(&cur);
        }
        cache.insert((i, k), cur.clone());
        Ok(cur)
    }

    /// Inverse of a generator image `z = c·m·(1 + y)` via its dominant term.
    fn invert_image(&self, z: &DaggerSeries, capped: bool) -> Result<DaggerSeries> {
        let ring = &self.ring;
        let dominant = z
            .terms()
            .filter(|(_, c)| c.is_unit())
            .min_by(|a, b| ring.wdeg(a.0).cmp(&ring.wdeg(b.0)).then(a.0.cmp(b.0)))
            .map(|(e, c)| (e.clone(), *c))
            .ok_or_else(|| Error::NotInvertible("image has no unit term".into()))?;
        let (m, c) = dominant;
        let d = ring.wdeg(&m);
        if z.terms().any(|(e, c)| c.is_unit() && *e != m && ring.wdeg(e) <= d) {
            return Err(Error::NotInvertible("image has no strictly dominant unit term".into()));
        }
        let neg_m: Vec<i64> = m.iter().map(|k| -k).collect();
        let cinv = c.inverse()?;
        let y = z.shift(&neg_m).scale(&cinv).sub(&DaggerSeries::one(ring)).tighten_lo();
        let minus_y = y.neg();
        let widen = |s: &DaggerSeries| -> DaggerSeries {
            let mut out = s.clone();
            if capped {
                for i in 0..ring.nvars() {
                    if let Some(cp) = self.var_cap(i) {
                        out = out.with_cap(i, cp + m[i].abs());
                    }
                }
            }
            out
        };
        let mut term = DaggerSeries::one(ring);
        let mut acc = DaggerSeries::one(ring);
        let mut done = false;
        for _ in 0..MAX_GEOMETRIC_TERMS {
            term = widen(&term.mul(&minus_y));
            if term.is_zero() {
                done = true;
                break;
            }
            acc = acc.add(&term);
        }
        if !done {
            return Err(Error::InsufficientWindow("image inverse did not terminate".into()));
        }
        Ok(acc.shift(&neg_m).scale(&cinv).tighten_lo())
    }

    /// `reduce(φ(x) − x^q) = 0` within the common window.
    pub fn frobenius_congruence_check(&self, x: &DaggerSeries) -> Result<bool> {
        let d = self.apply_phi(x)?.sub(&x.pow(self.q() as u32));
        Ok(d.reduce_mod_p().is_zero())
    }

    /// Margin `v_r(φ(x) − x^q) − v_r(x^q)` against the threshold `c_val`.
    pub fn reality_check_bound(&self, x: &DaggerSeries, r: Q, c_val: Q) -> Result<MarginReport> {
        let xq = x.pow(self.q() as u32);
        let d = self.apply_phi(x)?.sub(&xq);
        let base = xq.gauss_norm(r)?;
        let top = d.gauss_norm(r)?;
        if !base.certified {
            return Ok(MarginReport { margin: Valuation::Infinity, threshold: c_val, status: Status::Inconclusive });
        }
        if d.is_zero() {
            return Ok(MarginReport { margin: Valuation::Infinity, threshold: c_val, status: Status::Pass });
        }
        let margin = top.value.minus(base.value).expect("finite base");
        let status = if top.certified {
            Status::from_bool(margin >= Valuation::Finite(c_val) && margin > Valuation::int(0))
        } else {
            Status::Inconclusive
        };
        Ok(MarginReport { margin, threshold: c_val, status })
    }

    /// `(γ−1)(yz) = (γ−1)(y) z + γ(y) (γ−1)(z)` within the common window.
    pub fn twisted_leibniz_check(&self, g: &GroupElement, y: &DaggerSeries, z: &DaggerSeries) -> Result<bool> {
        let gy = self.apply(g, y)?;
        let gz = self.apply(g, z)?;
        let dy = gy.sub(y);
        let dz = gz.sub(z);
        let lhs = self.apply(g, &y.mul(z))?.sub(&y.mul(z));
        let rhs = dy.mul(z).add(&gy.mul(&dz));
        Ok(lhs.sub(&rhs).is_zero())
    }

    /// Checks `v_s((γ^{p^m} − 1)v) − v_s(v) > min_i ((i − m) + p^{−i} s c_val)`.
    pub fn analytic_inequality_check(
        &self,
        g: &GroupElement,
        v: &DaggerSeries,
        m: u32,
        s: Q,
        c_val: Q,
    ) -> Result<AnalyticSample> {
        let gm = self.power(g, self.p().pow(m))?;
        let w = self.apply(&gm, v)?.sub(v);
        let p = Q::from_integer(self.p() as i64);
        let threshold = (0..=m)
            .map(|i| Q::from_integer(i as i64 - m as i64) + s * c_val / p.pow(i as i32))
            .min()
            .expect("nonempty range");
        let base = v.gauss_norm(s)?;
        let top = w.gauss_norm(s)?;
        let (margin, status) = if !base.certified {
            (Valuation::Infinity, Status::Inconclusive)
        } else if w.is_zero() {
            (Valuation::Infinity, Status::Pass)
        } else {
            // an uncertified value still bounds the coset from below
            let lower = if top.certified { top.value } else { top.value.min(w.dropped_bound(s)) };
            let margin = lower.minus(base.value).expect("finite base");
            let st = if margin > Valuation::Finite(threshold) {
                Status::Pass
            } else if top.certified {
                Status::Fail
            } else {
                Status::Inconclusive
            };
            (margin, st)
        };
        Ok(AnalyticSample { gamma: g.to_string(), m, s, margin, threshold, status })
    }

    /// Generators of `A` used for continuity checks: `π^{±1}` and every other
    /// variable with its inverse.
    pub fn residue_generators(&self) -> Vec<DaggerSeries> {
        let nv = self.ring.nvars();
        let mut out = Vec::new();
        for i in 0..nv {
            let mut e = vec![0; nv];
            e[i] = 1;
            out.push(DaggerSeries::monomial(&self.ring, e.clone(), PadicScalar::one(self.ring.scalars)).expect("fits"));
            e[i] = -1;
            out.push(DaggerSeries::monomial(&self.ring, e, PadicScalar::one(self.ring.scalars)).expect("fits"));
        }
        out
    }

    /// Generators of the depth-`n` congruence subgroup.
    pub fn depth_generators(&self, n: u32) -> Result<Vec<GroupElement>> {
        let p = self.p() as i128;
        match self.kind {
            ActionKind::Plain => Ok(vec![]),
            ActionKind::CyclotomicAb => {
                let pn = p.checked_pow(n).ok_or_else(|| Error::Parameter("depth too large".into()))?;
                let mut out = vec![self.ab_unit(1 + pn)?];
                for i in 1..=self.ring.nvars_t {
                    out.push(self.ab_translation(i, pn)?);
                }
                Ok(out)
            }
            ActionKind::LubinTateBerger => {
                let prec = self.unit_precision().max(n + 1);
                let ring = self.ring.scalars.with_precision(prec)?;
                let u = PadicScalar::from_int(ring, 1 + p.pow(n));
                let h = self.ring.scalars.h as usize;
                let mut out = Vec::new();
                for i in 0..h {
                    let one = PadicScalar::one(ring);
                    let mut units = vec![one; h];
                    units[i] = u;
                    out.push(GroupElement::Berger { units });
                }
                Ok(out)
            }
        }
    }

    /// Smallest depth `n ≥ 1` at which every depth-`n` generator moves every
    /// residue generator `x̄` by more than `c_val` in valuation, measured mod `p`
    /// at radius 1.
    pub fn find_subgroup_depth(&self, c_val: Q, max_depth: u32) -> Result<SubgroupDepth> {
        if !c_val.is_positive() {
            return Err(Error::Parameter("c_val must be positive".into()));
        }
        let one = Q::from_integer(1);
        'depth: for n in 1..=max_depth {
            let mut margins = Vec::new();
            for g in self.depth_generators(n)? {
                for x in self.residue_generators() {
                    let diff = self.apply(&g, &x)?.sub(&x).reduce_mod_p();
                    let base = x.reduce_mod_p().gauss_norm(one)?.value;
                    let top = diff.gauss_norm(one)?;
                    let margin = if diff.is_zero() {
                        Valuation::Infinity
                    } else if top.certified {
                        top.value.minus(base).expect("finite")
                    } else {
                        continue 'depth;
                    };
                    if margin <= Valuation::Finite(c_val) {
                        continue 'depth;
                    }
                    margins.push((g.to_string(), x.to_string(), margin));
                }
            }
            return Ok(SubgroupDepth { depth: n, margins });
        }
        Err(Error::NotFound(format!(
            "no congruence depth up to {max_depth} reaches margin {}",
            fmt_q(&c_val)
        )))
    }

    /// Compares `γ^n(x)` with the partial sums `Σ_{i<I} C(n,i)(γ−1)^i x` for
    /// `I = 1..=i_max`. A difference that vanishes or is uncertified sits below
    /// the working precision and counts as saturated, reported at its lower
    /// bound. The status asks for strict increase up to `I = n + 1` (past which
    /// the sum is complete) until saturation, and fails on three consecutive
    /// certified drops.
    pub fn binomial_action_convergence(
        &self,
        g: &GroupElement,
        n: u32,
        x: &DaggerSeries,
        i_max: u32,
        s: Q,
    ) -> Result<BinomialConvergence> {
        if i_max == 0 {
            return Err(Error::Parameter("need at least one partial sum".into()));
        }
        let target = self.apply(&self.power(g, n as u64)?, x)?;
        let binom = binomials_mod(n as i128, i_max - 1, self.p(), self.ring.precision());
        let mut diff_power = x.clone();
        let mut partial = DaggerSeries::zero(&self.ring);
        let mut margins = Vec::new();
        let mut saturated = Vec::new();
        for (i, c) in binom.iter().enumerate() {
            if i > 0 {
                diff_power = self.apply(g, &diff_power)?.sub(&diff_power);
            }
            partial = partial.add(&diff_power.scale_int(*c));
            let d = target.sub(&partial);
            let v = d.gauss_norm(s)?;
            if d.is_zero() {
                margins.push(Valuation::Infinity);
            } else if v.certified {
                margins.push(v.value);
            } else {
                margins.push(v.value.min(d.dropped_bound(s)));
            }
            saturated.push(d.is_zero() || !v.certified);
        }
        let exact = |i: usize| !saturated[i];
        let diverging = (0..margins.len().saturating_sub(3))
            .any(|i| (i..i + 4).all(exact) && (i..i + 3).all(|k| margins[k + 1] < margins[k]));
        let head = margins.len().min(n as usize + 1);
        let mut status = Status::Pass;
        for i in 1..head {
            let (a, b) = (margins[i - 1], margins[i]);
            if saturated[i] {
                continue;
            }
            if b <= a && (exact(i - 1) || b < a) {
                status = Status::Fail;
                break;
            }
            if !exact(i - 1) {
                status = Status::Inconclusive;
            }
        }
        if diverging {
            status = Status::Fail;
        }
        Ok(BinomialConvergence { margins, saturated, status, partial })
    }

    /// Smallest dyadic radius in `[1/64, 8]` at which a certified reality check
    /// fails, if any.
    pub fn reality_failure_radius(&self, x: &DaggerSeries, c_val: Q) -> Result<Option<Q>> {
        let mut r = Q::new(1, 64);
        while r <= Q::from_integer(8) {
            if self.reality_check_bound(x, r, c_val)?.status == Status::Fail {
                return Ok(Some(r));
            }
            r *= Q::from_integer(2);
        }
        Ok(None)
    }
}

fn scale_window(w: &Window, k: &[i64]) -> Window {
    Window {
        lo: w.lo.iter().zip(k).map(|(x, k)| x * k).collect(),
        hi: w.hi.iter().zip(k).map(|(h, k)| h.map(|h| (h + 1) * k - 1)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> Q {
        Q::new(a, b)
    }

    fn sr(p: u64, h: u32, n: u32) -> ScalarRing {
        ScalarRing::new(p, h, n).unwrap()
    }

    fn parse(spec: &ActionSpec, s: &str) -> DaggerSeries {
        DaggerSeries::parse(&spec.ring, s).unwrap()
    }

    /// Exact `C(γ, i)` over the integers by the multiplicative formula.
    fn binom_oracle(g: i128, i: u32) -> i128 {
        let mut num = 1i128;
        let mut den = 1i128;
        for j in 0..i as i128 {
            num *= g - j;
            den *= j + 1;
        }
        num / den
    }

    #[test]
    fn binomials_match_oracle() {
        for g in [-7i128, -1, 0, 1, 2, 3, 10, 17, 26, 81] {
            let got = binomials_mod(g, 12, 3, 4);
            for (i, c) in got.iter().enumerate() {
                assert_eq!(*c, binom_oracle(g, i as u32).rem_euclid(81), "g={g} i={i}");
            }
        }
    }

    #[test]
    fn binomial_power_examples() {
        let ring = RingDescriptor::standard(sr(2, 1, 4), 0, 0);
        let pi = DaggerSeries::var(&ring, 0);
        let one = DaggerSeries::one(&ring);
        assert!(binomial_unit_power(1, &pi, 5).unwrap().same_terms(&one.add(&pi)));
        assert!(binomial_unit_power(2, &pi, 2).unwrap().same_terms(&DaggerSeries::parse(&ring, "1 + 2*pi + pi^2").unwrap()));
        let ring = RingDescriptor::standard(sr(3, 1, 3), 0, 0);
        let pi = DaggerSeries::var(&ring, 0);
        let got = binomial_unit_power(-1, &pi, 4).unwrap();
        assert!(got.same_terms(&DaggerSeries::parse(&ring, "1 - pi + pi^2 - pi^3 + pi^4").unwrap()));
        assert_eq!(got.window().hi[0], Some(4));
        assert!(binomial_unit_power(2, &DaggerSeries::one(&ring), 4).is_err());
    }

    #[test]
    fn lubin_tate_examples() {
        let ring = sr(3, 2, 3);
        let one = lubin_tate_series(&PadicScalar::one(ring), 10).unwrap();
        assert!(one.same_terms(&DaggerSeries::var(one.ring(), 0)));
        let p = lubin_tate_series(&PadicScalar::from_int(ring, 3), 20).unwrap();
        assert!(p.same_terms(&DaggerSeries::parse(p.ring(), "3*pi + pi^9").unwrap()));
    }

    /// `[3](T)` for `p = 2, q = 2, N = 3`, solved by hand from the commutation
    /// relation over the rationals: c1 = 3, and c_n (2^n − 2) equals the `T^n`
    /// coefficient of `[3]^2 − Σ_{k<n} c_k [2]^k`.
    #[test]
    fn lubin_tate_p2_a3() {
        // exact rational recursion
        let cap = 3usize;
        let mut c = vec![num::rational::Ratio::<i128>::from_integer(0); cap + 1];
        c[1] = 3.into();
        for n in 2..=cap {
            // [a]^2 coefficient at n
            let mut aq = num::rational::Ratio::from_integer(0);
            for i in 1..n {
                aq += c[i] * c[n - i];
            }
            // Σ_{k<n} c_k [T^n]((2T + T^2)^k) = Σ C(k, j) 2^{k−j} with k + j = n
            let mut lhs = num::rational::Ratio::from_integer(0);
            for k in 1..n {
                let j = n - k;
                if j <= k {
                    lhs += c[k] * binom_oracle(k as i128, j as u32) * 2i128.pow((k - j) as u32);
                }
            }
            c[n] = (aq - lhs) / ((1i128 << n) - 2);
        }
        let got = lt_coeffs(&PadicScalar::from_int(sr(2, 1, 3), 3), cap, 3).unwrap();
        for n in 1..=cap {
            assert!(c[n].is_integer());
            assert_eq!(got[n].to_signed().rem_euclid(8), c[n].to_integer().rem_euclid(8), "degree {n}");
        }
    }

    #[test]
    fn lubin_tate_composition() {
        for (p, h) in [(2u64, 1u32), (3, 1), (2, 2), (3, 2)] {
            let ring = sr(p, h, 3);
            let cap = 12;
            let g = lt_guard(ring.q(), cap);
            let hi = ring.with_precision(3 + g).unwrap();
            let a = PadicScalar::from_coeffs(hi, &(0..h as i128).map(|i| 1 + p as i128 + i).collect::<Vec<_>>()).unwrap();
            let b = PadicScalar::from_coeffs(hi, &(0..h as i128).map(|i| 2 + 5 * i).collect::<Vec<_>>()).unwrap();
            let b = if b.is_unit() { b } else { b.add(&PadicScalar::one(hi)) };
            let fa = lt_coeffs(&a, cap, 3).unwrap();
            let fb = lt_coeffs(&b, cap, 3).unwrap();
            let fab = lt_coeffs(&a.mul(&b), cap, 3).unwrap();
            assert_eq!(poly_compose(&fa, &fb, cap), fab, "p={p} h={h}");
        }
    }

    #[test]
    fn phi_examples() {
        let ab = ActionSpec::ab(sr(3, 1, 4), 1, 16).unwrap();
        assert!(ab.apply_phi(&parse(&ab, "T1")).unwrap().same_terms(&parse(&ab, "T1^3")));
        assert!(ab.apply_phi(&parse(&ab, "1")).unwrap().same_terms(&parse(&ab, "1")));
        assert!(ab.apply_phi(&parse(&ab, "pi")).unwrap().same_terms(&parse(&ab, "3*pi + 3*pi^2 + pi^3")));
        // φ(π^{-1}) · φ(π) = 1
        let inv = ab.apply_phi(&parse(&ab, "pi^-1")).unwrap();
        let prod = inv.mul(&ab.apply_phi(&parse(&ab, "pi")).unwrap());
        assert!(prod.same_terms(&parse(&ab, "1")));
    }

    #[test]
    fn gamma_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 2), 1, 8).unwrap();
        let x = parse(&ab, "pi^2*T1 + 3");
        assert_eq!(ab.apply(&ab.identity(), &x).unwrap(), x);
        let g = ab.ab_translation(1, 3).unwrap();
        let got = ab.apply(&g, &parse(&ab, "T1")).unwrap();
        assert!(got.agrees_with(&parse(&ab, "(1+pi)^3*T1")));
        let berger = ActionSpec::berger(sr(2, 1, 3), 10).unwrap();
        let u = PadicScalar::from_int(sr(2, 1, 3), 3);
        let g = berger.berger_unit(0, &u).unwrap();
        let got = berger.apply(&g, &parse(&berger, "pi")).unwrap();
        let expect = lubin_tate_series(&u, 10).unwrap();
        let terms: Vec<_> = got.terms().map(|(e, c)| (e.clone(), *c)).collect();
        let expect_terms: Vec<_> = expect.terms().map(|(e, c)| (e.clone(), *c)).collect();
        assert_eq!(terms, expect_terms);
    }

    #[test]
    fn congruence_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 3), 1, 16).unwrap();
        for s in ["T1", "pi", "1", "pi^-2*T1 + 2*pi^3"] {
            assert!(ab.frobenius_congruence_check(&parse(&ab, s)).unwrap(), "{s}");
        }
        let b = ActionSpec::berger(sr(2, 2, 3), 16).unwrap();
        for s in ["Y0", "Y1", "Y0^-1*Y1 + g*Y1^2"] {
            assert!(b.frobenius_congruence_check(&parse(&b, s)).unwrap(), "{s}");
        }
    }

    #[test]
    fn reality_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 10), 1, 32).unwrap();
        let t = ab.reality_check_bound(&parse(&ab, "T1"), q(1, 8), q(1, 16)).unwrap();
        assert_eq!(t.margin, Valuation::Infinity);
        let m = ab.reality_check_bound(&parse(&ab, "pi"), q(1, 4), q(1, 16)).unwrap();
        assert_eq!(m.margin, Valuation::Finite(q(3, 4)));
        assert_eq!(m.status, Status::Pass);
        let m = ab.reality_check_bound(&parse(&ab, "pi"), q(4, 1), q(1, 16)).unwrap();
        assert_eq!(m.margin, Valuation::int(-3));
        assert_eq!(m.status, Status::Fail);
        assert_eq!(ab.reality_failure_radius(&parse(&ab, "pi"), q(1, 16)).unwrap(), Some(q(1, 1)));
    }

    #[test]
    fn leibniz_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 2), 1, 12).unwrap();
        let y = parse(&ab, "pi");
        let g = ab.ab_unit(3).unwrap();
        assert!(ab.twisted_leibniz_check(&g, &y, &y).unwrap());
        assert!(ab.twisted_leibniz_check(&ab.identity(), &y, &parse(&ab, "T1 + pi^-1")).unwrap());
        assert!(ab.twisted_leibniz_check(&g, &parse(&ab, "1"), &parse(&ab, "T1*pi^2")).unwrap());
    }

    #[test]
    fn analytic_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 4), 1, 16).unwrap();
        let g = ab.ab_unit(3).unwrap();
        let r = ab.analytic_inequality_check(&g, &parse(&ab, "pi"), 0, q(1, 1), q(1, 2)).unwrap();
        assert_eq!(r.margin, Valuation::int(1));
        assert_eq!(r.threshold, q(1, 2));
        assert_eq!(r.status, Status::Pass);
        let r = ab.analytic_inequality_check(&ab.identity(), &parse(&ab, "pi"), 2, q(1, 4), q(1, 2)).unwrap();
        assert_eq!(r.margin, Valuation::Infinity);
        assert_eq!(r.status, Status::Pass);
    }

    #[test]
    fn subgroup_depth_examples() {
        let ab = ActionSpec::ab(sr(3, 1, 3), 1, 32).unwrap();
        let d = ab.find_subgroup_depth(q(1, 100), 6).unwrap();
        assert_eq!(d.depth, 1);
        assert!(d.margins.iter().any(|(g, x, m)| g.contains("a=4") && x.contains("T1") && *m == Valuation::Infinity));
        assert!(matches!(ab.find_subgroup_depth(q(1000, 1), 3), Err(Error::NotFound(_))));
        let b = ActionSpec::berger(sr(2, 2, 3), 24).unwrap();
        assert!(b.find_subgroup_depth(q(1, 2), 4).is_ok());
    }

    #[test]
    fn binomial_convergence_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 3), 1, 16).unwrap();
        let g = ab.ab_unit(3).unwrap();
        let x = parse(&ab, "pi");
        // γ²(π) = (1+π)^9 − 1
        let direct = parse(&ab, "(1+pi)^9 - 1");
        let b = ab.binomial_action_convergence(&g, 2, &x, 3, q(1, 1)).unwrap();
        assert_eq!(b.margins.len(), 3);
        assert!(b.partial.agrees_with(&direct));
        assert_eq!(b.margins[2], Valuation::Infinity);
        let one = ab.binomial_action_convergence(&g, 2, &x, 1, q(1, 1)).unwrap();
        assert!(one.partial.same_terms(&x));
        let id = ab.binomial_action_convergence(&ab.identity(), 3, &x, 1, q(1, 1)).unwrap();
        assert!(id.partial.same_terms(&x));
        assert_eq!(id.margins[0], Valuation::Infinity);
        // γ = 3 at p = 2 is too shallow: C(2, 1) = 2 costs a unit of margin
        let fine = ActionSpec::ab(sr(2, 1, 10), 1, 24).unwrap();
        let b = fine.binomial_action_convergence(&fine.ab_unit(3).unwrap(), 2, &parse(&fine, "pi"), 3, q(1, 1)).unwrap();
        assert_eq!(b.margins, vec![Valuation::int(4), Valuation::int(3), Valuation::Infinity]);
        assert_eq!(b.status, Status::Fail);
        let b = fine.binomial_action_convergence(&fine.ab_unit(5).unwrap(), 3, &parse(&fine, "pi"), 5, q(1, 1)).unwrap();
        assert_eq!(b.status, Status::Pass);
    }

    #[test]
    fn group_law_and_centrality() {
        let ab = ActionSpec::ab(sr(3, 1, 3), 1, 16).unwrap();
        let x = parse(&ab, "pi^2*T1 + 3*pi^-1 + T1^2");
        let g1 = ab.ab_element(2, vec![3]).unwrap();
        let g2 = ab.ab_element(4, vec![1]).unwrap();
        let lhs = ab.apply(&g1, &ab.apply(&g2, &x).unwrap()).unwrap();
        let rhs = ab.apply(&ab.compose(&g1, &g2).unwrap(), &x).unwrap();
        assert!(lhs.agrees_with(&rhs));
        let a = ab.apply_phi(&ab.apply(&g1, &x).unwrap()).unwrap();
        let b = ab.apply(&g1, &ab.apply_phi(&x).unwrap()).unwrap();
        assert!(a.agrees_with(&b));
    }

    #[test]
    fn berger_phi_p_cycles() {
        let b = ActionSpec::berger(sr(2, 2, 3), 16).unwrap();
        let x = parse(&b, "Y0 + g*Y1^2 + Y0^-1");
        let twice = b.apply(&GroupElement::PhiP, &b.apply(&GroupElement::PhiP, &x).unwrap()).unwrap();
        assert!(twice.agrees_with(&b.apply_phi(&x).unwrap()));
        let y1 = b.apply(&GroupElement::PhiP, &parse(&b, "Y0")).unwrap();
        assert!(y1.same_terms(&parse(&b, "Y1")));
    }
}
