//! Cyclotomic and Lubin-Tate towers over `W(F_q)[1/p]`: norms, valuations,
//! ramification data, norm defects and the imperfect norm field.
//!
//! Level `j` is `K_j = K(u_j)` with `rel(u_{j+1}) = u_j` and `u_0` a root of
//! `rel(X)/X`, so `[K_j : K] = (q−1)q^j`. Elements of `𝔬_{K_j}/p^N` are dense
//! polynomials in `u_j` reduced modulo the Eisenstein polynomial
//! `m_j = (rel(X)/X) ∘ rel^{∘j}`.

use std::fmt;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::actions::lt_coeffs;
use crate::error::{Error, Result};
use crate::scalars::{fmt_q, teichmuller_lift, PadicScalar, ScalarRing, Valuation, Q};
use crate::status::Status;

/// Largest `[K_J : K]` accepted.
pub const MAX_TOWER_DEGREE: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TowerKind {
    Cyclotomic,
    LubinTate,
}

impl fmt::Display for TowerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TowerKind::Cyclotomic => "cyclotomic",
            TowerKind::LubinTate => "lubin_tate",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TowerSpec {
    pub kind: TowerKind,
    pub p: u64,
    pub h: u32,
    pub max_level: usize,
    pub precision: u32,
}

impl TowerSpec {
    pub fn new(kind: TowerKind, p: u64, h: u32, max_level: usize, precision: u32) -> Result<Self> {
        if max_level < 1 {
            return Err(Error::Parameter("tower height J must be at least 1".into()));
        }
        if kind == TowerKind::Cyclotomic && h != 1 {
            return Err(Error::Parameter("the cyclotomic tower needs h = 1".into()));
        }
        ScalarRing::new(p, h, precision)?;
        let spec = TowerSpec { kind, p, h, max_level, precision };
        let q = spec.q() as usize;
        let top = (q - 1).checked_mul(q.checked_pow(max_level as u32).unwrap_or(usize::MAX));
        if top.map_or(true, |d| d > MAX_TOWER_DEGREE) {
            return Err(Error::Parameter(format!(
                "[K_J : K] exceeds {MAX_TOWER_DEGREE} for q = {q}, J = {max_level}"
            )));
        }
        Ok(spec)
    }

    pub fn cyclotomic(p: u64, max_level: usize, precision: u32) -> Result<Self> {
        Self::new(TowerKind::Cyclotomic, p, 1, max_level, precision)
    }

    pub fn lubin_tate(p: u64, h: u32, max_level: usize, precision: u32) -> Result<Self> {
        Self::new(TowerKind::LubinTate, p, h, max_level, precision)
    }

    pub fn q(&self) -> u64 {
        self.p.pow(self.h)
    }

    pub fn scalars(&self) -> ScalarRing {
        ScalarRing::new(self.p, self.h, self.precision).expect("validated at construction")
    }

    /// `[K_j : K]`.
    pub fn degree(&self, j: usize) -> usize {
        let q = self.q() as usize;
        (q - 1) * q.pow(j as u32)
    }

    /// `[K_{j+1} : K_j]`.
    pub fn step_degree(&self) -> usize {
        self.q() as usize
    }
}

type Poly = Vec<PadicScalar>;

fn poly_mul(a: &[PadicScalar], b: &[PadicScalar], ring: ScalarRing) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![PadicScalar::zero(ring); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            if !y.is_zero() {
                out[i + j] = out[i + j].add(&x.mul(y));
            }
        }
    }
    out
}

fn poly_add(a: &[PadicScalar], b: &[PadicScalar], ring: ScalarRing) -> Poly {
    let n = a.len().max(b.len());
    let z = PadicScalar::zero(ring);
    (0..n).map(|i| a.get(i).unwrap_or(&z).add(b.get(i).unwrap_or(&z))).collect()
}

/// `f ∘ g` by Horner's rule.
fn poly_compose(f: &[PadicScalar], g: &[PadicScalar], ring: ScalarRing) -> Poly {
    let mut acc: Poly = Vec::new();
    for c in f.iter().rev() {
        acc = poly_add(&poly_mul(&acc, g, ring), &[*c], ring);
    }
    acc
}

/// Remainder modulo a monic polynomial.
fn poly_rem_monic(mut a: Poly, m: &[PadicScalar]) -> Poly {
    let d = m.len() - 1;
    while a.len() > d {
        let top = a.len() - 1;
        let c = a[top];
        if !c.is_zero() {
            for k in 0..d {
                a[top - d + k] = a[top - d + k].sub(&c.mul(&m[k]));
            }
        }
        a.pop();
    }
    a
}

/// Determinant by dynamic programming over the set of used columns.
fn det_subsets<T: Clone>(
    m: &[Vec<T>],
    one: T,
    is_zero: impl Fn(&T) -> bool,
    mul: impl Fn(&T, &T) -> T,
    add: impl Fn(&T, &T) -> T,
    neg: impl Fn(&T) -> T,
) -> Option<T> {
    let d = m.len();
    let mut dp: Vec<Option<T>> = vec![None; 1 << d];
    dp[0] = Some(one);
    for mask in 0usize..(1 << d) {
        let Some(cur) = dp[mask].clone() else { continue };
        let r = mask.count_ones() as usize;
        if r == d {
            continue;
        }
        for c in 0..d {
            if mask & (1 << c) != 0 || is_zero(&m[r][c]) {
                continue;
            }
            let mut term = mul(&cur, &m[r][c]);
            if (mask >> (c + 1)).count_ones() % 2 == 1 {
                term = neg(&term);
            }
            let next = mask | (1 << c);
            dp[next] = Some(match &dp[next] {
                Some(v) => add(v, &term),
                None => term,
            });
        }
    }
    dp[(1 << d) - 1].clone()
}

/// Valuation normalized by `v(p) = 1`, or a lower bound when the element
/// vanishes to the working precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TowerVal {
    Exact(Q),
    AtLeast(Q),
}

impl TowerVal {
    pub fn lower(&self) -> Q {
        match self {
            TowerVal::Exact(v) | TowerVal::AtLeast(v) => *v,
        }
    }

    pub fn exact(&self) -> Option<Q> {
        match self {
            TowerVal::Exact(v) => Some(*v),
            TowerVal::AtLeast(_) => None,
        }
    }
}

impl fmt::Display for TowerVal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TowerVal::Exact(v) => write!(f, "{}", fmt_q(v)),
            TowerVal::AtLeast(v) => write!(f, ">={}", fmt_q(v)),
        }
    }
}

impl Serialize for TowerVal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TowerElement {
    level: usize,
    coeffs: Vec<PadicScalar>,
}

fn scalar_json(c: &PadicScalar) -> Value {
    let h = c.ring().h as usize;
    if h == 1 {
        json!(c.coeffs()[0])
    } else {
        json!(c.coeffs()[..h].to_vec())
    }
}

impl TowerElement {
    pub fn level(&self) -> usize {
        self.level
    }

    /// Coefficients of `1, u_j, u_j^2, ...`.
    pub fn coeffs(&self) -> &[PadicScalar] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(PadicScalar::is_zero)
    }

    pub fn to_json(&self) -> Value {
        json!({ "level": self.level, "coeffs": self.coeffs.iter().map(scalar_json).collect::<Vec<_>>() })
    }
}

/// Tower data computed once and shared read-only.
#[derive(Clone, Debug)]
pub struct Tower {
    spec: TowerSpec,
    ring: ScalarRing,
    rel: Poly,
    minpolys: Vec<Poly>,
}

impl Tower {
    pub fn new(spec: TowerSpec) -> Result<Self> {
        let ring = spec.scalars();
        let int = |v: i128| PadicScalar::from_int(ring, v);
        let p = spec.p as usize;
        let q = spec.q() as usize;
        let rel: Poly = match spec.kind {
            TowerKind::Cyclotomic => {
                let mut c = vec![int(0)];
                let mut b = 1i128;
                for k in 1..=p {
                    b = b * (p + 1 - k) as i128 / k as i128;
                    c.push(int(b));
                }
                c
            }
            TowerKind::LubinTate => {
                let mut c = vec![int(0); q + 1];
                c[1] = int(p as i128);
                c[q] = int(1);
                c
            }
        };
        let m0: Poly = rel[1..].to_vec();
        let mut iterate: Poly = vec![int(0), int(1)];
        let mut minpolys = Vec::with_capacity(spec.max_level + 1);
        for j in 0..=spec.max_level {
            let m = poly_compose(&m0, &iterate, ring);
            if m.len() != spec.degree(j) + 1 || m.last() != Some(&int(1)) {
                return Err(Error::Integrity(format!("minimal polynomial at level {j} is not monic of degree [K_j:K]")));
            }
            minpolys.push(m);
            iterate = poly_compose(&rel, &iterate, ring);
        }
        Ok(Tower { spec, ring, rel, minpolys })
    }

    pub fn spec(&self) -> &TowerSpec {
        &self.spec
    }

    pub fn scalars(&self) -> ScalarRing {
        self.ring
    }

    /// Coefficients of `rel(X)`.
    pub fn relation(&self) -> &[PadicScalar] {
        &self.rel
    }

    /// Coefficients of the minimal polynomial of `u_j` over `K`.
    pub fn minimal_polynomial(&self, j: usize) -> Result<&[PadicScalar]> {
        self.check_level(j)?;
        Ok(&self.minpolys[j])
    }

    fn check_level(&self, j: usize) -> Result<()> {
        if j > self.spec.max_level {
            return Err(Error::Parameter(format!("level {j} exceeds the tower height {}", self.spec.max_level)));
        }
        Ok(())
    }

    fn reduce(&self, level: usize, coeffs: Poly) -> TowerElement {
        let e = self.spec.degree(level);
        let mut c = poly_rem_monic(coeffs, &self.minpolys[level]);
        c.resize(e, PadicScalar::zero(self.ring));
        TowerElement { level, coeffs: c }
    }

    pub fn element(&self, level: usize, coeffs: &[PadicScalar]) -> Result<TowerElement> {
        self.check_level(level)?;
        if coeffs.iter().any(|c| c.ring() != self.ring) {
            return Err(Error::Parameter("coefficients live in a different scalar ring".into()));
        }
        Ok(self.reduce(level, coeffs.to_vec()))
    }

    pub fn from_ints(&self, level: usize, coeffs: &[i128]) -> Result<TowerElement> {
        let c: Poly = coeffs.iter().map(|&v| PadicScalar::from_int(self.ring, v)).collect();
        self.element(level, &c)
    }

    pub fn scalar(&self, level: usize, a: &PadicScalar) -> Result<TowerElement> {
        self.element(level, &[*a])
    }

    pub fn zero(&self, level: usize) -> Result<TowerElement> {
        self.element(level, &[])
    }

    pub fn one(&self, level: usize) -> Result<TowerElement> {
        self.from_ints(level, &[1])
    }

    pub fn uniformizer(&self, level: usize) -> Result<TowerElement> {
        self.from_ints(level, &[0, 1])
    }

    fn same_level(&self, a: &TowerElement, b: &TowerElement) -> Result<()> {
        if a.level != b.level {
            return Err(Error::Parameter(format!("levels {} and {} differ", a.level, b.level)));
        }
        Ok(())
    }

    pub fn add(&self, a: &TowerElement, b: &TowerElement) -> Result<TowerElement> {
        self.same_level(a, b)?;
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.add(y)).collect();
        Ok(TowerElement { level: a.level, coeffs })
    }

    pub fn sub(&self, a: &TowerElement, b: &TowerElement) -> Result<TowerElement> {
        self.same_level(a, b)?;
        let coeffs = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x.sub(y)).collect();
        Ok(TowerElement { level: a.level, coeffs })
    }

    pub fn neg(&self, a: &TowerElement) -> TowerElement {
        TowerElement { level: a.level, coeffs: a.coeffs.iter().map(PadicScalar::neg).collect() }
    }

    pub fn mul(&self, a: &TowerElement, b: &TowerElement) -> Result<TowerElement> {
        self.same_level(a, b)?;
        Ok(self.reduce(a.level, poly_mul(&a.coeffs, &b.coeffs, self.ring)))
    }

    pub fn scale(&self, a: &TowerElement, c: &PadicScalar) -> TowerElement {
        TowerElement { level: a.level, coeffs: a.coeffs.iter().map(|x| x.mul(c)).collect() }
    }

    pub fn pow(&self, a: &TowerElement, mut e: u64) -> Result<TowerElement> {
        let mut acc = self.one(a.level)?;
        let mut base = a.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    fn mul_u(&self, a: &TowerElement) -> TowerElement {
        let mut c = Vec::with_capacity(a.coeffs.len() + 1);
        c.push(PadicScalar::zero(self.ring));
        c.extend_from_slice(&a.coeffs);
        self.reduce(a.level, c)
    }

    /// `K_j → K_{j+1}` through `u_j = rel(u_{j+1})`.
    pub fn embed_up(&self, x: &TowerElement) -> Result<TowerElement> {
        let j = x.level + 1;
        self.check_level(j)?;
        let image = self.reduce(j, self.rel.clone());
        let mut acc = self.zero(j)?;
        for c in x.coeffs.iter().rev() {
            acc = self.mul(&acc, &image)?;
            acc.coeffs[0] = acc.coeffs[0].add(c);
        }
        Ok(acc)
    }

    pub fn embed(&self, x: &TowerElement, level: usize) -> Result<TowerElement> {
        if level < x.level {
            return Err(Error::Parameter(format!("cannot embed level {} into level {level}", x.level)));
        }
        let mut y = x.clone();
        while y.level < level {
            y = self.embed_up(&y)?;
        }
        Ok(y)
    }

    /// Reduction of `Σ c_d X^d` modulo `rel(X) − u_j` over level `j`.
    fn reduce_relative(&self, mut f: Vec<TowerElement>) -> Vec<TowerElement> {
        let q = self.spec.step_degree();
        while f.len() > q {
            let c = f.pop().expect("nonempty");
            if c.is_zero() {
                continue;
            }
            let base = f.len() - q;
            f[base] = self.add(&f[base], &self.mul_u(&c)).expect("same level");
            for k in 1..q {
                if !self.rel[k].is_zero() {
                    f[base + k] = self.sub(&f[base + k], &self.scale(&c, &self.rel[k])).expect("same level");
                }
            }
        }
        f
    }

    /// `Norm_{K_{j+1}/K_j}` as the determinant of multiplication by `y` on
    /// the basis `1, X, ..., X^{q−1}` of `K_j[X]/(rel(X) − u_j)`.
    pub fn norm(&self, y: &TowerElement) -> Result<TowerElement> {
        if y.level == 0 {
            return Err(Error::Parameter("level 0 has no lower tower level; use norm_to_base".into()));
        }
        self.check_level(y.level)?;
        let j = y.level - 1;
        let q = self.spec.step_degree();
        let lift = |c: &PadicScalar| self.reduce(j, vec![*c]);
        let mut col = self.reduce_relative(y.coeffs.iter().map(lift).collect());
        col.resize(q, self.zero(j)?);
        let mut cols = Vec::with_capacity(q);
        for _ in 0..q {
            let mut shifted = vec![self.zero(j)?];
            shifted.extend(col.iter().cloned());
            cols.push(col);
            col = self.reduce_relative(shifted);
            col.resize(q, self.zero(j)?);
        }
        let m: Vec<Vec<TowerElement>> = (0..q).map(|r| (0..q).map(|c| cols[c][r].clone()).collect()).collect();
        let det = det_subsets(
            &m,
            self.one(j)?,
            TowerElement::is_zero,
            |a, b| self.mul(a, b).expect("same level"),
            |a, b| self.add(a, b).expect("same level"),
            |a| self.neg(a),
        );
        Ok(det.unwrap_or_else(|| self.reduce(j, Vec::new())))
    }

    /// `Norm_{K_j/K_level}`.
    pub fn norm_to(&self, y: &TowerElement, level: usize) -> Result<TowerElement> {
        if level > y.level {
            return Err(Error::Parameter(format!("cannot take a norm from level {} to level {level}", y.level)));
        }
        let mut x = y.clone();
        while x.level > level {
            x = self.norm(&x)?;
        }
        Ok(x)
    }

    /// `Norm_{K_j/K}`.
    pub fn norm_to_base(&self, y: &TowerElement) -> Result<PadicScalar> {
        let x = self.norm_to(y, 0)?;
        let e = self.spec.degree(0);
        let mut cols: Vec<Poly> = Vec::with_capacity(e);
        let mut col = x.coeffs.clone();
        for _ in 0..e {
            let mut shifted = vec![PadicScalar::zero(self.ring)];
            shifted.extend_from_slice(&col);
            cols.push(col);
            col = self.reduce(0, shifted).coeffs;
        }
        let m: Vec<Poly> = (0..e).map(|r| (0..e).map(|c| cols[c][r]).collect()).collect();
        let det = det_subsets(
            &m,
            PadicScalar::one(self.ring),
            PadicScalar::is_zero,
            |a, b| a.mul(b),
            |a, b| a.add(b),
            |a| a.neg(),
        );
        Ok(det.unwrap_or_else(|| PadicScalar::zero(self.ring)))
    }

    /// `min_i (v_p(a_i) + i/[K_j:K])`, exact because `m_j` is Eisenstein.
    pub fn valuation(&self, x: &TowerElement) -> TowerVal {
        let e = self.spec.degree(x.level) as i64;
        let best = x
            .coeffs
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.val().exact().map(|v| Q::new(v as i64 * e + i as i64, e)))
            .min();
        match best {
            Some(v) => TowerVal::Exact(v),
            None => TowerVal::AtLeast(Q::from_integer(self.spec.precision as i64)),
        }
    }

    /// Uniformly random element of `𝔬_{K_j}/p^N`.
    pub fn random_element<R: Rng + ?Sized>(&self, level: usize, rng: &mut R) -> Result<TowerElement> {
        self.check_level(level)?;
        let m = self.ring.modulus();
        let h = self.ring.h as usize;
        let coeffs: Poly = (0..self.spec.degree(level))
            .map(|_| {
                let digits: Vec<i128> = (0..h).map(|_| rng.gen_range(0..m) as i128).collect();
                PadicScalar::from_coeffs(self.ring, &digits).expect("digits in range")
            })
            .collect();
        self.element(level, &coeffs)
    }
}

/// One step of the direct break computation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BreakCheck {
    pub step: usize,
    #[serde(serialize_with = "ser_q")]
    pub computed: Q,
    #[serde(serialize_with = "ser_q")]
    pub expected: Q,
    #[serde(serialize_with = "ser_q")]
    pub margin: Q,
}

fn ser_q<S: serde::Serializer>(q: &Q, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&fmt_q(q))
}

/// A liminf replaced by a minimum over the stated levels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CEstimate {
    pub value: Q,
    pub levels: (usize, usize),
}

impl CEstimate {
    pub fn to_json(&self) -> Value {
        json!({ "label": "ESTIMATE", "value": fmt_q(&self.value), "levels": [self.levels.0, self.levels.1] })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RamificationData {
    /// `i_j`, upper numbering.
    pub upper_breaks: Vec<Q>,
    /// `i'_j = ψ(i_j)`.
    pub lower_breaks: Vec<Q>,
    /// Breakpoints of `ψ` starting at `(−1, −1)`.
    pub psi: Vec<(Q, Q)>,
    /// `i(K_{j+1}/K_j)` for `j = 0, ..., J−1`.
    pub step_breaks: Vec<Q>,
    /// `[K_{j+1} : K_j]`.
    pub indices: Vec<u64>,
    pub c_estimate: CEstimate,
    pub crosscheck: Vec<BreakCheck>,
}

impl RamificationData {
    /// Slopes of `ψ` on consecutive segments.
    pub fn psi_slopes(&self) -> Vec<Q> {
        self.psi.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect()
    }

    /// `ψ(v)` for `v ≥ −1`, continued linearly past the last breakpoint.
    pub fn psi_at(&self, v: Q) -> Q {
        let slopes = self.psi_slopes();
        for (k, w) in self.psi.windows(2).enumerate() {
            if v <= w[1].0 {
                return w[0].1 + slopes[k] * (v - w[0].0);
            }
        }
        let (x, y) = *self.psi.last().expect("nonempty");
        y + *slopes.last().expect("nonempty") * Q::from_integer(self.indices[0] as i64) * (v - x)
    }

    pub fn to_json(&self) -> Value {
        let qs = |v: &[Q]| v.iter().map(fmt_q).collect::<Vec<_>>();
        json!({
            "breaks": qs(&self.upper_breaks),
            "lower_breaks": qs(&self.lower_breaks),
            "psi_breakpoints": self.psi.iter().map(|(x, y)| [fmt_q(x), fmt_q(y)]).collect::<Vec<_>>(),
            "step_breaks": qs(&self.step_breaks),
            "indices": self.indices,
            "c_estimate": self.c_estimate.to_json(),
            "crosscheck": self.crosscheck,
        })
    }
}

/// `γ(u_k)` for a generator `γ` of `Gal(K_k/K_{k−1})`, via `a = 1 + p^k`.
fn generator_image(tower: &Tower, k: usize) -> Result<TowerElement> {
    let spec = tower.spec();
    let u = tower.uniformizer(k)?;
    match spec.kind {
        TowerKind::Cyclotomic => {
            let one = tower.one(k)?;
            let w = tower.add(&one, &u)?;
            let big = tower.pow(&w, spec.p.pow(k as u32))?;
            tower.sub(&tower.mul(&w, &big)?, &one)
        }
        TowerKind::LubinTate => {
            let cap = spec.precision as usize * spec.degree(k);
            let a = PadicScalar::from_int(tower.scalars(), 1 + (spec.p as i128).pow(k as u32));
            let c = lt_coeffs(&a, cap, spec.precision)?;
            let mut acc = tower.zero(k)?;
            for ck in c.iter().rev() {
                acc = tower.mul(&acc, &u)?;
                acc.coeffs[0] = acc.coeffs[0].add(ck);
            }
            Ok(acc)
        }
    }
}

/// Largest `[K_k : K]·N` for which the direct break computation is run.
const CROSSCHECK_BUDGET: usize = 256;

/// Breaks from the unit filtration `G^v = 1 + p^{⌈v⌉}𝔬` of `Gal(K_∞/K)`,
/// cross-checked against `[K_k:K]·v(γ(u_k) − u_k) − 1` at low levels.
pub fn ramification_data(tower: &Tower) -> Result<RamificationData> {
    let spec = *tower.spec();
    let j_max = spec.max_level;
    if j_max < 2 {
        return Err(Error::Parameter("ramification data needs J >= 2".into()));
    }
    let q = spec.q() as i64;
    let qi = Q::from_integer;
    let upper_breaks: Vec<Q> = (0..=j_max).map(|j| qi(j as i64)).collect();
    // [G^0 : G^v] = (q−1) q^{k−1} on (k−1, k]
    let mut psi = vec![(qi(-1), qi(-1)), (qi(0), qi(0))];
    for k in 1..=j_max {
        let (x, y) = *psi.last().expect("nonempty");
        psi.push((x + 1, y + qi((q - 1) * q.pow(k as u32 - 1))));
    }
    let mut data = RamificationData {
        upper_breaks: upper_breaks.clone(),
        lower_breaks: Vec::new(),
        psi,
        step_breaks: Vec::new(),
        indices: vec![spec.q(); j_max],
        c_estimate: CEstimate { value: qi(0), levels: (0, 0) },
        crosscheck: Vec::new(),
    };
    data.lower_breaks = upper_breaks.iter().map(|&v| data.psi_at(v)).collect();
    // K_{j+1}/K_j has a single break, equal in both numberings
    data.step_breaks = data.lower_breaks[1..].to_vec();
    data.c_estimate = strict_apf_constant(&spec, &data, j_max)?;
    for k in 1..=j_max {
        if spec.degree(k) * spec.precision as usize > CROSSCHECK_BUDGET {
            break;
        }
        let u = tower.uniformizer(k)?;
        let diff = tower.sub(&generator_image(tower, k)?, &u)?;
        let v = tower.valuation(&diff).exact().ok_or_else(|| {
            Error::Precision(format!("γ(u_{k}) − u_{k} vanishes at the working precision"))
        })?;
        let computed = v * qi(spec.degree(k) as i64) - 1;
        let expected = data.step_breaks[k - 1];
        if computed != expected {
            return Err(Error::Integrity(format!(
                "break of K_{k}/K_{}: direct {} vs filtration {}",
                k - 1,
                fmt_q(&computed),
                fmt_q(&expected)
            )));
        }
        data.crosscheck.push(BreakCheck { step: k, computed, expected, margin: computed - expected });
    }
    Ok(data)
}

/// `min_{j<levels} (p−1)/p · i(K_{j+1}/K_j)/[K_{j+1}:K_0]`.
pub fn strict_apf_constant(spec: &TowerSpec, data: &RamificationData, levels: usize) -> Result<CEstimate> {
    if levels < 1 || levels > data.step_breaks.len() {
        return Err(Error::Parameter(format!("need 1 <= levels <= {}", data.step_breaks.len())));
    }
    let p = spec.p as i64;
    let q = spec.q() as i64;
    let value = (0..levels)
        .map(|j| Q::new(p - 1, p) * data.step_breaks[j] / Q::from_integer(q.pow(j as u32 + 1)))
        .min()
        .expect("nonempty");
    if value <= Q::from_integer(0) {
        return Err(Error::Integrity("strict APF estimate is not positive".into()));
    }
    Ok(CEstimate { value, levels: (0, levels - 1) })
}

fn margin_of(v: TowerVal, bound: Q, zero: bool) -> (Valuation, Status) {
    match v {
        TowerVal::Exact(x) => (Valuation::Finite(x - bound), Status::from_bool(x >= bound)),
        TowerVal::AtLeast(n) if zero && n >= bound => (Valuation::Infinity, Status::Pass),
        TowerVal::AtLeast(_) => (Valuation::Infinity, Status::Inconclusive),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport {
    pub level: usize,
    pub value: TowerVal,
    pub bound: Q,
    pub margin: Valuation,
    pub status: Status,
}

impl DefectReport {
    pub fn to_json(&self) -> Value {
        json!({ "level": self.level, "value": self.value, "bound": fmt_q(&self.bound),
                "margin": self.margin, "status": self.status })
    }
}

/// `v(Norm(y) − y^{[K_{j+1}:K_j]})` against `p/(p−1)·c`.
pub fn norm_defect_check(tower: &Tower, y: &TowerElement, c: Q) -> Result<DefectReport> {
    let p = tower.spec().p as i64;
    let n = tower.embed_up(&tower.norm(y)?)?;
    let d = tower.sub(&n, &tower.pow(y, tower.spec().q())?)?;
    let value = tower.valuation(&d);
    let bound = Q::new(p, p - 1) * c;
    let (margin, status) = margin_of(value, bound, d.is_zero());
    Ok(DefectReport { level: y.level, value, bound, margin, status })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiftReport {
    pub y: TowerElement,
    pub defect: TowerVal,
    pub bound: Q,
    pub margin: Valuation,
    pub perturbed: bool,
    pub status: Status,
}

impl LiftReport {
    pub fn to_json(&self) -> Value {
        json!({ "y": self.y.to_json(), "defect": self.defect, "bound": fmt_q(&self.bound),
                "margin": self.margin, "perturbed": self.perturbed, "status": self.status })
    }
}

/// `Σ [ā_i] u_{j+1}^i` for `x = Σ a_i u_j^i`.
fn teichmuller_transport(tower: &Tower, x: &TowerElement, stride: usize, root: bool) -> Result<TowerElement> {
    let ring = tower.scalars();
    let mut c = vec![PadicScalar::zero(ring); x.coeffs.len() * stride];
    for (i, a) in x.coeffs.iter().enumerate() {
        let r = a.residue();
        let r = if root { r.pth_root() } else { r };
        c[i * stride] = teichmuller_lift(ring, &r);
    }
    tower.element(x.level + 1, &c)
}

/// `y ∈ K_{j+1}` with `v(Norm(y) − x) ≥ c`, searching small perturbations of
/// the Teichmüller transport if needed.
pub fn approx_norm_lift(tower: &Tower, x: &TowerElement, c: Q) -> Result<LiftReport> {
    let defect = |y: &TowerElement| -> Result<(TowerVal, bool)> {
        let d = tower.sub(&tower.norm(y)?, x)?;
        Ok((tower.valuation(&d), d.is_zero()))
    };
    let y0 = teichmuller_transport(tower, x, 1, false)?;
    let (v0, z0) = defect(&y0)?;
    let (m0, s0) = margin_of(v0, c, z0);
    if s0.is_pass() {
        return Ok(LiftReport { y: y0, defect: v0, bound: c, margin: m0, perturbed: false, status: s0 });
    }
    let level = x.level + 1;
    for k in 0..tower.spec().degree(level) {
        for t in 1..tower.spec().p as i128 {
            let mut c_k = vec![PadicScalar::zero(tower.scalars()); k + 1];
            c_k[k] = PadicScalar::from_int(tower.scalars(), t);
            let y = tower.add(&y0, &tower.element(level, &c_k)?)?;
            let (v, z) = defect(&y)?;
            let (m, s) = margin_of(v, c, z);
            if s.is_pass() {
                return Ok(LiftReport { y, defect: v, bound: c, margin: m, perturbed: true, status: s });
            }
        }
    }
    Err(Error::NotFound(format!("no lift reached defect {} at level {level} (best {v0})", fmt_q(&c))))
}

/// Compatible components `(x_j)` with `Norm(x_{j+1}) ≈ x_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormFieldElement {
    pub comps: Vec<TowerElement>,
    /// `v(Norm(x_{j+1}) − x_j)`.
    pub defects: Vec<TowerVal>,
}

impl NormFieldElement {
    pub fn from_components(tower: &Tower, comps: Vec<TowerElement>) -> Result<Self> {
        if comps.is_empty() || comps.iter().enumerate().any(|(j, x)| x.level != j) {
            return Err(Error::Parameter("components must sit at levels 0, 1, ...".into()));
        }
        let mut defects = Vec::with_capacity(comps.len() - 1);
        for j in 0..comps.len() - 1 {
            defects.push(tower.valuation(&tower.sub(&tower.norm(&comps[j + 1])?, &comps[j])?));
        }
        Ok(NormFieldElement { comps, defects })
    }

    /// The system of norms of a top-level element.
    pub fn from_top(tower: &Tower, top: &TowerElement) -> Result<Self> {
        let mut comps = vec![top.clone()];
        while comps.last().expect("nonempty").level > 0 {
            let next = tower.norm(comps.last().expect("nonempty"))?;
            comps.push(next);
        }
        comps.reverse();
        Self::from_components(tower, comps)
    }

    pub fn top_level(&self) -> usize {
        self.comps.len() - 1
    }

    pub fn to_json(&self) -> Value {
        json!({ "levels": self.comps.iter().map(TowerElement::to_json).collect::<Vec<_>>(),
                "defects": self.defects })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormFieldOp {
    Add,
    Mul,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormFieldResult {
    pub element: NormFieldElement,
    /// Per level, `v(S_d − S_{d−1})` for `d = 1, 2, ...`.
    pub stabilization: Vec<Vec<TowerVal>>,
}

impl NormFieldResult {
    pub fn to_json(&self) -> Value {
        json!({ "element": self.element.to_json(), "stabilization": self.stabilization })
    }
}

fn increasing(log: &[TowerVal]) -> bool {
    log.windows(2).all(|w| match (w[0], w[1]) {
        (_, TowerVal::AtLeast(_)) => true,
        (TowerVal::Exact(a), TowerVal::Exact(b)) => b > a,
        (TowerVal::AtLeast(_), TowerVal::Exact(_)) => false,
    })
}

/// Sum or product in the imperfect norm field. The sum at level `j` is
/// `S_d = Norm^d(x_{j+d} + y_{j+d})` with `d = min(depth, J − j)`.
pub fn norm_field_arith(
    tower: &Tower,
    a: &NormFieldElement,
    b: &NormFieldElement,
    op: NormFieldOp,
    depth: usize,
) -> Result<NormFieldResult> {
    if depth < 1 {
        return Err(Error::Parameter("depth must be at least 1".into()));
    }
    let top = a.top_level().min(b.top_level());
    let mut comps = Vec::with_capacity(top + 1);
    let mut stabilization = Vec::with_capacity(top + 1);
    for j in 0..=top {
        match op {
            NormFieldOp::Mul => {
                comps.push(tower.mul(&a.comps[j], &b.comps[j])?);
                stabilization.push(Vec::new());
            }
            NormFieldOp::Add => {
                let dmax = depth.min(top - j);
                let mut prev = tower.add(&a.comps[j], &b.comps[j])?;
                let mut log = Vec::with_capacity(dmax);
                for d in 1..=dmax {
                    let s = tower.norm_to(&tower.add(&a.comps[j + d], &b.comps[j + d])?, j)?;
                    log.push(tower.valuation(&tower.sub(&s, &prev)?));
                    prev = s;
                }
                if !increasing(&log) {
                    let shown: Vec<String> = log.iter().map(ToString::to_string).collect();
                    return Err(Error::Precision(format!(
                        "norm-field sum at level {j} does not stabilize: [{}]",
                        shown.join(", ")
                    )));
                }
                comps.push(prev);
                stabilization.push(log);
            }
        }
    }
    Ok(NormFieldResult { element: NormFieldElement::from_components(tower, comps)?, stabilization })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurjectivityReport {
    pub level: usize,
    pub t_val: Q,
    pub samples: usize,
    pub successes: usize,
    pub failures: Vec<String>,
    pub status: Status,
}

impl SurjectivityReport {
    pub fn to_json(&self) -> Value {
        json!({ "level": self.level, "t_val": fmt_q(&self.t_val), "samples": self.samples,
                "successes": self.successes, "failures": self.failures, "status": self.status })
    }
}

/// `ȳ ∈ K_{j+1}` with `ȳ^p ≡ x̄`: Teichmüller `p`-th roots of the residues
/// placed on `u_{j+1}^{i q/p}`.
pub fn frobenius_root_candidate(tower: &Tower, x: &TowerElement) -> Result<TowerElement> {
    let stride = (tower.spec().q() / tower.spec().p) as usize;
    teichmuller_transport(tower, x, stride, true)
}

/// Valuation of `ȳ^p − x̄` in `K_{j+1}`.
pub fn frobenius_root_defect(tower: &Tower, x: &TowerElement) -> Result<(TowerElement, TowerVal)> {
    let y = frobenius_root_candidate(tower, x)?;
    let d = tower.sub(&tower.pow(&y, tower.spec().p)?, &tower.embed_up(x)?)?;
    Ok((y, tower.valuation(&d)))
}

/// Frobenius surjectivity on `𝔬/(t)` with `v(t) = t_val`, sampled at level `j`.
pub fn perfectoid_surjectivity_check<R: Rng + ?Sized>(
    tower: &Tower,
    level: usize,
    t_val: Q,
    samples: usize,
    rng: &mut R,
) -> Result<SurjectivityReport> {
    let mut successes = 0;
    let mut failures = Vec::new();
    for i in 0..samples {
        let x = tower.random_element(level, rng)?;
        let (_, v) = frobenius_root_defect(tower, &x)?;
        if v.lower() >= t_val {
            successes += 1;
        } else {
            failures.push(format!("sample {i}: v(y^p − x) = {v}"));
        }
    }
    let status = Status::from_bool(failures.is_empty());
    Ok(SurjectivityReport { level, t_val, samples, successes, failures, status })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cyc3() -> Tower {
        Tower::new(TowerSpec::cyclotomic(3, 3, 4).unwrap()).unwrap()
    }

    #[test]
    fn minimal_polynomials() {
        let t = cyc3();
        // Φ_9(1+X) = X^6 + 6X^5 + 15X^4 + 21X^3 + 18X^2 + 9X + 3
        let want = [3, 9, 18, 21, 15, 6, 1];
        let want: Vec<PadicScalar> = want.iter().map(|&w| PadicScalar::from_int(t.scalars(), w)).collect();
        assert_eq!(t.minimal_polynomial(1).unwrap(), &want[..]);
        let lt = Tower::new(TowerSpec::lubin_tate(2, 2, 2, 4).unwrap()).unwrap();
        assert_eq!(lt.minimal_polynomial(0).unwrap().len(), 4);
        assert_eq!(lt.minimal_polynomial(2).unwrap().len(), 3 * 16 + 1);
    }

    #[test]
    fn norm_examples() {
        let t = cyc3();
        for j in 0..3 {
            let u = t.uniformizer(j + 1).unwrap();
            assert_eq!(t.norm(&u).unwrap(), t.uniformizer(j).unwrap());
            let w = t.add(&t.one(j + 1).unwrap(), &u).unwrap();
            assert_eq!(t.norm(&w).unwrap(), t.from_ints(j, &[1, 1]).unwrap());
            let c = t.from_ints(j + 1, &[5]).unwrap();
            assert_eq!(t.norm(&c).unwrap(), t.from_ints(j, &[125]).unwrap());
        }
        assert!(t.norm(&t.one(0).unwrap()).is_err());
        assert!(t.uniformizer(4).is_err());
        assert_eq!(t.norm_to_base(&t.uniformizer(0).unwrap()).unwrap(), PadicScalar::from_int(t.scalars(), 3));
    }

    #[test]
    fn valuation_examples() {
        let t = cyc3();
        let p = t.from_ints(2, &[3]).unwrap();
        assert_eq!(t.valuation(&p), TowerVal::Exact(Q::from_integer(1)));
        assert_eq!(t.valuation(&t.uniformizer(0).unwrap()), TowerVal::Exact(Q::new(1, 2)));
        assert_eq!(t.valuation(&t.uniformizer(1).unwrap()), TowerVal::Exact(Q::new(1, 6)));
        assert_eq!(t.valuation(&t.zero(1).unwrap()), TowerVal::AtLeast(Q::from_integer(4)));
    }

    #[test]
    fn ramification_cyclotomic() {
        let t = cyc3();
        let d = ramification_data(&t).unwrap();
        let qi = Q::from_integer;
        assert_eq!(d.upper_breaks, vec![qi(0), qi(1), qi(2), qi(3)]);
        assert_eq!(d.lower_breaks, vec![qi(0), qi(2), qi(8), qi(26)]);
        assert_eq!(d.indices, vec![3, 3, 3]);
        assert_eq!(d.c_estimate.value, Q::new(4, 9));
        assert_eq!(d.crosscheck.len(), 3);
        assert!(d.crosscheck.iter().all(|c| c.margin == qi(0)));
        assert!(ramification_data(&Tower::new(TowerSpec::cyclotomic(3, 1, 4).unwrap()).unwrap()).is_err());
    }

    #[test]
    fn ramification_lubin_tate() {
        let t = Tower::new(TowerSpec::lubin_tate(2, 2, 2, 4).unwrap()).unwrap();
        let d = ramification_data(&t).unwrap();
        assert_eq!(d.step_breaks, vec![Q::from_integer(3), Q::from_integer(15)]);
        assert_eq!(d.c_estimate.value, Q::new(3, 8));
        assert!(!d.crosscheck.is_empty());
    }

    #[test]
    fn defects_and_lifts() {
        let t = cyc3();
        let c = ramification_data(&t).unwrap().c_estimate.value;
        let s = norm_defect_check(&t, &t.from_ints(2, &[7]).unwrap(), c).unwrap();
        assert_eq!(s.margin, Valuation::Infinity);
        let u = norm_defect_check(&t, &t.uniformizer(2).unwrap(), c).unwrap();
        // u_1 − u_2^3 = 3u_2 + 3u_2^2
        assert_eq!(u.value, TowerVal::Exact(Q::new(19, 18)));
        assert!(u.status.is_pass());
        let lift = approx_norm_lift(&t, &t.uniformizer(1).unwrap(), c).unwrap();
        assert_eq!(lift.y, t.uniformizer(2).unwrap());
        assert_eq!(lift.margin, Valuation::Infinity);
        let one = approx_norm_lift(&t, &t.one(1).unwrap(), c).unwrap();
        assert_eq!(one.y, t.one(2).unwrap());
        let zeta = t.from_ints(1, &[0, -1]).unwrap();
        let lz = approx_norm_lift(&t, &zeta, c).unwrap();
        assert_eq!(lz.y, t.from_ints(2, &[0, -1]).unwrap());
        assert!(lz.status.is_pass());
    }

    #[test]
    fn norm_field_sums() {
        let t = cyc3();
        let u = NormFieldElement::from_top(&t, &t.uniformizer(3).unwrap()).unwrap();
        let one = NormFieldElement::from_top(&t, &t.one(3).unwrap()).unwrap();
        assert_eq!(u.comps[1], t.uniformizer(1).unwrap());
        let zero = NormFieldElement::from_top(&t, &t.zero(3).unwrap()).unwrap();
        let s = norm_field_arith(&t, &u, &zero, NormFieldOp::Add, 2).unwrap();
        assert_eq!(s.element.comps, u.comps);
        let sq = norm_field_arith(&t, &u, &u, NormFieldOp::Mul, 1).unwrap();
        assert_eq!(sq.element.comps[2], t.pow(&t.uniformizer(2).unwrap(), 2).unwrap());
        let sum = norm_field_arith(&t, &u, &one, NormFieldOp::Add, 2).unwrap();
        let direct = t.norm_to(&t.add(&t.uniformizer(2).unwrap(), &t.one(2).unwrap()).unwrap(), 0).unwrap();
        assert_eq!(sum.element.comps[0], direct);
        assert_eq!(sum.stabilization[0].len(), 2);
    }

    #[test]
    fn surjectivity() {
        let t = cyc3();
        let c = ramification_data(&t).unwrap().c_estimate.value;
        let (y, _) = frobenius_root_defect(&t, &t.zero(1).unwrap()).unwrap();
        assert!(y.is_zero());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = perfectoid_surjectivity_check(&t, 1, c, 20, &mut rng).unwrap();
        assert_eq!(r.successes, 20, "{:?}", r.failures);
    }

    #[test]
    fn random_sweeps() {
        let towers = [cyc3(), Tower::new(TowerSpec::lubin_tate(2, 2, 2, 4).unwrap()).unwrap()];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for t in &towers {
            let c = ramification_data(t).unwrap().c_estimate.value;
            for level in 1..t.spec().max_level {
                for _ in 0..50 {
                    let y = t.random_element(level + 1, &mut rng).unwrap();
                    let r = norm_defect_check(t, &y, c).unwrap();
                    assert!(r.status.is_pass(), "{:?} level {level}: {}", t.spec().kind, r.value);
                    let x = t.random_element(level, &mut rng).unwrap();
                    let l = approx_norm_lift(t, &x, c).unwrap();
                    assert!(l.status.is_pass());
                }
            }
        }
    }
}
