//! Idempotent lifting by Newton iteration, the projections `Π_S` splitting
//! `φ^{-n}(ℛ)` over `ℛ`, and the integral-unit criterion.

use std::collections::BTreeMap;
use std::fmt;

use num::{Signed, Zero};
use serde::Serialize;
use serde_json::{json, Value};

use crate::actions::{binomials_mod, ActionKind, ActionSpec};
use crate::error::{Error, Result};
use crate::scalars::{fmt_q, PadicScalar, Valuation, Q};
use crate::series::{DaggerSeries, GaussValue, RingDescriptor, Window, MAX_GEOMETRIC_TERMS};
use crate::status::Status;

/// Square matrix of series over a common descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectorMatrix {
    d: usize,
    entries: Vec<DaggerSeries>,
}

/// Caps every positive-weight variable at weighted degree `cap`.
pub fn cap_weighted(x: &DaggerSeries, cap: i64) -> DaggerSeries {
    let ring = x.ring();
    let mut out = x.clone();
    for (i, w) in ring.weights.iter().enumerate() {
        if w.is_positive() {
            let c = (Q::from_integer(cap * ring.frac_den) / w).floor().to_integer();
            out = out.with_cap(i, c);
        }
    }
    out
}

impl ProjectorMatrix {
    pub fn new(d: usize, entries: Vec<DaggerSeries>) -> Result<Self> {
        if d == 0 || entries.len() != d * d {
            return Err(Error::Parameter(format!("expected {} entries for a {d}×{d} matrix", d * d)));
        }
        if entries.iter().any(|e| e.ring() != entries[0].ring()) {
            return Err(Error::Parameter("matrix entries live over different rings".into()));
        }
        Ok(ProjectorMatrix { d, entries })
    }

    pub fn identity(ring: &RingDescriptor, d: usize) -> Self {
        let entries = (0..d * d)
            .map(|k| if k / d == k % d { DaggerSeries::one(ring) } else { DaggerSeries::zero(ring) })
            .collect();
        ProjectorMatrix { d, entries }
    }

    pub fn scalar(x: DaggerSeries) -> Self {
        ProjectorMatrix { d: 1, entries: vec![x] }
    }

    pub fn size(&self) -> usize {
        self.d
    }

    pub fn ring(&self) -> &RingDescriptor {
        self.entries[0].ring()
    }

    pub fn get(&self, i: usize, j: usize) -> &DaggerSeries {
        &self.entries[i * self.d + j]
    }

    fn zip(&self, o: &Self, f: impl Fn(&DaggerSeries, &DaggerSeries) -> DaggerSeries) -> Self {
        ProjectorMatrix { d: self.d, entries: self.entries.iter().zip(&o.entries).map(|(a, b)| f(a, b)).collect() }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.add(b))
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a.sub(b))
    }

    pub fn scale_int(&self, k: i128) -> Self {
        ProjectorMatrix { d: self.d, entries: self.entries.iter().map(|e| e.scale_int(k)).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let d = self.d;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = self.get(i, 0).mul(o.get(0, j));
                for k in 1..d {
                    acc = acc.add(&self.get(i, k).mul(o.get(k, j)));
                }
                entries.push(acc);
            }
        }
        ProjectorMatrix { d, entries }
    }

    pub fn cap(&self, cap: i64) -> Self {
        ProjectorMatrix { d: self.d, entries: self.entries.iter().map(|e| cap_weighted(e, cap)).collect() }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(DaggerSeries::is_zero)
    }

    /// Entry-wise sup norm, certified against every entry's dropped bound.
    pub fn norm(&self, r: Q) -> Result<GaussValue> {
        let mut value = Valuation::Infinity;
        let mut bound = Valuation::Infinity;
        for e in &self.entries {
            value = value.min(e.gauss_norm(r)?.value);
            bound = bound.min(e.dropped_bound(r));
        }
        Ok(GaussValue { r, value, certified: !value.is_infinite() && value < bound })
    }

    pub fn agrees_with(&self, o: &Self) -> bool {
        self.d == o.d && self.entries.iter().zip(&o.entries).all(|(a, b)| a.agrees_with(b))
    }

    pub fn to_json(&self) -> Value {
        json!({ "size": self.d, "entries": self.entries.iter().map(|e| e.to_json()).collect::<Vec<_>>() })
    }
}

/// Result of the idempotent iteration with `(step, v_r(W_l² − W_l))` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonResult {
    pub w: ProjectorMatrix,
    pub log: Vec<(usize, Valuation)>,
}

impl NewtonResult {
    pub fn log_json(&self) -> Value {
        Value::Array(self.log.iter().map(|(s, v)| json!([s, v])).collect())
    }
}

/// Iterates `W ↦ 3W² − 2W³` from `V` until `W² = W` within the window.
///
/// Each step must satisfy `v(W'² − W') ≥ 2 v(W² − W) + min(0, 2 v(W))`, the
/// valuation form of `W'² − W' = (W² − W)²(4W² − 4W − 3)`.
pub fn newton_idempotent(v: &ProjectorMatrix, r: Q, max_iter: usize, cap: i64) -> Result<NewtonResult> {
    let mut w = v.cap(cap);
    let mut log = Vec::new();
    let mut prev: Option<(Valuation, Valuation)> = None;
    for step in 0..=max_iter {
        let w2 = w.mul(&w).cap(cap);
        let defect = w2.sub(&w);
        if defect.is_zero() {
            log.push((step, Valuation::Infinity));
            return Ok(NewtonResult { w, log });
        }
        let g = defect.norm(r)?;
        log.push((step, g.value));
        if step == 0 && (!g.certified || g.value <= Valuation::int(0)) {
            return Err(Error::Divergence {
                step: 0,
                detail: format!("v_r(V² − V) = {} is not certified positive", g.value),
            });
        }
        if let Some((pv, wv)) = prev {
            let slack = wv.scale(Q::from_integer(2)).min(Valuation::int(0));
            if g.certified && g.value < pv.scale(Q::from_integer(2)) + slack {
                return Err(Error::Divergence {
                    step,
                    detail: format!("defect {} after {}: not contracting", g.value, pv),
                });
            }
        }
        if step == max_iter {
            break;
        }
        prev = Some((g.value, w.norm(r)?.value));
        let w3 = w2.mul(&w).cap(cap);
        w = w2.scale_int(3).sub(&w3.scale_int(2)).cap(cap);
    }
    Err(Error::Divergence { step: max_iter, detail: "iteration limit reached".into() })
}

/// Inverts `U` by the geometric series in `1 − U`, given `v_t(U − 1) > 0`
/// certified at `t = s` and `t = r`.
pub fn unit_criterion(u: &ProjectorMatrix, r: Q, s: Q, cap: i64) -> Result<ProjectorMatrix> {
    let id = ProjectorMatrix::identity(u.ring(), u.d);
    let small = u.sub(&id);
    if !small.is_zero() {
        for t in [s, r] {
            let g = small.norm(t)?;
            if !g.certified || g.value <= Valuation::int(0) {
                return Err(Error::NotInvertible(format!(
                    "|U − 1| at radius {} has valuation {} (certified: {})",
                    fmt_q(&t),
                    g.value,
                    g.certified
                )));
            }
        }
    }
    let step = small.scale_int(-1);
    let mut term = id.clone();
    let mut acc = id;
    for _ in 0..MAX_GEOMETRIC_TERMS {
        term = term.mul(&step).cap(cap);
        if term.is_zero() {
            return Ok(acc);
        }
        acc = acc.add(&term);
    }
    Err(Error::InsufficientWindow("geometric series did not terminate".into()))
}

/// Basis element of `ℛ` over `φ(ℛ)`, indexed by per-variable exponents `j < k_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisElement {
    pub index: Vec<i64>,
    pub element: DaggerSeries,
}

/// Per-variable degree of `φ` modulo `p` (exponent numerators scale by this).
fn phi_degree(spec: &ActionSpec) -> i64 {
    spec.q() as i64
}

/// `{(1+π)^{j_0} T^j}` for the cyclotomic lift, monomials `x^j` otherwise;
/// `j_i < q` in each variable.
pub fn phi_inverse_basis(spec: &ActionSpec) -> Result<Vec<BasisElement>> {
    let ring = &spec.ring;
    let k = phi_degree(spec);
    let nv = ring.nvars();
    let mut out = Vec::new();
    let total = (k as usize).pow(nv as u32);
    for code in 0..total {
        let mut idx = vec![0i64; nv];
        let mut c = code;
        for i in (0..nv).rev() {
            idx[i] = (c % k as usize) as i64;
            c /= k as usize;
        }
        out.push(BasisElement { element: basis_series(spec, &idx)?, index: idx });
    }
    Ok(out)
}

fn basis_series(spec: &ActionSpec, idx: &[i64]) -> Result<DaggerSeries> {
    let ring = &spec.ring;
    let one = PadicScalar::one(ring.scalars);
    match spec.kind {
        ActionKind::CyclotomicAb => {
            let mut e = idx.to_vec();
            e[0] = 0;
            let rest = DaggerSeries::monomial(ring, e, one)?;
            let shift = DaggerSeries::var(ring, 0).add(&DaggerSeries::one(ring));
            Ok(shift.pow(idx[0] as u32).mul(&rest))
        }
        _ => DaggerSeries::monomial(ring, idx.to_vec(), one),
    }
}

/// Writes `x = Σ_b φ(x_b)·b` over `phi_inverse_basis`, returning the `x_b`
/// in basis order.
///
/// Digit by digit: modulo `p` the lift is `y ↦ y^q` up to the coefficient
/// Frobenius, so each monomial splits as `(c' m')^q · m_j`; the residual after
/// subtracting `φ(y_j)·m_j` is divisible by the next power of `p`.
pub fn phi_decompose(spec: &ActionSpec, x: &DaggerSeries) -> Result<Vec<DaggerSeries>> {
    if *x.ring() != spec.ring {
        return Err(Error::Parameter("series ring does not match the action".into()));
    }
    let ring = &spec.ring;
    let nv = ring.nvars();
    let n = ring.precision();
    let k = phi_degree(spec);
    let p = ring.p();
    let sigma_root = spec.kind != ActionKind::LubinTateBerger;
    let mut residual = x.clone();
    let mut comps: BTreeMap<Vec<i64>, DaggerSeries> = BTreeMap::new();
    for level in 0..n {
        if residual.is_zero() {
            break;
        }
        let digit = residual.div_p_pow(level)?.reduce_mod_p();
        let w = residual.window();
        let win = Window {
            lo: w.lo.iter().map(|l| l.div_euclid(k)).collect(),
            hi: w.hi.iter().map(|h| h.map(|h| (h + 1).div_euclid(k) - 1)).collect(),
        };
        if win.hi.iter().zip(&win.lo).any(|(h, l)| h.map_or(false, |h| h < *l)) {
            return Err(Error::InsufficientWindow(
                "window too small to close the decomposition".into(),
            ));
        }
        let mut parts: BTreeMap<Vec<i64>, Vec<(Vec<i64>, PadicScalar)>> = BTreeMap::new();
        let pk = PadicScalar::from_int(ring.scalars, p as i128).pow(level as u64);
        for (e, c) in digit.terms() {
            let j: Vec<i64> = e.iter().map(|v| v.rem_euclid(k)).collect();
            let e2: Vec<i64> = e.iter().map(|v| v.div_euclid(k)).collect();
            let c = if sigma_root { c.pth_root() } else { *c };
            let coeffs: Vec<i128> = c.coeffs().iter().map(|v| *v as i128).collect();
            let lift = PadicScalar::from_coeffs(ring.scalars, &coeffs)?.mul(&pk);
            parts.entry(j).or_default().push((e2, lift));
        }
        for (j, terms) in parts {
            let terms: Vec<_> = terms.into_iter().filter(|(e, _)| win.contains_hi(e)).collect();
            let lo: Vec<i64> = (0..nv).map(|i| terms.iter().map(|(e, _)| e[i]).min().unwrap_or(0).min(win.lo[i])).collect();
            let y = DaggerSeries::from_parts(ring, terms, Window { lo, hi: win.hi.clone() })?;
            let m = DaggerSeries::monomial(ring, j.clone(), PadicScalar::one(ring.scalars))?;
            residual = residual.sub(&spec.apply_phi(&y)?.mul(&m));
            let slot = comps.entry(j).or_insert_with(|| DaggerSeries::zero(ring));
            *slot = slot.add(&y);
        }
    }
    if !residual.is_zero() {
        return Err(Error::Integrity(format!("decomposition left a residual: {residual}")));
    }
    let basis = phi_inverse_basis(spec)?;
    let get = |idx: &[i64]| comps.get(idx).cloned().unwrap_or_else(|| DaggerSeries::zero(ring));
    if spec.kind != ActionKind::CyclotomicAb {
        return Ok(basis.iter().map(|b| get(&b.index)).collect());
    }
    // π^j = Σ_{i ≤ j} C(j, i)(−1)^{j−i}(1+π)^i, with integer (hence φ-invariant) coefficients
    let mut out = Vec::with_capacity(basis.len());
    for b in &basis {
        let i = b.index[0];
        let mut acc = DaggerSeries::zero(ring);
        for j in i..k {
            let mut idx = b.index.clone();
            idx[0] = j;
            let c = binomials_mod(j as i128, i as u32, p, n)[i as usize];
            let sign = if (j - i) % 2 == 0 { 1 } else { -1 };
            acc = acc.add(&get(&idx).scale_int(c * sign));
        }
        out.push(acc);
    }
    Ok(out)
}

/// `Σ_b φ(x_b)·b`.
pub fn phi_reconstruct(spec: &ActionSpec, comps: &[DaggerSeries]) -> Result<DaggerSeries> {
    let basis = phi_inverse_basis(spec)?;
    let mut acc = DaggerSeries::zero(&spec.ring);
    for (c, b) in comps.iter().zip(&basis) {
        acc = acc.add(&spec.apply_phi(c)?.mul(&b.element));
    }
    Ok(acc)
}

/// A string `s_1 … s_l` over `{0, …, m}` not ending in 0.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProjectionIndex(Vec<usize>);

impl ProjectionIndex {
    pub fn new(symbols: Vec<usize>) -> Result<Self> {
        if symbols.last() == Some(&0) {
            return Err(Error::Parameter("projection strings may not end in 0".into()));
        }
        Ok(ProjectionIndex(symbols))
    }

    pub fn empty() -> Self {
        ProjectionIndex(Vec::new())
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of a full-depth string, with trailing zeros stripped.
    fn from_full(mut s: Vec<usize>) -> Self {
        while s.last() == Some(&0) {
            s.pop();
        }
        ProjectionIndex(s)
    }
}

impl fmt::Display for ProjectionIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "[{}]", s.join(","))
    }
}

/// `Π_S(φ^{-n}(x))` for `x ∈ ℛ`: zero when `n < |S|`, otherwise peel one
/// level per symbol, starting from `s_n`.
pub fn projection_pi(spec: &ActionSpec, x: &DaggerSeries, n: usize, s: &ProjectionIndex) -> Result<DaggerSeries> {
    if n < s.len() {
        return Ok(DaggerSeries::zero(&spec.ring));
    }
    let mut cur = x.clone();
    for i in (1..=n).rev() {
        let sym = s.0.get(i - 1).copied().unwrap_or(0);
        let comps = phi_decompose(spec, &cur)?;
        cur = comps
            .get(sym)
            .cloned()
            .ok_or_else(|| Error::Parameter(format!("symbol {sym} outside the alphabet")))?;
    }
    Ok(cur)
}

/// Every `Π_S(φ^{-n}(x))` with `|S| ≤ n`, one decomposition per tree node.
pub fn projection_tree(spec: &ActionSpec, x: &DaggerSeries, n: usize) -> Result<BTreeMap<ProjectionIndex, DaggerSeries>> {
    // full strings s_1..s_n built from s_n downwards
    let mut level: Vec<(Vec<usize>, DaggerSeries)> = vec![(vec![0; n], x.clone())];
    for i in (1..=n).rev() {
        let mut next = Vec::new();
        for (s, cur) in level {
            for (sym, c) in phi_decompose(spec, &cur)?.into_iter().enumerate() {
                let mut s2 = s.clone();
                s2[i - 1] = sym;
                next.push((s2, c));
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(s, c)| (ProjectionIndex::from_full(s), c)).collect())
}

/// `Σ_S φ^n(Π_S) · Π_i φ^{n−i}(b_{s_i})`, which must return `x`.
pub fn reconstruct_from_projections(
    spec: &ActionSpec,
    parts: &BTreeMap<ProjectionIndex, DaggerSeries>,
    n: usize,
) -> Result<DaggerSeries> {
    let basis = phi_inverse_basis(spec)?;
    let phi_pow = |y: &DaggerSeries, k: usize| -> Result<DaggerSeries> {
        (0..k).try_fold(y.clone(), |acc, _| spec.apply_phi(&acc))
    };
    let mut acc = DaggerSeries::zero(&spec.ring);
    for (s, c) in parts {
        let mut term = phi_pow(c, n)?;
        for i in 1..=n {
            let sym = s.0.get(i - 1).copied().unwrap_or(0);
            term = term.mul(&phi_pow(&basis[sym].element, n - i)?);
        }
        acc = acc.add(&term);
    }
    Ok(acc)
}

/// Two-sided comparison of `v_r(y)` for `y = φ^{-n}(x)` with `min_S v_r(Π_S y)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SplittingReport {
    pub depth: usize,
    pub element: Valuation,
    pub projections: Valuation,
    /// Smallest `log_p c` with `|v_proj − v_elem| ≤ r·log_p c`; `None` when
    /// both sides are infinite.
    #[serde(serialize_with = "ser_opt_q")]
    pub c_val: Option<Q>,
    pub status: Status,
}

fn ser_opt_q<S: serde::Serializer>(q: &Option<Q>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match q {
        Some(q) => s.serialize_str(&fmt_q(q)),
        None => s.serialize_none(),
    }
}

/// `v_r(φ^{-n}(x)) = v_{r/q^n}(x)`, against the projections at radius `r`.
pub fn splitting_norm_check(spec: &ActionSpec, x: &DaggerSeries, n: usize, r: Q) -> Result<SplittingReport> {
    let qn = Q::from_integer(spec.q() as i64).pow(n as i32);
    let elem = x.gauss_norm(r / qn)?;
    let parts = projection_tree(spec, x, n)?;
    let mut value = Valuation::Infinity;
    let mut certified = true;
    for c in parts.values() {
        let g = c.gauss_norm(r)?;
        if !c.is_zero() && !g.certified {
            certified = false;
        }
        value = value.min(g.value);
    }
    let c_val = match (elem.value, value) {
        (Valuation::Infinity, Valuation::Infinity) => None,
        (Valuation::Finite(a), Valuation::Finite(b)) => Some((a - b).abs() / r),
        _ => Some(Q::from_integer(i64::MAX)),
    };
    let status = if x.is_zero() {
        Status::Pass
    } else if !(elem.certified && certified) {
        Status::Inconclusive
    } else {
        Status::from_bool(c_val.map_or(true, |c| c < Q::from_integer(i64::MAX)))
    };
    Ok(SplittingReport { depth: n, element: elem.value, projections: value, c_val, status })
}

/// Uniform constant across a sample: `c_0` from depth 1, checked against the
/// growth bound `c_n ≤ c_0^{1 + 1/q + … + q^{1−n}}` at deeper levels.
pub fn uniform_splitting_constant(reports: &[SplittingReport], q: u64) -> (Option<Q>, Status) {
    let mut by_depth: BTreeMap<usize, Q> = BTreeMap::new();
    for rep in reports {
        if rep.status != Status::Pass {
            return (None, if rep.status == Status::Fail { Status::Fail } else { Status::Inconclusive });
        }
        if let Some(c) = rep.c_val {
            let e = by_depth.entry(rep.depth).or_insert_with(Q::zero);
            *e = (*e).max(c);
        }
    }
    let c0 = by_depth.get(&1).copied().or_else(|| by_depth.get(&0).copied()).unwrap_or_else(Q::zero);
    let qq = Q::from_integer(q as i64);
    let cap = c0 * qq / (qq - Q::from_integer(1));
    let ok = by_depth.iter().all(|(&n, &c)| {
        let growth: Q = (0..n.max(1)).map(|i| Q::from_integer(1) / qq.pow(i as i32)).sum();
        c <= c0 * growth && c <= cap.max(c0)
    });
    let uniform = by_depth.values().copied().max();
    (uniform, Status::from_bool(ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalars::ScalarRing;

    fn sr(p: u64, h: u32, n: u32) -> ScalarRing {
        ScalarRing::new(p, h, n).unwrap()
    }

    fn scalar_matrix(ring: &RingDescriptor, v: i128) -> ProjectorMatrix {
        ProjectorMatrix::scalar(DaggerSeries::int(ring, v))
    }

    /// Exact integer Newton oracle modulo `m`.
    fn newton_oracle(mut w: i128, m: i128, steps: usize) -> i128 {
        for _ in 0..steps {
            w = (3 * w * w - 2 * w * w * w).rem_euclid(m);
        }
        w
    }

    #[test]
    fn newton_scalar_examples() {
        let ring = RingDescriptor::standard(sr(3, 1, 5), 0, 0);
        let res = newton_idempotent(&scalar_matrix(&ring, 4), Q::new(1, 2), 16, 8).unwrap();
        assert_eq!(res.w.get(0, 0).constant_coeff().to_signed(), 1);
        assert_eq!(newton_oracle(4, 243, 2), 1);
        assert_eq!(res.log[0].1, Valuation::int(1));
        assert_eq!(res.log[1].1, Valuation::int(4));
        let res = newton_idempotent(&scalar_matrix(&ring, 3), Q::new(1, 2), 16, 8).unwrap();
        assert!(res.w.get(0, 0).is_zero());
        let id = newton_idempotent(&scalar_matrix(&ring, 1), Q::new(1, 2), 16, 8).unwrap();
        assert_eq!(id.log, vec![(0, Valuation::Infinity)]);
        assert!(matches!(
            newton_idempotent(&scalar_matrix(&ring, 2), Q::new(1, 2), 16, 8),
            Err(Error::Divergence { step: 0, .. })
        ));
    }

    #[test]
    fn newton_matrix_example() {
        let ring = RingDescriptor::standard(sr(2, 1, 6), 0, 0);
        let e = |s: &str| DaggerSeries::parse(&ring, s).unwrap();
        let v = ProjectorMatrix::new(2, vec![e("1 + 2*pi"), e("2"), e("pi^2"), e("4")]).unwrap();
        let res = newton_idempotent(&v, Q::new(1, 2), 32, 12).unwrap();
        assert!(res.w.mul(&res.w).cap(12).sub(&res.w).is_zero());
    }

    #[test]
    fn unit_criterion_examples() {
        let ring = RingDescriptor::standard(sr(3, 1, 4), 0, 0);
        let e = |s: &str| DaggerSeries::parse(&ring, s).unwrap();
        let id = ProjectorMatrix::identity(&ring, 2);
        assert_eq!(unit_criterion(&id, Q::new(1, 1), Q::new(1, 2), 16).unwrap(), id);
        let u = ProjectorMatrix::new(2, vec![e("1 + 3*pi"), e("3"), e("9*pi^2"), e("1")]).unwrap();
        let v = unit_criterion(&u, Q::new(1, 1), Q::new(1, 2), 16).unwrap();
        assert!(u.mul(&v).cap(16).agrees_with(&id));
        let off = ProjectorMatrix::new(2, vec![e("1"), e("3*pi^-1"), e("0"), e("1")]).unwrap();
        assert!(matches!(unit_criterion(&off, Q::new(1, 1), Q::new(1, 2), 16), Err(Error::NotInvertible(_))));
        let v = unit_criterion(&off, Q::new(3, 4), Q::new(1, 2), 16).unwrap();
        assert!(off.mul(&v).agrees_with(&id));
        assert!(v.mul(&off).agrees_with(&id));
    }

    #[test]
    fn basis_examples() {
        let ab0 = ActionSpec::ab(sr(2, 1, 3), 0, 16).unwrap();
        let b = phi_inverse_basis(&ab0).unwrap();
        assert_eq!(b.len(), 2);
        assert!(b[1].element.same_terms(&DaggerSeries::parse(&ab0.ring, "1 + pi").unwrap()));
        let ab1 = ActionSpec::ab(sr(2, 1, 3), 1, 16).unwrap();
        assert_eq!(phi_inverse_basis(&ab1).unwrap().len(), 4);
        let lt = ActionSpec::berger(sr(3, 1, 3), 16).unwrap();
        let b = phi_inverse_basis(&lt).unwrap();
        assert_eq!(b.len(), 3);
        for s in ["pi^5", "pi^-4 + 2*pi", "1 + pi + pi^2 + pi^3"] {
            let x = DaggerSeries::parse(&lt.ring, s).unwrap();
            let comps = phi_decompose(&lt, &x).unwrap();
            assert!(phi_reconstruct(&lt, &comps).unwrap().agrees_with(&x), "{s}");
        }
    }

    #[test]
    fn decompose_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 3), 0, 16).unwrap();
        let e = |s: &str| DaggerSeries::parse(&ab.ring, s).unwrap();
        let c = phi_decompose(&ab, &e("1 + pi")).unwrap();
        assert!(c[0].is_zero());
        assert!(c[1].same_terms(&e("1")));
        let c = phi_decompose(&ab, &e("pi")).unwrap();
        assert!(c[0].same_terms(&e("-1")));
        assert!(c[1].same_terms(&e("1")));
        let y = e("pi^-3 + 2*pi^2 + 1");
        let c = phi_decompose(&ab, &ab.apply_phi(&y).unwrap()).unwrap();
        assert!(c[0].same_terms(&y));
        assert!(c[1].is_zero());
        let ab1 = ActionSpec::ab(sr(3, 2, 3), 1, 16).unwrap();
        let x = DaggerSeries::parse(&ab1.ring, "g*pi^4*T1^-2 + 3*T1 + pi^-1 + g^2*pi*T1^5").unwrap();
        let comps = phi_decompose(&ab1, &x).unwrap();
        assert!(phi_reconstruct(&ab1, &comps).unwrap().agrees_with(&x));
    }

    #[test]
    fn projection_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 3), 0, 16).unwrap();
        let e = |s: &str| DaggerSeries::parse(&ab.ring, s).unwrap();
        let x = e("pi^2 + 3*pi^-1");
        assert!(projection_pi(&ab, &x, 0, &ProjectionIndex::empty()).unwrap().same_terms(&x));
        assert!(projection_pi(&ab, &x, 0, &ProjectionIndex::new(vec![1]).unwrap()).unwrap().is_zero());
        // n = 1, x = φ^{-1}(π): the components of π
        let pi = e("pi");
        assert!(projection_pi(&ab, &pi, 1, &ProjectionIndex::empty()).unwrap().same_terms(&e("-1")));
        assert!(projection_pi(&ab, &pi, 1, &ProjectionIndex::new(vec![1]).unwrap()).unwrap().same_terms(&e("1")));
        assert!(ProjectionIndex::new(vec![1, 0]).is_err());
        for n in 0..=2 {
            let parts = projection_tree(&ab, &x, n).unwrap();
            assert_eq!(parts.len(), 1 << n);
            assert!(reconstruct_from_projections(&ab, &parts, n).unwrap().agrees_with(&x), "n={n}");
        }
    }

    #[test]
    fn splitting_examples() {
        let ab = ActionSpec::ab(sr(2, 1, 4), 0, 16).unwrap();
        let e = |s: &str| DaggerSeries::parse(&ab.ring, s).unwrap();
        let r = Q::new(1, 4);
        let rep = splitting_norm_check(&ab, &e("pi + 2*pi^-1"), 0, r).unwrap();
        assert_eq!(rep.c_val, Some(Q::zero()));
        let zero = splitting_norm_check(&ab, &e("0"), 1, r).unwrap();
        assert_eq!((zero.element, zero.projections), (Valuation::Infinity, Valuation::Infinity));
        let rep = splitting_norm_check(&ab, &e("1 + pi"), 1, r).unwrap();
        // φ^{-1}(1+π) has r-valuation 0; its only projection is 1
        assert_eq!(rep.element, Valuation::int(0));
        assert_eq!(rep.projections, Valuation::int(0));
        let rep = splitting_norm_check(&ab, &e("pi"), 1, r).unwrap();
        assert_eq!(rep.element, Valuation::Finite(Q::new(1, 8)));
        assert_eq!(rep.projections, Valuation::int(0));
        assert_eq!(rep.c_val, Some(Q::new(1, 2)));
    }
}
