//! Degrees, ranks and slopes of φ-modules given by matrices, standard pure
//! modules, and a one-sided étale witness.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::actions::ActionSpec;
use crate::descent::{unit_criterion, ProjectorMatrix};
use crate::error::{Error, Result};
use crate::scalars::{fmt_q, ScalarVal, Valuation, Q};
use crate::series::{DaggerSeries, RingDescriptor};

/// `φ(e_j) = p^a Σ_i F_{ij} e_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhiModuleMatrix {
    pub f: ProjectorMatrix,
    pub twist: i64,
}

/// Index of the first nonvanishing Teichmüller digit: the largest `k` with
/// `p^k | x`, or `AtLeast(N)` for zero.
pub fn w_valuation(x: &DaggerSeries) -> ScalarVal {
    let n = x.ring().precision();
    let mut best: Option<u32> = None;
    for (_, c) in x.terms() {
        if let ScalarVal::Exact(v) = c.val() {
            best = Some(best.map_or(v, |b| b.min(v)));
        }
    }
    match best {
        Some(v) => ScalarVal::Exact(v),
        None => ScalarVal::AtLeast(n),
    }
}

/// Determinant of the minor on `rows × cols` by expansion along the first row,
/// skipping zero entries.
fn minor_det(m: &ProjectorMatrix, rows: &[usize], cols: &[usize]) -> DaggerSeries {
    let ring = m.ring();
    if rows.is_empty() {
        return DaggerSeries::one(ring);
    }
    let r0 = rows[0];
    let rest: Vec<usize> = rows[1..].to_vec();
    let mut acc = DaggerSeries::zero(ring);
    for (k, &c) in cols.iter().enumerate() {
        let e = m.get(r0, c);
        if e.is_zero() && e.window().hi.iter().all(Option::is_none) {
            continue;
        }
        let sub_cols: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let term = e.mul(&minor_det(m, &rest, &sub_cols));
        acc = if k % 2 == 0 { acc.add(&term) } else { acc.sub(&term) };
    }
    acc
}

pub fn determinant(m: &ProjectorMatrix) -> DaggerSeries {
    let idx: Vec<usize> = (0..m.size()).collect();
    minor_det(m, &idx, &idx)
}

/// Transposed cofactor matrix.
pub fn adjugate(m: &ProjectorMatrix) -> ProjectorMatrix {
    let d = m.size();
    let ring = m.ring();
    if d == 1 {
        return ProjectorMatrix::identity(ring, 1);
    }
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            // adj_{ij} = (−1)^{i+j} det(minor without row j, column i)
            let rows: Vec<usize> = (0..d).filter(|&x| x != j).collect();
            let cols: Vec<usize> = (0..d).filter(|&x| x != i).collect();
            let c = minor_det(m, &rows, &cols);
            entries.push(if (i + j) % 2 == 0 { c } else { c.neg() });
        }
    }
    ProjectorMatrix::new(d, entries).expect("square")
}

impl PhiModuleMatrix {
    pub fn new(f: ProjectorMatrix, twist: i64) -> Self {
        PhiModuleMatrix { f, twist }
    }

    pub fn rank(&self) -> usize {
        self.f.size()
    }

    pub fn identity(ring: &RingDescriptor, d: usize) -> Self {
        PhiModuleMatrix { f: ProjectorMatrix::identity(ring, d), twist: 0 }
    }

    /// Block direct sum; the common twist is the smaller one.
    pub fn direct_sum(&self, o: &Self) -> Result<Self> {
        if self.f.ring() != o.f.ring() {
            return Err(Error::Parameter("summands live over different rings".into()));
        }
        let ring = self.f.ring();
        let a = self.twist.min(o.twist);
        let p = ring.p() as i128;
        let (d1, d2) = (self.rank(), o.rank());
        let d = d1 + d2;
        let s1 = p.pow((self.twist - a) as u32);
        let s2 = p.pow((o.twist - a) as u32);
        let mut entries = vec![DaggerSeries::zero(ring); d * d];
        for i in 0..d1 {
            for j in 0..d1 {
                entries[i * d + j] = self.f.get(i, j).scale_int(s1);
            }
        }
        for i in 0..d2 {
            for j in 0..d2 {
                entries[(d1 + i) * d + d1 + j] = o.f.get(i, j).scale_int(s2);
            }
        }
        Ok(PhiModuleMatrix { f: ProjectorMatrix::new(d, entries)?, twist: a })
    }

    /// Tensor product of rank-one modules.
    pub fn tensor_rank_one(&self, o: &Self) -> Result<Self> {
        if self.rank() != 1 || o.rank() != 1 {
            return Err(Error::Parameter("tensor products are implemented for rank one only".into()));
        }
        Ok(PhiModuleMatrix { f: self.f.mul(&o.f), twist: self.twist + o.twist })
    }

    /// `F ↦ B^{-1} F φ(B)` for an invertible `B` with known inverse.
    pub fn change_basis(&self, spec: &ActionSpec, b: &ProjectorMatrix, b_inv: &ProjectorMatrix) -> Result<Self> {
        let d = b.size();
        let mut phi_b = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                phi_b.push(spec.apply_phi(b.get(i, j))?);
            }
        }
        let phi_b = ProjectorMatrix::new(d, phi_b)?;
        Ok(PhiModuleMatrix { f: b_inv.mul(&self.f).mul(&phi_b), twist: self.twist })
    }

    pub fn to_json(&self) -> Value {
        json!({ "rank": self.rank(), "twist": self.twist, "matrix": self.f.to_json() })
    }
}

/// `w(det F) + a·d`.
pub fn degree(m: &PhiModuleMatrix) -> Result<i64> {
    let det = determinant(&m.f);
    match w_valuation(&det) {
        ScalarVal::Exact(v) => Ok(v as i64 + m.twist * m.rank() as i64),
        ScalarVal::AtLeast(n) => Err(Error::Precision(format!("determinant vanishes modulo p^{n}"))),
    }
}

/// Cyclic basis with `φ(e_i) = e_{i+1}` and `φ(e_d) = p^c e_1`; the power of
/// `p` is split as twist `⌊c/d⌋` and corner `p^{c mod d}`.
pub fn pure_standard(ring: &RingDescriptor, c: i64, d: usize) -> Result<PhiModuleMatrix> {
    if d == 0 {
        return Err(Error::Parameter("rank must be positive".into()));
    }
    let a = c.div_euclid(d as i64);
    let corner = (c - a * d as i64) as u32;
    if corner >= ring.precision() {
        return Err(Error::Precision(format!("p^{corner} vanishes at precision {}", ring.precision())));
    }
    let mut entries = vec![DaggerSeries::zero(ring); d * d];
    for j in 0..d - 1 {
        entries[(j + 1) * d + j] = DaggerSeries::one(ring);
    }
    entries[d - 1] = DaggerSeries::int(ring, (ring.p() as i128).pow(corner));
    Ok(PhiModuleMatrix { f: ProjectorMatrix::new(d, entries)?, twist: a })
}

/// Sorted slopes with multiplicities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlopePolygon {
    pub slopes: Vec<(Q, usize)>,
}

impl SlopePolygon {
    pub fn rank(&self) -> usize {
        self.slopes.iter().map(|(_, m)| m).sum()
    }

    pub fn degree(&self) -> Q {
        self.slopes.iter().map(|(s, m)| *s * Q::from_integer(*m as i64)).sum()
    }

    /// `[(numerator, denominator, multiplicity)]`.
    pub fn to_json(&self) -> Value {
        Value::Array(self.slopes.iter().map(|(s, m)| json!([s.numer(), s.denom(), m])).collect())
    }
}

impl Serialize for SlopePolygon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

/// Polygon of `⊕ pure_standard(c_i, d_i)`.
pub fn polygon_of_standard_sum(parts: &[(i64, usize)]) -> Result<SlopePolygon> {
    let mut merged: BTreeMap<Q, usize> = BTreeMap::new();
    for &(c, d) in parts {
        if d == 0 {
            return Err(Error::Parameter("rank must be positive".into()));
        }
        *merged.entry(Q::new(c, d as i64)).or_insert(0) += d;
    }
    Ok(SlopePolygon { slopes: merged.into_iter().collect() })
}

/// Least precision at which `det` of `⊕ pure_standard(c_i, d_i)` survives: its
/// valuation is `Σ c_i − a_min Σ d_i` once every block is rescaled to the
/// smallest twist `a_min`.
pub fn standard_sum_precision(parts: &[(i64, usize)]) -> u32 {
    let a_min = parts.iter().map(|&(c, d)| c.div_euclid(d.max(1) as i64)).min().unwrap_or(0);
    let v: i64 = parts.iter().map(|&(c, d)| c - a_min * d as i64).sum();
    (v + 1).max(1) as u32
}

/// Outcome of the étale witness search.
#[derive(Clone, Debug, PartialEq)]
pub struct EtaleWitness {
    pub witnessed: bool,
    pub degree: i64,
    pub reason: String,
    pub inverse: Option<ProjectorMatrix>,
}

impl EtaleWitness {
    pub fn verdict(&self) -> &'static str {
        if self.witnessed {
            "etale-witnessed"
        } else {
            "no witness found"
        }
    }

    pub fn to_json(&self) -> Value {
        json!({ "verdict": self.verdict(), "degree": self.degree, "reason": self.reason })
    }
}

/// `p^a F` as an integral matrix, if it is one.
fn integral_matrix(m: &PhiModuleMatrix) -> Option<ProjectorMatrix> {
    let d = m.rank();
    let mut entries = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            let e = m.f.get(i, j);
            let e = if m.twist >= 0 {
                e.scale_int((e.ring().p() as i128).pow(m.twist as u32))
            } else {
                let k = (-m.twist) as u32;
                if !e.divisible_by_p_pow(k) {
                    return None;
                }
                e.div_p_pow(k).ok()?.with_precision(e.ring().precision()).ok()?
            };
            entries.push(e);
        }
    }
    ProjectorMatrix::new(d, entries).ok()
}

/// Inverse of `G` through `adj(G)/det(G)` when the determinant is a unit
/// monomial, falling back to the unit criterion.
fn invert(g: &ProjectorMatrix, radii: &[Q], cap: i64) -> Option<ProjectorMatrix> {
    let det = determinant(g);
    if det.num_terms() == 1 {
        let (e, c) = det.terms().next().map(|(e, c)| (e.clone(), *c))?;
        if c.is_unit() {
            let inv_c = c.inverse().ok()?;
            let neg: Vec<i64> = e.iter().map(|x| -x).collect();
            let adj = adjugate(g);
            let d = g.size();
            let mut entries = Vec::with_capacity(d * d);
            for i in 0..d {
                for j in 0..d {
                    entries.push(adj.get(i, j).shift(&neg).scale(&inv_c));
                }
            }
            return ProjectorMatrix::new(d, entries).ok();
        }
    }
    let r = *radii.iter().max()?;
    let s = *radii.iter().min()?;
    unit_criterion(g, r, s, cap).ok()
}

fn entries_bounded(m: &ProjectorMatrix, radii: &[Q]) -> Result<bool> {
    let d = m.size();
    for i in 0..d {
        for j in 0..d {
            let e = m.get(i, j);
            for &t in radii {
                let g = e.gauss_norm(t)?;
                let floor = e.dropped_bound(t);
                if g.value < Valuation::int(0) || (!g.certified && !e.is_zero() && floor < Valuation::int(0)) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Sufficient condition for étaleness: degree 0, and `p^a F` and its inverse
/// have integral entries of Gauss norm at most 1 at every sampled radius.
pub fn etale_witness(m: &PhiModuleMatrix, radii: &[Q], cap: i64) -> Result<EtaleWitness> {
    let deg = degree(m)?;
    let no = |reason: String| EtaleWitness { witnessed: false, degree: deg, reason, inverse: None };
    if deg != 0 {
        return Ok(no(format!("degree {deg} is not 0")));
    }
    let Some(g) = integral_matrix(m) else {
        return Ok(no("twisted matrix is not integral".into()));
    };
    let Some(inv) = invert(&g, radii, cap) else {
        return Ok(no("no integral inverse found".into()));
    };
    let id = ProjectorMatrix::identity(g.ring(), g.size());
    if !g.mul(&inv).cap(cap).agrees_with(&id) {
        return Ok(no("candidate inverse failed the product check".into()));
    }
    for (name, mat) in [("matrix", &g), ("inverse", &inv)] {
        if !entries_bounded(mat, radii)? {
            let rs: Vec<String> = radii.iter().map(fmt_q).collect();
            return Ok(no(format!("{name} has an entry of norm > 1 at radii {}", rs.join(", "))));
        }
    }
    Ok(EtaleWitness { witnessed: true, degree: deg, reason: "integral with integral inverse".into(), inverse: Some(inv) })
}

/// Default radii for the witness.
pub fn default_radii() -> Vec<Q> {
    vec![Q::new(1, 8), Q::new(1, 4), Q::new(1, 2)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::Zero;
    use crate::scalars::ScalarRing;

    fn ring() -> RingDescriptor {
        RingDescriptor::standard(ScalarRing::new(3, 1, 5).unwrap(), 1, 0)
    }

    fn e(s: &str) -> DaggerSeries {
        DaggerSeries::parse(&ring(), s).unwrap()
    }

    #[test]
    fn w_examples() {
        assert_eq!(w_valuation(&e("3")), ScalarVal::Exact(1));
        assert_eq!(w_valuation(&e("pi")), ScalarVal::Exact(0));
        assert_eq!(w_valuation(&e("3 + pi")), ScalarVal::Exact(0));
        assert_eq!(w_valuation(&e("9*pi^-2 + 27")), ScalarVal::Exact(2));
        assert_eq!(w_valuation(&e("0")), ScalarVal::AtLeast(5));
    }

    #[test]
    fn degree_examples() {
        let r = ring();
        assert_eq!(degree(&PhiModuleMatrix::identity(&r, 3)).unwrap(), 0);
        for d in 1..=4usize {
            for c in -3..=3i64 {
                let m = pure_standard(&r, c, d).unwrap();
                assert_eq!(m.rank(), d);
                assert_eq!(degree(&m).unwrap(), c, "c={c} d={d}");
            }
        }
        let a = pure_standard(&r, 1, 2).unwrap();
        let b = pure_standard(&r, -2, 3).unwrap();
        assert_eq!(degree(&a.direct_sum(&b).unwrap()).unwrap(), -1);
        let x = pure_standard(&r, 2, 1).unwrap();
        let y = pure_standard(&r, -1, 1).unwrap();
        assert_eq!(degree(&x.tensor_rank_one(&y).unwrap()).unwrap(), 1);
    }

    #[test]
    fn companion_shape() {
        let m = pure_standard(&ring(), 1, 2).unwrap();
        assert!(m.f.get(0, 1).same_terms(&e("3")));
        assert!(m.f.get(1, 0).same_terms(&e("1")));
        assert!(determinant(&m.f).same_terms(&e("-3")));
        assert!(pure_standard(&ring(), 1, 0).is_err());
    }

    #[test]
    fn polygon_examples() {
        let p = polygon_of_standard_sum(&[(0, 1)]).unwrap();
        assert_eq!(p.slopes, vec![(Q::zero(), 1)]);
        let p = polygon_of_standard_sum(&[(1, 2), (0, 1)]).unwrap();
        assert_eq!(p.slopes, vec![(Q::zero(), 1), (Q::new(1, 2), 2)]);
        assert_eq!(p.degree(), Q::from_integer(1));
        assert_eq!(p.rank(), 3);
        assert_eq!(p.to_json(), json!([[0, 1, 1], [1, 2, 2]]));
    }

    #[test]
    fn block_sum_precision() {
        let parts = [(-2, 1), (2, 2)];
        // twists -2 and 1: the second block picks up p^3 per entry
        assert_eq!(standard_sum_precision(&parts), 7);
        let sum = |n: u32| -> Result<i64> {
            let r = RingDescriptor::standard(ScalarRing::new(3, 1, n).unwrap(), 1, 0);
            degree(&pure_standard(&r, -2, 1)?.direct_sum(&pure_standard(&r, 2, 2)?)?)
        };
        assert!(matches!(sum(5), Err(Error::Precision(_))));
        assert_eq!(sum(7).unwrap(), 0);
        assert_eq!(standard_sum_precision(&[(0, 3)]), 1);
    }

    #[test]
    fn basis_change_keeps_degree() {
        let r = ring();
        let spec = ActionSpec::ab(r.scalars, 1, 16).unwrap();
        let m = pure_standard(&r, 2, 2).unwrap();
        let b = ProjectorMatrix::new(2, vec![e("1"), e("pi + T1"), e("0"), e("1")]).unwrap();
        let b_inv = ProjectorMatrix::new(2, vec![e("1"), e("-pi - T1"), e("0"), e("1")]).unwrap();
        let changed = m.change_basis(&spec, &b, &b_inv).unwrap();
        assert_eq!(degree(&changed).unwrap(), 2);
    }

    #[test]
    fn etale_examples() {
        let r = ring();
        let radii = default_radii();
        let id = etale_witness(&PhiModuleMatrix::identity(&r, 2), &radii, 16).unwrap();
        assert!(id.witnessed);
        let p = etale_witness(&pure_standard(&r, 1, 1).unwrap(), &radii, 16).unwrap();
        assert!(!p.witnessed);
        assert_eq!(p.degree, 1);
        for d in 1..=4 {
            assert!(etale_witness(&pure_standard(&r, 0, d).unwrap(), &radii, 16).unwrap().witnessed);
        }
        let f = ProjectorMatrix::new(2, vec![e("1 + 3*pi"), e("3*T1"), e("9"), e("1")]).unwrap();
        let w = etale_witness(&PhiModuleMatrix::new(f.clone(), 0), &radii, 24).unwrap();
        assert!(w.witnessed, "{}", w.reason);
        let inv = w.inverse.unwrap();
        assert!(f.mul(&inv).cap(24).agrees_with(&ProjectorMatrix::identity(&r, 2)));
    }
}
