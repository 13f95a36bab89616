use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use robba_lab::actions::ActionSpec;
use robba_lab::apf::{ramification_data, Tower, TowerSpec, TowerVal};
use robba_lab::descent::phi_decompose;
use robba_lab::scalars::{PadicScalar, ScalarRing, Valuation, Q};
use robba_lab::series::{DaggerSeries, RingDescriptor};
use robba_lab::slopes::{degree, polygon_of_standard_sum, pure_standard, standard_sum_precision};
use robba_lab::suite::{random_char_p, random_series};
use robba_lab::witt::{perfect_descriptor, teichmuller, witt_arith, witt_norm, WittOp, WittVector};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn prime() -> impl Strategy<Value = u64> {
    prop::sample::select(vec![2u64, 3])
}

fn radius() -> impl Strategy<Value = Q> {
    prop::sample::select(vec![Q::new(1, 8), Q::new(1, 4), Q::new(1, 2), Q::new(1, 1)])
}

fn witt_ring(p: u64, len: u32) -> RingDescriptor {
    let base = RingDescriptor::standard(ScalarRing::new(p, 1, len).unwrap(), 1, 0);
    perfect_descriptor(&base).unwrap()
}

fn witt_vector(ring: &RingDescriptor, len: u32, r: &mut ChaCha8Rng) -> WittVector {
    use rand::Rng;
    WittVector::new((0..len).map(|n| { let k = r.gen_range(0..=if n == 0 { 2 } else { 1 }); random_char_p(ring, r, k) }).collect())
        .unwrap()
}

fn same(a: &WittVector, b: &WittVector) -> bool {
    a.coords().iter().zip(b.coords()).all(|(x, y)| x.same_terms(y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gauss_norm_multiplicative_and_ultrametric(seed in any::<u64>(), p in prime(), r in radius()) {
        let ring = RingDescriptor::standard(ScalarRing::new(p, 1, 6).unwrap(), 1, 0);
        let mut g = rng(seed);
        let (x, y) = (random_series(&ring, &mut g, 3, (-2, 3)), random_series(&ring, &mut g, 3, (-2, 3)));
        let (vx, vy) = (x.gauss_norm(r).unwrap(), y.gauss_norm(r).unwrap());
        let vxy = x.mul(&y).gauss_norm(r).unwrap();
        prop_assert!(vx.certified && vy.certified && vxy.certified);
        prop_assert_eq!(vxy.value, vx.value + vy.value);
        let vs = x.add(&y).gauss_norm(r).unwrap();
        prop_assume!(vs.certified);
        prop_assert!(vs.value >= vx.value.min(vy.value));
    }

    #[test]
    fn frobenius_commutes_with_group(seed in any::<u64>(), p in prime(), a in 1i128..50, b in 0i128..50) {
        prop_assume!(a % p as i128 != 0);
        let spec = ActionSpec::ab(ScalarRing::new(p, 1, 4).unwrap(), 1, 16).unwrap();
        let x = random_series(&spec.ring, &mut rng(seed), 2, (0, 2));
        let g = spec.ab_element(a, vec![b]).unwrap();
        let lhs = spec.apply_phi(&spec.apply_gamma(&g, &x).unwrap()).unwrap();
        let rhs = spec.apply_gamma(&g, &spec.apply_phi(&x).unwrap()).unwrap();
        prop_assert!(lhs.agrees_with(&rhs), "{} vs {}", lhs, rhs);
    }

    #[test]
    fn projection_inverts_frobenius(seed in any::<u64>(), p in prime()) {
        let spec = ActionSpec::ab(ScalarRing::new(p, 1, 4).unwrap(), 1, 16).unwrap();
        let y = random_series(&spec.ring, &mut rng(seed), 3, (-1, 2));
        let comps = phi_decompose(&spec, &spec.apply_phi(&y).unwrap()).unwrap();
        prop_assert!(comps[0].agrees_with(&y));
        prop_assert!(comps[1..].iter().all(DaggerSeries::is_zero));
    }

    #[test]
    fn slope_polygon_bookkeeping(parts in prop::collection::vec((-3i64..=3, 1usize..=3), 1..4)) {
        let poly = polygon_of_standard_sum(&parts).unwrap();
        prop_assert_eq!(poly.rank(), parts.iter().map(|(_, d)| d).sum::<usize>());
        prop_assert_eq!(poly.degree(), Q::from_integer(parts.iter().map(|(c, _)| c).sum::<i64>()));
        prop_assert!(poly.slopes.windows(2).all(|w| w[0].0 < w[1].0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn witt_ring_axioms(seed in any::<u64>(), p in prime()) {
        let len = 3;
        let ring = witt_ring(p, len);
        let mut g = rng(seed);
        let (a, b, c) = (witt_vector(&ring, len, &mut g), witt_vector(&ring, len, &mut g), witt_vector(&ring, len, &mut g));
        let add = |x: &WittVector, y: &WittVector| witt_arith(x, y, WittOp::Add).unwrap();
        let mul = |x: &WittVector, y: &WittVector| witt_arith(x, y, WittOp::Mul).unwrap();
        prop_assert!(same(&add(&a, &b), &add(&b, &a)));
        prop_assert!(same(&mul(&a, &b), &mul(&b, &a)));
        prop_assert!(same(&add(&add(&a, &b), &c), &add(&a, &add(&b, &c))));
        prop_assert!(same(&mul(&mul(&a, &b), &c), &mul(&a, &mul(&b, &c))));
        prop_assert!(same(&mul(&a, &add(&b, &c)), &add(&mul(&a, &b), &mul(&a, &c))));
    }

    #[test]
    fn teichmuller_norms_add(seed in any::<u64>(), p in prime(), r in radius()) {
        let len = 3;
        let ring = witt_ring(p, len);
        let mut g = rng(seed);
        let (x, y) = (random_char_p(&ring, &mut g, 2), random_char_p(&ring, &mut g, 2));
        prop_assume!(!x.is_zero() && !y.is_zero());
        let (tx, ty) = (teichmuller(&x, len).unwrap(), teichmuller(&y, len).unwrap());
        let txy = witt_arith(&tx, &ty, WittOp::Mul).unwrap();
        prop_assert!(same(&txy, &teichmuller(&x.mul(&y), len).unwrap()));
        let (nx, ny, nxy) = (witt_norm(&tx, r).unwrap(), witt_norm(&ty, r).unwrap(), witt_norm(&txy, r).unwrap());
        prop_assume!(nx.certified && ny.certified && nxy.certified);
        prop_assert_eq!(nxy.value, nx.value + ny.value);
    }

    #[test]
    fn block_sum_degree_is_additive(c1 in -3i64..=3, d1 in 1usize..=3, c2 in -3i64..=3, d2 in 1usize..=3) {
        let parts = [(c1, d1), (c2, d2)];
        let n = standard_sum_precision(&parts).max(2);
        let ring = RingDescriptor::standard(ScalarRing::new(2, 1, n).unwrap(), 0, 0);
        let a = pure_standard(&ring, c1, d1).unwrap();
        let b = pure_standard(&ring, c2, d2).unwrap();
        let sum = a.direct_sum(&b).unwrap();
        prop_assert_eq!(degree(&sum).unwrap(), degree(&a).unwrap() + degree(&b).unwrap());
        prop_assert_eq!(degree(&sum).unwrap(), c1 + c2);
    }

    #[test]
    fn tower_norm_laws(seed in any::<u64>(), p in prime(), a in 1i128..200) {
        let tower = Tower::new(TowerSpec::cyclotomic(p, 2, 6).unwrap()).unwrap();
        let mut g = rng(seed);
        let j = 2;
        let (x, y) = (tower.random_element(j, &mut g).unwrap(), tower.random_element(j, &mut g).unwrap());
        let lhs = tower.norm(&tower.mul(&x, &y).unwrap()).unwrap();
        let rhs = tower.mul(&tower.norm(&x).unwrap(), &tower.norm(&y).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        // scalars: Norm(a) = a^[K_j : K_{j-1}]
        let s = PadicScalar::from_int(tower.scalars(), a);
        let na = tower.norm(&tower.scalar(j, &s).unwrap()).unwrap();
        prop_assert_eq!(na, tower.scalar(j - 1, &s.pow(tower.spec().step_degree() as u64)).unwrap());
        // v(Norm y) = [K_j : K_{j-1}] v(y) while both stay inside the precision
        if let (TowerVal::Exact(v), TowerVal::Exact(w)) = (tower.valuation(&x), tower.valuation(&tower.norm(&x).unwrap())) {
            prop_assert_eq!(w, v * Q::from_integer(tower.spec().step_degree() as i64));
        }
    }
}

#[test]
fn herbrand_function_is_convex() {
    for (p, levels) in [(2u64, 3usize), (3, 2), (5, 2)] {
        let tower = Tower::new(TowerSpec::cyclotomic(p, levels, 4).unwrap()).unwrap();
        let data = ramification_data(&tower).unwrap();
        let slopes = data.psi_slopes();
        assert!(slopes.windows(2).all(|w| w[0] <= w[1]), "{slopes:?}");
        assert!(data.upper_breaks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(data.psi_at(Q::from_integer(0)), Q::from_integer(0));
        assert_eq!(data.psi_at(data.upper_breaks[1]), data.lower_breaks[1]);
    }
}

#[test]
fn teichmuller_of_uniformizer_has_norm_r() {
    let ring = witt_ring(2, 3);
    let pi = robba_lab::series::CharPSeries::var(&ring, 0);
    let r = Q::new(1, 4);
    let v = witt_norm(&teichmuller(&pi, 3).unwrap(), r).unwrap();
    assert_eq!(v.value, Valuation::Finite(r));
}
