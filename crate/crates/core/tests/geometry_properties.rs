use std::f64::consts::PI;
use std::sync::Arc;

use nctorus::clifford::gamma_generate;
use nctorus::connection::{pairs, Connection, Convention, ProjectiveModule};
use nctorus::forms::{
    d0, d1, dixmier_constant, omega1_product, omega2_inner, pi_represent1, pi_represent2, project_junk,
    ym_spectral_paths, OmegaD1Element, OmegaD2Element,
};
use nctorus::matrix::TorusMatrix;
use nctorus::optimize::{fd_audit, minimize_ym, ym_gradient, DescentParams};
use nctorus::random::{self, DetRng};
use nctorus::{Complex64, DeformationMatrix, TorusElement, TruncationPolicy};
use proptest::prelude::*;
use rand::Rng;

fn module(rng: &mut DetRng, n: usize, q: usize, policy: TruncationPolicy) -> ProjectiveModule {
    let theta = Arc::new(random::theta(rng, n));
    if q == 2 && rng.gen_bool(0.5) {
        ProjectiveModule::new(random::rank_one_projection(rng, &theta, policy, 1)).unwrap()
    } else {
        ProjectiveModule::free(&theta, policy, q)
    }
}

fn one_form(rng: &mut DetRng, theta: &Arc<DeformationMatrix>, policy: TruncationPolicy) -> OmegaD1Element {
    OmegaD1Element::new((0..theta.n()).map(|_| random::element(rng, theta, policy, 1, 0.5)).collect()).unwrap()
}

fn commutator(x: &TorusElement, y: &TorusElement) -> TorusElement {
    x.mul(y).unwrap().sub(&y.mul(x).unwrap()).unwrap()
}

fn cases() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(cases())]

    #[test]
    fn random_connections_are_compatible(seed in any::<u64>(), n in 2usize..=3, q in 1usize..=2) {
        let mut rng = random::rng(seed);
        let m = module(&mut rng, n, q, TruncationPolicy::strict(8));
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.5).unwrap();
        let dynamical = c.check_compatibility(3, seed).unwrap();
        prop_assert!(dynamical <= 1e-10, "{}", dynamical);
        let spectral = c.phi_map().unwrap().check_compatibility(3, seed).unwrap();
        prop_assert!(spectral <= 2.0 * dynamical.max(1e-12), "{} vs {}", spectral, dynamical);
        for a in c.phi_map().unwrap().potentials() {
            prop_assert!(a.self_adjoint_residual().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn connection_obeys_leibniz(seed in any::<u64>(), q in 1usize..=2) {
        let mut rng = random::rng(seed);
        let m = module(&mut rng, 2, q, TruncationPolicy::strict(8));
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.5).unwrap();
        let xi = random::module_vector(&mut rng, &m, 1, 0.5).unwrap();
        let a = random::element(&mut rng, m.theta(), m.policy(), 1, 0.5);
        for conn in [c.clone(), c.phi_map().unwrap()] {
            for j in 0..2 {
                let lhs = conn.apply(j, &xi.right_mul(&a).unwrap()).unwrap();
                let da = match conn.convention() {
                    Convention::Dynamical => a.delta_tilde(j).unwrap(),
                    Convention::Spectral => a.delta(j).unwrap(),
                };
                let rhs = conn.apply(j, &xi).unwrap().right_mul(&a).unwrap().add(&xi.right_mul(&da).unwrap()).unwrap();
                prop_assert!(lhs.sub(&rhs).unwrap().l1_norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn curvature_matrix_reproduces_the_operator(seed in any::<u64>(), n in 2usize..=3, q in 1usize..=2) {
        let mut rng = random::rng(seed);
        let m = module(&mut rng, n, q, TruncationPolicy::strict(10));
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.5).unwrap();
        let f = c.curvature().unwrap();
        let closed = c.curvature_closed_form().unwrap();
        for (j, k) in pairs(n) {
            prop_assert!(f.get(j, k).distance(closed.get(j, k)).unwrap() <= 1e-10);
            prop_assert!(f.get(j, k).skew_residual().unwrap() <= 1e-10);
            let xi = random::module_vector(&mut rng, &m, 1, 0.5).unwrap();
            let direct = c.commutator_apply(j, k, &xi).unwrap();
            let via = f.get(j, k).mul_vec(&xi).unwrap();
            prop_assert!(direct.sub(&via).unwrap().l1_norm() <= 1e-10);
        }
        prop_assert!(c.ym_dynamical().unwrap() >= -1e-12);
    }

    #[test]
    fn spectral_value_is_the_scaled_dynamical_value(seed in any::<u64>(), n in 2usize..=3, q in 1usize..=2) {
        let mut rng = random::rng(seed);
        let m = module(&mut rng, n, q, TruncationPolicy::lossy(4));
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.5).unwrap();
        let ym = c.ym_dynamical().unwrap();
        let paths = ym_spectral_paths(&c.phi_map().unwrap()).unwrap();
        let want = dixmier_constant(n).unwrap() * ym;
        prop_assert!((paths.columns - want).abs() <= 1e-9 * ym.max(1.0));
        prop_assert!(paths.relative_deviation <= 1e-10);
        let back = c.phi_map().unwrap().phi_inverse().unwrap();
        for (a, b) in back.potentials().iter().zip(c.potentials()) {
            prop_assert_eq!(a.distance(b).unwrap(), 0.0);
        }
    }

    #[test]
    fn exterior_derivative_squares_to_zero(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = random::rng(seed);
        let theta = Arc::new(random::theta(&mut rng, n));
        let a = random::element(&mut rng, &theta, TruncationPolicy::strict(3), 1, 1.0);
        prop_assert!(d1(&d0(&a).unwrap()).unwrap().max_norm() <= 1e-12);
    }

    #[test]
    fn product_symmetrisation_is_a_commutator(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = random::rng(seed);
        let theta = Arc::new(random::theta(&mut rng, n));
        let pol = TruncationPolicy::strict(4);
        let w = one_form(&mut rng, &theta, pol);
        let v = one_form(&mut rng, &theta, pol);
        let sym = omega1_product(&w, &v).unwrap().add(&omega1_product(&v, &w).unwrap()).unwrap();
        for (p, q) in pairs(n) {
            let want = commutator(w.get(p), v.get(q)).sub(&commutator(w.get(q), v.get(p))).unwrap();
            prop_assert!(sym.get(p, q).sub(&want).unwrap().l1_norm() <= 1e-12);
        }
    }

    #[test]
    fn representation_is_multiplicative(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = random::rng(seed);
        let theta = Arc::new(random::theta(&mut rng, n));
        let pol = TruncationPolicy::strict(4);
        let g = gamma_generate(n).unwrap();
        let w = one_form(&mut rng, &theta, pol);
        let v = one_form(&mut rng, &theta, pol);
        let lhs = pi_represent1(&w, &g).unwrap().mul(&pi_represent1(&v, &g).unwrap()).unwrap();
        let rhs = pi_represent2(&omega1_product(&w, &v).unwrap(), &g).unwrap();
        prop_assert!(lhs.distance(&rhs).unwrap() <= 1e-12);
    }

    #[test]
    fn two_form_inner_product_is_positive(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = random::rng(seed);
        let theta = Arc::new(random::theta(&mut rng, n));
        let pol = TruncationPolicy::strict(4);
        let w = one_form(&mut rng, &theta, pol);
        let v = one_form(&mut rng, &theta, pol);
        let x = project_junk(&omega1_product(&w, &v).unwrap());
        let y = project_junk(&omega1_product(&v, &w).unwrap());
        let xx = omega2_inner(&x, &x).unwrap();
        prop_assert!(xx.re >= 0.0 && xx.im.abs() <= 1e-12 * xx.re.max(1.0));
        let xy = omega2_inner(&x, &y).unwrap();
        let yx = omega2_inner(&y, &x).unwrap();
        prop_assert!((xy - yx.conj()).norm() <= 1e-12 * xx.re.max(1.0));
        prop_assert!(project_junk(&x).sub(&x).unwrap().max_norm() == 0.0);
    }

    #[test]
    fn gradient_stays_in_the_tangent_space(seed in any::<u64>(), q in 1usize..=2) {
        let mut rng = random::rng(seed);
        let m = module(&mut rng, 2, q, TruncationPolicy::strict(12));
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.3).unwrap();
        for g in ym_gradient(&c).unwrap() {
            prop_assert!(g.skew_residual().unwrap() <= 1e-10);
            prop_assert!(m.compress(&g).unwrap().distance(&g).unwrap() <= 1e-10);
        }
    }
}

#[test]
fn non_self_adjoint_spectral_potential_breaks_compatibility() {
    let mut rng = random::rng(31);
    let theta = Arc::new(DeformationMatrix::planar(0.27));
    let pol = TruncationPolicy::strict(6);
    let m = ProjectiveModule::free(&theta, pol, 2);
    let skew = random::skew_potential(&mut rng, &m, 1, 0.5).unwrap();
    let bad = vec![skew.clone(), skew];
    assert!(Connection::new(m.clone(), Convention::Spectral, bad.clone()).is_err());
    let c = Connection::new_unchecked(m, Convention::Spectral, bad).unwrap();
    let residual = c.check_compatibility(4, 2).unwrap();
    assert!(residual > 0.1, "{residual}");
}

#[test]
fn flat_start_is_left_alone_and_hand_family_descends() {
    let theta = Arc::new(DeformationMatrix::planar(0.37));
    let pol = TruncationPolicy::strict(4);
    let m = ProjectiveModule::free(&theta, pol, 1);
    let flat = Connection::grassmannian(&m, Convention::Dynamical);
    let trace = minimize_ym(&flat, &DescentParams::default()).unwrap();
    assert_eq!(trace.records.len(), 1);

    let u1 = TorusElement::generator(&theta, pol, 0).unwrap();
    let a2 = TorusMatrix::from_entries(1, vec![u1.sub(&u1.adjoint()).unwrap()]).unwrap();
    let start = Connection::new(m, Convention::Dynamical, vec![TorusMatrix::zeros(&theta, pol, 1), a2]).unwrap();
    let trace = minimize_ym(&start, &DescentParams::default()).unwrap();
    assert!(trace.records.windows(2).all(|w| w[1].ym < w[0].ym));
    assert!(trace.final_ym() <= 1e-20);
    assert!(trace.converged);
    let spectral = ym_spectral_paths(&start.phi_map().unwrap()).unwrap();
    assert!((spectral.columns - 1.0 / PI).abs() <= 1e-10);
}

#[test]
fn descent_is_reproducible_and_audited() {
    let run = || {
        let mut rng = random::rng(77);
        let m = module(&mut rng, 2, 2, TruncationPolicy::lossy(4));
        let c = random::dynamical_connection(&mut rng, &m, 1, 0.5).unwrap();
        minimize_ym(&c, &DescentParams { max_iter: 8, ..DescentParams::default() }).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.records, b.records);
    assert!(a.is_monotone());
    for conn in [&a.final_connection] {
        for p in conn.potentials() {
            assert!(p.skew_residual().unwrap() <= 1e-10);
        }
    }

    let mut rng = random::rng(3);
    let m = module(&mut rng, 3, 1, TruncationPolicy::strict(4));
    let c = random::dynamical_connection(&mut rng, &m, 1, 0.5).unwrap();
    for s in fd_audit(&c, 20, 1, 9).unwrap() {
        assert!(s.relative_error <= 1e-6, "{s:?}");
    }
}

#[test]
fn junk_is_removed_by_projection() {
    let theta = Arc::new(DeformationMatrix::planar(0.1));
    let pol = TruncationPolicy::strict(2);
    let one = TorusElement::one(&theta, pol);
    let x = OmegaD2Element::pure_junk(one);
    assert!(x.junk().is_some());
    let px = project_junk(&x);
    assert_eq!(omega2_inner(&px, &px).unwrap(), Complex64::new(0.0, 0.0));
}
