//! Property suites for the convex machinery and the scheme invariants.

mod common;

use common::{zoo_problem, HORIZON};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rateq::functional::discrete_functional;
use rateq::solver::{solve_theta, Partition};
use rateq::{CharacteristicSet, DissipationPotential, Extended};

fn state(values: Vec<f64>) -> DVector<f64> {
    DVector::from_vec(values)
}

fn potentials() -> Vec<DissipationPotential> {
    vec![
        DissipationPotential::kinematic(1.0, 3).unwrap(),
        DissipationPotential::isotropic(1.0, 2).unwrap(),
        DissipationPotential::new(
            CharacteristicSet::product(vec![
                CharacteristicSet::norm_ball(0.7, 2).unwrap(),
                CharacteristicSet::norm_ball(0.0, 1).unwrap(),
            ])
            .unwrap(),
            rateq::dissipation::DomainCone::Whole(3),
        )
        .unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn positive_homogeneity(v in prop::collection::vec(-3.0_f64..3.0, 3), lambda in 0.0_f64..5.0) {
        for pot in potentials() {
            let v = state(v.clone());
            let lhs = pot.eval(&(&v * lambda)).unwrap();
            let rhs = pot.eval(&v).unwrap();
            match (lhs, rhs) {
                (Extended::Finite(a), Extended::Finite(b)) => {
                    prop_assert!((a - lambda * b).abs() <= 1e-9 * (1.0 + a.abs() + b.abs()));
                }
                // scaling by λ > 0 cannot move a point in or out of the cone;
                // λ = 0 lands at the origin where ψ = 0
                (Extended::Infinite, Extended::Infinite) => prop_assert!(lambda > 0.0),
                (Extended::Finite(a), Extended::Infinite) => {
                    prop_assert!(lambda <= 1e-12 && a == 0.0);
                }
                (Extended::Infinite, Extended::Finite(_)) => {
                    prop_assert!(false, "scaling cannot leave the domain cone");
                }
            }
        }
    }

    #[test]
    fn triangle_inequality(b in prop::collection::vec(-3.0_f64..3.0, 3),
                           c in prop::collection::vec(-3.0_f64..3.0, 3)) {
        for pot in potentials() {
            let (b, c) = (state(b.clone()), state(c.clone()));
            let sum = pot.eval(&(&b + &c)).unwrap();
            let parts = pot.eval(&b).unwrap() + pot.eval(&c).unwrap();
            if let (Extended::Finite(s), Extended::Finite(p)) = (sum, parts) {
                prop_assert!(s <= p + 1e-9 * (1.0 + s.abs() + p.abs()));
            }
            // an infinite sum with finite parts would break convexity
            if let (Extended::Infinite, Extended::Finite(_)) = (sum, parts) {
                prop_assert!(false, "psi(b+c) infinite while psi(b)+psi(c) finite");
            }
        }
    }

    #[test]
    fn projection_idempotent_and_nonexpansive(
        q1 in prop::collection::vec(-5.0_f64..5.0, 3),
        q2 in prop::collection::vec(-5.0_f64..5.0, 3),
    ) {
        for pot in potentials() {
            let (q1, q2) = (state(q1.clone()), state(q2.clone()));
            let p1 = pot.project_cstar(&q1).unwrap();
            let p11 = pot.project_cstar(&p1).unwrap();
            prop_assert!((&p1 - p11).norm() <= 1e-12 * (1.0 + p1.norm()));
            let p2 = pot.project_cstar(&q2).unwrap();
            prop_assert!((&p1 - &p2).norm() <= (&q1 - &q2).norm() + 1e-12);
        }
    }

    #[test]
    fn infinite_exactly_off_the_domain_cone(v in prop::collection::vec(-3.0_f64..3.0, 3)) {
        for pot in potentials() {
            let v = state(v.clone());
            let infinite = matches!(pot.eval(&v).unwrap(), Extended::Infinite);
            prop_assert_eq!(infinite, !pot.in_domain(&v));
        }
    }
}

/// Finite-sample support check: the closed-form value dominates every sampled
/// pairing and is attained at the support witness, for each set kind.
#[test]
fn support_function_matches_sampled_supremum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let c = std::f64::consts::FRAC_1_SQRT_2;
    let mapped = CharacteristicSet::linear_image(
        CharacteristicSet::cone_capped(1.0, 1).unwrap(),
        DMatrix::from_column_slice(2, 2, &[c, -c, c, c]),
    )
    .unwrap();
    let box2 = CharacteristicSet::halfspace_intersection(
        2,
        vec![
            state(vec![1.0, 0.0]),
            state(vec![-1.0, 0.0]),
            state(vec![0.0, 1.0]),
            state(vec![0.0, -1.0]),
        ],
        vec![1.0, 1.0, 1.0, 0.5],
    )
    .unwrap();
    let kinds: Vec<CharacteristicSet> = vec![
        CharacteristicSet::norm_ball(1.0, 3).unwrap(),
        CharacteristicSet::cone_capped(1.0, 2).unwrap(),
        CharacteristicSet::product(vec![
            CharacteristicSet::norm_ball(0.5, 2).unwrap(),
            CharacteristicSet::norm_ball(2.0, 1).unwrap(),
        ])
        .unwrap(),
        box2,
        mapped,
    ];
    for set in &kinds {
        let dim = set.dim();
        for _ in 0..20 {
            let mut v = DVector::from_fn(dim, |_, _| {
                use rand::Rng;
                rng.gen_range(-2.0..2.0_f64)
            });
            // steer capped cones into their domain half of the time
            if matches!(set, CharacteristicSet::ConeCapped { .. }) {
                let pn = v.rows(0, dim - 1).norm();
                v[dim - 1] = pn + v[dim - 1].abs();
            }
            let value = match set.support(&v) {
                Extended::Finite(x) => x,
                Extended::Infinite => continue,
            };
            let mut sampled = f64::NEG_INFINITY;
            for _ in 0..10_000 {
                sampled = sampled.max(set.sample(&mut rng).dot(&v));
            }
            let witness = set.support_witness(&v).expect("finite support is attained");
            sampled = sampled.max(witness.dot(&v));
            let scale = 1.0 + value.abs();
            assert!(
                sampled <= value + 1e-6 * scale,
                "sampled sup {sampled} exceeds closed form {value}"
            );
            assert!(
                sampled >= value - 1e-6 * scale,
                "sampled sup {sampled} (with witness) misses closed form {value}"
            );
            assert!(
                set.distance(&witness) <= 1e-6 * scale,
                "witness must lie in the set"
            );
        }
    }
}

/// The discrete functional is convex along segments of feasible vectors.
#[test]
fn discrete_functional_is_convex_on_feasible_pairs() {
    for trial in 0..30 {
        let problem = zoo_problem(trial, 1000 + trial as u64);
        let partition = Partition::uniform(HORIZON, 24).unwrap();
        let theta = [0.5, 0.75, 1.0][trial % 3];
        // two feasible candidates: inexact runs at different tolerances
        let u = rateq::solver::solve_theta_inexact(&problem, &partition, theta, 1e-2).unwrap();
        let v = rateq::solver::solve_theta_inexact(&problem, &partition, theta, 1e-5).unwrap();
        let fu = discrete_functional(&problem, &u.states, &partition, theta)
            .unwrap()
            .total
            .expect_finite("feasible");
        let fv = discrete_functional(&problem, &v.states, &partition, theta)
            .unwrap()
            .total
            .expect_finite("feasible");
        for eta in [0.25, 0.5, 0.75] {
            let mix: Vec<DVector<f64>> = u
                .states
                .iter()
                .zip(&v.states)
                .map(|(a, b)| a * eta + b * (1.0 - eta))
                .collect();
            let fm = discrete_functional(&problem, &mix, &partition, theta)
                .unwrap()
                .total;
            match fm {
                Extended::Finite(m) => {
                    assert!(
                        m <= eta * fu + (1.0 - eta) * fv + 1e-9,
                        "convexity violated: {m} vs {}",
                        eta * fu + (1.0 - eta) * fv
                    );
                }
                // the mixture of band-feasible points can graze the band, but
                // never on these construction-feasible runs
                Extended::Infinite => panic!("mixture of feasible candidates left the band"),
            }
        }
    }
}

/// Dyadic time rescaling reproduces the states bit for bit; a generic strictly
/// increasing reparametrization reproduces them to rounding.
#[test]
fn rate_independence_under_reparametrization() {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..12 {
        let problem = zoo_problem(trial, 4000 + trial as u64);
        let n = 24;
        let partition = Partition::uniform(HORIZON, n).unwrap();
        let theta = [0.5, 0.75, 1.0][trial % 3];
        let base = solve_theta(&problem, &partition, theta).unwrap();

        // dyadic: scale all times by 2 (exact in floating point)
        let scaled_load = problem.load().reparametrized(|t| 2.0 * t).unwrap();
        let scaled_problem = rateq::Problem::new(
            problem.energy().clone(),
            problem.dissipation().clone(),
            scaled_load,
            problem.initial_state().clone(),
            *problem.tolerances(),
        )
        .unwrap();
        let scaled_partition =
            Partition::from_times(partition.times().iter().map(|t| 2.0 * t).collect()).unwrap();
        let scaled = solve_theta(&scaled_problem, &scaled_partition, theta).unwrap();
        for (a, b) in base.states.iter().zip(&scaled.states) {
            assert_eq!(a, b, "dyadic rescaling must be bit-identical");
        }

        // generic monotone map: random increasing times, load knots moved the
        // same way (the load must break only at partition times for the
        // reparametrized problem to stay the same curve)
        let dense_knots: Vec<(f64, DVector<f64>)> = partition
            .times()
            .iter()
            .map(|&t| (t, problem.load().eval(t)))
            .collect();
        let dense_load = rateq::LoadPath::new(dense_knots).unwrap();
        let dense_problem = rateq::Problem::new(
            problem.energy().clone(),
            problem.dissipation().clone(),
            dense_load.clone(),
            problem.initial_state().clone(),
            *problem.tolerances(),
        )
        .unwrap();
        let dense_base = solve_theta(&dense_problem, &partition, theta).unwrap();

        let mut new_times = vec![0.0];
        for _ in 0..n {
            new_times.push(new_times.last().unwrap() + rng.gen_range(0.02..0.3));
        }
        let map: std::collections::BTreeMap<u64, f64> = partition
            .times()
            .iter()
            .zip(&new_times)
            .map(|(a, b)| (a.to_bits(), *b))
            .collect();
        let warped_load = dense_load.reparametrized(|t| map[&t.to_bits()]).unwrap();
        let warped_problem = rateq::Problem::new(
            problem.energy().clone(),
            problem.dissipation().clone(),
            warped_load,
            problem.initial_state().clone(),
            *problem.tolerances(),
        )
        .unwrap();
        let warped_partition = Partition::from_times(new_times).unwrap();
        let warped = solve_theta(&warped_problem, &warped_partition, theta).unwrap();
        let dist = dense_base.node_distance(&warped);
        let scale = 1.0 + problem.load().sup_norm();
        assert!(
            dist <= 1e-10 * scale,
            "reparametrized run drifted by {dist:e}"
        );
    }
}

/// Declared coercivity constants survive 10^4-sample Rayleigh challenges on
/// their declared scopes.
#[test]
fn declared_alpha_is_never_above_the_sampled_minimum() {
    use rand::Rng;
    for trial in 0..9 {
        let problem = zoo_problem(trial, 300 + trial as u64);
        let dim = problem.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(500 + trial as u64);
        let pot = problem.dissipation().clone();
        let sampler = move || {
            // differences of domain points cover every declared scope here
            let raw1 = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            let raw2 = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            let a = pot.prox(&raw1, 1.0).unwrap();
            let b = pot.prox(&raw2, 1.0).unwrap();
            a - b
        };
        let estimate = problem.energy().estimate_alpha(10_000, sampler).unwrap();
        assert!(
            problem.alpha() <= estimate + 1e-8,
            "declared {} vs sampled {estimate}",
            problem.alpha()
        );
    }
}

/// 100 seeded (model, θ, load) trials: the exact solve zeroes the functional
/// and the pointwise Lagrangian vanishes at every θ-point of the run.
#[test]
fn exact_solves_zero_functional_and_lagrangian_over_100_trials() {
    let mut zero_lagrangians = 0usize;
    for trial in 0..100usize {
        let problem = zoo_problem(trial, 60_000 + trial as u64);
        let theta = [0.5, 0.75, 1.0][trial % 3];
        let partition = Partition::uniform(HORIZON, 24).unwrap();
        let trajectory = solve_theta(&problem, &partition, theta).unwrap();
        let report = discrete_functional(&problem, &trajectory.states, &partition, theta).unwrap();
        let allowance = 1e-9 * (1.0 + problem.load().sup_norm());
        assert!(
            report.total.expect_finite("feasible") <= allowance,
            "trial {trial}"
        );
        // the Lagrangian at the θ-point of each step is a KKT-certified zero
        for i in 0..partition.n_steps() {
            let t_theta = partition.theta_time(i, theta);
            let y_theta = trajectory.theta_state(i, theta);
            let rate = trajectory.increment(i) / partition.step(i);
            let value = rateq::functional::lagrangian(&problem, t_theta, &y_theta, &rate)
                .unwrap()
                .expect_finite("exact steps are feasible");
            assert!(
                value.abs() <= allowance / partition.step(i),
                "trial {trial}, step {i}"
            );
            zero_lagrangians += 1;
        }
    }
    assert!(zero_lagrangians >= 100);
}

/// Assembled dissipation potentials pass the conjugacy oracle.
#[test]
fn assembled_potentials_pass_conjugacy() {
    for trial in 0..6 {
        let problem = zoo_problem(trial, 77 + trial as u64);
        let report = problem
            .dissipation()
            .verify_conjugacy(2_000, 13 + trial as u64);
        assert!(report.passed(), "{report:?}");
    }
}
