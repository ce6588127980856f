//! Shared generators for the property and acceptance suites.
#![allow(dead_code)] // each test target uses its own subset

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rateq::materials::{LoadPath, MaterialModel};
use rateq::{Problem, Tolerances};

pub const HORIZON: f64 = 2.0;
/// Loads get their knots on this grid so partitions with multiples of
/// `GRID` steps contain every knot (the midpoint-scheme stability theorem
/// wants load breaks on the partition).
pub const GRID: usize = 8;

/// A random piecewise-linear load on `[0, HORIZON]` with `ℓ(0) = 0`, knots on
/// the grid, and values bounded by `magnitude`. The zero initial value keeps
/// `y₀ = 0` stable for every model.
pub fn random_grid_load(dim: usize, magnitude: f64, rng: &mut ChaCha8Rng) -> LoadPath {
    let mut knots = vec![(0.0, DVector::zeros(dim))];
    for j in 1..=GRID {
        let t = HORIZON * (j as f64) / (GRID as f64);
        // skip some interior knots to vary the shapes
        if j < GRID && rng.gen_bool(0.35) {
            continue;
        }
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-magnitude..magnitude));
        knots.push((t, v));
    }
    LoadPath::new(knots).expect("grid knots are valid")
}

/// Same, but with the internal-variable (last) component zeroed, matching the
/// physical load shape of the hardening models.
pub fn random_cone_load(state_dim: usize, magnitude: f64, rng: &mut ChaCha8Rng) -> LoadPath {
    let raw = random_grid_load(state_dim, magnitude, rng);
    raw.mapped_values(|v| {
        let mut w = v.clone();
        w[state_dim - 1] = 0.0;
        w
    })
    .expect("mapping keeps validity")
}

/// The seeded model zoo: one of each hardening kind with scalar-block moduli
/// (so the closed-form return maps apply) and randomized stiffnesses.
pub fn zoo_model(which: usize, rng: &mut ChaCha8Rng) -> MaterialModel {
    let c = rng.gen_range(0.5..2.0);
    let h = rng.gen_range(0.3..1.5);
    match which % 3 {
        0 => MaterialModel::kinematic(
            DMatrix::identity(2, 2) * c,
            DMatrix::identity(2, 2) * h,
            1.0,
        ),
        1 => MaterialModel::isotropic(DMatrix::identity(2, 2) * c, rng.gen_range(0.4..2.0), 1.0),
        _ => MaterialModel::combined(
            DMatrix::identity(2, 2) * c,
            DMatrix::identity(2, 2) * h,
            rng.gen_range(0.4..2.0),
            1.0,
        ),
    }
}

/// A fully assembled seeded problem from the zoo.
pub fn zoo_problem(which: usize, seed: u64) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = zoo_model(which, &mut rng);
    let dim = model.state_dim();
    let load = match model.kind {
        rateq::HardeningKind::Kinematic => random_grid_load(dim, 2.5, &mut rng),
        _ => random_cone_load(dim, 2.5, &mut rng),
    };
    model
        .assemble(load, DVector::zeros(dim), Tolerances::default())
        .expect("zero initial state under a zero-at-origin load is stable")
}

/// The scalar ramp problem with total stiffness `a`.
pub fn ramp_problem(a: f64, sigma: f64, rate: f64, horizon: f64) -> Problem {
    let model = MaterialModel::kinematic_scalar(a / 2.0, a / 2.0, sigma);
    let load = LoadPath::new(vec![
        (0.0, DVector::from_element(1, 0.0)),
        (horizon, DVector::from_element(1, rate * horizon)),
    ])
    .unwrap();
    model
        .assemble(load, DVector::zeros(1), Tolerances::default())
        .unwrap()
}
