//! Dissipation potentials and their characteristic sets.
//!
//! A dissipation potential `ψ` here is always positively 1-homogeneous, convex,
//! and lower semicontinuous, i.e. the support function
//!
//! ```text
//! ψ(v) = sup { ⟨q, v⟩ : q ∈ C* }
//! ```
//!
//! of a closed convex set `C*` containing the origin (the elastic domain of
//! admissible generalized stresses). Its conjugate `ψ*` is the indicator of
//! `C*`, so all dual arithmetic reduces to distances and projections onto
//! `C*`. The proximal map of `t·ψ` is available through Moreau's identity
//! `prox_{tψ}(z) = z − Π_{tC*}(z)`, which is what the generic incremental
//! solver runs on.
//!
//! Two set shapes cover the hardening models:
//!
//! * [`CharacteristicSet::NormBall`] — `{ |q| ≤ σ_y }`, dual to `ψ(v) = σ_y|v|`
//!   (linear kinematic hardening);
//! * [`CharacteristicSet::ConeCapped`] — `{ (q, g) : |q| + g ≤ σ_y }`, dual to
//!   `ψ(ṗ, ξ̇) = σ_y ξ̇` on the cone `{ |ṗ| ≤ ξ̇ }` and `+∞` off it (isotropic
//!   and combined hardening).
//!
//! `Product` composes sets on disjoint blocks, `HalfspaceIntersection` admits
//! custom polyhedral domains, and `LinearImage` represents `Bᵀ C*` for a
//! subspace restriction `ψ_h = ψ ∘ B` (see [`crate::galerkin`]).

use crate::error::{check_dim, Error, Result};
use crate::extended::Extended;
use crate::{DualVector, StateVector};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Relative half-width of the band used to decide membership of the domain
/// cone. Projection outputs land on cone boundaries up to rounding; a strict
/// comparison would misclassify them.
pub(crate) const DOMAIN_BAND: f64 = 1e-12;

/// Iteration caps for the iterative set routines (Dykstra, alternating
/// projections, support ascent). These only back the polyhedral and
/// linear-image kinds; the model sets are closed-form.
const ITER_CAP: usize = 200_000;
const STALL_TOL: f64 = 1e-15;

/// A closed convex subset of the dual space containing the origin.
#[derive(Debug, Clone)]
pub enum CharacteristicSet {
    /// `{ q ∈ R^dim : |q| ≤ radius }`. `radius = 0` degenerates to `{0}`,
    /// which is how a non-dissipative block is expressed inside a `Product`.
    NormBall { radius: f64, dim: usize },
    /// `{ (q, g) ∈ R^p_dim × R : |q| + g ≤ sigma_y }`, the dual of the
    /// isotropic/combined dissipation on the cone `{ |ṗ| ≤ ξ̇ }`.
    ConeCapped { sigma_y: f64, p_dim: usize },
    /// Cartesian product over consecutive blocks.
    Product(Vec<CharacteristicSet>),
    /// `{ x : normals[i]·x ≤ offsets[i] }` with all offsets ≥ 0.
    HalfspaceIntersection {
        dim: usize,
        normals: Vec<DVector<f64>>,
        offsets: Vec<f64>,
    },
    /// `{ map·q : q ∈ parent }`; `op_norm` caches `λ_max(map·mapᵀ)` for the
    /// projected-gradient inner loop.
    LinearImage {
        parent: Box<CharacteristicSet>,
        map: DMatrix<f64>,
        op_norm: f64,
    },
}

impl CharacteristicSet {
    pub fn norm_ball(radius: f64, dim: usize) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "norm ball radius must be finite and >= 0, got {radius}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "norm ball dimension must be positive".into(),
            ));
        }
        Ok(CharacteristicSet::NormBall { radius, dim })
    }

    pub fn cone_capped(sigma_y: f64, p_dim: usize) -> Result<Self> {
        if !(sigma_y >= 0.0) || !sigma_y.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "yield stress must be finite and >= 0, got {sigma_y}"
            )));
        }
        if p_dim == 0 {
            return Err(Error::InvalidParameter(
                "plastic block must be nonempty".into(),
            ));
        }
        Ok(CharacteristicSet::ConeCapped { sigma_y, p_dim })
    }

    pub fn product(factors: Vec<CharacteristicSet>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter(
                "product needs at least one factor".into(),
            ));
        }
        Ok(CharacteristicSet::Product(factors))
    }

    /// Intersection of halfspaces `n_i · x ≤ c_i`. Requires `c_i ≥ 0` so the
    /// origin belongs to the set.
    pub fn halfspace_intersection(
        dim: usize,
        normals: Vec<DVector<f64>>,
        offsets: Vec<f64>,
    ) -> Result<Self> {
        if normals.len() != offsets.len() {
            return Err(Error::InvalidParameter(
                "need one offset per halfspace normal".into(),
            ));
        }
        for (i, n) in normals.iter().enumerate() {
            check_dim(dim, n.len())?;
            if n.norm() == 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "halfspace {i} has zero normal"
                )));
            }
            if offsets[i] < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "halfspace {i} excludes the origin (offset {})",
                    offsets[i]
                )));
            }
        }
        Ok(CharacteristicSet::HalfspaceIntersection {
            dim,
            normals,
            offsets,
        })
    }

    /// The image `{ map·q : q ∈ parent }`. For a subspace restriction the map
    /// is `Bᵀ` with `B` having orthonormal columns, so `op_norm == 1`.
    pub fn linear_image(parent: CharacteristicSet, map: DMatrix<f64>) -> Result<Self> {
        check_dim(parent.dim(), map.ncols())?;
        let gram = &map * map.transpose();
        let op_norm = nalgebra::SymmetricEigen::new(gram)
            .eigenvalues
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max);
        Ok(CharacteristicSet::LinearImage {
            parent: Box::new(parent),
            map,
            op_norm,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            CharacteristicSet::NormBall { dim, .. } => *dim,
            CharacteristicSet::ConeCapped { p_dim, .. } => p_dim + 1,
            CharacteristicSet::Product(factors) => factors.iter().map(|f| f.dim()).sum(),
            CharacteristicSet::HalfspaceIntersection { dim, .. } => *dim,
            CharacteristicSet::LinearImage { map, .. } => map.nrows(),
        }
    }

    /// The set scaled by `t ≥ 0`; support functions scale accordingly.
    pub fn scaled(&self, t: f64) -> CharacteristicSet {
        debug_assert!(t >= 0.0);
        match self {
            CharacteristicSet::NormBall { radius, dim } => CharacteristicSet::NormBall {
                radius: radius * t,
                dim: *dim,
            },
            CharacteristicSet::ConeCapped { sigma_y, p_dim } => CharacteristicSet::ConeCapped {
                sigma_y: sigma_y * t,
                p_dim: *p_dim,
            },
            CharacteristicSet::Product(fs) => {
                CharacteristicSet::Product(fs.iter().map(|f| f.scaled(t)).collect())
            }
            CharacteristicSet::HalfspaceIntersection {
                dim,
                normals,
                offsets,
            } => CharacteristicSet::HalfspaceIntersection {
                dim: *dim,
                normals: normals.clone(),
                offsets: offsets.iter().map(|c| c * t).collect(),
            },
            CharacteristicSet::LinearImage {
                parent,
                map,
                op_norm,
            } => CharacteristicSet::LinearImage {
                parent: Box::new(parent.scaled(t)),
                map: map.clone(),
                op_norm: *op_norm,
            },
        }
    }

    /// Support function `sup { ⟨q, v⟩ : q ∈ C* }` as an extended real.
    ///
    /// Closed form for every kind except `HalfspaceIntersection`, which runs a
    /// projected ascent and reports `+∞` when the iterates diverge.
    pub fn support(&self, v: &StateVector) -> Extended {
        debug_assert_eq!(v.len(), self.dim());
        match self {
            CharacteristicSet::NormBall { radius, .. } => Extended::Finite(radius * v.norm()),
            CharacteristicSet::ConeCapped { sigma_y, p_dim } => {
                let (p, xi) = split_cone(v, *p_dim);
                if cone_contains(&p, xi) {
                    Extended::Finite(sigma_y * xi.max(0.0))
                } else {
                    Extended::Infinite
                }
            }
            CharacteristicSet::Product(factors) => {
                let mut total = Extended::ZERO;
                let mut offset = 0;
                for f in factors {
                    let d = f.dim();
                    total = total + f.support(&v.rows(offset, d).into_owned());
                    offset += d;
                }
                total
            }
            CharacteristicSet::HalfspaceIntersection { .. } => self.polyhedral_support(v).0,
            CharacteristicSet::LinearImage { parent, map, .. } => {
                parent.support(&(map.transpose() * v))
            }
        }
    }

    /// A maximizer of `q ↦ ⟨q, v⟩` over the set, when one is attained.
    pub fn support_witness(&self, v: &StateVector) -> Option<DualVector> {
        match self {
            CharacteristicSet::NormBall { radius, dim } => {
                let n = v.norm();
                if n == 0.0 || *radius == 0.0 {
                    Some(DVector::zeros(*dim))
                } else {
                    Some(v * (*radius / n))
                }
            }
            CharacteristicSet::ConeCapped { sigma_y, p_dim } => {
                let (p, xi) = split_cone(v, *p_dim);
                if !cone_contains(&p, xi) {
                    return None;
                }
                // The apex (0, σ_y) attains σ_y·ξ̇ everywhere on the cone.
                let mut w = DVector::zeros(p_dim + 1);
                w[*p_dim] = *sigma_y;
                Some(w)
            }
            CharacteristicSet::Product(factors) => {
                let mut w = DVector::zeros(self.dim());
                let mut offset = 0;
                for f in factors {
                    let d = f.dim();
                    let part = f.support_witness(&v.rows(offset, d).into_owned())?;
                    w.rows_mut(offset, d).copy_from(&part);
                    offset += d;
                }
                Some(w)
            }
            CharacteristicSet::HalfspaceIntersection { .. } => {
                let (value, witness) = self.polyhedral_support(v);
                value.is_finite().then_some(witness)
            }
            CharacteristicSet::LinearImage { parent, map, .. } => parent
                .support_witness(&(map.transpose() * v))
                .map(|q| map * q),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, q: &DualVector) -> DualVector {
        debug_assert_eq!(q.len(), self.dim());
        match self {
            CharacteristicSet::NormBall { radius, .. } => {
                let n = q.norm();
                if n <= *radius {
                    q.clone()
                } else if *radius == 0.0 {
                    DVector::zeros(q.len())
                } else {
                    q * (*radius / n)
                }
            }
            CharacteristicSet::ConeCapped { sigma_y, p_dim } => {
                project_cone_capped(q, *sigma_y, *p_dim)
            }
            CharacteristicSet::Product(factors) => {
                let mut out = DVector::zeros(q.len());
                let mut offset = 0;
                for f in factors {
                    let d = f.dim();
                    let part = f.project(&q.rows(offset, d).into_owned());
                    out.rows_mut(offset, d).copy_from(&part);
                    offset += d;
                }
                out
            }
            CharacteristicSet::HalfspaceIntersection {
                normals, offsets, ..
            } => dykstra_project(q, normals, offsets),
            CharacteristicSet::LinearImage {
                parent,
                map,
                op_norm,
            } => project_linear_image(q, parent, map, *op_norm),
        }
    }

    /// Euclidean distance to the set; zero exactly on members.
    pub fn distance(&self, q: &DualVector) -> f64 {
        (q - self.project(q)).norm()
    }

    /// A random member of the set (a projected Gaussian), used by the
    /// sampling oracles.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> DualVector {
        if let CharacteristicSet::LinearImage { parent, map, .. } = self {
            // Projecting a Gaussian would only approximate the image set;
            // mapping a parent sample is an exact member.
            return map * parent.sample(rng);
        }
        let dim = self.dim();
        let spread = 2.0 * (1.0 + self.extent_hint());
        let raw = DVector::from_fn(dim, |_, _| rng.gen_range(-spread..spread));
        self.project(&raw)
    }

    /// A crude magnitude scale of the set, for choosing sampling spreads.
    fn extent_hint(&self) -> f64 {
        match self {
            CharacteristicSet::NormBall { radius, .. } => *radius,
            CharacteristicSet::ConeCapped { sigma_y, .. } => *sigma_y,
            CharacteristicSet::Product(fs) => {
                fs.iter().map(|f| f.extent_hint()).fold(0.0, f64::max)
            }
            CharacteristicSet::HalfspaceIntersection { offsets, .. } => {
                offsets.iter().cloned().fold(1.0, f64::max)
            }
            CharacteristicSet::LinearImage { parent, .. } => parent.extent_hint(),
        }
    }

    /// Projected ascent for the support of a polyhedron. Returns the value
    /// (infinite if the iterates diverge) and the last iterate.
    fn polyhedral_support(&self, v: &StateVector) -> (Extended, DualVector) {
        let (normals, offsets) = match self {
            CharacteristicSet::HalfspaceIntersection {
                normals, offsets, ..
            } => (normals, offsets),
            _ => unreachable!("polyhedral_support only applies to halfspace intersections"),
        };
        let vnorm = v.norm();
        if vnorm == 0.0 {
            return (Extended::ZERO, DVector::zeros(v.len()));
        }
        let escape = 1e12 * (1.0 + offsets.iter().cloned().fold(1.0, f64::max));
        let mut step = (1.0 + offsets.iter().cloned().fold(1.0, f64::max)) / vnorm;
        let mut x = DVector::zeros(v.len());
        let mut value = 0.0_f64;
        for _ in 0..10_000 {
            let x_next = dykstra_project(&(&x + v * step), normals, offsets);
            let value_next = v.dot(&x_next);
            if x_next.norm() > escape {
                return (Extended::Infinite, x_next);
            }
            if (value_next - value).abs() <= STALL_TOL * (1.0 + value_next.abs()) {
                return (Extended::Finite(value_next.max(0.0)), x_next);
            }
            // projected ascent on a linear objective is monotone for any
            // step, so growing it geometrically is safe; it accelerates both
            // convergence on bounded faces and escape on unbounded ones
            step *= 2.0;
            x = x_next;
            value = value_next;
        }
        (Extended::Finite(value.max(0.0)), x)
    }
}

fn split_cone(v: &DVector<f64>, p_dim: usize) -> (DVector<f64>, f64) {
    (v.rows(0, p_dim).into_owned(), v[p_dim])
}

/// Membership of `(p, ξ)` in the cone `{ |p| ≤ ξ }`, with a relative rounding band.
pub(crate) fn cone_contains(p: &DVector<f64>, xi: f64) -> bool {
    let scale = 1.0 + p.norm() + xi.abs();
    p.norm() <= xi + DOMAIN_BAND * scale
}

/// Projection onto `{ (q, g) : |q| + g ≤ σ }`.
///
/// KKT gives the multiplier `λ = (|q₀| + g₀ − σ)/2` on the active boundary; if
/// `λ > |q₀|` the nearest point is the apex `(0, σ)`.
fn project_cone_capped(q: &DVector<f64>, sigma: f64, p_dim: usize) -> DVector<f64> {
    let (qp, g) = split_cone(q, p_dim);
    let qn = qp.norm();
    if qn + g <= sigma {
        return q.clone();
    }
    let lambda = (qn + g - sigma) / 2.0;
    let mut out = DVector::zeros(p_dim + 1);
    if lambda <= qn {
        let shrink = (qn - lambda) / qn;
        out.rows_mut(0, p_dim).copy_from(&(qp * shrink));
        out[p_dim] = g - lambda;
    } else {
        out[p_dim] = sigma;
    }
    out
}

/// Dykstra's alternating projections onto an intersection of halfspaces.
fn dykstra_project(q: &DVector<f64>, normals: &[DVector<f64>], offsets: &[f64]) -> DVector<f64> {
    let m = normals.len();
    if m == 0 {
        return q.clone();
    }
    let scale = 1.0 + q.norm();
    let mut x = q.clone();
    let mut corrections: Vec<DVector<f64>> = vec![DVector::zeros(q.len()); m];
    for _cycle in 0..(ITER_CAP / m.max(1)) {
        let mut moved = 0.0_f64;
        for i in 0..m {
            let shifted = &x + &corrections[i];
            let n = &normals[i];
            let overshoot = (n.dot(&shifted) - offsets[i]).max(0.0) / n.norm_squared();
            let projected = &shifted - n * overshoot;
            corrections[i] = &shifted - &projected;
            moved = moved.max((&projected - &x).norm());
            x = projected;
        }
        if moved <= STALL_TOL * scale {
            break;
        }
    }
    x
}

/// Projection onto `{ map·q : q ∈ parent }` by projected gradient on
/// `q ↦ ½|map·q − z|²` over the parent set. With orthonormal rows this is
/// von Neumann alternating projections and converges linearly.
fn project_linear_image(
    z: &DVector<f64>,
    parent: &CharacteristicSet,
    map: &DMatrix<f64>,
    op_norm: f64,
) -> DVector<f64> {
    let step = if op_norm > 0.0 { 1.0 / op_norm } else { 1.0 };
    let scale = 1.0 + z.norm();
    let mut q = parent.project(&(map.transpose() * z));
    let mut image = map * &q;
    for _ in 0..ITER_CAP {
        let grad = map.transpose() * (&image - z);
        let q_next = parent.project(&(&q - grad * step));
        let image_next = map * &q_next;
        let moved = (&image_next - &image).norm();
        q = q_next;
        image = image_next;
        if moved <= STALL_TOL * scale {
            break;
        }
    }
    image
}

/// Domain cone `C = D(ψ)` of a dissipation potential, kept as an explicit
/// predicate so feasibility of primal increments can be tested directly.
#[derive(Debug, Clone)]
pub enum DomainCone {
    /// All of `R^dim` (kinematic hardening).
    Whole(usize),
    /// `{ (p, ξ) : |p| ≤ ξ }` (isotropic/combined hardening).
    PlasticCone { p_dim: usize },
    /// Product over consecutive blocks.
    Product(Vec<DomainCone>),
    /// `{ v : map·v ∈ inner }` (subspace restrictions).
    Preimage {
        map: DMatrix<f64>,
        inner: Box<DomainCone>,
    },
}

impl DomainCone {
    pub fn dim(&self) -> usize {
        match self {
            DomainCone::Whole(d) => *d,
            DomainCone::PlasticCone { p_dim } => p_dim + 1,
            DomainCone::Product(fs) => fs.iter().map(|f| f.dim()).sum(),
            DomainCone::Preimage { map, .. } => map.ncols(),
        }
    }

    pub fn contains(&self, v: &StateVector) -> bool {
        match self {
            DomainCone::Whole(_) => true,
            DomainCone::PlasticCone { p_dim } => {
                let (p, xi) = split_cone(v, *p_dim);
                cone_contains(&p, xi)
            }
            DomainCone::Product(fs) => {
                let mut offset = 0;
                fs.iter().all(|f| {
                    let d = f.dim();
                    let ok = f.contains(&v.rows(offset, d).into_owned());
                    offset += d;
                    ok
                })
            }
            DomainCone::Preimage { map, inner } => inner.contains(&(map * v)),
        }
    }
}

/// A positively 1-homogeneous dissipation potential: characteristic set plus
/// its domain cone. Immutable and freely shareable.
#[derive(Debug, Clone)]
pub struct DissipationPotential {
    cstar: CharacteristicSet,
    domain: DomainCone,
}

impl DissipationPotential {
    /// Pairs a characteristic set with a domain cone. The dimensions must
    /// agree; constructor-built pairs are always consistent in the sense that
    /// `eval` is finite exactly on the domain cone.
    pub fn new(cstar: CharacteristicSet, domain: DomainCone) -> Result<Self> {
        check_dim(cstar.dim(), domain.dim())?;
        Ok(DissipationPotential { cstar, domain })
    }

    /// `ψ(v) = σ_y |v|` on all of `R^dim`; the kinematic-hardening potential.
    pub fn kinematic(sigma_y: f64, dim: usize) -> Result<Self> {
        Self::new(
            CharacteristicSet::norm_ball(sigma_y, dim)?,
            DomainCone::Whole(dim),
        )
    }

    /// `ψ(ṗ, ξ̇) = σ_y ξ̇` on `{ |ṗ| ≤ ξ̇ }`, `+∞` elsewhere; the isotropic and
    /// combined hardening potential.
    pub fn isotropic(sigma_y: f64, p_dim: usize) -> Result<Self> {
        Self::new(
            CharacteristicSet::cone_capped(sigma_y, p_dim)?,
            DomainCone::PlasticCone { p_dim },
        )
    }

    pub fn dim(&self) -> usize {
        self.cstar.dim()
    }

    pub fn cstar(&self) -> &CharacteristicSet {
        &self.cstar
    }

    pub fn domain(&self) -> &DomainCone {
        &self.domain
    }

    pub fn in_domain(&self, v: &StateVector) -> bool {
        self.domain.contains(v)
    }

    /// Evaluates `ψ(v)`; `+∞` exactly when `v` is outside the domain cone.
    pub fn eval(&self, v: &StateVector) -> Result<Extended> {
        check_dim(self.dim(), v.len())?;
        if !self.domain.contains(v) {
            return Ok(Extended::Infinite);
        }
        Ok(self.cstar.support(v))
    }

    /// Euclidean distance of `q` to `C*`; the numerical surrogate for the
    /// indicator `ψ*` (zero inside, `+∞` outside, decided against a band).
    pub fn dist_to_cstar(&self, q: &DualVector) -> Result<f64> {
        check_dim(self.dim(), q.len())?;
        Ok(self.cstar.distance(q))
    }

    /// Nearest point of `C*`.
    pub fn project_cstar(&self, q: &DualVector) -> Result<DualVector> {
        check_dim(self.dim(), q.len())?;
        Ok(self.cstar.project(q))
    }

    /// `prox_{tψ}(z) = z − Π_{tC*}(z)` (Moreau). Requires `t > 0`.
    pub fn prox(&self, z: &StateVector, t: f64) -> Result<StateVector> {
        check_dim(self.dim(), z.len())?;
        if !(t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "prox scale must be > 0, got {t}"
            )));
        }
        Ok(z - self.cstar.scaled(t).project(z))
    }

    /// A maximizer of `⟨·, v⟩` over `C*` when `ψ(v)` is finite.
    pub fn support_witness(&self, v: &StateVector) -> Option<DualVector> {
        self.cstar.support_witness(v)
    }

    /// The restricted potential `ψ_h(w) = ψ(B w)` for a basis `B` with
    /// orthonormal columns; its characteristic set is `Bᵀ C*`.
    pub fn restricted(&self, basis: &DMatrix<f64>) -> Result<Self> {
        check_dim(self.dim(), basis.nrows())?;
        // An unrestricted norm ball restricts to a norm ball of the same
        // radius (orthonormal columns preserve the norm); everything else
        // goes through the generic linear image.
        let cstar = match (&self.cstar, &self.domain) {
            (CharacteristicSet::NormBall { radius, .. }, DomainCone::Whole(_)) => {
                CharacteristicSet::norm_ball(*radius, basis.ncols())?
            }
            _ => CharacteristicSet::linear_image(self.cstar.clone(), basis.transpose())?,
        };
        let domain = match &self.domain {
            DomainCone::Whole(_) => DomainCone::Whole(basis.ncols()),
            other => DomainCone::Preimage {
                map: basis.clone(),
                inner: Box::new(other.clone()),
            },
        };
        DissipationPotential::new(cstar, domain)
    }

    /// Randomized Fenchel check: for sampled `v` and `q ∈ C*`,
    /// `ψ(v) + ψ*(q) ≥ ⟨q, v⟩` must hold, with equality at the support
    /// witness. Returns counts; the report never panics.
    pub fn verify_conjugacy(&self, sample_count: usize, seed: u64) -> ConjugacyReport {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.dim();
        let tol = 1e-9;
        let mut report = ConjugacyReport::default();
        for k in 0..sample_count {
            let mut v = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            // Half the draws are steered into the domain cone so the finite
            // branch is exercised for cone-constrained potentials.
            if k % 2 == 0 {
                v = self.steer_into_domain(v, &mut rng);
            }
            let q = self.cstar.sample(&mut rng);
            let psi = self.eval(&v).expect("dimension fixed by construction");
            let pairing = q.dot(&v);
            let scale = 1.0 + pairing.abs() + v.norm() + q.norm();
            match psi {
                Extended::Finite(value) => {
                    report.fenchel_checked += 1;
                    let violation = pairing - value;
                    if violation > tol * scale {
                        report.fenchel_violations += 1;
                    }
                    report.max_fenchel_violation = report.max_fenchel_violation.max(violation);

                    if let Some(witness) = self.support_witness(&v) {
                        report.equality_checked += 1;
                        let gap = (value - witness.dot(&v)).abs();
                        let feasibility = self.cstar.distance(&witness);
                        if gap > tol * scale || feasibility > tol * scale {
                            report.equality_violations += 1;
                        }
                        report.max_equality_error = report.max_equality_error.max(gap);
                    }
                }
                Extended::Infinite => {
                    // Fenchel holds vacuously; record that domain and value agree.
                    report.infinite_checked += 1;
                    if self.in_domain(&v) {
                        report.domain_mismatches += 1;
                    }
                }
            }
        }
        report
    }

    fn steer_into_domain<R: Rng>(&self, v: StateVector, rng: &mut R) -> StateVector {
        match &self.domain {
            DomainCone::Whole(_) => v,
            DomainCone::PlasticCone { p_dim } => {
                let mut w = v;
                let pn = w.rows(0, *p_dim).norm();
                w[*p_dim] = pn * (1.0 + rng.gen_range(0.0..1.0));
                w
            }
            DomainCone::Product(_) | DomainCone::Preimage { .. } => {
                // Fall back to a scaled prox output, which always lies in the domain.
                self.prox(&v, 1.0).unwrap_or(v)
            }
        }
    }
}

/// Outcome of [`DissipationPotential::verify_conjugacy`].
#[derive(Debug, Clone, Default)]
pub struct ConjugacyReport {
    pub fenchel_checked: usize,
    pub fenchel_violations: usize,
    pub equality_checked: usize,
    pub equality_violations: usize,
    pub infinite_checked: usize,
    /// Draws where `ψ` came out `+∞` although the domain predicate accepted
    /// the point (must stay zero for consistent pairs).
    pub domain_mismatches: usize,
    pub max_fenchel_violation: f64,
    pub max_equality_error: f64,
}

impl ConjugacyReport {
    pub fn passed(&self) -> bool {
        self.fenchel_violations == 0 && self.equality_violations == 0 && self.domain_mismatches == 0
    }
}
