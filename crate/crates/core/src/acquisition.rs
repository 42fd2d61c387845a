//! Cost-sensitive knowledge gradient (CKG) by one-step fantasy Monte Carlo.
//!
//! For a candidate `x_c`, a fantasy outcome `y_f` shifts the posterior mean on
//! every grid point `g` by the rank-one update
//!
//! ```text
//! μ'(g) = μ(g) + Σ(g, x_c) / sqrt(σ²(x_c) + σn²) · Z_f
//! ```
//!
//! The gain is the improvement of the best posterior mean over the grid (plus
//! the candidate itself), averaged over fantasies and divided by the query
//! cost. All candidates share one set of standard-normal draws.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::GaussianProcess;
use crate::graph::SourceId;
use crate::rng::RngState;
use crate::Objective;

/// Candidate points inside a box.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrid {
    bounds: Vec<(f64, f64)>,
    points: Vec<Vec<f64>>,
}

impl DomainGrid {
    /// A uniform lattice of `points_per_dim` points in one dimension; in
    /// higher dimensions `points_per_dim · d` Halton points plus the box
    /// corners (up to d = 8) and the center.
    pub fn new(bounds: &[(f64, f64)], points_per_dim: usize) -> Result<DomainGrid> {
        check_bounds(bounds)?;
        let d = bounds.len();
        let n = points_per_dim.max(2);
        let scale = |j: usize, u: f64| bounds[j].0 + (bounds[j].1 - bounds[j].0) * u;
        let mut points = Vec::new();
        if d == 1 {
            for i in 0..n {
                points.push(vec![scale(0, i as f64 / (n - 1) as f64)]);
            }
        } else {
            let primes = first_primes(d);
            for i in 1..=n * d {
                points.push(
                    (0..d)
                        .map(|j| scale(j, radical_inverse(i as u64, primes[j])))
                        .collect(),
                );
            }
            if d <= 8 {
                for mask in 0u32..(1 << d) {
                    points.push(
                        (0..d)
                            .map(|j| {
                                if mask & (1 << j) != 0 {
                                    bounds[j].1
                                } else {
                                    bounds[j].0
                                }
                            })
                            .collect(),
                    );
                }
            }
            points.push((0..d).map(|j| scale(j, 0.5)).collect());
        }
        Ok(DomainGrid {
            bounds: bounds.to_vec(),
            points,
        })
    }

    pub fn from_points(bounds: &[(f64, f64)], points: Vec<Vec<f64>>) -> Result<DomainGrid> {
        check_bounds(bounds)?;
        let grid = DomainGrid {
            bounds: bounds.to_vec(),
            points,
        };
        for p in &grid.points {
            if p.len() != bounds.len() {
                return Err(Error::DimensionMismatch {
                    expected: bounds.len(),
                    got: p.len(),
                });
            }
            if !grid.contains(p) {
                return Err(Error::InvalidConfig(format!(
                    "grid point {p:?} lies outside the bounds"
                )));
            }
        }
        Ok(grid)
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.bounds.len()
            && x.iter()
                .zip(&self.bounds)
                .all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
    }
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::EmptyDomain("<no variables>".into()));
    }
    for (j, (lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::DegenerateDomain(j));
        }
    }
    Ok(())
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if out.iter().take_while(|p| *p * *p <= c).all(|p| c % p != 0) {
            out.push(c);
        }
        c += 1;
    }
    out
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Shared standard-normal draws (common random numbers across candidates).
#[derive(Debug, Clone, PartialEq)]
pub struct Fantasies(pub Vec<f64>);

impl Fantasies {
    pub fn draw(count: usize, rng: &mut RngState) -> Fantasies {
        Fantasies(
            (0..count.max(1))
                .map(|_| rng.sample(StandardNormal))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Posterior quantities on a fixed grid, reused across candidates.
pub struct GridPosterior<'a> {
    gp: &'a GaussianProcess,
    grid: &'a DomainGrid,
    mean: Vec<f64>,
    /// Column `g` holds `(K + σn² I)⁻¹ k(X, g)`.
    kinv_kg: DMatrix<f64>,
}

impl<'a> GridPosterior<'a> {
    pub fn new(gp: &'a GaussianProcess, grid: &'a DomainGrid) -> Result<GridPosterior<'a>> {
        if grid.dim() != gp.dim() {
            return Err(Error::DimensionMismatch {
                expected: gp.dim(),
                got: grid.dim(),
            });
        }
        let n = gp.len();
        let g = grid.points().len();
        let mut kinv_kg = DMatrix::zeros(n, g);
        let mut mean = Vec::with_capacity(g);
        for (j, p) in grid.points().iter().enumerate() {
            mean.push(gp.posterior(p)?.0);
            if n > 0 {
                kinv_kg.set_column(j, &gp.solve(&gp.k_star(p)));
            }
        }
        Ok(GridPosterior {
            gp,
            grid,
            mean,
            kinv_kg,
        })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn grid(&self) -> &DomainGrid {
        self.grid
    }

    /// Knowledge gradient at `x` before dividing by cost.
    pub fn knowledge_gradient(
        &self,
        x: &[f64],
        fantasies: &Fantasies,
        direction: Objective,
    ) -> Result<CkgValue> {
        let zero = CkgValue {
            gradient_value: 0.0,
            std_error: 0.0,
            fantasy_count: fantasies.len(),
        };
        let gp = self.gp;
        let (mu_c, var_c) = gp.posterior(x)?;
        let kernel = gp.kernel();
        let denom = var_c + kernel.noise_variance;
        if var_c <= 1e-12 * kernel.signal_variance || denom <= 0.0 {
            return Ok(zero);
        }
        let scale = denom.sqrt();
        let sign = direction.sign();
        // a = sign · μ, b = sign · σ̃ over grid points followed by the candidate.
        let kc = gp.k_star(x);
        let g = self.mean.len();
        let mut a = Vec::with_capacity(g + 1);
        let mut b = Vec::with_capacity(g + 1);
        for (j, p) in self.grid.points().iter().enumerate() {
            let mut cov = kernel.k(p, x);
            if gp.len() > 0 {
                cov -= self.kinv_kg.column(j).dot(&kc);
            }
            a.push(sign * self.mean[j]);
            b.push(sign * cov / scale);
        }
        a.push(sign * mu_c);
        b.push(sign * var_c / scale);
        let best_now = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let f = fantasies.len() as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for &z in &fantasies.0 {
            // Fantasy outcome y = μ_c + sign·scale·z, so z > 0 always means
            // a better-than-expected observation.
            let best = a
                .iter()
                .zip(&b)
                .map(|(ai, bi)| ai + sign * bi * z)
                .fold(f64::NEG_INFINITY, f64::max);
            let gain = best - best_now;
            sum += gain;
            sum_sq += gain * gain;
        }
        let mean = sum / f;
        let var = if f > 1.0 {
            ((sum_sq - f * mean * mean) / (f - 1.0)).max(0.0)
        } else {
            0.0
        };
        Ok(CkgValue {
            gradient_value: mean.max(0.0),
            std_error: (var / f).sqrt(),
            fantasy_count: fantasies.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkgValue {
    pub gradient_value: f64,
    pub std_error: f64,
    pub fantasy_count: usize,
}

impl CkgValue {
    fn per_cost(self, cost: f64) -> CkgValue {
        CkgValue {
            gradient_value: self.gradient_value / cost,
            std_error: self.std_error / cost,
            fantasy_count: self.fantasy_count,
        }
    }
}

fn check_cost(cost: f64) -> Result<()> {
    if cost > 0.0 && cost.is_finite() {
        Ok(())
    } else {
        Err(Error::ZeroCost(cost))
    }
}

/// CKG at one candidate with fresh fantasy draws from `rng`.
pub fn ckg_at(
    gp: &GaussianProcess,
    candidate: &[f64],
    grid: &DomainGrid,
    cost: f64,
    fantasies: usize,
    rng: &mut RngState,
    direction: Objective,
) -> Result<CkgValue> {
    check_cost(cost)?;
    let post = GridPosterior::new(gp, grid)?;
    let z = Fantasies::draw(fantasies, rng);
    Ok(post
        .knowledge_gradient(candidate, &z, direction)?
        .per_cost(cost))
}

/// Ordered variables with assigned values and their provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSet {
    pub variables: Vec<String>,
    pub values: Vec<f64>,
    pub source_id: SourceId,
    /// Position of the set in the source's POMIS ranking; `None` when the
    /// full exploration set is used.
    pub pomis_rank: Option<usize>,
}

impl InterventionSet {
    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn assignment(&self) -> Vec<(&str, f64)> {
        self.variables
            .iter()
            .map(String::as_str)
            .zip(self.values.iter().copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CkgEstimate {
    pub source_id: SourceId,
    pub candidate: InterventionSet,
    pub gradient_value: f64,
    pub fantasy_count: usize,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CkgSettings {
    pub fantasies: usize,
    pub grid_points: usize,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for CkgSettings {
    fn default() -> Self {
        CkgSettings {
            fantasies: 64,
            grid_points: 64,
            refine_steps: 20,
            seed: 0,
        }
    }
}

/// Best candidate found by [`optimize_ckg`].
#[derive(Debug, Clone, PartialEq)]
pub struct CkgOptimum {
    pub x: Vec<f64>,
    pub value: CkgValue,
}

/// Grid argmax of the CKG followed by a coordinate line search of
/// `refine_steps` passes with a halving step.
pub fn optimize_ckg(
    gp: &GaussianProcess,
    grid: &DomainGrid,
    cost: f64,
    fantasies: usize,
    refine_steps: usize,
    rng: &mut RngState,
    direction: Objective,
) -> Result<CkgOptimum> {
    check_cost(cost)?;
    let post = GridPosterior::new(gp, grid)?;
    let z = Fantasies::draw(fantasies, rng);
    let mut best_x = Vec::new();
    let mut best = None::<CkgValue>;
    for p in grid.points() {
        let v = post.knowledge_gradient(p, &z, direction)?;
        if best.is_none_or(|b| v.gradient_value > b.gradient_value) {
            best = Some(v);
            best_x = p.clone();
        }
    }
    let mut best = best.ok_or_else(|| Error::EmptyDomain("grid has no points".into()))?;
    let bounds = grid.bounds();
    let per_dim = (grid.points().len() as f64)
        .powf(1.0 / bounds.len() as f64)
        .max(2.0);
    let mut step: Vec<f64> = bounds
        .iter()
        .map(|(lo, hi)| (hi - lo) / (2.0 * per_dim))
        .collect();
    for _ in 0..refine_steps {
        let mut improved = false;
        for j in 0..bounds.len() {
            for dir in [1.0, -1.0] {
                let mut x = best_x.clone();
                x[j] = (x[j] + dir * step[j]).clamp(bounds[j].0, bounds[j].1);
                if x[j] == best_x[j] {
                    continue;
                }
                let v = post.knowledge_gradient(&x, &z, direction)?;
                if v.gradient_value > best.gradient_value {
                    best = v;
                    best_x = x;
                    improved = true;
                }
            }
        }
        if !improved {
            for s in step.iter_mut() {
                *s *= 0.5;
            }
        }
    }
    Ok(CkgOptimum {
        x: best_x,
        value: best.per_cost(cost),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::{Kernel, PriorMean};

    fn gp1() -> GaussianProcess {
        GaussianProcess::new(1, Kernel::new(1.0, 0.3, 0.01).unwrap(), PriorMean::zero())
            .with_data(vec![vec![0.1], vec![0.5], vec![0.8]], vec![0.2, -0.4, 0.3])
            .unwrap()
    }

    #[test]
    fn grids_stay_in_bounds() {
        let g = DomainGrid::new(&[(-1.0, 2.0)], 11).unwrap();
        assert_eq!(g.points().len(), 11);
        assert_eq!(g.points()[0], vec![-1.0]);
        assert_eq!(g.points()[10], vec![2.0]);
        let g = DomainGrid::new(&[(0.0, 1.0), (0.0, 30.0), (-5.0, 5.0)], 16).unwrap();
        assert_eq!(g.points().len(), 16 * 3 + 8 + 1);
        assert!(g.points().iter().all(|p| g.contains(p)));
        assert!(matches!(
            DomainGrid::new(&[(1.0, 0.0)], 4),
            Err(Error::DegenerateDomain(0))
        ));
        assert!(DomainGrid::from_points(&[(0.0, 1.0)], vec![vec![2.0]]).is_err());
    }

    #[test]
    fn halton_radical_inverse() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(5, 3) - (2.0 / 3.0 + 1.0 / 9.0)).abs() < 1e-15);
        assert_eq!(first_primes(5), vec![2, 3, 5, 7, 11]);
    }

    #[test]
    fn cost_is_validated_and_divides_the_value() {
        let gp = gp1();
        let grid = DomainGrid::new(&[(0.0, 1.0)], 21).unwrap();
        assert!(matches!(
            ckg_at(
                &gp,
                &[0.3],
                &grid,
                0.0,
                16,
                &mut RngState::new(0),
                Objective::Max
            ),
            Err(Error::ZeroCost(_))
        ));
        let a = ckg_at(
            &gp,
            &[0.3],
            &grid,
            1.0,
            256,
            &mut RngState::new(5),
            Objective::Max,
        )
        .unwrap();
        let b = ckg_at(
            &gp,
            &[0.3],
            &grid,
            2.0,
            256,
            &mut RngState::new(5),
            Objective::Max,
        )
        .unwrap();
        assert!(a.gradient_value > 0.0);
        assert_eq!(b.gradient_value, a.gradient_value / 2.0);
    }

    #[test]
    fn no_uncertainty_means_no_gradient() {
        let gp = GaussianProcess::new(1, Kernel::new(1.0, 0.3, 0.0).unwrap(), PriorMean::zero())
            .with_data(vec![vec![0.5]], vec![1.0])
            .unwrap();
        let grid = DomainGrid::new(&[(0.0, 1.0)], 11).unwrap();
        let v = ckg_at(
            &gp,
            &[0.5],
            &grid,
            1.0,
            64,
            &mut RngState::new(1),
            Objective::Min,
        )
        .unwrap();
        assert_eq!(v.gradient_value, 0.0);
    }

    #[test]
    fn optimizer_beats_every_grid_point() {
        let gp = gp1();
        let grid = DomainGrid::new(&[(0.0, 1.0)], 41).unwrap();
        let best = optimize_ckg(
            &gp,
            &grid,
            1.0,
            128,
            20,
            &mut RngState::new(2),
            Objective::Min,
        )
        .unwrap();
        let post = GridPosterior::new(&gp, &grid).unwrap();
        let z = Fantasies::draw(128, &mut RngState::new(2));
        for p in grid.points() {
            assert!(
                post.knowledge_gradient(p, &z, Objective::Min)
                    .unwrap()
                    .gradient_value
                    <= best.value.gradient_value
            );
        }
    }
}
