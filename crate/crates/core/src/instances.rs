//! Seeded random instances for test suites.
//!
//! Marginals live on a small random integer grid and are produced from each
//! other by random martingale kernels, so every chain is in convex order by
//! construction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lpsolver::reward::{Comparison, RewardExpr};
use crate::measure::DiscreteMeasure;
use crate::rational::{int, ratio, Rational};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of a random chain.
#[derive(Debug, Clone, Copy)]
pub struct ChainShape {
    pub steps: usize,
    /// Size of the common grid, which bounds every support.
    pub grid_size: usize,
    /// Grid points are drawn from `-span..=span`.
    pub span: i64,
    /// Atoms of `μ_0`.
    pub start_atoms: usize,
}

impl Default for ChainShape {
    fn default() -> Self {
        Self {
            steps: 2,
            grid_size: 5,
            span: 6,
            start_atoms: 2,
        }
    }
}

fn random_grid(rng: &mut InstanceRng, size: usize, span: i64) -> Vec<Rational> {
    let mut pool: Vec<i64> = (-span..=span).collect();
    pool.shuffle(rng);
    let mut g: Vec<i64> = pool.into_iter().take(size).collect();
    g.sort_unstable();
    g.into_iter().map(int).collect()
}

fn random_weights(rng: &mut InstanceRng, k: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| ratio(w, total)).collect()
}

/// One random martingale step: each atom keeps part of its mass and spreads
/// the rest to a grid point on either side, preserving its barycenter.
pub fn spread(rng: &mut InstanceRng, mu: &DiscreteMeasure, grid: &[Rational]) -> DiscreteMeasure {
    let mut out: Vec<(Rational, Rational)> = Vec::new();
    for (x, w) in mu.iter() {
        let left: Vec<&Rational> = grid.iter().filter(|g| *g < x).collect();
        let right: Vec<&Rational> = grid.iter().filter(|g| *g > x).collect();
        let keep = ratio(rng.gen_range(0..=2), 4);
        if left.is_empty() || right.is_empty() {
            out.push((x.clone(), w.clone()));
            continue;
        }
        let l = left[rng.gen_range(0..left.len())].clone();
        let r = right[rng.gen_range(0..right.len())].clone();
        let moved = w * (int(1) - &keep);
        let width = &r - &l;
        out.push((l.clone(), &moved * (&r - x) / &width));
        out.push((r.clone(), &moved * (x - &l) / &width));
        out.push((x.clone(), w * keep));
    }
    DiscreteMeasure::new(out).expect("nonnegative split")
}

/// Marginals `μ_0 <=_c ... <=_c μ_n` on a shared random grid.
pub fn random_chain(rng: &mut InstanceRng, shape: ChainShape) -> Vec<DiscreteMeasure> {
    let grid = random_grid(rng, shape.grid_size, shape.span);
    // start strictly inside the grid so that spreading is possible
    let inner = &grid[1..grid.len() - 1];
    let k = shape.start_atoms.clamp(1, inner.len().max(1));
    let mut starts: Vec<Rational> = if inner.is_empty() {
        vec![grid[0].clone()]
    } else {
        inner.choose_multiple(rng, k).cloned().collect()
    };
    starts.sort();
    let weights = random_weights(rng, starts.len());
    let mu0 = DiscreteMeasure::new(starts.into_iter().zip(weights)).expect("positive weights");
    let mut chain = vec![mu0];
    for _ in 0..shape.steps {
        let next = spread(rng, chain.last().expect("nonempty"), &grid);
        chain.push(next);
    }
    chain
}

/// Uniform measure on `k` equally spaced points of `[-1, 1]`.
pub fn uniform_discretization(k: usize) -> DiscreteMeasure {
    let denom = (k as i64 - 1).max(1);
    let w = ratio(1, k as i64);
    DiscreteMeasure::new((0..k as i64).map(|i| (ratio(2 * i - denom, denom), w.clone()))).expect("positive weights")
}

fn random_factor(rng: &mut InstanceRng, n: usize, grid: &[Rational]) -> RewardExpr {
    let t = rng.gen_range(0..=n);
    let b = grid[rng.gen_range(0..grid.len())].clone();
    match rng.gen_range(0..5) {
        0 => RewardExpr::Coord(t),
        1 => RewardExpr::Call { t, b },
        2 => RewardExpr::Put { t, b },
        3 => RewardExpr::Abs { t, b },
        _ => RewardExpr::Indicator {
            t,
            op: Comparison::Le,
            a: b,
        },
    }
}

/// A random sum of products of elementary payoffs with rational coefficients.
pub fn random_product_reward(rng: &mut InstanceRng, marginals: &[DiscreteMeasure]) -> RewardExpr {
    let n = marginals.len() - 1;
    let mut grid: Vec<Rational> = marginals.iter().flat_map(|m| m.support()).collect();
    grid.sort();
    grid.dedup();
    let terms = (0..rng.gen_range(1..=3))
        .map(|_| {
            let mut factors = vec![RewardExpr::Const(ratio(rng.gen_range(-6..=6), rng.gen_range(1..=3)))];
            for _ in 0..rng.gen_range(1..=2) {
                factors.push(random_factor(rng, n, &grid));
            }
            RewardExpr::Product(factors)
        })
        .collect();
    RewardExpr::Sum(terms)
}
