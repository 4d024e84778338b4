//! Martingale transport as a finite linear program.
//!
//! Variables are the masses of grid paths; rows pin the marginals and force
//! each history's conditional mean of the next coordinate to equal its last
//! coordinate. The simplex duals of the marginal rows are the static parts
//! `φ_t` of a superhedge and those of the martingale rows its predictable
//! strategy `H`.

pub mod reward;
pub mod simplex;

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::coupling::PathMeasure;
use crate::decomposition::{decompose_chain, n_step_components, StepDecomposition};
use crate::error::{MotError, Result};
use crate::geometry::SupportSet;
use crate::measure::DiscreteMeasure;
use crate::rational::{positive_part, zero, Rational};

pub use reward::RewardExpr;
pub use simplex::{LinearProgram, LpOutcome, LpScalar, LpSolution};

/// Absolute tolerance for float-mode certificate checks.
pub const FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Exact,
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProgramOptions {
    /// Only create variables for grid paths in the effective domain.
    pub restrict_to_domain: bool,
}

impl Default for ProgramOptions {
    fn default() -> Self {
        Self {
            restrict_to_domain: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum RowKind {
    Marginal { t: usize, x: Rational },
    Martingale { t: usize, prefix: Vec<Rational> },
}

/// A martingale transport problem on a finite grid.
#[derive(Debug, Clone)]
pub struct MotProgram<T> {
    n: usize,
    /// Candidate coordinates per time.
    grid: Vec<Vec<Rational>>,
    paths: Vec<Vec<Rational>>,
    rows: Vec<RowKind>,
    lp: LinearProgram<T>,
}

/// Superhedging certificate: `Σ_t φ_t(x_t) + Σ_t H_t(x_0..x_{t-1})(x_t - x_{t-1}) >= f`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualCertificate<T> {
    pub n: usize,
    /// Static parts per time; empty maps for free intermediate times.
    pub phi: Vec<BTreeMap<Rational, T>>,
    /// Strategy indexed by `(t, history)`; absent entries are zero.
    pub h: BTreeMap<(usize, Vec<Rational>), T>,
    pub objective: T,
}

impl<T: LpScalar> DualCertificate<T> {
    /// Value of the superhedging portfolio along `path`.
    pub fn hedge_value(&self, path: &[Rational]) -> T {
        let mut acc = T::zero();
        for (t, phi) in self.phi.iter().enumerate() {
            if let Some(v) = phi.get(&path[t]) {
                acc = acc.plus(v);
            }
        }
        for t in 1..=self.n {
            if let Some(h) = self.h.get(&(t, path[..t].to_vec())) {
                let step = T::from_rational(&(&path[t] - &path[t - 1]));
                acc = acc.plus(&h.times(&step));
            }
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct MotSolution<T> {
    pub value: T,
    /// Optimal masses on the grid paths, zero entries omitted.
    pub optimizer: Vec<(Vec<Rational>, T)>,
    pub certificate: DualCertificate<T>,
}

impl MotSolution<Rational> {
    pub fn optimizer_measure(&self, n: usize) -> PathMeasure {
        PathMeasure::from_paths(n, self.optimizer.iter().cloned()).expect("nonnegative optimizer")
    }
}

fn enumerate_paths<F>(grid: &[Vec<Rational>], keep_step: F) -> Vec<Vec<Rational>>
where
    F: Fn(usize, &[Rational]) -> bool,
{
    let mut out = Vec::new();
    let mut stack: Vec<Vec<Rational>> = grid[0].iter().map(|x| vec![x.clone()]).collect();
    stack.reverse();
    while let Some(prefix) = stack.pop() {
        let t = prefix.len();
        if t == grid.len() {
            out.push(prefix);
            continue;
        }
        for y in grid[t].iter().rev() {
            let mut next = prefix.clone();
            next.push(y.clone());
            if keep_step(t, &next) {
                stack.push(next);
            }
        }
    }
    out
}

fn check_chain(marginals: &[DiscreteMeasure]) -> Result<()> {
    if marginals.len() < 2 {
        return Err(MotError::Dimension("at least two marginals are required".into()));
    }
    for (t, pair) in marginals.windows(2).enumerate() {
        if !pair[0].convex_order_leq(&pair[1]) {
            return Err(MotError::NotInConvexOrder { step: t + 1 });
        }
    }
    Ok(())
}

impl<T: LpScalar> MotProgram<T> {
    fn assemble<R>(
        grid: Vec<Vec<Rational>>,
        paths: Vec<Vec<Rational>>,
        pinned: &[(usize, &DiscreteMeasure)],
        reward: R,
    ) -> Result<Self>
    where
        R: Fn(&[Rational]) -> Result<T>,
    {
        let n = grid.len() - 1;
        let mut lp = LinearProgram::new(paths.len());
        lp.objective = paths.iter().map(|p| reward(p)).collect::<Result<Vec<_>>>()?;
        let mut rows = Vec::new();
        for &(t, mu) in pinned {
            let mut by_point: BTreeMap<&Rational, Vec<(usize, T)>> = BTreeMap::new();
            for (j, p) in paths.iter().enumerate() {
                by_point.entry(&p[t]).or_default().push((j, T::one()));
            }
            for (x, w) in mu.iter() {
                let coeffs = by_point.remove(x).unwrap_or_default();
                if coeffs.is_empty() {
                    return Err(MotError::Infeasible);
                }
                lp.add_row(coeffs, T::from_rational(w));
                rows.push(RowKind::Marginal { t, x: x.clone() });
            }
            if !by_point.is_empty() {
                // grid points outside the support are pinned to zero
                for (x, coeffs) in by_point {
                    lp.add_row(coeffs, T::zero());
                    rows.push(RowKind::Marginal { t, x: x.clone() });
                }
            }
        }
        for t in 1..=n {
            let mut by_prefix: BTreeMap<&[Rational], Vec<(usize, T)>> = BTreeMap::new();
            for (j, p) in paths.iter().enumerate() {
                let step = &p[t] - &p[t - 1];
                if !Zero::is_zero(&step) {
                    by_prefix.entry(&p[..t]).or_default().push((j, T::from_rational(&step)));
                }
            }
            for (prefix, coeffs) in by_prefix {
                lp.add_row(coeffs, T::zero());
                rows.push(RowKind::Martingale {
                    t,
                    prefix: prefix.to_vec(),
                });
            }
        }
        Ok(Self {
            n,
            grid,
            paths,
            rows,
            lp,
        })
    }

    /// Problem with every marginal pinned; the grid is the union of supports.
    pub fn constrained<R>(marginals: &[DiscreteMeasure], reward: R, options: ProgramOptions) -> Result<Self>
    where
        R: Fn(&[Rational]) -> Result<T>,
    {
        check_chain(marginals)?;
        let grid: Vec<Vec<Rational>> = marginals.iter().map(|m| m.support()).collect();
        let decomps: Option<Vec<StepDecomposition>> = if options.restrict_to_domain {
            Some(decompose_chain(marginals)?)
        } else {
            None
        };
        let paths = enumerate_paths(&grid, |t, next| match &decomps {
            Some(d) => d[t - 1].classify(&next[t - 1], &next[t]).is_some(),
            None => true,
        });
        let pinned: Vec<(usize, &DiscreteMeasure)> = marginals.iter().enumerate().collect();
        Self::assemble(grid, paths, &pinned, reward)
    }

    /// Problem with only the first and last marginal pinned. Intermediate
    /// coordinates range over `grid` (default: union of both supports).
    pub fn free<R>(
        mu0: &DiscreteMeasure,
        mun: &DiscreteMeasure,
        n: usize,
        grid: Option<Vec<Rational>>,
        reward: R,
        options: ProgramOptions,
    ) -> Result<Self>
    where
        R: Fn(&[Rational]) -> Result<T>,
    {
        let structure = n_step_components(mu0, mun, n)?;
        let middle = grid.unwrap_or_else(|| {
            let mut g: Vec<Rational> = mu0.support().into_iter().chain(mun.support()).collect();
            g.sort();
            g.dedup();
            g
        });
        let mut full_grid = vec![mu0.support()];
        for _ in 1..n {
            full_grid.push(middle.clone());
        }
        full_grid.push(mun.support());
        let mut paths = enumerate_paths(&full_grid, |_, _| true);
        if options.restrict_to_domain {
            paths.retain(|p| structure.locate(p).is_some());
        }
        Self::assemble(full_grid, paths, &[(0, mu0), (n, mun)], reward)
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn paths(&self) -> &[Vec<Rational>] {
        &self.paths
    }

    pub fn grid(&self) -> &[Vec<Rational>] {
        &self.grid
    }

    pub fn reward_of(&self, j: usize) -> &T {
        &self.lp.objective[j]
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn solve_lp(&self) -> Result<LpSolution<T>> {
        match self.lp.solve() {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => Err(MotError::Infeasible),
            LpOutcome::Unbounded => Err(MotError::Unbounded),
        }
    }

    /// Reads the superhedge off the simplex duals and checks it.
    pub fn extract_dual(&self, solution: &LpSolution<T>) -> Result<DualCertificate<T>> {
        let mut phi = vec![BTreeMap::new(); self.n + 1];
        let mut h = BTreeMap::new();
        let mut objective = T::zero();
        for ((kind, y), row) in self.rows.iter().zip(&solution.duals).zip(&self.lp.rows) {
            objective = objective.plus(&y.times(&row.rhs));
            match kind {
                RowKind::Marginal { t, x } => {
                    phi[*t].insert(x.clone(), y.clone());
                }
                RowKind::Martingale { t, prefix } => {
                    if !y.is_zero() {
                        h.insert((*t, prefix.clone()), y.clone());
                    }
                }
            }
        }
        let cert = DualCertificate {
            n: self.n,
            phi,
            h,
            objective,
        };
        self.check_certificate(&cert, solution)?;
        Ok(cert)
    }

    fn check_certificate(&self, cert: &DualCertificate<T>, solution: &LpSolution<T>) -> Result<()> {
        if !cert.objective.minus(&solution.value).is_zero() {
            return Err(MotError::Internal(format!(
                "dual objective {:?} differs from primal value {:?}",
                cert.objective, solution.value
            )));
        }
        for (j, path) in self.paths.iter().enumerate() {
            let slack = cert.hedge_value(path).minus(&self.lp.objective[j]);
            if slack.is_neg() {
                return Err(MotError::Internal(format!("superhedge fails on {path:?}")));
            }
        }
        for &j in &solution.basis {
            let slack = cert.hedge_value(&self.paths[j]).minus(&self.lp.objective[j]);
            if !slack.is_zero() {
                return Err(MotError::Internal(format!(
                    "complementary slackness fails on {:?}",
                    self.paths[j]
                )));
            }
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<MotSolution<T>> {
        let sol = self.solve_lp()?;
        let certificate = self.extract_dual(&sol)?;
        let optimizer = self
            .paths
            .iter()
            .zip(&sol.x)
            .filter(|(_, w)| w.is_pos())
            .map(|(p, w)| (p.clone(), w.clone()))
            .collect();
        Ok(MotSolution {
            value: sol.value,
            optimizer,
            certificate,
        })
    }

    /// Grid paths of the program where the superhedge is tight.
    pub fn contact_set(&self, cert: &DualCertificate<T>) -> SupportSet {
        SupportSet::new(
            self.n,
            self.paths
                .iter()
                .enumerate()
                .filter(|(j, p)| cert.hedge_value(p).minus(&self.lp.objective[*j]).is_zero())
                .map(|(_, p)| p.clone()),
        )
    }

    /// Whether `cert` superhedges the reward on every program path.
    pub fn superhedges(&self, cert: &DualCertificate<T>) -> bool {
        self.paths
            .iter()
            .enumerate()
            .all(|(j, p)| !cert.hedge_value(p).minus(&self.lp.objective[j]).is_neg())
    }

    /// Expected reward of `p`; paths outside the program's grid are an error.
    pub fn value_of(&self, p: &PathMeasure) -> Result<T> {
        let index: BTreeMap<&Vec<Rational>, usize> =
            self.paths.iter().enumerate().map(|(j, p)| (p, j)).collect();
        let mut acc = T::zero();
        for (x, w) in p.iter() {
            let j = index
                .get(x)
                .ok_or_else(|| MotError::Dimension(format!("path {x:?} is not a program variable")))?;
            acc = acc.plus(&T::from_rational(w).times(&self.lp.objective[*j]));
        }
        Ok(acc)
    }
}

/// Exact primal and dual of `sup_{P} P(f)` over martingale transports with the given marginals.
pub fn solve_primal_exact<F>(marginals: &[DiscreteMeasure], reward: F) -> Result<MotSolution<Rational>>
where
    F: Fn(&[Rational]) -> Rational,
{
    MotProgram::constrained(marginals, |p| Ok(reward(p)), ProgramOptions::default())?.solve()
}

pub fn solve_primal_float<F>(marginals: &[DiscreteMeasure], reward: F) -> Result<MotSolution<f64>>
where
    F: Fn(&[Rational]) -> f64,
{
    let program = MotProgram::constrained(marginals, |p| Ok(reward(p)), ProgramOptions::default())?;
    solve_float(&program)
}

fn solve_float(program: &MotProgram<f64>) -> Result<MotSolution<f64>> {
    let sol = program.solve_lp()?;
    let certificate = program.extract_dual_float(&sol)?;
    let optimizer = program
        .paths
        .iter()
        .zip(&sol.x)
        .filter(|(_, w)| w.is_pos())
        .map(|(p, w)| (p.clone(), *w))
        .collect();
    Ok(MotSolution {
        value: sol.value,
        optimizer,
        certificate,
    })
}

impl MotProgram<f64> {
    /// Dual extraction with the float tolerance applied to all checks.
    pub fn extract_dual_float(&self, solution: &LpSolution<f64>) -> Result<DualCertificate<f64>> {
        let mut phi = vec![BTreeMap::new(); self.n + 1];
        let mut h = BTreeMap::new();
        let mut objective = 0.0;
        for ((kind, y), row) in self.rows.iter().zip(&solution.duals).zip(&self.lp.rows) {
            objective += y * row.rhs;
            match kind {
                RowKind::Marginal { t, x } => {
                    phi[*t].insert(x.clone(), *y);
                }
                RowKind::Martingale { t, prefix } => {
                    h.insert((*t, prefix.clone()), *y);
                }
            }
        }
        let cert = DualCertificate {
            n: self.n,
            phi,
            h,
            objective,
        };
        if (cert.objective - solution.value).abs() > FLOAT_TOLERANCE {
            return Err(MotError::Internal("float duality gap".into()));
        }
        for (j, path) in self.paths.iter().enumerate() {
            if cert.hedge_value(path) - self.lp.objective[j] < -FLOAT_TOLERANCE {
                return Err(MotError::Internal(format!("float superhedge fails on {path:?}")));
            }
        }
        Ok(cert)
    }
}

/// Result of `solve_primal` in either mode.
#[derive(Debug, Clone)]
pub enum Solved {
    Exact(MotSolution<Rational>),
    Float(MotSolution<f64>),
}

impl Solved {
    pub fn value_f64(&self) -> f64 {
        match self {
            Solved::Exact(s) => crate::rational::to_f64(&s.value),
            Solved::Float(s) => s.value,
        }
    }
}

/// Solves for a parsed reward in the requested mode.
pub fn solve_primal(marginals: &[DiscreteMeasure], reward: &RewardExpr, mode: Mode) -> Result<Solved> {
    if reward.max_time() >= marginals.len() {
        return Err(MotError::Dimension(format!(
            "reward uses time {} with {} marginals",
            reward.max_time(),
            marginals.len()
        )));
    }
    match mode {
        Mode::Exact => {
            let program = MotProgram::constrained(marginals, |p| reward.eval_exact(p), ProgramOptions::default())?;
            Ok(Solved::Exact(program.solve()?))
        }
        Mode::Float => {
            let program = MotProgram::constrained(marginals, |p| Ok(reward.eval_f64(p)), ProgramOptions::default())?;
            Ok(Solved::Float(solve_float(&program)?))
        }
    }
}

/// Free-marginal problem in either mode.
pub fn solve_free(
    mu0: &DiscreteMeasure,
    mun: &DiscreteMeasure,
    n: usize,
    grid: Option<Vec<Rational>>,
    reward: &RewardExpr,
    mode: Mode,
) -> Result<Solved> {
    if reward.max_time() > n {
        return Err(MotError::Dimension(format!("reward uses time {} beyond {n}", reward.max_time())));
    }
    match mode {
        Mode::Exact => {
            let program = MotProgram::free(mu0, mun, n, grid, |p| reward.eval_exact(p), ProgramOptions::default())?;
            Ok(Solved::Exact(program.solve()?))
        }
        Mode::Float => {
            let program = MotProgram::free(mu0, mun, n, grid, |p| Ok(reward.eval_f64(p)), ProgramOptions::default())?;
            Ok(Solved::Float(solve_float(&program)?))
        }
    }
}

/// Minimum of `θ_t((x - b)^+)` over chains `part <=_c θ_1 <=_c ... <=_c θ_t`
/// with `θ_s <= chain[s-1]`.
pub fn chain_min_call(part: &DiscreteMeasure, chain: &[DiscreteMeasure], t: usize, b: &Rational) -> Result<Rational> {
    if t == 0 || t > chain.len() {
        return Err(MotError::Dimension(format!("chain index {t} out of range")));
    }
    let one = Rational::from_integer(1.into());
    let mut supports = vec![part.support()];
    supports.extend(chain[..t].iter().map(|m| m.support()));

    // coupling variables (s, x, y) for s = 1..=t, then one slack per (s, y)
    let mut index: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for s in 1..=t {
        for i in 0..supports[s - 1].len() {
            for j in 0..supports[s].len() {
                let next = index.len();
                index.insert((s, i, j), next);
            }
        }
    }
    let couplings = index.len();
    let mut slacks: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in 1..=t {
        for j in 0..supports[s].len() {
            slacks.insert((s, j), couplings + slacks.len());
        }
    }
    let mut lp = LinearProgram::<Rational>::new(couplings + slacks.len());
    for (&(s, _, j), &col) in &index {
        if s == t {
            lp.objective[col] = -positive_part(&(&supports[t][j] - b));
        }
    }
    for s in 1..=t {
        for (i, x) in supports[s - 1].iter().enumerate() {
            let out: Vec<usize> = (0..supports[s].len()).map(|j| index[&(s, i, j)]).collect();
            let mut mass: Vec<(usize, Rational)> = out.iter().map(|&c| (c, one.clone())).collect();
            let rhs = if s == 1 {
                part.weight_at(x)
            } else {
                for k in 0..supports[s - 2].len() {
                    mass.push((index[&(s - 1, k, i)], -one.clone()));
                }
                zero()
            };
            lp.add_row(mass, rhs);
            let drift = out
                .iter()
                .zip(&supports[s])
                .map(|(&c, y)| (c, y - x))
                .collect();
            lp.add_row(drift, zero());
        }
        for (j, y) in supports[s].iter().enumerate() {
            let mut cap: Vec<(usize, Rational)> = (0..supports[s - 1].len())
                .map(|i| (index[&(s, i, j)], one.clone()))
                .collect();
            cap.push((slacks[&(s, j)], one.clone()));
            lp.add_row(cap, chain[s - 1].weight_at(y));
        }
    }
    match lp.solve() {
        LpOutcome::Optimal(sol) => Ok(-sol.value),
        LpOutcome::Infeasible => Err(MotError::Infeasible),
        LpOutcome::Unbounded => Err(MotError::Internal("chain program unbounded".into())),
    }
}

/// First basic feasible martingale coupling of `from <=_c to` found by phase one.
pub fn first_feasible_coupling(from: &DiscreteMeasure, to: &DiscreteMeasure) -> Result<PathMeasure> {
    let program = MotProgram::<Rational>::constrained(
        &[from.clone(), to.clone()],
        |_| Ok(zero()),
        ProgramOptions {
            restrict_to_domain: false,
        },
    )?;
    let sol = program.solve_lp()?;
    PathMeasure::from_paths(
        1,
        program
            .paths
            .iter()
            .cloned()
            .zip(sol.x)
            .filter(|(_, w)| w.is_pos()),
    )
}
