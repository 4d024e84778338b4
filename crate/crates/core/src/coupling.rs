//! Path measures and the left-monotone constructions.
//!
//! A left-monotone transport is built atom by atom of the initial marginal:
//! atom `i` is pushed through the residual marginals by successive shadows,
//! producing increments `Δ_i^0 <=_c Δ_i^1 <=_c ... <=_c Δ_i^n`. Each pair of
//! consecutive increments is coupled by a one-step martingale kernel and the
//! kernels are chained into paths. Summing over atoms gives a transport whose
//! prefix images are the obstructed shadows.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use crate::error::{MotError, Result};
use crate::lpsolver;
use crate::measure::DiscreteMeasure;
use crate::rational::Rational;
use crate::shadow::{obstructed_shadow, shadow, shadow_atom};

/// Default limit on the number of support paths a construction may produce.
pub const DEFAULT_PATH_CAP: usize = 1_000_000;

/// Finitely supported measure on `R^{n+1}`, stored in lexicographic path order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PathMeasure {
    n: usize,
    paths: BTreeMap<Vec<Rational>, Rational>,
}

impl PathMeasure {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            paths: BTreeMap::new(),
        }
    }

    pub fn from_paths<I>(n: usize, paths: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<Rational>, Rational)>,
    {
        let mut out = Self::new(n);
        for (x, w) in paths {
            if x.len() != n + 1 {
                return Err(MotError::Dimension(format!(
                    "path of length {} in a {n}-step measure",
                    x.len()
                )));
            }
            if w.is_negative() {
                return Err(MotError::InvalidWeight {
                    at: x[0].clone(),
                    weight: w,
                });
            }
            out.add_mass(x, w);
        }
        Ok(out)
    }

    /// Adds `w` to the path `x`; zero totals are dropped.
    pub fn add_mass(&mut self, x: Vec<Rational>, w: Rational) {
        if w.is_zero() {
            return;
        }
        let entry = self.paths.entry(x).or_insert_with(Rational::zero);
        *entry += w;
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<Rational>, &Rational)> {
        self.paths.iter()
    }

    pub fn weight(&self, x: &[Rational]) -> Rational {
        self.paths.get(x).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn mass(&self) -> Rational {
        self.paths.values().sum()
    }

    pub fn marginal(&self, t: usize) -> DiscreteMeasure {
        DiscreteMeasure::new(self.paths.iter().map(|(x, w)| (x[t].clone(), w.clone())))
            .expect("weights are positive")
    }

    /// Pushforward onto the listed coordinates.
    pub fn project(&self, indices: &[usize]) -> PathMeasure {
        let mut out = PathMeasure::new(indices.len().saturating_sub(1));
        for (x, w) in &self.paths {
            out.add_mass(indices.iter().map(|&i| x[i].clone()).collect(), w.clone());
        }
        out
    }

    /// Law of `x_t` on the event `x_0 <= a`.
    pub fn prefix_image(&self, a: &Rational, t: usize) -> DiscreteMeasure {
        DiscreteMeasure::new(
            self.paths
                .iter()
                .filter(|(x, _)| &x[0] <= a)
                .map(|(x, w)| (x[t].clone(), w.clone())),
        )
        .expect("weights are positive")
    }

    pub fn scale(&self, factor: &Rational) -> PathMeasure {
        let mut out = PathMeasure::new(self.n);
        for (x, w) in &self.paths {
            out.add_mass(x.clone(), w * factor);
        }
        out
    }

    pub fn add(&self, other: &PathMeasure) -> PathMeasure {
        let mut out = self.clone();
        for (x, w) in &other.paths {
            out.add_mass(x.clone(), w.clone());
        }
        out
    }

    pub fn support(&self) -> Vec<Vec<Rational>> {
        self.paths.keys().cloned().collect()
    }

    /// Expectation of `f` along paths.
    pub fn integrate<F: Fn(&[Rational]) -> Rational>(&self, f: F) -> Rational {
        self.paths.iter().map(|(x, w)| w * f(x)).sum()
    }

    pub fn integrate_f64<F: Fn(&[Rational]) -> f64>(&self, f: F) -> f64 {
        self.paths
            .iter()
            .map(|(x, w)| crate::rational::to_f64(w) * f(x))
            .sum()
    }

    /// Conditional law of `x_t` given each positive-mass history `(x_0..x_{t-1})`.
    pub fn kernels(&self, t: usize) -> BTreeMap<Vec<Rational>, BTreeMap<Rational, Rational>> {
        let mut out: BTreeMap<Vec<Rational>, BTreeMap<Rational, Rational>> = BTreeMap::new();
        for (x, w) in &self.paths {
            let k = out.entry(x[..t].to_vec()).or_default();
            *k.entry(x[t].clone()).or_insert_with(Rational::zero) += w;
        }
        out
    }

    /// Half the L1 distance between the weight vectors.
    pub fn total_variation(&self, other: &PathMeasure) -> Rational {
        let mut sum = Rational::zero();
        for (x, w) in &self.paths {
            sum += (w - other.weight(x)).abs();
        }
        for (x, w) in &other.paths {
            if !self.paths.contains_key(x) {
                sum += w.clone();
            }
        }
        sum / Rational::from_integer(2.into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MartingaleCheck {
    pub holds: bool,
    /// First violating `(t, history)` in lexicographic order.
    pub witness: Option<(usize, Vec<Rational>)>,
}

/// Exact martingale test: every positive-mass history has conditional mean
/// of the next coordinate equal to its last coordinate.
pub fn is_martingale(p: &PathMeasure) -> MartingaleCheck {
    for t in 1..=p.n {
        for (history, kernel) in p.kernels(t) {
            let drift: Rational = kernel.iter().map(|(y, w)| w * (y - &history[t - 1])).sum();
            if !drift.is_zero() {
                return MartingaleCheck {
                    holds: false,
                    witness: Some((t, history)),
                };
            }
        }
    }
    MartingaleCheck {
        holds: true,
        witness: None,
    }
}

/// How each atom's consecutive increments are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelPolicy {
    /// Recursive one-step left-curtain coupling.
    #[default]
    LeftCurtainWithinIncrements,
    /// First basic feasible solution of the one-step transport LP.
    LpFeasible,
}

fn check_chain(marginals: &[DiscreteMeasure]) -> Result<()> {
    if marginals.is_empty() {
        return Err(MotError::Dimension("at least one marginal is required".into()));
    }
    for (t, pair) in marginals.windows(2).enumerate() {
        if !pair[0].convex_order_leq(&pair[1]) {
            return Err(MotError::NotInConvexOrder { step: t + 1 });
        }
    }
    Ok(())
}

/// Left-curtain coupling of `mu <=_c nu` as a one-step path measure.
pub fn left_curtain_one_step(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<PathMeasure> {
    if !mu.convex_order_leq(nu) {
        return Err(MotError::NotInConvexOrder { step: 1 });
    }
    let mut residual = nu.clone();
    let mut out = PathMeasure::new(1);
    for atom in mu.atoms() {
        let s = shadow_atom(&atom.w, &atom.x, &residual)?;
        for (y, w) in s.shadow.iter() {
            out.add_mass(vec![atom.x.clone(), y.clone()], w.clone());
        }
        residual = s.residual;
    }
    Ok(out)
}

/// A one-step martingale coupling of `from <=_c to` under `policy`.
fn couple_increments(
    from: &DiscreteMeasure,
    to: &DiscreteMeasure,
    policy: KernelPolicy,
) -> Result<PathMeasure> {
    if !from.convex_order_leq(to) {
        return Err(MotError::Internal(
            "consecutive increments are not in convex order".into(),
        ));
    }
    match policy {
        KernelPolicy::LeftCurtainWithinIncrements => left_curtain_one_step(from, to),
        KernelPolicy::LpFeasible => lpsolver::first_feasible_coupling(from, to),
    }
}

/// Chains the step couplings of one block into full paths.
fn compose_block(start: &Rational, mass: &Rational, steps: &[PathMeasure], cap: usize) -> Result<PathMeasure> {
    let mut paths: Vec<(Vec<Rational>, Rational)> = vec![(vec![start.clone()], mass.clone())];
    for (t, coupling) in steps.iter().enumerate() {
        let kernels = coupling.kernels(1);
        let mut next = Vec::new();
        for (x, w) in &paths {
            let last = &x[t];
            let kernel = kernels
                .get(std::slice::from_ref(last))
                .ok_or_else(|| MotError::Internal("kernel missing for increment atom".into()))?;
            let row_mass: Rational = kernel.values().sum();
            for (y, k) in kernel {
                let mut path = x.clone();
                path.push(y.clone());
                next.push((path, w * k / &row_mass));
            }
            if next.len() > cap {
                return Err(MotError::PathCapExceeded {
                    needed: next.len(),
                    cap,
                });
            }
        }
        paths = next;
    }
    PathMeasure::from_paths(steps.len(), paths)
}

/// Increments `Δ_i^t` of the obstructed shadows of the prefixes of `mu_0`,
/// indexed `[atom][t]` with `t = 0..=n`.
pub fn shadow_increments(marginals: &[DiscreteMeasure]) -> Result<Vec<Vec<DiscreteMeasure>>> {
    check_chain(marginals)?;
    let mut residuals: Vec<DiscreteMeasure> = marginals[1..].to_vec();
    let mut out = Vec::with_capacity(marginals[0].len());
    for atom in marginals[0].atoms() {
        let mut chain = vec![DiscreteMeasure::dirac(atom.x.clone(), atom.w.clone())?];
        for residual in residuals.iter_mut() {
            let s = shadow(chain.last().expect("nonempty"), residual)?;
            *residual = s.residual;
            chain.push(s.shadow);
        }
        out.push(chain);
    }
    Ok(out)
}

/// Multistep left-monotone transport with the default path cap.
pub fn left_monotone_multistep(marginals: &[DiscreteMeasure], policy: KernelPolicy) -> Result<PathMeasure> {
    left_monotone_multistep_capped(marginals, policy, DEFAULT_PATH_CAP)
}

pub fn left_monotone_multistep_capped(
    marginals: &[DiscreteMeasure],
    policy: KernelPolicy,
    cap: usize,
) -> Result<PathMeasure> {
    let n = marginals.len() - 1;
    let increments = shadow_increments(marginals)?;
    let mut out = PathMeasure::new(n);
    for (atom, chain) in marginals[0].atoms().iter().zip(&increments) {
        let steps = chain
            .windows(2)
            .map(|pair| couple_increments(&pair[0], &pair[1], policy))
            .collect::<Result<Vec<_>>>()?;
        let block = compose_block(&atom.x, &atom.w, &steps, cap)?;
        for (x, w) in block.paths {
            out.add_mass(x, w);
        }
        if out.len() > cap {
            return Err(MotError::PathCapExceeded {
                needed: out.len(),
                cap,
            });
        }
    }
    Ok(out)
}

/// Comparison of one prefix image with its obstructed shadow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixCheck {
    pub a: Rational,
    pub t: usize,
    pub image: DiscreteMeasure,
    pub obstructed_shadow: DiscreteMeasure,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeftMonotoneCertificate {
    pub holds: bool,
    pub checks: Vec<PrefixCheck>,
}

pub fn check_marginals(p: &PathMeasure, marginals: &[DiscreteMeasure]) -> Result<()> {
    if p.steps() + 1 != marginals.len() {
        return Err(MotError::Dimension(format!(
            "{} marginals for a {}-step measure",
            marginals.len(),
            p.steps()
        )));
    }
    for (t, mu) in marginals.iter().enumerate() {
        if &p.marginal(t) != mu {
            return Err(MotError::MarginalMismatch { t });
        }
    }
    Ok(())
}

/// Checks that every prefix image `P_{0t}[(-inf, a] x .]` equals the obstructed
/// shadow of `mu_0` restricted to `(-inf, a]`, computed from scratch.
pub fn verify_left_monotone(p: &PathMeasure, marginals: &[DiscreteMeasure]) -> Result<LeftMonotoneCertificate> {
    check_marginals(p, marginals)?;
    let mg = is_martingale(p);
    if let Some((t, prefix)) = mg.witness {
        return Err(MotError::NotMartingale { t, prefix });
    }
    let mut checks = Vec::new();
    for atom in marginals[0].atoms() {
        let part = marginals[0].prefix(&atom.x);
        for t in 1..marginals.len() {
            let image = p.prefix_image(&atom.x, t);
            let expected = obstructed_shadow(&part, &marginals[1..=t])?;
            checks.push(PrefixCheck {
                a: atom.x.clone(),
                t,
                matches: image == expected,
                image,
                obstructed_shadow: expected,
            });
        }
    }
    Ok(LeftMonotoneCertificate {
        holds: checks.iter().all(|c| c.matches),
        checks,
    })
}

/// Whether the ordinary shadows of every prefix of `mu_0` increase in convex
/// order along the marginals.
pub fn strong_order_holds(marginals: &[DiscreteMeasure]) -> Result<bool> {
    check_chain(marginals)?;
    for atom in marginals[0].atoms() {
        let part = marginals[0].prefix(&atom.x);
        let shadows = marginals[1..]
            .iter()
            .map(|mu| shadow(&part, mu).map(|s| s.shadow))
            .collect::<Result<Vec<_>>>()?;
        if !shadows.windows(2).all(|w| w[0].convex_order_leq(&w[1])) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Monotone transport with free intermediate marginals: stay put for the first
/// `n - 1` steps, then the one-step left curtain.
pub fn free_monotone_transport(mu0: &DiscreteMeasure, mun: &DiscreteMeasure, n: usize) -> Result<PathMeasure> {
    if n == 0 {
        return Err(MotError::Dimension("step count must be positive".into()));
    }
    let last = left_curtain_one_step(mu0, mun)?;
    let mut out = PathMeasure::new(n);
    for (x, w) in last.iter() {
        let mut path = vec![x[0].clone(); n];
        path.push(x[1].clone());
        out.add_mass(path, w.clone());
    }
    Ok(out)
}

fn normalized(kernel: &BTreeMap<Rational, Rational>) -> BTreeMap<Rational, Rational> {
    let total: Rational = kernel.values().sum();
    kernel.iter().map(|(y, w)| (y.clone(), w / &total)).collect()
}

/// Whether each conditional kernel depends on the history only through its last coordinate.
pub fn markov_check(p: &PathMeasure) -> bool {
    for t in 2..=p.steps() {
        let mut by_last: BTreeMap<Rational, BTreeMap<Rational, Rational>> = BTreeMap::new();
        for (history, kernel) in p.kernels(t) {
            let k = normalized(&kernel);
            match by_last.get(&history[t - 1]) {
                Some(seen) if seen != &k => return false,
                Some(_) => {}
                None => {
                    by_last.insert(history[t - 1].clone(), k);
                }
            }
        }
    }
    true
}

/// Whether every conditional kernel charges at most two points.
pub fn binomial_check(p: &PathMeasure) -> bool {
    (1..=p.steps()).all(|t| p.kernels(t).values().all(|k| k.len() <= 2))
}
