//! Irreducible decomposition of one-step problems, multistep components and
//! polar-set tests for finite path sets.

use num_traits::{Signed, Zero};

use crate::error::{MotError, Result};
use crate::measure::{DiscreteMeasure, Interval};
use crate::rational::Rational;

/// One irreducible domain `(I, J)` of a one-step problem, `I = (left, right)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IrreducibleDomain {
    pub index: usize,
    pub left: Rational,
    pub right: Rational,
    /// Whether `J` contains the left (resp. right) endpoint of `I`.
    pub left_in_j: bool,
    pub right_in_j: bool,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
}

impl IrreducibleDomain {
    pub fn in_i(&self, x: &Rational) -> bool {
        x > &self.left && x < &self.right
    }

    pub fn in_j(&self, y: &Rational) -> bool {
        self.in_i(y) || (self.left_in_j && y == &self.left) || (self.right_in_j && y == &self.right)
    }

    /// Endpoints of `J` that are not in `I`.
    pub fn j_endpoints(&self) -> Vec<Rational> {
        let mut out = Vec::new();
        if self.left_in_j {
            out.push(self.left.clone());
        }
        if self.right_in_j {
            out.push(self.right.clone());
        }
        out
    }

    pub fn i_interval(&self) -> Interval {
        Interval::open(self.left.clone(), self.right.clone())
    }
}

/// A maximal closed interval of `{u_mu = u_nu}`; `None` ends are infinite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosedRange {
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl ClosedRange {
    pub fn contains(&self, x: &Rational) -> bool {
        self.lo.as_ref().map_or(true, |lo| x >= lo) && self.hi.as_ref().map_or(true, |hi| x <= hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepDecomposition {
    /// Part of `mu` left in place (equal to its own image).
    pub diagonal: DiscreteMeasure,
    /// `I_0` as a union of maximal closed ranges.
    pub diagonal_domain: Vec<ClosedRange>,
    pub components: Vec<IrreducibleDomain>,
}

impl StepDecomposition {
    /// Component label of the pair `(x, y)`: `Some(0)` on the diagonal,
    /// `Some(k)` inside `I_k x J_k`, `None` otherwise.
    pub fn classify(&self, x: &Rational, y: &Rational) -> Option<usize> {
        if let Some(c) = self.components.iter().find(|c| c.in_i(x)) {
            return c.in_j(y).then_some(c.index);
        }
        (x == y).then_some(0)
    }

    pub fn in_diagonal_domain(&self, x: &Rational) -> bool {
        !self.components.iter().any(|c| c.in_i(x))
    }

    pub fn component(&self, k: usize) -> Option<&IrreducibleDomain> {
        self.components.iter().find(|c| c.index == k)
    }
}

/// Decomposes `mu <=_c nu` into its diagonal part and irreducible components.
pub fn decompose_step(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<StepDecomposition> {
    if !mu.convex_order_leq(nu) {
        return Err(MotError::NotInConvexOrder { step: 1 });
    }
    let u = mu.potential();
    let v = nu.potential();
    let mut points: Vec<Rational> = mu.support().into_iter().chain(nu.support()).collect();
    points.sort();
    points.dedup();
    let gap: Vec<Rational> = points.iter().map(|x| v.eval(x) - u.eval(x)).collect();
    debug_assert!(gap.iter().all(|g| !g.is_negative()));

    if points.is_empty() {
        return Ok(StepDecomposition {
            diagonal: DiscreteMeasure::zero(),
            diagonal_domain: vec![ClosedRange { lo: None, hi: None }],
            components: Vec::new(),
        });
    }

    let zeros: Vec<usize> = (0..points.len()).filter(|&i| gap[i].is_zero()).collect();
    // outside the hull of both supports the potentials agree
    debug_assert_eq!(zeros.first(), Some(&0));
    debug_assert_eq!(zeros.last(), Some(&(points.len() - 1)));

    let mut components = Vec::new();
    let mut diagonal_domain = Vec::new();
    let mut range_lo: Option<Rational> = None;
    for pair in zeros.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b > a + 1 {
            diagonal_domain.push(ClosedRange {
                lo: range_lo.take(),
                hi: Some(points[a].clone()),
            });
            range_lo = Some(points[b].clone());
            let left = points[a].clone();
            let right = points[b].clone();
            let open = Interval::open(left.clone(), right.clone());
            let mu_k = mu.restrict(&open);
            let inner = nu.restrict(&open);
            let mass_gap = mu_k.mass() - inner.mass();
            let moment_gap = mu_k.first_moment() - inner.first_moment();
            // endpoint weights alpha at left, beta at right matching mass and barycenter
            let beta = (&moment_gap - &mass_gap * &left) / (&right - &left);
            let alpha = &mass_gap - &beta;
            if alpha.is_negative() || beta.is_negative() {
                return Err(MotError::Internal(format!(
                    "negative endpoint split on ({left}, {right})"
                )));
            }
            let nu_k = inner.add(&DiscreteMeasure::new(vec![
                (left.clone(), alpha.clone()),
                (right.clone(), beta.clone()),
            ])?);
            components.push(IrreducibleDomain {
                index: components.len() + 1,
                left,
                right,
                left_in_j: alpha.is_positive(),
                right_in_j: beta.is_positive(),
                mu: mu_k,
                nu: nu_k,
            });
        }
    }
    diagonal_domain.push(ClosedRange { lo: range_lo, hi: None });

    let in_components = |x: &Rational| components.iter().any(|c: &IrreducibleDomain| c.in_i(x));
    let diagonal = DiscreteMeasure::new(
        mu.iter()
            .filter(|(x, _)| !in_components(x))
            .map(|(x, w)| (x.clone(), w.clone())),
    )?;

    let mut rebuilt = diagonal.clone();
    for c in &components {
        rebuilt = rebuilt.add(&c.nu);
    }
    if &rebuilt != nu {
        return Err(MotError::Internal(
            "decomposition parts do not sum to the target".into(),
        ));
    }

    Ok(StepDecomposition {
        diagonal,
        diagonal_domain,
        components,
    })
}

/// Decompositions of every consecutive pair of marginals.
pub fn decompose_chain(marginals: &[DiscreteMeasure]) -> Result<Vec<StepDecomposition>> {
    marginals
        .windows(2)
        .enumerate()
        .map(|(t, pair)| {
            decompose_step(&pair[0], &pair[1]).map_err(|e| match e {
                MotError::NotInConvexOrder { .. } => MotError::NotInConvexOrder { step: t + 1 },
                other => other,
            })
        })
        .collect()
}

/// Label `(k_1, ..., k_n)` of a multistep irreducible component.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MultistepComponent {
    pub indices: Vec<usize>,
}

/// The component containing `path`, if the path lies in the effective domain.
pub fn effective_domain_contains(
    decomps: &[StepDecomposition],
    path: &[Rational],
) -> Option<MultistepComponent> {
    if path.len() != decomps.len() + 1 {
        return None;
    }
    let indices = decomps
        .iter()
        .enumerate()
        .map(|(t, d)| d.classify(&path[t], &path[t + 1]))
        .collect::<Option<Vec<_>>>()?;
    Some(MultistepComponent { indices })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PolarReason {
    /// Coordinate `t` is not an atom of the `t`-th marginal.
    NullCoordinate { t: usize },
    /// Step `t` leaves every one-step component.
    OutsideDomain { t: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarVerdict {
    pub path: Vec<Rational>,
    pub polar: bool,
    pub component: Option<MultistepComponent>,
    pub reason: Option<PolarReason>,
}

/// Polar structure of a constrained multistep problem.
#[derive(Debug, Clone)]
pub struct PolarStructure {
    marginals: Vec<DiscreteMeasure>,
    decomps: Vec<StepDecomposition>,
}

impl PolarStructure {
    pub fn new(marginals: &[DiscreteMeasure]) -> Result<Self> {
        Ok(Self {
            marginals: marginals.to_vec(),
            decomps: decompose_chain(marginals)?,
        })
    }

    pub fn decompositions(&self) -> &[StepDecomposition] {
        &self.decomps
    }

    pub fn classify(&self, path: &[Rational]) -> PolarVerdict {
        let verdict = |polar, component, reason| PolarVerdict {
            path: path.to_vec(),
            polar,
            component,
            reason,
        };
        for (t, x) in path.iter().enumerate() {
            if self.marginals.get(t).map_or(true, |m| m.weight_at(x).is_zero()) {
                return verdict(true, None, Some(PolarReason::NullCoordinate { t }));
            }
        }
        for (t, d) in self.decomps.iter().enumerate() {
            if d.classify(&path[t], &path[t + 1]).is_none() {
                return verdict(true, None, Some(PolarReason::OutsideDomain { t: t + 1 }));
            }
        }
        verdict(false, effective_domain_contains(&self.decomps, path), None)
    }
}

/// Classifies each path; a finite set is polar iff every path is.
pub fn polar_test(marginals: &[DiscreteMeasure], paths: &[Vec<Rational>]) -> Result<Vec<PolarVerdict>> {
    let structure = PolarStructure::new(marginals)?;
    Ok(paths.iter().map(|p| structure.classify(p)).collect())
}

/// One `n`-step component of the problem with free intermediate marginals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NStepComponent {
    /// `I_k^n x J_k`.
    Irreducible { k: usize },
    /// `I_0^{n+1}` intersected with the diagonal.
    Diagonal,
    /// `I_k^t x {p}^{n-t+1}` with `p` an endpoint of `J_k` outside `I_k`.
    Absorbed { k: usize, t: usize, p: Rational },
}

#[derive(Debug, Clone)]
pub struct FreeStructure {
    pub n: usize,
    pub mu0: DiscreteMeasure,
    pub mun: DiscreteMeasure,
    pub decomposition: StepDecomposition,
    pub components: Vec<NStepComponent>,
}

/// The `n`-step components of `mu0 <=_c mun`.
pub fn n_step_components(mu0: &DiscreteMeasure, mun: &DiscreteMeasure, n: usize) -> Result<FreeStructure> {
    if n == 0 {
        return Err(MotError::Dimension("step count must be positive".into()));
    }
    let decomposition = decompose_step(mu0, mun)?;
    let mut components: Vec<NStepComponent> = decomposition
        .components
        .iter()
        .map(|c| NStepComponent::Irreducible { k: c.index })
        .collect();
    components.push(NStepComponent::Diagonal);
    for c in &decomposition.components {
        for p in c.j_endpoints() {
            for t in 1..=n {
                components.push(NStepComponent::Absorbed {
                    k: c.index,
                    t,
                    p: p.clone(),
                });
            }
        }
    }
    Ok(FreeStructure {
        n,
        mu0: mu0.clone(),
        mun: mun.clone(),
        decomposition,
        components,
    })
}

impl FreeStructure {
    pub fn contains(&self, component: &NStepComponent, path: &[Rational]) -> bool {
        if path.len() != self.n + 1 {
            return false;
        }
        let d = &self.decomposition;
        match component {
            NStepComponent::Irreducible { k } => {
                let c = d.component(*k).expect("known component");
                path[..self.n].iter().all(|x| c.in_i(x)) && c.in_j(&path[self.n])
            }
            NStepComponent::Diagonal => {
                path.iter().all(|x| x == &path[0]) && d.in_diagonal_domain(&path[0])
            }
            NStepComponent::Absorbed { k, t, p } => {
                let c = d.component(*k).expect("known component");
                path[..*t].iter().all(|x| c.in_i(x)) && path[*t..].iter().all(|x| x == p)
            }
        }
    }

    /// First component containing `path`, if any.
    pub fn locate(&self, path: &[Rational]) -> Option<&NStepComponent> {
        self.components.iter().find(|c| self.contains(c, path))
    }

    pub fn is_polar(&self, path: &[Rational]) -> bool {
        path.len() != self.n + 1
            || self.mu0.weight_at(&path[0]).is_zero()
            || self.mun.weight_at(&path[self.n]).is_zero()
            || self.locate(path).is_none()
    }
}

/// Polar verdict for each path under free intermediate marginals.
pub fn free_polar_test(
    mu0: &DiscreteMeasure,
    mun: &DiscreteMeasure,
    n: usize,
    paths: &[Vec<Rational>],
) -> Result<Vec<bool>> {
    let s = n_step_components(mu0, mun, n)?;
    Ok(paths.iter().map(|p| s.is_polar(p)).collect())
}
