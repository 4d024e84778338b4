//! Finite-support verifiers: left-monotone and nondegenerate sets, and the
//! search for improving competitors.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::Zero;

use crate::coupling::PathMeasure;
use crate::decomposition::{effective_domain_contains, StepDecomposition};
use crate::lpsolver::simplex::{LinearProgram, LpOutcome};
use crate::rational::Rational;

/// A finite set of points in `R^{n+1}`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SupportSet {
    n: usize,
    points: BTreeSet<Vec<Rational>>,
}

impl SupportSet {
    pub fn new<I: IntoIterator<Item = Vec<Rational>>>(n: usize, points: I) -> Self {
        let points = points.into_iter().filter(|p| p.len() == n + 1).collect();
        Self { n, points }
    }

    pub fn of(p: &PathMeasure) -> Self {
        Self::new(p.steps(), p.support())
    }

    pub fn steps(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, x: &[Rational]) -> bool {
        self.points.contains(x)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<Rational>> {
        self.points.iter()
    }

    /// Projection onto the first `t + 1` coordinates.
    pub fn projection(&self, t: usize) -> BTreeSet<Vec<Rational>> {
        self.points.iter().map(|p| p[..=t].to_vec()).collect()
    }

    pub fn is_subset(&self, other: &SupportSet) -> bool {
        self.points.is_subset(&other.points)
    }
}

/// A forbidden configuration: two paths sharing their first `t` coordinates
/// and a third path, started further right, landing strictly between them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Crossing {
    pub t: usize,
    pub lower: Vec<Rational>,
    pub upper: Vec<Rational>,
    pub third: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeftMonotoneReport {
    pub holds: bool,
    pub witness: Option<Crossing>,
}

/// Scans every time projection for forbidden crossings.
///
/// For a fixed history only its lowest and highest continuation matter, so
/// each projection is checked in `O(|Γ^t|^2)`.
pub fn is_left_monotone_set(gamma: &SupportSet) -> LeftMonotoneReport {
    for t in 1..=gamma.n {
        let proj = gamma.projection(t);
        let mut spans: BTreeMap<&[Rational], (&Rational, &Rational)> = BTreeMap::new();
        for p in &proj {
            let y = &p[t];
            spans
                .entry(&p[..t])
                .and_modify(|(lo, hi)| {
                    if y < *lo {
                        *lo = y;
                    }
                    if y > *hi {
                        *hi = y;
                    }
                })
                .or_insert((y, y));
        }
        for (history, (lo, hi)) in &spans {
            if lo >= hi {
                continue;
            }
            for third in &proj {
                if third[0] > history[0] && &third[t] > *lo && &third[t] < *hi {
                    let with = |y: &Rational| {
                        let mut v = history.to_vec();
                        v.push(y.clone());
                        v
                    };
                    return LeftMonotoneReport {
                        holds: false,
                        witness: Some(Crossing {
                            t,
                            lower: with(lo),
                            upper: with(hi),
                            third: third.clone(),
                        }),
                    };
                }
            }
        }
    }
    LeftMonotoneReport {
        holds: true,
        witness: None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NondegeneracyReport {
    pub holds: bool,
    /// Failing `(t, point of Γ^t)`.
    pub witness: Option<(usize, Vec<Rational>)>,
}

/// Every up-move from a history needs a down-move from the same history and vice versa.
pub fn is_nondegenerate_set(gamma: &SupportSet) -> NondegeneracyReport {
    for t in 1..=gamma.n {
        let proj = gamma.projection(t);
        let mut moves: BTreeMap<&[Rational], (bool, bool)> = BTreeMap::new();
        for p in &proj {
            let e = moves.entry(&p[..t]).or_insert((false, false));
            if p[t] > p[t - 1] {
                e.0 = true;
            }
            if p[t] < p[t - 1] {
                e.1 = true;
            }
        }
        for p in &proj {
            let (up, down) = moves[&p[..t]];
            if (p[t] > p[t - 1] && !down) || (p[t] < p[t - 1] && !up) {
                return NondegeneracyReport {
                    holds: false,
                    witness: Some((t, p.clone())),
                };
            }
        }
    }
    NondegeneracyReport {
        holds: true,
        witness: None,
    }
}

/// A competitor strictly improving the reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Improvement {
    pub competitor: PathMeasure,
    pub original_value: Rational,
    pub improved_value: Rational,
}

/// Searches for a `t`-competitor of `pi` (a measure on `t + 1` coordinates)
/// with a strictly larger integral of `f`.
///
/// Competitors keep the projection on the first `t` coordinates, the last
/// marginal and every conditional barycenter. When `domain` is given, the
/// competitor must live in the effective domain of those step decompositions.
pub fn find_improving_competitor<F>(
    pi: &PathMeasure,
    f: F,
    domain: Option<&[StepDecomposition]>,
) -> Option<Improvement>
where
    F: Fn(&[Rational]) -> Rational,
{
    let t = pi.steps();
    if t == 0 || pi.is_empty() {
        return None;
    }
    let histories: Vec<(Vec<Rational>, Rational, Rational)> = pi
        .kernels(t)
        .into_iter()
        .map(|(h, k)| {
            let mass: Rational = k.values().sum();
            let moment: Rational = k.iter().map(|(y, w)| y * w).sum();
            (h, mass, moment)
        })
        .collect();
    let last = pi.marginal(t);
    let grid = last.support();

    let mut vars: Vec<Vec<Rational>> = Vec::new();
    for (h, _, _) in &histories {
        for y in &grid {
            let mut path = h.clone();
            path.push(y.clone());
            let allowed = match domain {
                Some(d) => effective_domain_contains(&d[..t], &path).is_some() || pi.weight(&path) > Rational::zero(),
                None => true,
            };
            if allowed {
                vars.push(path);
            }
        }
    }

    let mut lp = LinearProgram::<Rational>::new(vars.len());
    lp.objective = vars.iter().map(|p| f(p)).collect();
    for (h, mass, moment) in &histories {
        let cols: Vec<usize> = (0..vars.len()).filter(|&j| &vars[j][..t] == h.as_slice()).collect();
        lp.add_row(cols.iter().map(|&j| (j, Rational::from_integer(1.into()))).collect(), mass.clone());
        lp.add_row(cols.iter().map(|&j| (j, vars[j][t].clone())).collect(), moment.clone());
    }
    for (y, w) in last.iter() {
        let cols: Vec<(usize, Rational)> = (0..vars.len())
            .filter(|&j| &vars[j][t] == y)
            .map(|j| (j, Rational::from_integer(1.into())))
            .collect();
        lp.add_row(cols, w.clone());
    }
    let original_value = pi.integrate(&f);
    match lp.solve() {
        LpOutcome::Optimal(sol) if sol.value > original_value => {
            let competitor = PathMeasure::from_paths(
                t,
                vars.into_iter().zip(sol.x).filter(|(_, w)| !w.is_zero()),
            )
            .expect("nonnegative solution");
            Some(Improvement {
                competitor,
                original_value,
                improved_value: sol.value,
            })
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn pts(n: usize, ps: &[&[(i64, i64)]]) -> SupportSet {
        SupportSet::new(
            n,
            ps.iter().map(|p| p.iter().map(|&(a, b)| ratio(a, b)).collect()),
        )
    }

    #[test]
    fn forbidden_configurations() {
        // paths from x0 = -1/2 fan out at t, a path from 1/2 lands in between
        let a = pts(2, &[&[(-1, 2), (-1, 2), (-1, 1)], &[(-1, 2), (-1, 2), (1, 2)], &[(1, 2), (1, 2), (-1, 4)]]);
        let report = is_left_monotone_set(&a);
        assert!(!report.holds);
        assert_eq!(report.witness.unwrap().t, 2);
        // the third path arrives from the left at t - 1
        let b = pts(2, &[&[(-1, 1), (-1, 2), (-3, 2)], &[(-1, 1), (-1, 2), (0, 1)], &[(0, 1), (-3, 2), (-3, 4)]]);
        assert!(!is_left_monotone_set(&b).holds);
    }

    #[test]
    fn small_sets_are_left_monotone() {
        assert!(is_left_monotone_set(&pts(1, &[&[(0, 1), (1, 1)]])).holds);
        assert!(is_left_monotone_set(&pts(1, &[&[(0, 1), (1, 1)], &[(1, 1), (0, 1)]])).holds);
        assert!(is_left_monotone_set(&SupportSet::default()).holds);
    }

    #[test]
    fn crossing_from_the_left_is_allowed() {
        // third path starts left of the fanning pair
        let s = pts(1, &[&[(1, 1), (0, 1)], &[(1, 1), (2, 1)], &[(0, 1), (1, 1)]]);
        assert!(is_left_monotone_set(&s).holds);
    }

    #[test]
    fn nondegeneracy() {
        assert!(!is_nondegenerate_set(&pts(1, &[&[(0, 1), (1, 1)]])).holds);
        assert!(is_nondegenerate_set(&pts(1, &[&[(0, 1), (1, 1)], &[(0, 1), (-1, 1)]])).holds);
        assert!(is_nondegenerate_set(&pts(1, &[&[(0, 1), (0, 1)]])).holds);
    }

    #[test]
    fn crossing_measure_is_improved_by_swap() {
        let pi = PathMeasure::from_paths(
            1,
            vec![
                (vec![int(0), int(-1)], ratio(1, 4)),
                (vec![int(0), int(1)], ratio(1, 4)),
                (vec![int(1), int(0)], ratio(1, 2)),
            ],
        )
        .unwrap();
        // x * y^2 has a strictly positive third cross derivative
        let f = |p: &[Rational]| &p[0] * &p[1] * &p[1];
        let imp = find_improving_competitor(&pi, f, None).expect("improvement");
        let swapped = PathMeasure::from_paths(
            1,
            vec![
                (vec![int(1), int(-1)], ratio(1, 4)),
                (vec![int(1), int(1)], ratio(1, 4)),
                (vec![int(0), int(0)], ratio(1, 2)),
            ],
        )
        .unwrap();
        assert_eq!(imp.competitor, swapped);
        assert_eq!(imp.improved_value, ratio(1, 2));
    }

    #[test]
    fn single_path_has_no_competitor() {
        let pi = PathMeasure::from_paths(1, vec![(vec![int(0), int(0)], int(1))]).unwrap();
        assert!(find_improving_competitor(&pi, |p: &[Rational]| p[1].clone(), None).is_none());
    }
}
