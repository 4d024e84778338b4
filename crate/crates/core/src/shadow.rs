//! Shadows and obstructed shadows of discrete measures.
//!
//! The shadow of `q δ_x` in `ν` is the restriction of `ν` to a window in
//! quantile space of width `q` whose mean is `x`. Window means are
//! nondecreasing and piecewise linear in the window's left edge, so the window
//! is found exactly by scanning the edges where the piecewise-linear mean
//! changes slope.

use num_traits::Zero;

use crate::error::{MotError, Result};
use crate::measure::DiscreteMeasure;
use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShadowResult {
    pub shadow: DiscreteMeasure,
    pub residual: DiscreteMeasure,
}

/// Portion of `nu` lying in quantile levels `[lo, lo + width]`.
fn quantile_window(nu: &DiscreteMeasure, lo: &Rational, width: &Rational) -> DiscreteMeasure {
    let hi = lo + width;
    let mut out = Vec::new();
    let mut cum = Rational::zero();
    for (x, w) in nu.iter() {
        let start = cum.clone();
        cum += w;
        let a = if &start > lo { start } else { lo.clone() };
        let b = if cum < hi { cum.clone() } else { hi.clone() };
        if b > a {
            out.push((x.clone(), b - a));
        }
    }
    DiscreteMeasure::new(out).expect("window weights are positive")
}

fn window_moment(nu: &DiscreteMeasure, lo: &Rational, width: &Rational) -> Rational {
    quantile_window(nu, lo, width).first_moment()
}

/// Shadow of the atom `q δ_x` in `nu`.
pub fn shadow_atom(q: &Rational, x: &Rational, nu: &DiscreteMeasure) -> Result<ShadowResult> {
    if q.is_zero() {
        return Ok(ShadowResult {
            shadow: DiscreteMeasure::zero(),
            residual: nu.clone(),
        });
    }
    let total = nu.mass();
    if q > &total || q < &Rational::zero() {
        return Err(MotError::NotInPositiveConvexOrder);
    }
    let target = q * x;
    let top = &total - q;

    // candidate left edges: cumulative masses c and c - q inside [0, total - q]
    let mut edges = vec![Rational::zero(), top.clone()];
    let mut cum = Rational::zero();
    for (_, w) in nu.iter() {
        cum += w;
        for e in [cum.clone(), &cum - q] {
            if e >= Rational::zero() && e <= top {
                edges.push(e);
            }
        }
    }
    edges.sort();
    edges.dedup();

    let moments: Vec<Rational> = edges.iter().map(|e| window_moment(nu, e, q)).collect();
    if target < moments[0] || &target > moments.last().expect("nonempty") {
        return Err(MotError::NotInPositiveConvexOrder);
    }
    let k = moments.partition_point(|m| m < &target);
    let lo = if moments[k] == target || k == 0 {
        edges[k].clone()
    } else {
        // moment is linear on [edges[k-1], edges[k]]
        let (e0, e1) = (&edges[k - 1], &edges[k]);
        let (m0, m1) = (&moments[k - 1], &moments[k]);
        e0 + (&target - m0) * (e1 - e0) / (m1 - m0)
    };
    let shadow = quantile_window(nu, &lo, q);
    debug_assert_eq!(shadow.first_moment(), target);
    let residual = nu.subtract(&shadow)?;
    Ok(ShadowResult { shadow, residual })
}

/// Shadow of `mu` in `nu`, folding atoms of `mu` from left to right.
pub fn shadow(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ShadowResult> {
    shadow_in_order(mu, nu, &(0..mu.len()).collect::<Vec<_>>())
}

/// Shadow of `mu` in `nu` folding the atoms of `mu` in the given index order.
pub fn shadow_in_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    order: &[usize],
) -> Result<ShadowResult> {
    let mut residual = nu.clone();
    let mut acc = DiscreteMeasure::zero();
    for &i in order {
        let atom = &mu.atoms()[i];
        let part = shadow_atom(&atom.w, &atom.x, &residual)?;
        acc = acc.add(&part.shadow);
        residual = part.residual;
    }
    Ok(ShadowResult {
        shadow: acc,
        residual,
    })
}

/// Shadow of `part` in the last measure of `chain`, obstructed by the earlier ones.
pub fn obstructed_shadow(part: &DiscreteMeasure, chain: &[DiscreteMeasure]) -> Result<DiscreteMeasure> {
    let mut current = part.clone();
    for target in chain {
        current = shadow(&current, target)?.shadow;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn m(atoms: &[(i64, i64, i64)]) -> DiscreteMeasure {
        DiscreteMeasure::new(atoms.iter().map(|&(x, p, q)| (int(x), ratio(p, q)))).unwrap()
    }

    #[test]
    fn atom_shadow_reference() {
        let nu = m(&[(-4, 1, 4), (0, 1, 2), (4, 1, 4)]);
        let s = shadow_atom(&ratio(1, 2), &int(-1), &nu).unwrap();
        assert_eq!(s.shadow, m(&[(-4, 1, 8), (0, 3, 8)]));
        assert_eq!(s.residual, m(&[(-4, 1, 8), (0, 1, 8), (4, 1, 4)]));
    }

    #[test]
    fn atom_fits_in_place() {
        let nu = m(&[(-1, 1, 4), (0, 1, 2), (3, 1, 4)]);
        let s = shadow_atom(&ratio(1, 3), &int(0), &nu).unwrap();
        assert_eq!(s.shadow, m(&[(0, 1, 3)]));
    }

    #[test]
    fn zero_mass_atom() {
        let nu = m(&[(0, 1, 1)]);
        let s = shadow_atom(&int(0), &int(5), &nu).unwrap();
        assert!(s.shadow.is_empty());
        assert_eq!(s.residual, nu);
    }

    #[test]
    fn atom_outside_hull_fails() {
        let nu = m(&[(-1, 1, 2), (1, 1, 2)]);
        assert_eq!(
            shadow_atom(&ratio(1, 2), &int(2), &nu),
            Err(MotError::NotInPositiveConvexOrder)
        );
        assert_eq!(
            shadow_atom(&int(2), &int(0), &nu),
            Err(MotError::NotInPositiveConvexOrder)
        );
        // mean -1/2 would need the left half of nu entirely plus more
        assert_eq!(
            shadow_atom(&int(1), &ratio(-1, 2), &nu),
            Err(MotError::NotInPositiveConvexOrder)
        );
    }

    #[test]
    fn full_mass_shadow_is_target() {
        let mu = m(&[(-1, 1, 2), (1, 1, 2)]);
        let nu = m(&[(-2, 1, 4), (0, 1, 2), (2, 1, 4)]);
        assert_eq!(shadow(&mu, &nu).unwrap().shadow, nu);
    }

    #[test]
    fn obstructed_reference_chain() {
        let chain = [m(&[(-2, 1, 2), (2, 1, 2)]), m(&[(-4, 1, 4), (0, 1, 2), (4, 1, 4)])];
        let part = m(&[(-1, 1, 2)]);
        assert_eq!(
            obstructed_shadow(&part, &chain).unwrap(),
            m(&[(-4, 3, 16), (0, 1, 4), (4, 1, 16)])
        );
        assert_eq!(
            obstructed_shadow(&part, &chain[..1]).unwrap(),
            shadow(&part, &chain[0]).unwrap().shadow
        );
    }
}
