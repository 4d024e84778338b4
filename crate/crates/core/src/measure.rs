//! Finitely supported measures on the real line with exact weights, their
//! potential functions, and convex-order tests.

use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{MotError, Result};
use crate::rational::{positive_part, Rational};

/// A single weighted point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub x: Rational,
    pub w: Rational,
}

/// A nonnegative measure with finitely many atoms.
///
/// Atoms are kept sorted by position with strictly positive weights; atoms
/// sharing a position are merged on construction and zero weights dropped.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct DiscreteMeasure {
    atoms: Vec<Atom>,
}

impl DiscreteMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(x: Rational, w: Rational) -> Result<Self> {
        Self::new(vec![(x, w)])
    }

    /// Builds a measure from `(position, weight)` pairs in any order.
    pub fn new<I>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Rational, Rational)>,
    {
        let mut raw: Vec<(Rational, Rational)> = atoms.into_iter().collect();
        for (x, w) in &raw {
            if w.is_negative() {
                return Err(MotError::InvalidWeight {
                    at: x.clone(),
                    weight: w.clone(),
                });
            }
        }
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self::from_sorted_unchecked(raw))
    }

    /// Merges equal positions and drops zero weights; input must be sorted
    /// and nonnegative.
    fn from_sorted_unchecked(raw: Vec<(Rational, Rational)>) -> Self {
        let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
        for (x, w) in raw {
            match atoms.last_mut() {
                Some(last) if last.x == x => last.w += w,
                _ => atoms.push(Atom { x, w }),
            }
        }
        atoms.retain(|a| !a.w.is_zero());
        Self { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn support(&self) -> Vec<Rational> {
        self.atoms.iter().map(|a| a.x.clone()).collect()
    }

    /// Weight of the atom at `x`, zero if there is none.
    pub fn weight_at(&self, x: &Rational) -> Rational {
        match self.atoms.binary_search_by(|a| a.x.cmp(x)) {
            Ok(i) => self.atoms[i].w.clone(),
            Err(_) => Rational::zero(),
        }
    }

    pub fn mass(&self) -> Rational {
        self.atoms.iter().map(|a| &a.w).sum()
    }

    pub fn first_moment(&self) -> Rational {
        self.atoms.iter().map(|a| &a.w * &a.x).sum()
    }

    pub fn second_moment(&self) -> Rational {
        self.atoms.iter().map(|a| &a.w * &a.x * &a.x).sum()
    }

    /// Mean position; `None` for the zero measure.
    pub fn barycenter(&self) -> Option<Rational> {
        let m = self.mass();
        if m.is_zero() {
            None
        } else {
            Some(self.first_moment() / m)
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut raw: Vec<(Rational, Rational)> = self
            .atoms
            .iter()
            .chain(other.atoms.iter())
            .map(|a| (a.x.clone(), a.w.clone()))
            .collect();
        raw.sort_by(|a, b| a.0.cmp(&b.0));
        Self::from_sorted_unchecked(raw)
    }

    /// `self - other`, failing if `other` is not dominated by `self` atomwise.
    pub fn subtract(&self, other: &Self) -> Result<Self> {
        let mut out = self.atoms.clone();
        for a in &other.atoms {
            match out.binary_search_by(|b| b.x.cmp(&a.x)) {
                Ok(i) => {
                    out[i].w -= &a.w;
                    if out[i].w.is_negative() {
                        return Err(MotError::NegativeWeight { at: a.x.clone() });
                    }
                }
                Err(_) => return Err(MotError::NegativeWeight { at: a.x.clone() }),
            }
        }
        out.retain(|a| !a.w.is_zero());
        Ok(Self { atoms: out })
    }

    pub fn scale(&self, factor: &Rational) -> Result<Self> {
        Self::new(self.atoms.iter().map(|a| (a.x.clone(), &a.w * factor)))
    }

    /// `self <= other` atomwise.
    pub fn dominated_by(&self, other: &Self) -> bool {
        self.atoms.iter().all(|a| a.w <= other.weight_at(&a.x))
    }

    pub fn restrict(&self, interval: &Interval) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .filter(|a| interval.contains(&a.x))
                .cloned()
                .collect(),
        }
    }

    /// Restriction to `(-inf, a]`.
    pub fn prefix(&self, a: &Rational) -> Self {
        self.restrict(&Interval::at_most(a.clone()))
    }

    /// `sum_i w_i (x_i - b)^+`.
    pub fn call_value(&self, b: &Rational) -> Rational {
        self.atoms
            .iter()
            .map(|a| &a.w * positive_part(&(&a.x - b)))
            .sum()
    }

    /// `sum_i w_i (b - x_i)^+`.
    pub fn put_value(&self, b: &Rational) -> Rational {
        self.atoms
            .iter()
            .map(|a| &a.w * positive_part(&(b - &a.x)))
            .sum()
    }

    /// Exact potential function `x -> sum_i w_i |x - x_i|`.
    pub fn potential(&self) -> PotentialFunction {
        let mass = self.mass();
        let moment = self.first_moment();
        let mut left_mass = Rational::zero();
        let mut left_moment = Rational::zero();
        let mut breakpoints = Vec::with_capacity(self.atoms.len());
        for a in &self.atoms {
            // atoms at or left of x contribute x - x_i, the rest x_i - x
            left_mass += &a.w;
            left_moment += &a.w * &a.x;
            let right_mass = &mass - &left_mass;
            let right_moment = &moment - &left_moment;
            let value = &a.x * &left_mass - &left_moment + right_moment - &a.x * right_mass;
            breakpoints.push((a.x.clone(), value));
        }
        PotentialFunction {
            breakpoints,
            left_slope: -mass.clone(),
            right_slope: mass,
        }
    }

    /// Convex order `self <=_c other`: equal mass and barycenter, and the
    /// potential of `self` below that of `other` at every atom of either.
    pub fn convex_order_leq(&self, other: &Self) -> bool {
        if self.mass() != other.mass() || self.first_moment() != other.first_moment() {
            return false;
        }
        let u = self.potential();
        let v = other.potential();
        self.atoms
            .iter()
            .chain(other.atoms.iter())
            .all(|a| u.eval(&a.x) <= v.eval(&a.x))
    }

    /// Positive convex order: `self(phi) <= other(phi)` for every nonnegative
    /// convex `phi`. Checked through the mass and calls/puts struck at the
    /// combined support.
    pub fn positive_convex_order_leq(&self, other: &Self) -> bool {
        if self.mass() > other.mass() {
            return false;
        }
        self.atoms.iter().chain(other.atoms.iter()).all(|a| {
            self.call_value(&a.x) <= other.call_value(&a.x)
                && self.put_value(&a.x) <= other.put_value(&a.x)
        })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Rational, &Rational)> {
        self.atoms.iter().map(|a| (&a.x, &a.w))
    }
}

impl fmt::Display for DiscreteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return write!(f, "0");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}δ[{}]", a.w, a.x)?;
        }
        Ok(())
    }
}

/// One end of an interval: a finite rational endpoint, open or closed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub at: Rational,
    pub closed: bool,
}

/// An interval with optional finite ends; a missing end means unbounded.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Interval {
    pub lower: Option<Endpoint>,
    pub upper: Option<Endpoint>,
}

impl Interval {
    pub fn real_line() -> Self {
        Self::default()
    }

    pub fn at_most(a: Rational) -> Self {
        Self {
            lower: None,
            upper: Some(Endpoint { at: a, closed: true }),
        }
    }

    pub fn open(a: Rational, b: Rational) -> Self {
        Self {
            lower: Some(Endpoint { at: a, closed: false }),
            upper: Some(Endpoint { at: b, closed: false }),
        }
    }

    pub fn closed(a: Rational, b: Rational) -> Self {
        Self {
            lower: Some(Endpoint { at: a, closed: true }),
            upper: Some(Endpoint { at: b, closed: true }),
        }
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let above = match &self.lower {
            None => true,
            Some(e) if e.closed => x >= &e.at,
            Some(e) => x > &e.at,
        };
        let below = match &self.upper {
            None => true,
            Some(e) if e.closed => x <= &e.at,
            Some(e) => x < &e.at,
        };
        above && below
    }
}

/// Piecewise-linear convex function with kinks at `breakpoints` and linear
/// continuation with the given slopes outside them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PotentialFunction {
    pub breakpoints: Vec<(Rational, Rational)>,
    pub left_slope: Rational,
    pub right_slope: Rational,
}

impl PotentialFunction {
    pub fn eval(&self, x: &Rational) -> Rational {
        let bps = &self.breakpoints;
        let Some(first) = bps.first() else {
            return Rational::zero();
        };
        let last = bps.last().expect("nonempty");
        if x <= &first.0 {
            return &first.1 + &self.left_slope * (x - &first.0);
        }
        if x >= &last.0 {
            return &last.1 + &self.right_slope * (x - &last.0);
        }
        let i = bps.partition_point(|(bx, _)| bx <= x);
        let (x0, y0) = &bps[i - 1];
        let (x1, y1) = &bps[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Slopes of the linear pieces, from `left_slope` to `right_slope`.
    pub fn slopes(&self) -> Vec<Rational> {
        let mut out = vec![self.left_slope.clone()];
        for pair in self.breakpoints.windows(2) {
            out.push((&pair[1].1 - &pair[0].1) / (&pair[1].0 - &pair[0].0));
        }
        if !self.breakpoints.is_empty() {
            out.push(self.right_slope.clone());
        }
        out
    }

    /// Slope increase at each breakpoint.
    pub fn kinks(&self) -> Vec<(Rational, Rational)> {
        let slopes = self.slopes();
        self.breakpoints
            .iter()
            .zip(slopes.windows(2))
            .map(|((x, _), s)| (x.clone(), &s[1] - &s[0]))
            .collect()
    }

    pub fn is_convex(&self) -> bool {
        self.slopes().windows(2).all(|s| s[0] <= s[1])
    }
}
