//! Dense two-phase primal simplex, generic over the scalar.
//!
//! Problems are given in equality form: maximize `c·x` subject to `A x = b`,
//! `x >= 0`. Artificial columns stay in the tableau after phase one so the
//! final reduced costs of those columns yield the dual vector directly.

use std::cmp::Ordering;
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, Signed, ToPrimitive, Zero};

use crate::rational::Rational;

/// Arithmetic needed by the simplex engine.
pub trait LpScalar: Clone + Debug + PartialOrd + Send + Sync {
    /// Scalar the tableau is actually pivoted in.
    type Work: LpScalar;
    fn to_work(&self) -> Self::Work;
    fn from_work(w: &Self::Work) -> Self;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &Rational) -> Self;
    fn plus(&self, o: &Self) -> Self;
    fn minus(&self, o: &Self) -> Self;
    fn times(&self, o: &Self) -> Self;
    fn over(&self, o: &Self) -> Self;
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_zero(&self) -> bool {
        !self.is_pos() && !self.is_neg()
    }
    fn negated(&self) -> Self {
        Self::zero().minus(self)
    }
}

impl LpScalar for Rational {
    type Work = FastRational;
    fn to_work(&self) -> FastRational {
        FastRational::from_big(self.clone())
    }
    fn from_work(w: &FastRational) -> Self {
        w.to_big()
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn from_rational(r: &Rational) -> Self {
        r.clone()
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn is_pos(&self) -> bool {
        self.is_positive()
    }
    fn is_neg(&self) -> bool {
        self.is_negative()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
}

/// Exact rational kept on machine words while it fits. Every operation that
/// overflows is redone in big integers, so results are always exact.
#[derive(Debug, Clone)]
pub enum FastRational {
    Small(Ratio<i64>),
    Big(Rational),
}

impl FastRational {
    pub fn from_big(r: Rational) -> Self {
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(n), Some(d)) => FastRational::Small(Ratio::new_raw(n, d)),
            _ => FastRational::Big(r),
        }
    }

    pub fn to_big(&self) -> Rational {
        match self {
            FastRational::Small(r) => Rational::new_raw(BigInt::from(*r.numer()), BigInt::from(*r.denom())),
            FastRational::Big(r) => r.clone(),
        }
    }

    fn combine(
        &self,
        o: &Self,
        small: impl Fn(&Ratio<i64>, &Ratio<i64>) -> Option<Ratio<i64>>,
        big: impl Fn(Rational, Rational) -> Rational,
    ) -> Self {
        if let (FastRational::Small(a), FastRational::Small(b)) = (self, o) {
            if let Some(r) = small(a, b) {
                return FastRational::Small(r);
            }
        }
        FastRational::from_big(big(self.to_big(), o.to_big()))
    }

    fn signum(&self) -> Ordering {
        match self {
            FastRational::Small(r) => r.numer().cmp(&0),
            FastRational::Big(r) => r.numer().sign().cmp(&num_bigint::Sign::NoSign),
        }
    }
}

impl PartialEq for FastRational {
    fn eq(&self, o: &Self) -> bool {
        self.partial_cmp(o) == Some(Ordering::Equal)
    }
}

impl PartialOrd for FastRational {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(match (self, o) {
            (FastRational::Small(a), FastRational::Small(b)) => a.cmp(b),
            _ => self.to_big().cmp(&o.to_big()),
        })
    }
}

impl LpScalar for FastRational {
    type Work = FastRational;
    fn to_work(&self) -> Self {
        self.clone()
    }
    fn from_work(w: &Self) -> Self {
        w.clone()
    }
    fn zero() -> Self {
        FastRational::Small(Ratio::from_integer(0))
    }
    fn one() -> Self {
        FastRational::Small(Ratio::from_integer(1))
    }
    fn from_rational(r: &Rational) -> Self {
        FastRational::from_big(r.clone())
    }
    fn plus(&self, o: &Self) -> Self {
        self.combine(o, |a, b| a.checked_add(b), |a, b| a + b)
    }
    fn minus(&self, o: &Self) -> Self {
        self.combine(o, |a, b| a.checked_sub(b), |a, b| a - b)
    }
    fn times(&self, o: &Self) -> Self {
        self.combine(o, |a, b| a.checked_mul(b), |a, b| a * b)
    }
    fn over(&self, o: &Self) -> Self {
        self.combine(o, |a, b| a.checked_div(b), |a, b| a / b)
    }
    fn is_pos(&self) -> bool {
        self.signum() == Ordering::Greater
    }
    fn is_neg(&self) -> bool {
        self.signum() == Ordering::Less
    }
    fn is_zero(&self) -> bool {
        self.signum() == Ordering::Equal
    }
}

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_LIMIT: usize = 50;

/// Sign threshold for floating-point pivoting.
pub const FLOAT_EPS: f64 = 1e-11;

impl LpScalar for f64 {
    type Work = f64;
    fn to_work(&self) -> f64 {
        *self
    }
    fn from_work(w: &f64) -> Self {
        *w
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &Rational) -> Self {
        crate::rational::to_f64(r)
    }
    fn plus(&self, o: &Self) -> Self {
        self + o
    }
    fn minus(&self, o: &Self) -> Self {
        self - o
    }
    fn times(&self, o: &Self) -> Self {
        self * o
    }
    fn over(&self, o: &Self) -> Self {
        self / o
    }
    fn is_pos(&self) -> bool {
        *self > FLOAT_EPS
    }
    fn is_neg(&self) -> bool {
        *self < -FLOAT_EPS
    }
}

/// Equality row `sum coeffs = rhs`.
#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub coeffs: Vec<(usize, T)>,
    pub rhs: T,
}

#[derive(Debug, Clone)]
pub struct LinearProgram<T> {
    pub num_vars: usize,
    pub objective: Vec<T>,
    pub rows: Vec<Constraint<T>>,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    /// One multiplier per constraint row, in the sign convention of the input rows.
    pub duals: Vec<T>,
    /// Structural columns basic at the optimum.
    pub basis: Vec<usize>,
    pub pivots: usize,
}

#[derive(Debug, Clone)]
pub enum LpOutcome<T> {
    Optimal(LpSolution<T>),
    Infeasible,
    Unbounded,
}

impl<T: LpScalar> LinearProgram<T> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![T::zero(); num_vars],
            rows: Vec::new(),
        }
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, T)>, rhs: T) -> usize {
        self.rows.push(Constraint { coeffs, rhs });
        self.rows.len() - 1
    }

    pub fn solve(&self) -> LpOutcome<T> {
        let work = LinearProgram {
            num_vars: self.num_vars,
            objective: self.objective.iter().map(T::to_work).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| Constraint {
                    coeffs: r.coeffs.iter().map(|(j, a)| (*j, a.to_work())).collect(),
                    rhs: r.rhs.to_work(),
                })
                .collect(),
        };
        let back = |v: &[T::Work]| v.iter().map(T::from_work).collect::<Vec<T>>();
        match Tableau::build(&work).run(&work.objective) {
            LpOutcome::Optimal(s) => LpOutcome::Optimal(LpSolution {
                x: back(&s.x),
                value: T::from_work(&s.value),
                duals: back(&s.duals),
                basis: s.basis,
                pivots: s.pivots,
            }),
            LpOutcome::Infeasible => LpOutcome::Infeasible,
            LpOutcome::Unbounded => LpOutcome::Unbounded,
        }
    }
}

struct Tableau<T> {
    n: usize,
    m: usize,
    rows: Vec<Vec<T>>,
    rhs: Vec<T>,
    basis: Vec<usize>,
    cost: Vec<T>,
    neg_value: T,
    flipped: Vec<bool>,
    pivots: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl<T: LpScalar> Tableau<T> {
    fn build(lp: &LinearProgram<T>) -> Self {
        let n = lp.num_vars;
        let m = lp.rows.len();
        let width = n + m;
        let mut rows = Vec::with_capacity(m);
        let mut rhs = Vec::with_capacity(m);
        let mut flipped = Vec::with_capacity(m);
        for (i, row) in lp.rows.iter().enumerate() {
            let flip = row.rhs.is_neg();
            let mut dense = vec![T::zero(); width];
            for (j, a) in &row.coeffs {
                dense[*j] = dense[*j].plus(a);
            }
            if flip {
                for v in dense.iter_mut().take(n) {
                    *v = v.negated();
                }
            }
            dense[n + i] = T::one();
            rows.push(dense);
            rhs.push(if flip { row.rhs.negated() } else { row.rhs.clone() });
            flipped.push(flip);
        }
        Self {
            n,
            m,
            rows,
            rhs,
            basis: (n..n + m).collect(),
            cost: vec![T::zero(); width],
            neg_value: T::zero(),
            flipped,
            pivots: 0,
        }
    }

    fn pivot(&mut self, r: usize, c: usize) {
        self.pivots += 1;
        let p = self.rows[r][c].clone();
        let width = self.n + self.m;
        if !(p.minus(&T::one())).is_zero() {
            for j in 0..width {
                if !self.rows[r][j].is_zero() {
                    self.rows[r][j] = self.rows[r][j].over(&p);
                }
            }
            self.rhs[r] = self.rhs[r].over(&p);
        }
        self.rows[r][c] = T::one();
        let support: Vec<usize> = (0..width).filter(|&j| !self.rows[r][j].is_zero()).collect();
        let (pivot_row, pivot_rhs) = (self.rows[r].clone(), self.rhs[r].clone());
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.rows[i][c].clone();
            if f.is_zero() {
                continue;
            }
            for &j in &support {
                self.rows[i][j] = self.rows[i][j].minus(&f.times(&pivot_row[j]));
            }
            self.rows[i][c] = T::zero();
            self.rhs[i] = self.rhs[i].minus(&f.times(&pivot_rhs));
        }
        let f = self.cost[c].clone();
        if !f.is_zero() {
            for &j in &support {
                self.cost[j] = self.cost[j].minus(&f.times(&pivot_row[j]));
            }
            self.cost[c] = T::zero();
            self.neg_value = self.neg_value.minus(&f.times(&pivot_rhs));
        }
        self.basis[r] = c;
    }

    /// Sets reduced costs for objective `c` (indexed over all columns) given the current basis.
    fn price(&mut self, c: &[T]) {
        self.cost = c.to_vec();
        self.neg_value = T::zero();
        for i in 0..self.m {
            let cb = c[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for (j, v) in self.rows[i].iter().enumerate() {
                if !v.is_zero() {
                    self.cost[j] = self.cost[j].minus(&cb.times(v));
                }
            }
            self.neg_value = self.neg_value.minus(&cb.times(&self.rhs[i]));
        }
        for i in 0..self.m {
            self.cost[self.basis[i]] = T::zero();
        }
    }

    /// Primal iterations over columns `< allowed`.
    ///
    /// Enters the column with the largest reduced cost; after a run of
    /// degenerate pivots it falls back to Bland's rule for the rest of the
    /// phase, which rules out cycling.
    fn iterate(&mut self, allowed: usize) -> Phase {
        let mut degenerate_run = 0;
        let mut bland = false;
        loop {
            let entering = if bland {
                (0..allowed).find(|&j| self.cost[j].is_pos())
            } else {
                let mut best: Option<usize> = None;
                for j in 0..allowed {
                    if self.cost[j].is_pos() && best.map_or(true, |b| self.cost[j] > self.cost[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Phase::Optimal;
            };
            let mut best: Option<(usize, T)> = None;
            for i in 0..self.m {
                let a = &self.rows[i][c];
                if !a.is_pos() {
                    continue;
                }
                let ratio = self.rhs[i].over(a);
                best = match best {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        if ratio < br || (!(ratio > br) && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            match best {
                None => return Phase::Unbounded,
                Some((r, step)) => {
                    if step.is_zero() {
                        degenerate_run += 1;
                        if degenerate_run > DEGENERATE_LIMIT {
                            bland = true;
                        }
                    } else {
                        degenerate_run = 0;
                    }
                    self.pivot(r, c)
                }
            }
        }
    }

    fn run(mut self, objective: &[T]) -> LpOutcome<T> {
        let (n, m) = (self.n, self.m);
        let mut phase_one = vec![T::zero(); n + m];
        for v in phase_one.iter_mut().skip(n) {
            *v = T::one().negated();
        }
        self.price(&phase_one);
        if let Phase::Unbounded = self.iterate(n + m) {
            unreachable!("phase one objective is bounded above by zero");
        }
        if self.neg_value.is_pos() {
            return LpOutcome::Infeasible;
        }
        // drive zero-level artificials out of the basis where possible
        for r in 0..m {
            if self.basis[r] < n {
                continue;
            }
            if let Some(c) = (0..n).find(|&j| !self.rows[r][j].is_zero()) {
                self.pivot(r, c);
            }
        }
        let mut full = objective.to_vec();
        full.resize(n + m, T::zero());
        self.price(&full);
        if let Phase::Unbounded = self.iterate(n) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![T::zero(); n];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < n {
                x[b] = if self.rhs[i].is_neg() { T::zero() } else { self.rhs[i].clone() };
            }
        }
        let duals = (0..m)
            .map(|i| {
                let y = self.cost[n + i].negated();
                if self.flipped[i] {
                    y.negated()
                } else {
                    y
                }
            })
            .collect();
        let basis = self.basis.iter().copied().filter(|&b| b < n).collect();
        LpOutcome::Optimal(LpSolution {
            x,
            value: self.neg_value.negated(),
            duals,
            basis,
            pivots: self.pivots,
        })
    }
}
