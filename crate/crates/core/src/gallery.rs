//! Worked examples with known answers, each with a self-check.

use crate::coupling::{
    left_curtain_one_step, left_monotone_multistep, markov_check, strong_order_holds, verify_left_monotone,
    KernelPolicy, PathMeasure,
};
use crate::error::Result;
use crate::geometry::{is_left_monotone_set, SupportSet};
use crate::measure::DiscreteMeasure;
use crate::rational::{int, ratio, Rational};

pub const NAMES: [&str; 4] = ["dirac", "notleftcurtain", "notmarkovian", "nonunique"];

#[derive(Debug, Clone)]
pub struct Example {
    pub name: &'static str,
    pub title: &'static str,
    pub marginals: Vec<DiscreteMeasure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub label: String,
    pub passed: bool,
}

/// Outcome of running an example: the checks and the transports they looked at.
#[derive(Debug, Clone)]
pub struct ExampleReport {
    pub name: &'static str,
    pub checks: Vec<Check>,
    pub transports: Vec<(String, PathMeasure)>,
}

impl ExampleReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn check(&mut self, label: &str, passed: bool) {
        self.checks.push(Check {
            label: label.to_string(),
            passed,
        });
    }
}

fn measure(atoms: &[(i64, i64, i64)]) -> DiscreteMeasure {
    DiscreteMeasure::new(atoms.iter().map(|&(x, p, q)| (int(x), ratio(p, q)))).expect("valid example measure")
}

/// Builds a path measure from integer paths and `(p, q)` weights.
pub fn paths(n: usize, items: &[(&[i64], i64, i64)]) -> PathMeasure {
    PathMeasure::from_paths(
        n,
        items
            .iter()
            .map(|(x, p, q)| (x.iter().map(|&v| int(v)).collect::<Vec<Rational>>(), ratio(*p, *q))),
    )
    .expect("valid example paths")
}

pub fn example(name: &str) -> Option<Example> {
    let (name, title, marginals) = match name {
        "dirac" => (
            "dirac",
            "Dirac start, the unique transport is left-monotone",
            vec![
                measure(&[(0, 1, 1)]),
                measure(&[(-1, 1, 2), (1, 1, 2)]),
                measure(&[(-2, 1, 4), (0, 1, 2), (2, 1, 4)]),
            ],
        ),
        "notleftcurtain" => (
            "notleftcurtain",
            "two-step projection differs from the one-step left-curtain",
            vec![
                measure(&[(-1, 1, 2), (1, 1, 2)]),
                measure(&[(-2, 1, 2), (2, 1, 2)]),
                measure(&[(-4, 1, 4), (0, 1, 2), (4, 1, 4)]),
            ],
        ),
        "notmarkovian" => (
            "notmarkovian",
            "left-monotone transport that is not Markovian",
            vec![
                measure(&[(0, 1, 2), (1, 1, 2)]),
                measure(&[(0, 3, 4), (2, 1, 4)]),
                measure(&[(-1, 1, 8), (0, 1, 2), (1, 1, 8), (2, 1, 4)]),
            ],
        ),
        "nonunique" => (
            "nonunique",
            "two distinct left-monotone transports",
            vec![
                measure(&[(0, 1, 1)]),
                measure(&[(-1, 1, 2), (1, 1, 2)]),
                measure(&[(-2, 3, 8), (0, 1, 4), (2, 3, 8)]),
            ],
        ),
        _ => return None,
    };
    Some(Example { name, title, marginals })
}

pub fn all() -> Vec<Example> {
    NAMES.iter().map(|n| example(n).expect("known name")).collect()
}

/// Prefixes every path of a one-step measure with `x0`.
pub fn extend_with_start(x0: &Rational, p: &PathMeasure) -> PathMeasure {
    PathMeasure::from_paths(
        p.steps() + 1,
        p.iter().map(|(x, w)| {
            let mut v = vec![x0.clone()];
            v.extend(x.iter().cloned());
            (v, w.clone())
        }),
    )
    .expect("nonnegative weights")
}

/// The two extremal one-step transports of the non-uniqueness example.
pub fn nonunique_pair() -> (PathMeasure, PathMeasure) {
    let l = paths(1, &[(&[-1, -2], 1, 4), (&[-1, 0], 1, 4), (&[1, -2], 1, 8), (&[1, 2], 3, 8)]);
    let r = paths(1, &[(&[-1, -2], 3, 8), (&[-1, 2], 1, 8), (&[1, 0], 1, 4), (&[1, 2], 1, 4)]);
    (l, r)
}

pub fn run(ex: &Example) -> Result<ExampleReport> {
    let mut report = ExampleReport {
        name: ex.name,
        checks: Vec::new(),
        transports: Vec::new(),
    };
    let mu = &ex.marginals;
    match ex.name {
        "dirac" => {
            let p = left_monotone_multistep(mu, KernelPolicy::default())?;
            let expected = paths(
                2,
                &[(&[0, -1, -2], 1, 4), (&[0, -1, 0], 1, 4), (&[0, 1, 0], 1, 4), (&[0, 1, 2], 1, 4)],
            );
            report.check("transport equals the unique martingale transport", p == expected);
            report.check("verify_left_monotone", verify_left_monotone(&p, mu)?.holds);
            report.transports.push(("left-monotone".into(), p));
        }
        "notleftcurtain" => {
            let p = left_monotone_multistep(mu, KernelPolicy::default())?;
            let p02 = p.project(&[0, 2]);
            let expected02 = paths(
                1,
                &[
                    (&[-1, -4], 3, 16),
                    (&[-1, 0], 1, 4),
                    (&[-1, 4], 1, 16),
                    (&[1, -4], 1, 16),
                    (&[1, 0], 1, 4),
                    (&[1, 4], 3, 16),
                ],
            );
            let lc = left_curtain_one_step(&mu[0], &mu[2])?;
            let expected_lc = paths(
                1,
                &[(&[-1, -4], 1, 8), (&[-1, 0], 3, 8), (&[1, -4], 1, 8), (&[1, 0], 1, 8), (&[1, 4], 1, 4)],
            );
            report.check("P_02 of the multistep transport", p02 == expected02);
            report.check("one-step left-curtain of (mu_0, mu_2)", lc == expected_lc);
            report.check("projection differs from left-curtain", p02 != lc);
            report.check("strong order fails", !strong_order_holds(mu)?);
            report.transports.push(("multistep P_02".into(), p02));
            report.transports.push(("left-curtain (mu_0, mu_2)".into(), lc));
        }
        "notmarkovian" => {
            let p = left_monotone_multistep(mu, KernelPolicy::default())?;
            let expected = paths(
                2,
                &[(&[0, 0, 0], 1, 2), (&[1, 0, -1], 1, 8), (&[1, 0, 1], 1, 8), (&[1, 2, 2], 1, 4)],
            );
            report.check("transport matches", p == expected);
            report.check("not Markovian", !markov_check(&p));
            report.check("support is left-monotone", is_left_monotone_set(&SupportSet::of(&p)).holds);
            report.transports.push(("left-monotone".into(), p));
        }
        "nonunique" => {
            let (l, r) = nonunique_pair();
            let zero = int(0);
            let pl = extend_with_start(&zero, &l);
            let pr = extend_with_start(&zero, &r);
            let half = ratio(1, 2);
            let mix = pl.scale(&half).add(&pr.scale(&half));
            report.check("P_l extension is left-monotone", verify_left_monotone(&pl, mu)?.holds);
            report.check("P_r extension is left-monotone", verify_left_monotone(&pr, mu)?.holds);
            report.check("mixture is left-monotone", verify_left_monotone(&mix, mu)?.holds);
            report.check(
                "bivariate projections coincide",
                pl.project(&[0, 1]) == pr.project(&[0, 1]) && pl.project(&[0, 2]) == pr.project(&[0, 2]),
            );
            report.check("full joints differ", pl != pr);
            report.transports.push(("P_l extension".into(), pl));
            report.transports.push(("P_r extension".into(), pr));
            report.transports.push(("mixture".into(), mix));
        }
        _ => unreachable!("examples are built by name"),
    }
    Ok(report)
}
