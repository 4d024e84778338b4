use mot_core::coupling::{
    is_martingale, left_curtain_one_step, left_monotone_multistep, strong_order_holds, verify_left_monotone,
    KernelPolicy,
};
use mot_core::decomposition::{decompose_step, free_polar_test, polar_test};
use mot_core::geometry::{find_improving_competitor, is_left_monotone_set, is_nondegenerate_set, SupportSet};
use mot_core::instances::{random_chain, random_product_reward, rng, ChainShape};
use mot_core::json;
use mot_core::lpsolver::simplex::{LinearProgram, LpOutcome};
use mot_core::lpsolver::{chain_min_call, solve_primal_exact, solve_primal_float, MotProgram, ProgramOptions};
use mot_core::measure::DiscreteMeasure;
use mot_core::rational::{int, positive_part, ratio, to_f64, Rational};
use mot_core::shadow::{shadow, shadow_in_order};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn chain(seed: u64, steps: usize) -> Vec<DiscreteMeasure> {
    random_chain(
        &mut rng(seed),
        ChainShape {
            steps,
            ..ChainShape::default()
        },
    )
}

fn measure_strategy(max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((-5i64..=5, 1i64..=4), 1..=max_atoms)
        .prop_map(|atoms| DiscreteMeasure::new(atoms.into_iter().map(|(x, w)| (int(x), ratio(w, 4)))).unwrap())
}

fn normalized(m: DiscreteMeasure) -> DiscreteMeasure {
    let mass = m.mass();
    m.scale(&(Rational::one() / mass)).unwrap()
}

/// Variables `π(x, y)` on `supp μ x supp ν`, with rows for the `μ` marginal,
/// the barycenters and `ν` (as an equality or with slack).
struct CouplingLp {
    lp: LinearProgram<Rational>,
    xs: Vec<Rational>,
    ys: Vec<Rational>,
}

impl CouplingLp {
    fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure, nu_slack: bool) -> Self {
        let xs = mu.support();
        let ys = nu.support();
        let (nx, ny) = (xs.len(), ys.len());
        let slack = if nu_slack { ny } else { 0 };
        let mut lp = LinearProgram::new(nx * ny + slack);
        for (i, x) in xs.iter().enumerate() {
            lp.add_row((0..ny).map(|j| (i * ny + j, int(1))).collect(), mu.weight_at(x));
            lp.add_row((0..ny).map(|j| (i * ny + j, &ys[j] - x)).collect(), int(0));
        }
        for (j, y) in ys.iter().enumerate() {
            let mut row: Vec<(usize, Rational)> = (0..nx).map(|i| (i * ny + j, int(1))).collect();
            if nu_slack {
                row.push((nx * ny + j, int(1)));
            }
            lp.add_row(row, nu.weight_at(y));
        }
        Self { lp, xs, ys }
    }

    fn feasible(&self) -> bool {
        matches!(self.lp.solve(), LpOutcome::Optimal(_))
    }

    /// Minimum of `Σ g(y) θ(y)` over images `θ` of the coupling.
    fn min_image(&mut self, g: impl Fn(&Rational) -> Rational) -> Rational {
        let ny = self.ys.len();
        for i in 0..self.xs.len() {
            for j in 0..ny {
                self.lp.objective[i * ny + j] = -g(&self.ys[j]);
            }
        }
        match self.lp.solve() {
            LpOutcome::Optimal(s) => -s.value,
            other => panic!("{other:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn convex_order_matches_lp(a in measure_strategy(4), b in measure_strategy(5), seed in 0u64..1000, pick in 0usize..3) {
        // mix arbitrary pairs with pairs that are in order by construction
        let (mu, nu) = match pick {
            0 => (normalized(a), normalized(b)),
            1 => { let c = chain(seed, 1); (c[0].clone(), c[1].clone()) }
            _ => { let c = chain(seed, 1); (c[1].clone(), c[0].clone()) }
        };
        let lp = CouplingLp::new(&mu, &nu, false);
        prop_assert_eq!(mu.convex_order_leq(&nu), lp.feasible());
    }

    #[test]
    fn positive_convex_order_matches_lp(a in measure_strategy(3), b in measure_strategy(5)) {
        let lp = CouplingLp::new(&a, &b, true);
        prop_assert_eq!(a.positive_convex_order_leq(&b), lp.feasible());
    }

    #[test]
    fn potential_is_convex_and_exact(a in measure_strategy(5), x in -7i64..=7, num in 0i64..4) {
        let u = a.potential();
        prop_assert!(u.is_convex());
        let at = int(x) + ratio(num, 4);
        let direct: Rational = a.iter().map(|(y, w)| w * num_traits::Signed::abs(&(&at - y))).sum();
        prop_assert_eq!(u.eval(&at), direct);
    }

    #[test]
    fn shadow_is_order_independent(seed in 0u64..5000, rot in 0usize..5) {
        let c = chain(seed, 1);
        let (mu, nu) = (&c[0], &c[1]);
        let mut order: Vec<usize> = (0..mu.len()).collect();
        order.rotate_left(rot % mu.len());
        order.reverse();
        let a = shadow(mu, nu).unwrap();
        let b = shadow_in_order(mu, nu, &order).unwrap();
        prop_assert_eq!(&a.shadow, &b.shadow);
        prop_assert_eq!(a.shadow.add(&a.residual), nu.clone());
        prop_assert!(mu.convex_order_leq(&a.shadow));
        prop_assert!(a.shadow.dominated_by(nu));
    }

    #[test]
    fn shadow_minimizes_calls_and_second_moment(seed in 0u64..5000, cut in 0usize..4) {
        let c = chain(seed, 1);
        let atoms = c[0].support();
        let part = c[0].prefix(&atoms[cut % atoms.len()]);
        let s = shadow(&part, &c[1]).unwrap().shadow;
        let mut lp = CouplingLp::new(&part, &c[1], true);
        prop_assert_eq!(lp.min_image(|y| y * y), s.second_moment());
        for b in c[1].support() {
            prop_assert_eq!(lp.min_image(|y| positive_part(&(y - &b))), s.call_value(&b));
        }
    }

    #[test]
    fn decomposition_reassembles(seed in 0u64..5000) {
        let c = chain(seed, 1);
        let d = decompose_step(&c[0], &c[1]).unwrap();
        let mut mu = d.diagonal.clone();
        let mut nu = d.diagonal.clone();
        for k in &d.components {
            prop_assert!(k.mu.convex_order_leq(&k.nu));
            prop_assert_eq!(k.mu.mass(), k.nu.mass());
            // strict potential gap at interior support points of I_k
            let (um, un) = (k.mu.potential(), k.nu.potential());
            for x in c[0].support().iter().chain(c[1].support().iter()).filter(|x| k.in_i(x)) {
                prop_assert!(um.eval(x) < un.eval(x));
            }
            mu = mu.add(&k.mu);
            nu = nu.add(&k.nu);
        }
        prop_assert_eq!(mu, c[0].clone());
        prop_assert_eq!(nu, c[1].clone());
    }

    #[test]
    fn polar_paths_match_lp(seed in 0u64..5000, steps in 1usize..=2, picks in prop::collection::vec(any::<prop::sample::Index>(), 8)) {
        let mu = chain(seed, steps);
        let grid: Vec<Vec<Rational>> = mu.iter().map(|m| m.support()).collect();
        let mut paths: Vec<Vec<Rational>> = vec![vec![]];
        for g in &grid {
            paths = paths.into_iter().flat_map(|p| g.iter().map(move |x| { let mut q = p.clone(); q.push(x.clone()); q })).collect();
        }
        let paths: Vec<Vec<Rational>> = picks.iter().map(|i| i.get(&paths).clone()).collect();
        let verdicts = polar_test(&mu, &paths).unwrap();
        let opts = ProgramOptions { restrict_to_domain: false };
        for (path, v) in paths.iter().zip(verdicts) {
            let target = path.clone();
            let program = MotProgram::constrained(&mu, |x| Ok(if x == target.as_slice() { int(1) } else { int(0) }), opts).unwrap();
            let best = program.solve_lp().unwrap().value;
            prop_assert_eq!(v.polar, best.is_zero(), "path {:?}", path);
        }
    }

    #[test]
    fn free_polar_paths_match_lp(seed in 0u64..5000, n in 2usize..=3, picks in prop::collection::vec(any::<prop::sample::Index>(), 8)) {
        let c = chain(seed, 2);
        let (mu0, mun) = (&c[0], &c[2]);
        let mut grid: Vec<Rational> = mu0.support().into_iter().chain(mun.support()).collect();
        grid.sort();
        grid.dedup();
        let mut paths: Vec<Vec<Rational>> = mu0.support().into_iter().map(|x| vec![x]).collect();
        for t in 1..=n {
            let g = if t == n { mun.support() } else { grid.clone() };
            paths = paths.into_iter().flat_map(|p| g.clone().into_iter().map(move |x| { let mut q = p.clone(); q.push(x); q })).collect();
        }
        let paths: Vec<Vec<Rational>> = picks.iter().map(|i| i.get(&paths).clone()).collect();
        let verdicts = free_polar_test(mu0, mun, n, &paths).unwrap();
        let opts = ProgramOptions { restrict_to_domain: false };
        for (path, polar) in paths.iter().zip(verdicts) {
            let target = path.clone();
            let program = MotProgram::free(mu0, mun, n, None, |x| Ok(if x == target.as_slice() { int(1) } else { int(0) }), opts).unwrap();
            let best = program.solve_lp().unwrap().value;
            prop_assert_eq!(polar, best.is_zero(), "path {:?}", path);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn construction_is_consistent(seed in 0u64..5000, steps in 1usize..=3) {
        let mu = chain(seed, steps);
        let p = left_monotone_multistep(&mu, KernelPolicy::default()).unwrap();
        prop_assert!(is_martingale(&p).holds);
        for (t, m) in mu.iter().enumerate() {
            prop_assert_eq!(&p.marginal(t), m);
        }
        prop_assert!(verify_left_monotone(&p, &mu).unwrap().holds);
        let support = SupportSet::of(&p);
        prop_assert!(is_left_monotone_set(&support).holds);
        prop_assert!(is_nondegenerate_set(&support).holds);
        // subsets of a left-monotone set stay left-monotone
        let half = SupportSet::new(steps, support.iter().step_by(2).cloned());
        prop_assert!(is_left_monotone_set(&half).holds);
        if steps == 1 {
            prop_assert_eq!(p, left_curtain_one_step(&mu[0], &mu[1]).unwrap());
        }
    }

    #[test]
    fn policies_share_projections(seed in 0u64..5000, steps in 2usize..=3) {
        let mu = chain(seed, steps);
        let a = left_monotone_multistep(&mu, KernelPolicy::LeftCurtainWithinIncrements).unwrap();
        let b = left_monotone_multistep(&mu, KernelPolicy::LpFeasible).unwrap();
        for t in 1..=steps {
            prop_assert_eq!(a.project(&[0, t]), b.project(&[0, t]));
        }
        prop_assert!(verify_left_monotone(&b, &mu).unwrap().holds);
    }

    #[test]
    fn strong_order_iff_projections_are_left_curtains(seed in 0u64..5000, steps in 2usize..=3) {
        let mu = chain(seed, steps);
        let p = left_monotone_multistep(&mu, KernelPolicy::default()).unwrap();
        let all_curtains = (1..=steps).all(|t| p.project(&[0, t]) == left_curtain_one_step(&mu[0], &mu[t]).unwrap());
        prop_assert_eq!(strong_order_holds(&mu).unwrap(), all_curtains);
    }

    #[test]
    fn obstructed_shadow_is_least_in_chain(seed in 0u64..5000) {
        let mu = chain(seed, 2);
        let part = mu[0].prefix(&mu[0].support()[0]);
        let s = shadow(&part, &mu[1]).unwrap().shadow;
        for b in mu[1].support() {
            prop_assert_eq!(chain_min_call(&part, &mu[1..], 1, &b).unwrap(), s.call_value(&b));
        }
    }

    #[test]
    fn optimizer_lies_in_contact_set(seed in 0u64..5000, steps in 1usize..=2) {
        let mu = chain(seed, steps);
        let reward = random_product_reward(&mut rng(seed ^ 0x5eed), &mu);
        let program = MotProgram::constrained(&mu, |x| reward.eval_exact(x), ProgramOptions::default()).unwrap();
        let sol = program.solve().unwrap();
        let contact = program.contact_set(&sol.certificate);
        prop_assert!(SupportSet::of(&sol.optimizer_measure(steps)).is_subset(&contact));
        prop_assert!(program.superhedges(&sol.certificate));
        // any transport in the contact set attains the optimum
        let p = left_monotone_multistep(&mu, KernelPolicy::default()).unwrap();
        if SupportSet::of(&p).is_subset(&contact) {
            prop_assert_eq!(program.value_of(&p).unwrap(), sol.value.clone());
        } else {
            prop_assert!(program.value_of(&p).unwrap() < sol.value);
        }
    }

    #[test]
    fn float_mode_agrees_with_exact(seed in 0u64..5000, steps in 1usize..=2) {
        let mu = chain(seed, steps);
        let reward = random_product_reward(&mut rng(seed.wrapping_mul(31)), &mu);
        let exact = solve_primal_exact(&mu, |x| reward.eval_exact(x).unwrap()).unwrap();
        let float = solve_primal_float(&mu, |x| reward.eval_f64(x)).unwrap();
        let e = to_f64(&exact.value);
        prop_assert!((e - float.value).abs() <= 1e-9 * e.abs().max(1.0), "{} vs {}", e, float.value);
    }

    #[test]
    fn competitors_preserve_structure(seed in 0u64..5000) {
        let mu = chain(seed, 1);
        let p = left_monotone_multistep(&mu, KernelPolicy::LpFeasible).unwrap();
        let f = |x: &[Rational]| &x[0] * &x[1] * &x[1];
        if let Some(imp) = find_improving_competitor(&p, f, None) {
            prop_assert!(imp.improved_value > imp.original_value);
            prop_assert_eq!(imp.competitor.marginal(0), p.marginal(0));
            prop_assert_eq!(imp.competitor.marginal(1), p.marginal(1));
            prop_assert!(is_martingale(&imp.competitor).holds);
        }
        // the left-curtain coupling admits no improvement for this reward
        let lc = left_curtain_one_step(&mu[0], &mu[1]).unwrap();
        prop_assert!(find_improving_competitor(&lc, f, None).is_none());
    }

    #[test]
    fn json_round_trips(seed in 0u64..5000, steps in 1usize..=2, approx in any::<bool>()) {
        let mu = chain(seed, steps);
        for m in &mu {
            prop_assert_eq!(&json::parse_measure(&json::measure_to_json(m, approx)).unwrap(), m);
        }
        let p = left_monotone_multistep(&mu, KernelPolicy::default()).unwrap();
        let text = serde_json::to_string(&json::coupling_to_json(&p, approx)).unwrap();
        let back: serde_json::Value = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(json::parse_coupling(&back).unwrap(), p);
        let d = decompose_step(&mu[0], &mu[1]).unwrap();
        prop_assert_eq!(json::parse_decomposition(&json::decomposition_to_json(&d, approx)).unwrap(), d);
        let sol = solve_primal_exact(&mu, |x| &x[0] * &x[steps]).unwrap();
        prop_assert_eq!(json::parse_certificate(&json::certificate_to_json(&sol.certificate, approx)).unwrap(), sol.certificate);
    }
}
