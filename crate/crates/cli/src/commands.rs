use std::path::{Path, PathBuf};

use mot_core::coupling::{
    binomial_check, free_monotone_transport, is_martingale, left_monotone_multistep, left_monotone_multistep_capped,
    markov_check, strong_order_holds, verify_left_monotone, KernelPolicy, PathMeasure,
};
use mot_core::decomposition::{decompose_chain, free_polar_test, polar_test, PolarReason};
use mot_core::geometry::{is_left_monotone_set, is_nondegenerate_set, SupportSet};
use mot_core::instances::{random_chain, random_product_reward, rng, ChainShape};
use mot_core::json::{
    certificate_to_json, coupling_to_json, decomposition_to_json, measure_to_json, parse_coupling, parse_marginals,
    parse_measure, with_approx,
};
use mot_core::lpsolver::{
    solve_free, solve_primal, Mode, MotProgram, MotSolution, ProgramOptions, RewardExpr, Solved, FLOAT_TOLERANCE,
};
use mot_core::measure::DiscreteMeasure;
use mot_core::rational::{format_rational, parse_rational, to_f64, Rational};
use mot_core::shadow::{obstructed_shadow, shadow};
use mot_core::{gallery, MotError};
use serde_json::{json, Value};

use crate::output::{emit, in_file, read_json, CliError, CliResult, Report};
use crate::{Cli, Command, ModeArg, PolicyArg, SourceArgs};

pub fn run(cli: &Cli) -> CliResult<u8> {
    let g = &cli.global;
    let (name, inputs, seed, report) = match &cli.command {
        Command::CheckOrder { files } => ("check-order", files.clone(), None, check_order(files, g.approx)?),
        Command::Decompose { files } => ("decompose", files.clone(), None, decompose(files, g.approx)?),
        Command::Shadow { source, target } => {
            let mut inputs: Vec<PathBuf> = source.source.iter().cloned().collect();
            inputs.push(target.clone());
            ("shadow", inputs, None, shadow_cmd(source, target, g.approx)?)
        }
        Command::ObstructedShadow { source, chain } => {
            let mut inputs: Vec<PathBuf> = source.source.iter().cloned().collect();
            inputs.extend(chain.iter().cloned());
            ("obstructed-shadow", inputs, None, obstructed(source, chain, g.approx)?)
        }
        Command::LeftMonotone { files, policy, cap } => {
            ("left-monotone", files.clone(), None, left_monotone(files, *policy, *cap, g.approx)?)
        }
        Command::Solve { files, reward, mode } => ("solve", files.clone(), None, solve(files, reward, *mode, g.approx)?),
        Command::VerifySupport { coupling, marginals } => {
            let mut inputs = vec![coupling.clone()];
            inputs.extend(marginals.iter().cloned());
            ("verify-support", inputs, None, verify_support(coupling, marginals)?)
        }
        Command::Polar {
            files,
            paths,
            paths_file,
            free,
        } => ("polar", files.clone(), None, polar(files, paths, paths_file.as_deref(), *free)?),
        Command::Free {
            mu0,
            mun,
            steps,
            reward,
            mode,
            grid,
        } => (
            "free",
            vec![mu0.clone(), mun.clone()],
            None,
            free(mu0, mun, *steps, reward, *mode, grid.as_deref(), g.approx)?,
        ),
        Command::Examples { name, all } => ("examples", Vec::new(), None, examples(name.as_deref(), *all, g.approx)?),
        Command::Suite { seed, count, jobs } => ("suite", Vec::new(), Some(*seed), suite(*seed, *count, *jobs)?),
    };
    emit(g, name, &inputs, seed, &report)?;
    Ok(report.status)
}

fn load_measure(path: &Path) -> CliResult<DiscreteMeasure> {
    in_file(path, parse_measure(&read_json(path)?))
}

/// One marginals file, or one measure per file.
fn load_marginals(files: &[PathBuf]) -> CliResult<Vec<DiscreteMeasure>> {
    if let [single] = files {
        let v = read_json(single)?;
        if v.get("marginals").is_some() || v.is_array() {
            return in_file(single, parse_marginals(&v));
        }
        return Ok(vec![in_file(single, parse_measure(&v))?]);
    }
    files.iter().map(|f| load_measure(f)).collect()
}

fn load_chain(files: &[PathBuf]) -> CliResult<Vec<DiscreteMeasure>> {
    let mu = load_marginals(files)?;
    if mu.len() < 2 {
        return Err(CliError::Input("at least two measures are required".into()));
    }
    Ok(mu)
}

fn load_source(source: &SourceArgs) -> CliResult<DiscreteMeasure> {
    match (&source.source, &source.mass, &source.at) {
        (Some(path), _, _) => load_measure(path),
        (None, Some(q), Some(x)) => {
            let q = parse_rational(q).map_err(|e| CliError::Input(format!("--mass: {e}")))?;
            let x = parse_rational(x).map_err(|e| CliError::Input(format!("--at: {e}")))?;
            Ok(DiscreteMeasure::dirac(x, q)?)
        }
        _ => Err(CliError::Input("give --source or both --mass and --at".into())),
    }
}

fn parse_list(s: &str, what: &str) -> CliResult<Vec<Rational>> {
    s.split(',')
        .map(|p| parse_rational(p).map_err(|e| CliError::Input(format!("{what}: {e}"))))
        .collect()
}

fn mode_of(m: ModeArg) -> Mode {
    match m {
        ModeArg::Exact => Mode::Exact,
        ModeArg::Float => Mode::Float,
    }
}

fn measure_rows(label: &str, m: &DiscreteMeasure) -> Vec<Vec<String>> {
    m.iter()
        .map(|(x, w)| vec![label.to_string(), format_rational(x), format_rational(w)])
        .collect()
}

fn path_header(n: usize) -> Vec<String> {
    (0..=n).map(|t| format!("x{t}")).chain(["weight".to_string()]).collect()
}

fn path_rows(p: &PathMeasure) -> Vec<Vec<String>> {
    p.iter()
        .map(|(x, w)| x.iter().map(format_rational).chain([format_rational(w)]).collect())
        .collect()
}

fn check_order(files: &[PathBuf], approx: bool) -> CliResult<Report> {
    let mu = load_chain(files)?;
    let steps: Vec<Value> = mu
        .windows(2)
        .enumerate()
        .map(|(t, pair)| {
            json!({
                "step": t + 1,
                "convex_order": pair[0].convex_order_leq(&pair[1]),
                "positive_convex_order": pair[0].positive_convex_order_leq(&pair[1]),
                "mass": [with_approx(&pair[0].mass(), approx), with_approx(&pair[1].mass(), approx)],
            })
        })
        .collect();
    let holds = steps.iter().all(|s| s["convex_order"] == true);
    let mut rows = Vec::new();
    for (i, m) in mu.iter().enumerate() {
        for (x, u) in &m.potential().breakpoints {
            rows.push(vec![i.to_string(), format_rational(x), format_rational(u)]);
        }
    }
    Ok(Report::new(json!({"convex_order": holds, "steps": steps}))
        .table(["measure", "x", "potential"], rows)
        .failed_if(!holds))
}

fn decompose(files: &[PathBuf], approx: bool) -> CliResult<Report> {
    let mu = load_chain(files)?;
    let decomps = decompose_chain(&mu)?;
    let mut rows = Vec::new();
    let end = |r: &Option<Rational>, inf: &str| r.as_ref().map_or(inf.to_string(), format_rational);
    for (t, d) in decomps.iter().enumerate() {
        for r in &d.diagonal_domain {
            rows.push(vec![
                (t + 1).to_string(),
                "0".into(),
                end(&r.lo, "-inf"),
                end(&r.hi, "inf"),
                "true".into(),
                "true".into(),
                format_rational(&d.diagonal.restrict(&closed_range(r)).mass()),
            ]);
        }
        for c in &d.components {
            rows.push(vec![
                (t + 1).to_string(),
                c.index.to_string(),
                format_rational(&c.left),
                format_rational(&c.right),
                c.left_in_j.to_string(),
                c.right_in_j.to_string(),
                format_rational(&c.mu.mass()),
            ]);
        }
    }
    let steps: Vec<Value> = decomps
        .iter()
        .enumerate()
        .map(|(t, d)| {
            let mut v = decomposition_to_json(d, approx);
            v["step"] = json!(t + 1);
            v
        })
        .collect();
    Ok(Report::new(json!({"steps": steps})).table(
        ["step", "component", "left", "right", "left_closed", "right_closed", "mass"],
        rows,
    ))
}

fn closed_range(r: &mot_core::decomposition::ClosedRange) -> mot_core::measure::Interval {
    use mot_core::measure::{Endpoint, Interval};
    let end = |x: &Option<Rational>| {
        x.as_ref().map(|a| Endpoint {
            at: a.clone(),
            closed: true,
        })
    };
    Interval {
        lower: end(&r.lo),
        upper: end(&r.hi),
    }
}

fn shadow_cmd(source: &SourceArgs, target: &Path, approx: bool) -> CliResult<Report> {
    let mu = load_source(source)?;
    let nu = load_measure(target)?;
    let s = shadow(&mu, &nu)?;
    let mut rows = measure_rows("shadow", &s.shadow);
    rows.extend(measure_rows("residual", &s.residual));
    Ok(Report::new(json!({
        "shadow": measure_to_json(&s.shadow, approx),
        "residual": measure_to_json(&s.residual, approx),
    }))
    .table(["part", "x", "weight"], rows))
}

fn obstructed(source: &SourceArgs, chain: &[PathBuf], approx: bool) -> CliResult<Report> {
    let mu = load_source(source)?;
    let chain = load_marginals(chain)?;
    let s = obstructed_shadow(&mu, &chain)?;
    let rows = s.iter().map(|(x, w)| vec![format_rational(x), format_rational(w)]).collect();
    Ok(Report::new(json!({"obstructed_shadow": measure_to_json(&s, approx)})).table(["x", "weight"], rows))
}

fn left_monotone(files: &[PathBuf], policy: PolicyArg, cap: usize, approx: bool) -> CliResult<Report> {
    let mu = load_chain(files)?;
    let policy = match policy {
        PolicyArg::LeftCurtain => KernelPolicy::LeftCurtainWithinIncrements,
        PolicyArg::Lp => KernelPolicy::LpFeasible,
    };
    let p = left_monotone_multistep_capped(&mu, policy, cap)?;
    let cert = verify_left_monotone(&p, &mu)?;
    let n = mu.len() - 1;
    let projections: Vec<Value> = (1..=n)
        .map(|t| json!({"t": t, "coupling": coupling_to_json(&p.project(&[0, t]), approx)}))
        .collect();
    let support = SupportSet::of(&p);
    Ok(Report::new(json!({
        "transport": coupling_to_json(&p, approx),
        "verified": cert.holds,
        "left_monotone_support": is_left_monotone_set(&support).holds,
        "markov": markov_check(&p),
        "binomial": binomial_check(&p),
        "strong_order": strong_order_holds(&mu)?,
        "projections": projections,
    }))
    .table(path_header(n), path_rows(&p))
    .failed_if(!cert.holds))
}

fn float_paths(items: &[(Vec<Rational>, f64)]) -> Value {
    json!(items
        .iter()
        .map(|(x, w)| json!({"x": x.iter().map(format_rational).collect::<Vec<_>>(), "w": w}))
        .collect::<Vec<_>>())
}

fn float_rows(items: &[(Vec<Rational>, f64)]) -> Vec<Vec<String>> {
    items
        .iter()
        .map(|(x, w)| x.iter().map(format_rational).chain([w.to_string()]).collect())
        .collect()
}

fn parse_reward(s: &str) -> CliResult<RewardExpr> {
    RewardExpr::parse(s).map_err(|e| CliError::Input(format!("--reward: {e}")))
}

/// JSON and CSV for a solved problem, compared against a reference transport.
fn solved_report(solved: Solved, n: usize, reward: &RewardExpr, reference: &PathMeasure, approx: bool) -> CliResult<Report> {
    Ok(match solved {
        Solved::Exact(s) => {
            let optimizer = s.optimizer_measure(n);
            let attained = reference.integrate(|x| reward.eval_exact(x).expect("exact reward"));
            Report::new(json!({
                "mode": "exact",
                "value": with_approx(&s.value, approx),
                "optimizer": coupling_to_json(&optimizer, approx),
                "certificate": certificate_to_json(&s.certificate, approx),
                "reference": {
                    "transport": coupling_to_json(reference, approx),
                    "value": with_approx(&attained, approx),
                    "optimal": attained == s.value,
                },
            }))
            .table(path_header(n), path_rows(&optimizer))
        }
        Solved::Float(s) => {
            let attained = reference.integrate_f64(|x| reward.eval_f64(x));
            Report::new(json!({
                "mode": "float",
                "value": s.value,
                "optimizer": float_paths(&s.optimizer),
                "certificate": certificate_to_json(&s.certificate, approx),
                "reference": {
                    "transport": coupling_to_json(reference, approx),
                    "value": attained,
                    "optimal": (attained - s.value).abs() <= FLOAT_TOLERANCE,
                },
            }))
            .table(path_header(n), float_rows(&s.optimizer))
        }
    })
}

fn solve(files: &[PathBuf], reward: &str, mode: ModeArg, approx: bool) -> CliResult<Report> {
    let mu = load_chain(files)?;
    let reward = parse_reward(reward)?;
    let solved = solve_primal(&mu, &reward, mode_of(mode))?;
    let reference = left_monotone_multistep(&mu, KernelPolicy::default())?;
    solved_report(solved, mu.len() - 1, &reward, &reference, approx)
}

fn verify_support(coupling: &Path, marginals: &[PathBuf]) -> CliResult<Report> {
    let p = in_file(coupling, parse_coupling(&read_json(coupling)?))?;
    let support = SupportSet::of(&p);
    let lm = is_left_monotone_set(&support);
    let nd = is_nondegenerate_set(&support);
    let mg = is_martingale(&p);
    let witness = lm.witness.as_ref().map(|c| {
        let path = |x: &Vec<Rational>| x.iter().map(format_rational).collect::<Vec<_>>();
        json!({"t": c.t, "lower": path(&c.lower), "upper": path(&c.upper), "third": path(&c.third)})
    });
    let mut out = json!({
        "left_monotone_set": {"holds": lm.holds, "witness": witness},
        "nondegenerate": nd.holds,
        "martingale": mg.holds,
    });
    let mut rows = vec![
        vec!["left_monotone_set".to_string(), lm.holds.to_string()],
        vec!["nondegenerate".to_string(), nd.holds.to_string()],
        vec!["martingale".to_string(), mg.holds.to_string()],
    ];
    let mut failed = !lm.holds;
    if !marginals.is_empty() {
        let mu = load_marginals(marginals)?;
        let verified = verify_left_monotone(&p, &mu)?.holds;
        out["left_monotone_transport"] = json!(verified);
        rows.push(vec!["left_monotone_transport".to_string(), verified.to_string()]);
        failed |= !verified;
    }
    Ok(Report::new(out).table(["check", "holds"], rows).failed_if(failed))
}

fn polar(files: &[PathBuf], paths: &[String], paths_file: Option<&Path>, free: Option<usize>) -> CliResult<Report> {
    let mu = load_chain(files)?;
    let mut all: Vec<Vec<Rational>> = paths.iter().map(|p| parse_list(p, "--path")).collect::<CliResult<_>>()?;
    if let Some(f) = paths_file {
        all.extend(in_file(f, parse_coupling(&read_json(f)?))?.support());
    }
    let show = |x: &[Rational]| x.iter().map(format_rational).collect::<Vec<_>>();
    let (entries, rows): (Vec<Value>, Vec<Vec<String>>) = match free {
        Some(n) => {
            let verdicts = free_polar_test(&mu[0], mu.last().expect("two marginals"), n, &all)?;
            all.iter()
                .zip(verdicts)
                .map(|(x, polar)| {
                    (
                        json!({"path": show(x), "polar": polar}),
                        vec![show(x).join(" "), polar.to_string(), String::new()],
                    )
                })
                .unzip()
        }
        None => {
            for x in &all {
                if x.len() != mu.len() {
                    return Err(CliError::Input(format!("path {:?} needs {} coordinates", show(x), mu.len())));
                }
            }
            polar_test(&mu, &all)?
                .into_iter()
                .map(|v| {
                    let reason = match v.reason {
                        Some(PolarReason::NullCoordinate { t }) => format!("coordinate {t} is not an atom"),
                        Some(PolarReason::OutsideDomain { t }) => format!("step {t} leaves every component"),
                        None => String::new(),
                    };
                    let component = v.component.map(|c| c.indices);
                    (
                        json!({"path": show(&v.path), "polar": v.polar, "component": component, "reason": reason}),
                        vec![show(&v.path).join(" "), v.polar.to_string(), reason],
                    )
                })
                .unzip()
        }
    };
    Ok(Report::new(json!({"paths": entries})).table(["path", "polar", "reason"], rows))
}

fn free(
    mu0: &Path,
    mun: &Path,
    steps: usize,
    reward: &str,
    mode: ModeArg,
    grid: Option<&str>,
    approx: bool,
) -> CliResult<Report> {
    let (m0, mn) = (load_measure(mu0)?, load_measure(mun)?);
    let reward = parse_reward(reward)?;
    let grid = grid.map(|g| parse_list(g, "--grid")).transpose()?;
    let solved = solve_free(&m0, &mn, steps, grid, &reward, mode_of(mode))?;
    let reference = free_monotone_transport(&m0, &mn, steps)?;
    solved_report(solved, steps, &reward, &reference, approx)
}

fn examples(name: Option<&str>, all: bool, approx: bool) -> CliResult<Report> {
    let list = if all {
        gallery::all()
    } else {
        let name = name.unwrap_or_default();
        vec![gallery::example(name).ok_or_else(|| {
            CliError::Input(format!("unknown example {name:?}; known: {}", gallery::NAMES.join(", ")))
        })?]
    };
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut passed = true;
    for ex in &list {
        let report = gallery::run(ex)?;
        passed &= report.passed();
        for c in &report.checks {
            rows.push(vec![ex.name.to_string(), c.label.clone(), c.passed.to_string()]);
        }
        entries.push(json!({
            "name": ex.name,
            "title": ex.title,
            "passed": report.passed(),
            "marginals": ex.marginals.iter().map(|m| measure_to_json(m, approx)).collect::<Vec<_>>(),
            "checks": report.checks.iter().map(|c| json!({"check": c.label, "passed": c.passed})).collect::<Vec<_>>(),
            "transports": report
                .transports
                .iter()
                .map(|(label, p)| json!({"label": label, "coupling": coupling_to_json(p, approx)}))
                .collect::<Vec<_>>(),
        }));
    }
    Ok(Report::new(json!({"passed": passed, "examples": entries}))
        .table(["example", "check", "passed"], rows)
        .failed_if(!passed))
}

struct SuiteRun {
    steps: usize,
    value: Rational,
    dual: Rational,
    checks: Vec<(&'static str, bool)>,
}

fn suite_instance(seed: u64, index: usize) -> Result<SuiteRun, MotError> {
    let mut r = rng(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64));
    let steps = 2 + index % 2;
    let mu = random_chain(
        &mut r,
        ChainShape {
            steps,
            ..ChainShape::default()
        },
    );
    let reward = random_product_reward(&mut r, &mu);
    let program = MotProgram::constrained(&mu, |x| reward.eval_exact(x), ProgramOptions::default())?;
    let sol: MotSolution<Rational> = program.solve()?;
    let dual: Rational = mu
        .iter()
        .enumerate()
        .flat_map(|(t, m)| {
            let phi = &sol.certificate.phi[t];
            m.iter().map(move |(x, w)| w * phi.get(x).cloned().unwrap_or_default())
        })
        .sum();
    let optimizer = sol.optimizer_measure(steps);
    let contact = program.contact_set(&sol.certificate);
    let p = left_monotone_multistep(&mu, KernelPolicy::default())?;
    let q = left_monotone_multistep(&mu, KernelPolicy::LpFeasible)?;
    let checks = vec![
        ("strong_duality", dual == sol.value),
        ("superhedge", program.superhedges(&sol.certificate)),
        ("optimizer_martingale", is_martingale(&optimizer).holds),
        ("optimizer_in_contact_set", SupportSet::of(&optimizer).is_subset(&contact)),
        ("left_monotone_verified", verify_left_monotone(&p, &mu)?.holds),
        ("left_monotone_support", is_left_monotone_set(&SupportSet::of(&p)).holds),
        ("policy_invariant_projections", (1..=steps).all(|t| p.project(&[0, t]) == q.project(&[0, t]))),
    ];
    Ok(SuiteRun {
        steps,
        value: sol.value,
        dual,
        checks,
    })
}

fn suite(seed: u64, count: usize, jobs: usize) -> CliResult<Report> {
    let jobs = jobs.max(1);
    let mut results: Vec<Option<Result<SuiteRun, MotError>>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|j| {
                scope.spawn(move || {
                    (j..count)
                        .step_by(jobs)
                        .map(|i| (i, suite_instance(seed, i)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("suite worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut all_ok = true;
    for (i, r) in results.into_iter().enumerate() {
        match r.expect("every run is scheduled") {
            Ok(run) => {
                let ok = run.checks.iter().all(|(_, c)| *c);
                all_ok &= ok;
                rows.push(vec![
                    i.to_string(),
                    run.steps.to_string(),
                    format_rational(&run.value),
                    format_rational(&run.dual),
                    ok.to_string(),
                ]);
                entries.push(json!({
                    "run": i,
                    "steps": run.steps,
                    "value": format_rational(&run.value),
                    "value_approx": to_f64(&run.value),
                    "dual_objective": format_rational(&run.dual),
                    "checks": run.checks.iter().map(|(k, v)| (k.to_string(), json!(v))).collect::<serde_json::Map<_, _>>(),
                    "ok": ok,
                }));
            }
            Err(e) => {
                all_ok = false;
                rows.push(vec![i.to_string(), String::new(), String::new(), String::new(), "false".into()]);
                entries.push(json!({"run": i, "error": e.to_string(), "ok": false}));
            }
        }
    }
    Ok(Report::new(json!({"seed": seed, "count": count, "passed": all_ok, "runs": entries}))
        .table(["run", "steps", "value", "dual_objective", "ok"], rows)
        .failed_if(!all_ok))
}
