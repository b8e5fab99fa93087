//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use backdoor_cli::{analyze, cmd_analyze, cmd_verify, Analysis, Format, EXIT_CERTIFICATE};
use backdoor_core::class::{bad_clauses, is_member, solve_in_class, BaseClassSpec};
use backdoor_core::cnf::{
    brute_force_sat, connected_components, to_dimacs, Clause, Formula, IncidenceIndex, SatResult, Vertex,
};
use backdoor_core::game::{build_backdoor_tree, BuildOutcome, GameError};
use backdoor_core::obstruction::{
    build_main_splitter, build_separator_splitter, certificate_bound, separator_self_checks, verify_certificate,
    LowerBoundCertificate, DEFAULT_PATH_CAP,
};
use backdoor_core::oracle::{
    exact_backdoor_depth, gen_chain, gen_disjoint_copies, gen_flip, gen_wide_clause, random_assignment, random_formula,
    random_horn_adjacent, random_member, reference_depth, seeded_rng, OracleSplitter, OracleValue,
};
use backdoor_core::tree::{decide_sat_with_tree, validate_tree, ComponentBackdoorTree, Node};
use rand::Rng;

const PRESETS: [BaseClassSpec; 4] =
    [BaseClassSpec::HORN, BaseClassSpec::DHORN, BaseClassSpec::KROM, BaseClassSpec::NULL];

const LIMIT_SOLVERS: Duration = Duration::from_secs(10);
const LIMIT_ORACLE: Duration = Duration::from_secs(60);
const LIMIT_LADDER: Duration = Duration::from_secs(5 * 60);
const LIMIT_PIPELINE: Duration = Duration::from_secs(10 * 60);
const MAX_EXPONENT: f64 = 1.15;
const MAX_BUDGET: usize = 3;

type Outcome = Result<String, String>;

struct Instance {
    name: String,
    formula: Formula,
    spec: BaseClassSpec,
}

/// One analysis per (instance, budget), shared by criteria 5, 6 and 9.
struct Run {
    instance: usize,
    budget: usize,
    analysis: Result<Analysis, String>,
}

fn instance(name: String, formula: Formula, spec: BaseClassSpec) -> Instance {
    Instance { name, formula, spec }
}

/// 200 formulas with at most 20 variables each.
fn corpus() -> Vec<Instance> {
    let mut out = Vec::new();
    for n in 1..=10 {
        out.push(instance(format!("chain{n}+y/horn"), gen_chain(n, true), BaseClassSpec::HORN));
        out.push(instance(format!("chain{n}/horn"), gen_chain(n, false), BaseClassSpec::HORN));
        out.push(instance(format!("chain{n}+y/krom"), gen_chain(n, true), BaseClassSpec::KROM));
    }
    let mut rng = seeded_rng(0xb10c);
    let mut k = 0;
    while out.len() < 60 {
        let block = match k % 4 {
            0 => gen_chain(2, true),
            1 => gen_chain(3, false),
            2 => gen_wide_clause(3),
            _ => random_horn_adjacent(&mut rng, 5, 4, 1),
        };
        let copies = 2 + k % 3;
        let padded = gen_disjoint_copies(&block, copies);
        if padded.vars().len() <= 20 {
            out.push(instance(format!("copies{copies}x{k}/horn"), padded, BaseClassSpec::HORN));
        }
        k += 1;
    }
    for w in 2..=9 {
        out.push(instance(format!("wide{w}/horn"), gen_wide_clause(w), BaseClassSpec::HORN));
    }
    for w in 2..=7 {
        let mut clauses: Vec<Vec<i64>> = gen_chain(3, true).clauses().iter().map(dimacs).collect();
        clauses.push(std::iter::once(1).chain((0..w).map(|z| 10 + z)).collect());
        out.push(instance(
            format!("wide{w}+chain/horn"),
            Formula::from_lit_lists(clauses).unwrap(),
            BaseClassSpec::HORN,
        ));
    }
    for w in 2..=7 {
        out.push(instance(format!("wide{w}/dhorn"), gen_flip(&gen_wide_clause(w)), BaseClassSpec::DHORN));
    }
    let mut k = 0;
    while out.len() < 200 {
        let vars = rng.gen_range(6..=20u32);
        let clauses = rng.gen_range(vars as usize / 2..=vars as usize + 4);
        let bad = rng.gen_range(1..=4);
        let f = random_horn_adjacent(&mut rng, vars, clauses, bad);
        let (f, spec, tag) = match k % 4 {
            0 | 1 => (f, BaseClassSpec::HORN, "horn"),
            2 => (gen_flip(&f), BaseClassSpec::DHORN, "dhorn"),
            _ => (random_formula(&mut rng, vars.min(12), clauses.min(10), 3), BaseClassSpec::KROM, "krom"),
        };
        out.push(instance(format!("mix{k}/{tag}"), f, spec));
        k += 1;
    }
    out
}

fn dimacs(c: &Clause) -> Vec<i64> {
    c.lits().iter().map(|l| l.to_dimacs()).collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1);
    let (mut checked, mut bad) = (0, Vec::new());
    for spec in PRESETS {
        for _ in 0..1000 {
            let vars = rng.gen_range(1..=14);
            let clauses = rng.gen_range(1..=30);
            let f = random_member(&mut rng, spec, vars, clauses, 4);
            let got = solve_in_class(&f, spec).map_err(|e| e.to_string())?;
            let truth = brute_force_sat(&f).map_err(|e| e.to_string())?;
            let witness_ok = match &got {
                SatResult::Sat(w) => f.is_satisfied_by(w),
                SatResult::Unsat => true,
            };
            if got.is_sat() != truth.is_sat() || !witness_ok {
                bad.push(format!("{spec}: {f:?}"));
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    if !bad.is_empty() {
        return Err(format!("{} of {checked} mismatched, first {}", bad.len(), bad[0]));
    }
    if elapsed > LIMIT_SOLVERS {
        return Err(format!("{checked} formulas took {elapsed:.1?} > {LIMIT_SOLVERS:?}"));
    }
    Ok(format!("{checked} formulas agree with brute force in {elapsed:.1?}"))
}

fn criterion_2() -> Outcome {
    let mut rng = seeded_rng(2);
    let mut violations = 0;
    for spec in PRESETS {
        for _ in 0..1000 {
            let f = random_member(&mut rng, spec, 12, 20, 5);
            let density = rng.gen_range(0.05..0.9);
            let tau = random_assignment(&mut rng, &f, density);
            if !is_member(&f.apply(&tau), spec) {
                violations += 1;
            }
        }
    }
    if violations > 0 {
        return Err(format!("{violations} of 4000 instantiations left the class"));
    }
    Ok("4000 instantiated members stayed in their class".into())
}

fn depth_of(f: &Formula, spec: BaseClassSpec) -> usize {
    exact_backdoor_depth(f, spec, f.vars().len()).exact().expect("depth is at most the variable count")
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(3);
    for k in 0..400 {
        let spec = PRESETS[k % 4];
        let f = if k % 2 == 0 { random_member(&mut rng, spec, 10, 12, 4) } else { random_formula(&mut rng, 10, 8, 3) };
        let zero = exact_backdoor_depth(&f, spec, 0) == OracleValue::Exact(0);
        if zero != is_member(&f, spec) {
            return Err(format!("depth 0 disagrees with membership on {f:?}"));
        }
    }
    for p in 2..=6 {
        let f = gen_wide_clause(p);
        let unpruned = reference_depth(&f, BaseClassSpec::HORN);
        let pruned = depth_of(&f, BaseClassSpec::HORN);
        if unpruned != p - 1 || pruned != p - 1 {
            return Err(format!("p={p}: unpruned {unpruned}, pruned {pruned}"));
        }
    }
    for k in 0..100 {
        let spec = PRESETS[k % 3];
        let a = random_formula(&mut rng, 6, 6, 3);
        let b = random_formula(&mut rng, 6, 6, 3);
        let shifted: Vec<Vec<i64>> =
            b.clauses().iter().map(|c| dimacs(c).into_iter().map(|l| l.signum() * (l.abs() + 6)).collect()).collect();
        let union = Formula::from_lit_lists(a.clauses().iter().map(dimacs).chain(shifted)).unwrap();
        let (da, db, du) = (depth_of(&a, spec), depth_of(&b, spec), depth_of(&union, spec));
        if du != da.max(db) {
            return Err(format!("union depth {du} but parts {da}, {db}"));
        }
    }
    let elapsed = start.elapsed();
    if elapsed > LIMIT_ORACLE {
        return Err(format!("took {elapsed:.1?} > {LIMIT_ORACLE:?}"));
    }
    Ok(format!("members, single clauses p=2..6 and 100 unions exact in {elapsed:.1?}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("../../core/tests/golden/chain_ladder.json")).map_err(|e| e.to_string())?;
    let counts: Vec<usize> = serde_json::from_value(golden["clause_counts"].clone()).map_err(|e| e.to_string())?;
    let ladder = |spec: BaseClassSpec, with_y: bool| -> Vec<usize> {
        counts.iter().map(|&n| depth_of(&gen_chain(n, with_y), spec)).collect()
    };
    let horn = ladder(BaseClassSpec::HORN, true);
    let krom = ladder(BaseClassSpec::KROM, true);
    let horn_plain = ladder(BaseClassSpec::HORN, false);
    let dhorn = ladder(BaseClassSpec::DHORN, true);
    let pinned = |key: &str| -> Vec<usize> { serde_json::from_value(golden[key].clone()).unwrap_or_default() };
    if horn != pinned("horn_with_y") || krom != pinned("krom_with_y") || horn_plain != pinned("horn_without_y") {
        return Err(format!("ladder {horn:?} / {krom:?} / {horn_plain:?} differs from the golden file"));
    }
    if horn[0] != 1 || !horn.windows(2).all(|w| w[1] > w[0]) {
        return Err(format!("ladder {horn:?} is not 1, then strictly increasing by at least one"));
    }
    if krom != horn || horn_plain != horn {
        return Err(format!("Krom {krom:?} or chain without y {horn_plain:?} differs from Horn {horn:?}"));
    }
    if dhorn.iter().any(|&d| d != 0) {
        return Err(format!("dual-Horn depths {dhorn:?}"));
    }
    let elapsed = start.elapsed();
    if elapsed > LIMIT_LADDER {
        return Err(format!("took {elapsed:.1?} > {LIMIT_LADDER:?}"));
    }
    Ok(format!("Horn depths {horn:?} at n = {counts:?}, Krom and Q' identical, dual-Horn 0, {elapsed:.1?}"))
}

fn check_tree(f: &Formula, t: &ComponentBackdoorTree, spec: BaseClassSpec) -> Result<(), String> {
    if t.leaf_size_sum() > (1usize << t.depth()) * f.size() {
        return Err(format!("leaf sizes {} exceed 2^{}·{}", t.leaf_size_sum(), t.depth(), f.size()));
    }
    if f.vars().len() <= 16 && spec.preset().is_some() {
        let got = decide_sat_with_tree(f, t, spec).map_err(|e| e.to_string())?;
        let truth = brute_force_sat(f).map_err(|e| e.to_string())?;
        if got.is_sat() != truth.is_sat() {
            return Err(format!("tree decides {got:?}, brute force {truth:?}"));
        }
        if let SatResult::Sat(w) = &got {
            if !f.is_satisfied_by(w) {
                return Err("witness does not satisfy the formula".into());
            }
        }
    }
    Ok(())
}

fn criterion_5(corpus: &[Instance], runs: &[Run]) -> Outcome {
    let mut trees = 0;
    for run in runs {
        if let Ok(Analysis::Tree { tree, .. }) = &run.analysis {
            let inst = &corpus[run.instance];
            check_tree(&inst.formula, tree, inst.spec).map_err(|e| format!("{} d={}: {e}", inst.name, run.budget))?;
            trees += 1;
        }
    }
    let mut rng = seeded_rng(5);
    for k in 0..200 {
        let spec = PRESETS[k % 3];
        let (vars, clauses) = (rng.gen_range(4..=12), rng.gen_range(4..=14));
        let f = random_formula(&mut rng, vars, clauses, 3);
        let alg = OracleSplitter::new(spec);
        let tree = match build_backdoor_tree(&f, spec, &alg, f.vars().len()) {
            Ok(BuildOutcome::Tree(t, _)) => t,
            other => return Err(format!("oracle splitter gave {other:?}")),
        };
        validate_tree(&f, &tree, spec).map_err(|e| e.to_string())?;
        check_tree(&f, &tree, spec)?;
        trees += 1;
    }
    Ok(format!("{trees} trees within 2^depth·‖F‖, decisions match brute force"))
}

fn analyze_corpus(corpus: &[Instance]) -> (Vec<Run>, Duration) {
    let start = Instant::now();
    let mut runs = Vec::new();
    for (k, inst) in corpus.iter().enumerate() {
        for budget in 0..=MAX_BUDGET {
            let analysis = analyze(&inst.formula, inst.spec, budget, DEFAULT_PATH_CAP);
            runs.push(Run { instance: k, budget, analysis });
        }
    }
    (runs, start.elapsed())
}

fn criterion_6(corpus: &[Instance], runs: &[Run], elapsed: Duration) -> Outcome {
    let (mut trees, mut certs, mut rejections) = (0, 0, 0);
    for run in runs {
        let inst = &corpus[run.instance];
        let at = || format!("{} d={}", inst.name, run.budget);
        match &run.analysis {
            Err(e) => return Err(format!("{}: {e}", at())),
            Ok(Analysis::Tree { tree, stats, round_bound, .. }) => {
                validate_tree(&inst.formula, tree, inst.spec).map_err(|e| format!("{}: {e}", at()))?;
                if stats.max_round as u64 > *round_bound {
                    return Err(format!("{}: {} rounds exceed the bound {round_bound}", at(), stats.max_round));
                }
                trees += 1;
            }
            Ok(Analysis::Certificate(cert)) => {
                let bound = certificate_bound(&inst.formula, cert).map_err(|e| format!("{}: {e}", at()))?;
                if bound != cert.claimed_bound {
                    return Err(format!("{}: claimed {} but the rule gives {bound}", at(), cert.claimed_bound));
                }
                if bound > 0 && exact_backdoor_depth(&inst.formula, inst.spec, bound - 1) != OracleValue::AboveBudget {
                    return Err(format!(
                        "{}: unsound bound {bound}, oracle depth {}",
                        at(),
                        depth_of(&inst.formula, inst.spec)
                    ));
                }
                certs += 1;
            }
            Ok(Analysis::Rejected(r)) => {
                if r.paths < r.cap {
                    return Err(format!("{}: rejection below the cap: {r}", at()));
                }
                rejections += 1;
            }
        }
    }
    if elapsed > LIMIT_PIPELINE {
        return Err(format!("{} runs took {elapsed:.1?} > {LIMIT_PIPELINE:?}", runs.len()));
    }
    Ok(format!(
        "{} instances x budgets 0..={MAX_BUDGET}: {trees} trees, {certs} oracle-confirmed certificates, {rejections} rejections, {elapsed:.1?}",
        corpus.len()
    ))
}

fn criterion_7(corpus: &[Instance]) -> Outcome {
    let before = separator_self_checks();
    let mut runs = 0;
    for inst in corpus {
        for budget in 0..=MAX_BUDGET {
            let level = budget + 1;
            let alg = build_main_splitter(level, level, inst.spec).map_err(|e| e.to_string())?.with_self_check(true);
            match build_backdoor_tree(&inst.formula, inst.spec, &alg, inst.formula.vars().len() + 1) {
                Err(GameError::Strategy(e)) => return Err(format!("{} d={budget}: {e}", inst.name)),
                Err(e) => return Err(format!("{} d={budget}: {e}", inst.name)),
                Ok(_) => runs += 1,
            }
        }
    }
    // Separator strategies started directly on a shortest path between the
    // first two bad clauses of a component.
    let mut rng = seeded_rng(7);
    for _ in 0..300 {
        let spec = BaseClassSpec::HORN;
        let (vars, clauses, widened) = (rng.gen_range(8..=16), rng.gen_range(8..=16), rng.gen_range(2..=5));
        let f = random_horn_adjacent(&mut rng, vars, clauses, widened);
        for part in connected_components(&f) {
            let bad = bad_clauses(&part, spec);
            if bad.len() < 2 {
                continue;
            }
            let path = IncidenceIndex::new(&part)
                .shortest_path(&[Vertex::Clause(bad[0])], &[Vertex::Clause(bad[1])])
                .map_err(|e| e.to_string())?
                .ok_or("bad clauses of one component are connected")?;
            for d in 1..=3 {
                let alg = build_separator_splitter(&part, path.clone(), d, spec)
                    .map_err(|e| e.to_string())?
                    .with_self_check(true);
                match build_backdoor_tree(&part, spec, &alg, part.vars().len() + 1) {
                    Err(GameError::Strategy(e)) => return Err(format!("separator d={d}: {e}")),
                    Err(GameError::NoTree) | Ok(_) => runs += 1,
                    Err(e) => return Err(format!("separator d={d}: {e}")),
                }
            }
        }
    }
    let checks = separator_self_checks() - before;
    if checks == 0 {
        return Err("no separator extension was exercised".into());
    }
    Ok(format!("{checks} extensions passed C1-C7 and the increment bound over {runs} strategy runs"))
}

/// Least-squares slope of log(time) against log(n).
fn fitted_exponent(points: &[(f64, f64)]) -> f64 {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(n, t)| (n.ln(), t.ln())).collect();
    let k = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / k;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / k;
    let cov: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let var: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    cov / var
}

fn criterion_8() -> Outcome {
    let spec = BaseClassSpec::HORN;
    let block = Formula::from_lits(&[&[1], &[-1, 2], &[-2, -3, 4], &[-4, -1, 3], &[-3]]).unwrap();
    let mut points = Vec::new();
    for factor in [1usize, 2, 4, 8, 16] {
        let n = factor * 10_000;
        let f = gen_disjoint_copies(&block, n);
        let leaves = connected_components(&f).into_iter().map(Node::leaf).collect();
        let tree = ComponentBackdoorTree::new(Node::component(f.clone(), leaves));
        if factor == 1 {
            validate_tree(&f, &tree, spec).map_err(|e| e.to_string())?;
        }
        let mut best = Duration::MAX;
        for _ in 0..3 {
            let start = Instant::now();
            let result = decide_sat_with_tree(&f, &tree, spec).map_err(|e| e.to_string())?;
            best = best.min(start.elapsed());
            if !result.is_sat() {
                return Err("the block is satisfiable".into());
            }
        }
        points.push((n as f64, best.as_secs_f64()));
    }
    let exponent = fitted_exponent(&points);
    let detail =
        points.iter().map(|(n, t)| format!("{}k:{:.0}ms", n / 1000.0, t * 1000.0)).collect::<Vec<_>>().join(" ");
    if exponent > MAX_EXPONENT {
        return Err(format!("fitted exponent {exponent:.3} > {MAX_EXPONENT} ({detail})"));
    }
    Ok(format!("fitted exponent {exponent:.3} <= {MAX_EXPONENT} ({detail})"))
}

fn criterion_9(corpus: &[Instance], runs: &[Run]) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0;
    for run in runs {
        if !matches!(run.analysis, Ok(Analysis::Certificate(_))) {
            continue;
        }
        let inst = &corpus[run.instance];
        let at = format!("{} d={}", inst.name, run.budget);
        let cnf = dir.path().join(format!("{checked}.cnf"));
        fs::write(&cnf, to_dimacs(&inst.formula)).map_err(|e| e.to_string())?;
        let cert = dir.path().join(format!("{checked}.json"));
        let class = inst.spec.to_string();
        let analyze_once =
            |out: &Path| cmd_analyze(&cnf, &class, run.budget, Some(out), DEFAULT_PATH_CAP, Format::Json);
        let first = analyze_once(&cert).map_err(|e| format!("{at}: {e}"))?;
        if first.code != EXIT_CERTIFICATE {
            return Err(format!("{at}: analyze exited {}", first.code));
        }
        let bytes = fs::read(&cert).map_err(|e| e.to_string())?;
        let second = analyze_once(&cert).map_err(|e| format!("{at}: {e}"))?;
        if second != first || fs::read(&cert).map_err(|e| e.to_string())? != bytes {
            return Err(format!("{at}: re-run is not byte-identical"));
        }
        let verified = cmd_verify(&cnf, &cert, Format::Json).map_err(|e| format!("{at}: {e}"))?;
        if verified.code != 0 {
            return Err(format!("{at}: verify exited {}: {}", verified.code, verified.stdout));
        }
        let doc = LowerBoundCertificate::from_json_str(std::str::from_utf8(&bytes).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        let reparsed = backdoor_cli::read_formula(&cnf)?;
        if !verify_certificate(&reparsed, &doc).map_err(|e| e.to_string())?.is_valid()
            || certificate_bound(&reparsed, &doc).map_err(|e| e.to_string())? != doc.claimed_bound
        {
            return Err(format!("{at}: bound mismatch after the round trip"));
        }
        checked += 1;
    }
    if checked == 0 {
        return Err("the corpus produced no certificates".into());
    }
    Ok(format!("{checked} certificates re-verified with matching bounds, re-runs byte-identical"))
}

fn main() {
    let corpus = corpus();
    let (runs, pipeline_time) = analyze_corpus(&corpus);
    let results: Vec<(&str, Outcome)> = vec![
        ("leaf solvers agree with brute force", criterion_1()),
        ("classes closed under assignment", criterion_2()),
        ("oracle fixed points", criterion_3()),
        ("chain ladder", criterion_4()),
        ("tree size bound and tree decisions", criterion_5(&corpus, &runs)),
        ("approximation pipeline soundness", criterion_6(&corpus, &runs, pipeline_time)),
        ("separator obstruction structure", criterion_7(&corpus)),
        ("linear-time decision", criterion_8()),
        ("certificate round trip", criterion_9(&corpus, &runs)),
    ];
    let mut failed = 0;
    for (k, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {} [{name}]: PASS - {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} [{name}]: FAIL - {detail}", k + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
