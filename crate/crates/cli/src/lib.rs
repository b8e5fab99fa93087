//! Command implementations behind `bddepth`.
//!
//! Every command returns a [`Report`] holding the text to print and the exit
//! code, so the binary stays a thin wrapper and tests can drive commands
//! in-process.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use backdoor_core::class::BaseClassSpec;
use backdoor_core::cnf::{parse_dimacs, to_dimacs_with_comments, Formula, SatResult};
use backdoor_core::game::{build_backdoor_tree, BuildOutcome, BuildStats, GameError};
use backdoor_core::obstruction::{
    build_main_splitter, round_bound_main, round_bound_main_saturating, verify_certificate, HeuristicRejection,
    LowerBoundCertificate, Verdict, DEFAULT_PATH_CAP,
};
use backdoor_core::oracle::{
    exact_backdoor_depth, gen_chain, gen_disjoint_copies, gen_flip, gen_wide_clause, random_formula,
    random_horn_adjacent, random_member, seeded_rng,
};
use backdoor_core::tree::{decide_sat_with_tree, decide_sat_with_tree_parallel, validate_tree, ComponentBackdoorTree};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

pub const EXIT_TREE: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_REJECTED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "bddepth", version, about = "Component backdoor trees into Horn, dual-Horn, Krom and Null")]
pub struct Cli {
    /// Worker threads for parallel leaf solving (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a backdoor tree, or a lower-bound certificate for depth > budget.
    Analyze {
        file: PathBuf,
        /// Preset name or `alpha=+,-;s=2`.
        #[arg(long, default_value = "horn")]
        class: String,
        #[arg(long, default_value_t = 1)]
        budget: usize,
        /// Where to write the tree or certificate JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Separator paths after which the strategy gives up (unsound).
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap: usize,
    },
    /// Decide satisfiability through a backdoor tree.
    Solve {
        file: PathBuf,
        /// Defaults to the class recorded in `--tree`, else horn.
        #[arg(long)]
        class: Option<String>,
        /// A tree written by `analyze --out`; built on the fly when absent.
        #[arg(long)]
        tree: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_PATH_CAP)]
        cap: usize,
    },
    /// Exact backdoor depth by exhaustive search.
    DepthExact {
        file: PathBuf,
        #[arg(long, default_value = "horn")]
        class: String,
        #[arg(long, default_value_t = 8)]
        budget: usize,
    },
    /// Check a certificate against its formula.
    Verify {
        file: PathBuf,
        #[arg(long)]
        cert: PathBuf,
    },
    /// Emit an instance family as DIMACS.
    Generate {
        #[command(subcommand)]
        family: Family,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug, Clone)]
pub enum Family {
    /// Clauses {x_(i-1), -y_i, x_i}, or {x_(i-1), x_i} without --with-y.
    Chain {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        with_y: bool,
    },
    /// Variable-disjoint copies of a DIMACS file.
    Copies {
        file: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Every literal negated.
    Flip { file: PathBuf },
    /// One clause of k positive literals.
    Wide {
        #[arg(long)]
        k: usize,
    },
    /// Uniform random clauses.
    Random {
        #[arg(long)]
        vars: u32,
        #[arg(long)]
        clauses: usize,
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random member of a class.
    Member {
        #[arg(long, default_value = "horn")]
        class: String,
        #[arg(long)]
        vars: u32,
        #[arg(long)]
        clauses: usize,
        #[arg(long, default_value_t = 3)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random Horn formula with a few widened clauses.
    HornAdjacent {
        #[arg(long)]
        vars: u32,
        #[arg(long)]
        clauses: usize,
        #[arg(long, default_value_t = 2)]
        bad: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// What a command prints and how it exits.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Report {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Report {
    fn new(code: i32, stdout: String) -> Report {
        Report { code, stdout, stderr: String::new() }
    }

    fn error(message: impl std::fmt::Display) -> Report {
        Report { code: EXIT_ERROR, stdout: String::new(), stderr: format!("error: {message}\n") }
    }
}

type CmdResult<T> = Result<T, String>;

pub fn run(cli: &Cli) -> Report {
    if cli.jobs > 0 {
        // Fails only when a pool already exists, which then stays in use.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    let result = match &cli.command {
        Command::Analyze { file, class, budget, out, cap } => {
            cmd_analyze(file, class, *budget, out.as_deref(), *cap, cli.format)
        }
        Command::Solve { file, class, tree, cap } => {
            cmd_solve(file, class.as_deref(), tree.as_deref(), *cap, cli.jobs != 1, cli.format)
        }
        Command::DepthExact { file, class, budget } => cmd_depth_exact(file, class, *budget, cli.format),
        Command::Verify { file, cert } => cmd_verify(file, cert, cli.format),
        Command::Generate { family, out } => cmd_generate(family, out.as_deref()),
    };
    result.unwrap_or_else(Report::error)
}

pub fn parse_class(text: &str) -> CmdResult<BaseClassSpec> {
    text.parse().map_err(|e| format!("{e}"))
}

pub fn read_formula(path: &Path) -> CmdResult<Formula> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_dimacs(&text).map(|p| p.formula).map_err(|e| format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, content: &str) -> CmdResult<()> {
    fs::write(path, content).map_err(|e| format!("{}: {e}", path.display()))
}

/// Result of one analysis run, after the tree was validated or the
/// certificate verified.
#[derive(Debug)]
pub enum Analysis {
    Tree {
        tree: ComponentBackdoorTree,
        stats: BuildStats,
        /// The round bound, saturated at `u64::MAX`.
        round_bound: u64,
        /// The round bound in decimal, exact.
        round_bound_exact: String,
    },
    Certificate(LowerBoundCertificate),
    Rejected(HeuristicRejection),
}

impl Analysis {
    pub fn exit_code(&self) -> i32 {
        match self {
            Analysis::Tree { .. } => EXIT_TREE,
            Analysis::Certificate(_) => EXIT_CERTIFICATE,
            Analysis::Rejected(_) => EXIT_REJECTED,
        }
    }
}

/// Runs the level-`d+1` obstruction strategy for parameter `d+1` to
/// completion over all connector replies. Trees are validated and
/// certificates verified before they are returned.
pub fn analyze(f: &Formula, spec: BaseClassSpec, budget: usize, cap: usize) -> CmdResult<Analysis> {
    let level = budget + 1;
    let (i, s) = (level as u32, spec.s());
    let round_bound = round_bound_main_saturating(i, i, s, u64::MAX).map_err(|e| e.to_string())?;
    let round_bound_exact = round_bound_main(i, i, s).map_err(|e| e.to_string())?.to_string();
    let alg = build_main_splitter(level, level, spec).map_err(|e| e.to_string())?.with_path_cap(cap);
    let round_cap = usize::try_from(round_bound).unwrap_or(usize::MAX);
    let outcome = build_backdoor_tree(f, spec, &alg, round_cap).map_err(|e| match e {
        GameError::CapExceeded { cap, .. } => format!("round cap {cap} exceeded"),
        other => other.to_string(),
    })?;
    match outcome {
        BuildOutcome::Tree(tree, stats) => {
            validate_tree(f, &tree, spec).map_err(|e| format!("strategy produced an invalid tree: {e}"))?;
            Ok(Analysis::Tree { tree, stats, round_bound, round_bound_exact })
        }
        BuildOutcome::Certificate(cert) => match verify_certificate(f, &cert).map_err(|e| e.to_string())? {
            Verdict::Valid => Ok(Analysis::Certificate(cert)),
            Verdict::Invalid(reason) => Err(format!("strategy produced an invalid certificate: {reason}")),
        },
        BuildOutcome::Rejected(r) => Ok(Analysis::Rejected(r)),
    }
}

pub fn cmd_analyze(
    file: &Path,
    class: &str,
    budget: usize,
    out: Option<&Path>,
    cap: usize,
    format: Format,
) -> CmdResult<Report> {
    let spec = parse_class(class)?;
    let f = read_formula(file)?;
    let analysis = analyze(&f, spec, budget, cap)?;
    if let Some(path) = out {
        match &analysis {
            Analysis::Tree { tree, .. } => write_file(path, &tree.to_json_string(spec))?,
            Analysis::Certificate(cert) => write_file(path, &cert.to_json_string())?,
            Analysis::Rejected(_) => {}
        }
    }
    let text = match (&analysis, format) {
        (Analysis::Tree { tree, stats, round_bound_exact, .. }, Format::Text) => format!(
            "tree: depth {}, {} variable nodes, max round {} (bound {})\n",
            tree.depth(),
            stats.variable_nodes,
            stats.max_round,
            round_bound_exact
        ),
        (Analysis::Tree { tree, stats, round_bound_exact, .. }, Format::Json) => json_line(json!({
            "outcome": "tree",
            "class": spec.to_string(),
            "depth": tree.depth(),
            "variable_nodes": stats.variable_nodes,
            "max_round": stats.max_round,
            "round_bound": round_bound_exact,
        })),
        (Analysis::Certificate(cert), Format::Text) => format!("{cert}\n"),
        (Analysis::Certificate(cert), Format::Json) => json_line(json!({
            "outcome": "certificate",
            "class": spec.to_string(),
            "kind": cert.evidence.kind(),
            "bound": cert.claimed_bound,
        })),
        (Analysis::Rejected(r), Format::Text) => format!("rejected: {r}\n"),
        (Analysis::Rejected(r), Format::Json) => json_line(json!({
            "outcome": "rejected",
            "sound": false,
            "reason": r.reason,
            "paths": r.paths,
            "cap": r.cap,
        })),
    };
    Ok(Report::new(analysis.exit_code(), text))
}

fn json_line(value: serde_json::Value) -> String {
    format!("{value}\n")
}

/// Finds a tree by raising the budget past every certificate.
fn tree_for(f: &Formula, spec: BaseClassSpec, cap: usize) -> CmdResult<ComponentBackdoorTree> {
    let mut budget = 0;
    loop {
        match analyze(f, spec, budget, cap)? {
            Analysis::Tree { tree, .. } => return Ok(tree),
            Analysis::Certificate(cert) => budget = (budget + 1).max(cert.claimed_bound.saturating_sub(1)),
            Analysis::Rejected(r) => return Err(r.to_string()),
        }
    }
}

pub fn cmd_solve(
    file: &Path,
    class: Option<&str>,
    tree_path: Option<&Path>,
    cap: usize,
    parallel: bool,
    format: Format,
) -> CmdResult<Report> {
    let f = read_formula(file)?;
    let flag = class.map(parse_class).transpose()?;
    let (tree, spec) = match tree_path {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            let (tree, recorded) =
                ComponentBackdoorTree::from_json_str(&f, &text).map_err(|e| format!("{}: {e}", path.display()))?;
            if let Some(spec) = flag.filter(|s| *s != recorded) {
                return Err(format!("tree was built for {recorded}, not {spec}"));
            }
            validate_tree(&f, &tree, recorded).map_err(|e| format!("invalid tree: {e}"))?;
            (tree, recorded)
        }
        None => {
            let spec = flag.unwrap_or(BaseClassSpec::HORN);
            (tree_for(&f, spec, cap)?, spec)
        }
    };
    let decide = if parallel { decide_sat_with_tree_parallel } else { decide_sat_with_tree };
    let result = decide(&f, &tree, spec).map_err(|e| e.to_string())?;
    let text = match (&result, format) {
        (SatResult::Sat(w), Format::Text) => {
            let mut s = format!("c tree depth {}\ns SATISFIABLE\nv", tree.depth());
            for (var, value) in w.iter() {
                let _ = write!(s, " {}{}", if value { "" } else { "-" }, var.0);
            }
            s.push_str(" 0\n");
            s
        }
        (SatResult::Unsat, Format::Text) => format!("c tree depth {}\ns UNSATISFIABLE\n", tree.depth()),
        (SatResult::Sat(w), Format::Json) => json_line(json!({
            "status": "sat",
            "tree_depth": tree.depth(),
            "witness": w.lits().iter().map(|l| l.to_dimacs()).collect::<Vec<_>>(),
        })),
        (SatResult::Unsat, Format::Json) => json_line(json!({ "status": "unsat", "tree_depth": tree.depth() })),
    };
    Ok(Report::new(0, text))
}

pub fn cmd_depth_exact(file: &Path, class: &str, budget: usize, format: Format) -> CmdResult<Report> {
    let spec = parse_class(class)?;
    let f = read_formula(file)?;
    let value = exact_backdoor_depth(&f, spec, budget);
    let text = match format {
        Format::Text => format!("{spec}-backdoor depth: {value}\n"),
        Format::Json => json_line(json!({ "class": spec.to_string(), "budget": budget, "depth": value.exact() })),
    };
    Ok(Report::new(0, text))
}

pub fn cmd_verify(file: &Path, cert_path: &Path, format: Format) -> CmdResult<Report> {
    let f = read_formula(file)?;
    let text = fs::read_to_string(cert_path).map_err(|e| format!("{}: {e}", cert_path.display()))?;
    let cert = LowerBoundCertificate::from_json_str(&text).map_err(|e| format!("{}: {e}", cert_path.display()))?;
    let verdict = verify_certificate(&f, &cert).map_err(|e| e.to_string())?;
    let code = if verdict.is_valid() { 0 } else { 1 };
    let text = match (&verdict, format) {
        (Verdict::Valid, Format::Text) => format!("valid: {cert}\n"),
        (Verdict::Invalid(reason), Format::Text) => format!("invalid: {reason}\n"),
        (v, Format::Json) => json_line(json!({
            "valid": v.is_valid(),
            "kind": cert.evidence.kind(),
            "claimed_bound": cert.claimed_bound,
            "reason": match v { Verdict::Invalid(r) => Some(r.as_str()), Verdict::Valid => None },
        })),
    };
    Ok(Report::new(code, text))
}

pub fn generate(family: &Family) -> CmdResult<(Formula, String)> {
    Ok(match family {
        Family::Chain { n, with_y } => {
            if *n == 0 {
                return Err("chain needs n >= 1".into());
            }
            (gen_chain(*n, *with_y), format!("family=chain n={n} with_y={with_y}"))
        }
        Family::Copies { file, n } => {
            if *n == 0 {
                return Err("copies needs n >= 1".into());
            }
            (gen_disjoint_copies(&read_formula(file)?, *n), format!("family=copies n={n} source={}", file.display()))
        }
        Family::Flip { file } => (gen_flip(&read_formula(file)?), format!("family=flip source={}", file.display())),
        Family::Wide { k } => (gen_wide_clause(*k), format!("family=wide k={k}")),
        Family::Random { vars, clauses, width, seed } => {
            check_random(*vars, *width)?;
            let f = random_formula(&mut seeded_rng(*seed), *vars, *clauses, *width);
            (f, format!("family=random vars={vars} clauses={clauses} width={width} seed={seed}"))
        }
        Family::Member { class, vars, clauses, width, seed } => {
            check_random(*vars, *width)?;
            let spec = parse_class(class)?;
            let f = random_member(&mut seeded_rng(*seed), spec, *vars, *clauses, *width);
            (f, format!("family=member class={spec} vars={vars} clauses={clauses} width={width} seed={seed}"))
        }
        Family::HornAdjacent { vars, clauses, bad, seed } => {
            check_random(*vars, 1)?;
            let f = random_horn_adjacent(&mut seeded_rng(*seed), *vars, *clauses, *bad);
            (f, format!("family=horn-adjacent vars={vars} clauses={clauses} bad={bad} seed={seed}"))
        }
    })
}

fn check_random(vars: u32, width: usize) -> CmdResult<()> {
    if vars == 0 || width == 0 {
        return Err("random families need vars >= 1 and width >= 1".into());
    }
    Ok(())
}

pub fn cmd_generate(family: &Family, out: Option<&Path>) -> CmdResult<Report> {
    let (f, comment) = generate(family)?;
    let text = to_dimacs_with_comments(&f, &[comment]);
    match out {
        Some(path) => {
            write_file(path, &text)?;
            Ok(Report::new(0, String::new()))
        }
        None => Ok(Report::new(0, text)),
    }
}
