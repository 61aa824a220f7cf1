use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use gasperlab_core::analytics::{self, BoundForm};
use gasperlab_core::config::{resolve_seed, Scenario};
use gasperlab_core::equiv_game::{self, EquivGameConfig, Regime};
use gasperlab_core::fork_choice::{self, ForkChoiceOutcome};
use gasperlab_core::{ffg, fuzz, simulator, slashing, snapshot, Error, View};

#[derive(Parser, Debug)]
#[command(name = "gasperlab", version, about = "Gasper consensus simulator and analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario through the discrete-event simulator.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for events.jsonl, metrics.csv and network.snapshot.
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate equivocation-game win rates.
    EquivGame(EquivArgs),
    /// Closed-form liveness analytics.
    Analyze {
        #[command(subcommand)]
        what: Analyze,
    },
    /// Print the fork-choice head and descent of a view snapshot.
    ForkChoice {
        snapshot: PathBuf,
        #[arg(long, value_enum, default_value_t = Rule::Hlmd)]
        rule: Rule,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print justified and finalized pairs of a view snapshot.
    Finality {
        snapshot: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan a view snapshot for slashable evidence.
    SlashScan {
        snapshot: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Property fuzzing; exits 2 and prints the seed on a violation.
    Fuzz {
        #[arg(long, value_enum, default_value_t = Property::All)]
        property: Property,
        #[arg(long, default_value_t = 500)]
        cases: u64,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Args, Debug)]
struct EquivArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    eps1: Option<f64>,
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    dishonest_time: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Byzantine validators split their votes evenly instead of by coin flip.
    #[arg(long)]
    even_split: bool,
    /// Honest validators hold byzantine votes back until their claimed time.
    #[arg(long)]
    timestamp_gate: bool,
    /// Every regime at dishonest times 0.2, 0.3, 0.4 and 0.5.
    #[arg(long)]
    matrix: bool,
    #[arg(long, default_value_t = 1)]
    parallel_trials: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Analyze {
    /// No-finalization probabilities for the standard (n, p) grid.
    Table1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Justification-event and liveness lower bounds.
    Bounds {
        #[arg(long = "C", default_value_t = 64)]
        c: u64,
        #[arg(long = "S", default_value_t = 900.0)]
        s: f64,
        #[arg(long, default_value_t = 30.0)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Rule {
    Hlmd,
    Prototype,
    Ghost,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RegimeArg {
    Pessimistic,
    Inbetween,
    Optimistic,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Regime {
        match r {
            RegimeArg::Pessimistic => Regime::Pessimistic,
            RegimeArg::Inbetween => Regime::Inbetween,
            RegimeArg::Optimistic => Regime::Optimistic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Property {
    Safety,
    Liveness,
    All,
}

enum Failure {
    Config(String),
    Violation(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn env_seed() -> Option<String> {
    std::env::var("GASPERLAB_SEED").ok()
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| io_err(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn provenance(command: &str, config: &serde_json::Value, seed: Option<u64>) -> String {
    let mut s = format!("# gasperlab {command}\n# config: {config}\n");
    match seed {
        Some(x) => {
            let _ = writeln!(s, "# seed: {x}");
        }
        None => s.push_str("# seed: none\n"),
    }
    s
}

fn load_snapshot(path: &Path) -> Result<View, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(snapshot::import(&text)?)
}

fn simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let sc = Scenario::from_file(config)?;
    let seed = resolve_seed(seed, sc.seed, env_seed().as_deref())?;
    let sc = sc.with_seed(seed);
    let trace = simulator::run(sc.sim.clone())?;
    std::fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let write = |name: &str, text: &str| {
        let p = out.join(name);
        std::fs::write(&p, text).map_err(|e| io_err(&p, e))
    };
    write("events.jsonl", &trace.events_jsonl())?;
    write("metrics.csv", &trace.metrics_csv())?;
    let cfg = serde_json::to_value(&trace.config).expect("config serializes");
    // provenance comments go after the header, config and clock lines
    let body = snapshot::export(&trace.network);
    let mut lines: Vec<&str> = body.lines().collect();
    let prov = provenance("simulate", &cfg, Some(seed));
    lines.splice(3..3, prov.lines());
    write("network.snapshot", &(lines.join("\n") + "\n"))?;
    let summary = trace.metrics.last();
    println!(
        "simulated {} epochs: {} blocks, {} finalized pairs, {} slashing records",
        trace.metrics.len(),
        trace.network.block_count(),
        summary.map_or(0, |m| m.finalized),
        trace.detection.evidence.len()
    );
    Ok(())
}

fn win_count(cfg: &EquivGameConfig, workers: usize) -> u64 {
    if workers <= 1 {
        return equiv_game::count_wins(cfg, 0..cfg.trials);
    }
    let chunk = cfg.trials.div_ceil(workers as u64);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| {
        (0..workers as u64)
            .into_par_iter()
            .map(|k| {
                let lo = (k * chunk).min(cfg.trials);
                let hi = ((k + 1) * chunk).min(cfg.trials);
                equiv_game::count_wins(cfg, lo..hi)
            })
            .sum()
    })
}

fn equiv(args: &EquivArgs) -> Result<(), Failure> {
    let sc = match &args.config {
        Some(p) => Some(Scenario::from_file(p)?),
        None => None,
    };
    let mut base = sc.as_ref().map_or_else(EquivGameConfig::default, |s| s.equiv.clone());
    let seed = resolve_seed(args.seed, sc.as_ref().and_then(|s| s.seed), env_seed().as_deref())?;
    base.seed = seed;
    if let Some(r) = args.regime {
        base = base.with_regime(r.into());
    }
    if let Some(x) = args.a {
        base.a = x;
    }
    if let Some(x) = args.eps1 {
        base.eps1 = x;
    }
    if let Some(x) = args.eps2 {
        base.eps2 = x;
    }
    if let Some(x) = args.dishonest_time {
        base.dishonest_vote_time = x;
    }
    if let Some(x) = args.trials {
        base.trials = x;
    }
    if args.even_split {
        base.random_split = false;
    }
    if args.timestamp_gate {
        base.timestamp_gate = true;
    }
    if args.parallel_trials == 0 {
        return Err(Failure::Config("--parallel-trials must be at least 1".into()));
    }
    let runs: Vec<(String, EquivGameConfig)> = if args.matrix {
        Regime::all()
            .into_iter()
            .flat_map(|r| {
                let base = base.clone();
                [0.2, 0.3, 0.4, 0.5].into_iter().map(move |t| {
                    (r.name().to_string(), EquivGameConfig { dishonest_vote_time: t, ..base.clone().with_regime(r) })
                })
            })
            .collect()
    } else {
        let name = args.regime.map_or("custom".to_string(), |r| Regime::from(r).name().to_string());
        vec![(name, base.clone())]
    };
    for (_, c) in &runs {
        c.validate()?;
    }
    let cfg_json = serde_json::json!({ "base": base, "matrix": args.matrix });
    let mut text = provenance("equiv-game", &cfg_json, Some(seed));
    text.push_str("regime,honest,byzantine,a,eps1,eps2,dishonest_time,trials,wins,win_rate\n");
    for (name, c) in &runs {
        let wins = win_count(c, args.parallel_trials);
        let _ = writeln!(
            text,
            "{name},{},{},{},{},{},{},{},{wins},{}",
            c.honest,
            c.byzantine,
            c.a,
            c.eps1,
            c.eps2,
            c.dishonest_vote_time,
            c.trials,
            wins as f64 / c.trials as f64
        );
    }
    emit(args.out.as_deref(), &text)
}

fn analyze(what: &Analyze) -> Result<(), Failure> {
    match what {
        Analyze::Table1 { out } => {
            let mut text = provenance("analyze table1", &serde_json::json!({ "rows": analytics::TABLE1_ROWS }), None);
            text.push_str("n,p,closed_form,dp,enumeration\n");
            for r in analytics::table1() {
                let en = r.enumeration.map_or(String::new(), |x| format!("{x:?}"));
                let _ = writeln!(text, "{},{},{:?},{:?},{en}", r.n, r.p, r.closed_form, r.dp);
            }
            emit(out.as_deref(), &text)
        }
        Analyze::Bounds { c, s, eps, r, out } => {
            let cfg = serde_json::json!({ "C": c, "S": s, "eps": eps, "r": r });
            let weak = analytics::justification_event_bound(*c, *s, *eps, BoundForm::Weak)?;
            let tight = analytics::justification_event_bound(*c, *s, *eps, BoundForm::Tight)?;
            let live = analytics::justification_liveness_bound(*r, *c, *s, *eps)?;
            let mut text = provenance("analyze bounds", &cfg, None);
            text.push_str("C,S,eps,r,weak_event_bound,tight_event_bound,liveness_bound\n");
            let _ = writeln!(text, "{c},{s},{eps},{r},{weak:?},{tight:?},{live:?}");
            emit(out.as_deref(), &text)
        }
    }
}

fn fork_choice_cmd(path: &Path, rule: Rule, out: Option<&Path>) -> Result<(), Failure> {
    let v = load_snapshot(path)?;
    let o: ForkChoiceOutcome = match rule {
        Rule::Hlmd => fork_choice::hlmd_with(&v, &Default::default()),
        Rule::Prototype => fork_choice::hlmd_prototype_with(&v, &Default::default()),
        Rule::Ghost => fork_choice::lmd_ghost_with(&v, &Default::default()),
    };
    let cfg = serde_json::json!({ "snapshot": path.display().to_string(), "rule": format!("{rule:?}").to_lowercase() });
    let mut text = provenance("fork-choice", &cfg, None);
    let _ = writeln!(text, "# head: {}", o.head);
    let _ = writeln!(text, "# start: {} tie: {}", o.start, o.tie);
    text.push_str("depth,parent,chosen,candidates\n");
    for (i, s) in o.steps.iter().enumerate() {
        let cands: Vec<String> = s.candidates.iter().map(|(b, w)| format!("{b}={w}")).collect();
        let _ = writeln!(text, "{i},{},{},{}", s.parent, s.chosen, cands.join(" "));
    }
    emit(out, &text)
}

fn finality_cmd(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let v = load_snapshot(path)?;
    let cfg = serde_json::json!({ "snapshot": path.display().to_string() });
    let mut text = provenance("finality", &cfg, None);
    text.push_str("set,block,epoch,k\n");
    for p in ffg::justified(&v) {
        let _ = writeln!(text, "justified,{},{},", p.block, p.epoch);
    }
    for f in ffg::finalizations(&v) {
        let _ = writeln!(text, "finalized,{},{},{}", f.pair.block, f.pair.epoch, f.k);
    }
    for p in ffg::finalized_four_case(&v) {
        let _ = writeln!(text, "finalized_four_case,{},{},", p.block, p.epoch);
    }
    emit(out, &text)
}

fn slash_cmd(path: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let v = load_snapshot(path)?;
    let d = slashing::detect(&v);
    let cfg = serde_json::json!({ "snapshot": path.display().to_string() });
    let mut text = provenance("slash-scan", &cfg, None);
    let _ = writeln!(text, "# offenders: {} slashable_stake: {}", d.offenders.len(), d.slashable_stake);
    text.push_str("author,kind,first,second\n");
    let id = |m: &gasperlab_core::MessageId| match m {
        gasperlab_core::MessageId::Block(b) => format!("block:{b}"),
        gasperlab_core::MessageId::Attestation(a) => format!("attestation:{:016x}", a.0),
    };
    for e in &d.evidence {
        let _ = writeln!(text, "{},{:?},{},{}", e.author.0, e.kind, id(&e.first), id(&e.second));
    }
    emit(out, &text)
}

fn fuzz_cmd(property: Property, cases: u64, seed: Option<u64>) -> Result<(), Failure> {
    let seed = resolve_seed(seed, None, env_seed().as_deref())?;
    println!("# gasperlab fuzz property={property:?} cases={cases} seed={seed}");
    let mut violations = Vec::new();
    if matches!(property, Property::Safety | Property::All) {
        let r = fuzz::fuzz_safety(seed, cases);
        println!("safety: {} cases, {} with conflicting finality, {} violations", r.cases, r.conflicting, r.failures.len());
        violations.extend(r.failures.iter().map(|s| format!("safety violation, reproduce with case seed {s}")));
    }
    if matches!(property, Property::Liveness | Property::All) {
        let r = fuzz::fuzz_plausible_liveness(seed, cases);
        println!(
            "liveness: {} cases, {} failures, {} honest attestations, {} honest offenders",
            r.cases,
            r.failures.len(),
            r.honest_attestations,
            r.honest_offenders
        );
        violations.extend(r.failures.iter().map(|f| format!("liveness violation, reproduce with case seed {}: {}", f.seed, f.reason)));
        if r.honest_offenders > 0 {
            violations.push(format!("honest validator slashed, reproduce with seed {seed}"));
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Violation(violations.join("\n")))
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate { config, seed, out } => simulate(&config, seed, &out),
        Command::EquivGame(args) => equiv(&args),
        Command::Analyze { what } => analyze(&what),
        Command::ForkChoice { snapshot, rule, out } => fork_choice_cmd(&snapshot, rule, out.as_deref()),
        Command::Finality { snapshot, out } => finality_cmd(&snapshot, out.as_deref()),
        Command::SlashScan { snapshot, out } => slash_cmd(&snapshot, out.as_deref()),
        Command::Fuzz { property, cases, seed } => fuzz_cmd(property, cases, seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(m)) => {
            eprintln!("{m}");
            ExitCode::from(2)
        }
    }
}
