//! `lpts` — command-line front end for the lpts library.
//!
//! Exit codes are a stable contract:
//!   0  success / property holds
//!   1  property fails (counterexample available where applicable)
//!   2  usage, file, or parse errors
//!   3  solver or subprocess failure
//!   4  a configured bound was exceeded

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use lpts::active::{self, Bounds, FriendlyTeacher, Mode, Outcome};
use lpts::agr::{self, AgrError, AgrVerdict};
use lpts::generate::{self, GenConfig};
use lpts::learning::{self, Backend, LearnError, Witness};
use lpts::rational::{format_rational, parse_rational};
use lpts::samples::SampleSet;
use lpts::smt::{SmtError, SolverConfig};
use lpts::text::{parse_lpts, serialize_cex, serialize_lpts};
use lpts::{classify, compose, equivalent, simulates, Lpts};

#[derive(Parser)]
#[command(name = "lpts", version, about = "Strong simulation, learning, and assume-guarantee reasoning for labeled probabilistic transition systems")]
struct Cli {
    /// Emit machine-readable JSON on stdout instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Solver invocation, e.g. "z3 -in" (overrides LPTS_SOLVER_CMD)
    #[arg(long, global = true)]
    solver_cmd: Option<String>,
    /// Solver timeout in seconds
    #[arg(long, global = true, default_value_t = 60)]
    timeout_s: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Partition,
    Stochastic,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Partition => Mode::Partition,
            ModeArg::Stochastic => Mode::Stochastic,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Enumerate,
    Solver,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    General,
    Reactive,
    Tree,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a .lpts file and report basic facts about it
    Validate { file: PathBuf },
    /// Report whether a model is a stochastic tree and whether it is reactive
    Classify { file: PathBuf },
    /// Parallel-compose two models and write the result
    Compose {
        f1: PathBuf,
        f2: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Check that the second model strongly simulates the first
    CheckSim {
        f1: PathBuf,
        f2: PathBuf,
        /// Write the counterexample tree and execution mapping here on failure
        #[arg(long)]
        cex: Option<PathBuf>,
    },
    /// Check simulation equivalence (both directions)
    CheckEquiv { f1: PathBuf, f2: PathBuf },
    /// Learn a least-size model consistent with tree samples
    LearnConsistent {
        /// Positive sample files or directories of .lpts files
        #[arg(long, num_args = 1.., required = true)]
        pos: Vec<PathBuf>,
        /// Negative sample files or directories of .lpts files
        #[arg(long, num_args = 0..)]
        neg: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "partition")]
        mode: ModeArg,
        #[arg(long, value_enum, default_value = "solver")]
        backend: BackendArg,
        #[arg(long, default_value_t = 8)]
        max_k: usize,
        /// Write the learned model here instead of stdout
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Learn a target model through simulation queries against a teacher
    ActiveLearn {
        #[arg(long)]
        target: PathBuf,
        /// Partition mode always terminates; stochastic mode may hit bounds
        #[arg(long, value_enum, default_value = "partition")]
        mode: ModeArg,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        #[arg(long, default_value_t = 8)]
        max_k: usize,
    },
    /// Run the adversarial-teacher demonstration over the U_lambda family
    AdversarialDemo {
        /// Initial lambda, strictly between 0 and 1, e.g. 1/2
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value_t = 10)]
        rounds: usize,
        #[arg(long, value_enum, default_value = "stochastic")]
        mode: ModeArg,
        #[arg(long, default_value_t = 8)]
        max_k: usize,
    },
    /// Assume-guarantee check: l1 || l2 below the specification via ASym
    Agr {
        #[arg(long)]
        l1: PathBuf,
        #[arg(long)]
        l2: PathBuf,
        #[arg(long = "spec")]
        spec_file: PathBuf,
        /// Partition mode always terminates; stochastic mode may hit bounds
        #[arg(long, value_enum, default_value = "partition")]
        mode: ModeArg,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        #[arg(long, default_value_t = 8)]
        max_k: usize,
        /// Write the final assumption here when the property holds
        #[arg(long)]
        assumption: Option<PathBuf>,
        /// Write the counterexample tree here when the property fails
        #[arg(long)]
        cex: Option<PathBuf>,
    },
    /// Write the consistency constraint script without solving it
    EmitSmt {
        #[arg(long, num_args = 1.., required = true)]
        pos: Vec<PathBuf>,
        #[arg(long, num_args = 0..)]
        neg: Vec<PathBuf>,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value = "partition")]
        kind: ModeArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Generate a seeded random model (reproducible for a fixed seed)
    Generate {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "general")]
        kind: GenKind,
        #[arg(long, default_value_t = 4)]
        max_states: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<SmtError> for Failure {
    fn from(e: SmtError) -> Self {
        Failure::new(3, format!("solver: {e}"))
    }
}

impl From<LearnError> for Failure {
    fn from(e: LearnError) -> Self {
        match e {
            LearnError::Solver(s) => s.into(),
            LearnError::MaxKExceeded { tried } => {
                Failure::new(4, format!("no consistent model within {tried} states"))
            }
            LearnError::Inconsistent => {
                Failure::new(1, "no consistent model exists: a negative sample is simulated by the merged positives".to_string())
            }
            other => Failure::new(2, other.to_string()),
        }
    }
}

impl From<AgrError> for Failure {
    fn from(e: AgrError) -> Self {
        match e {
            AgrError::Learn(l) => l.into(),
            AgrError::BoundExceeded(n) => {
                Failure::new(4, format!("assume-guarantee loop did not settle in {n} rounds"))
            }
            AgrError::Projection(msg) => Failure::new(3, format!("projection: {msg}")),
        }
    }
}

fn load(path: &Path) -> Result<Lpts, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))?;
    parse_lpts(&text).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

fn save(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::new(2, format!("{}: {e}", path.display())))
}

/// Expands each path to itself (file) or its `.lpts` entries sorted by name
/// (directory), then parses every file.
fn load_many(paths: &[PathBuf]) -> Result<Vec<Lpts>, Failure> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| Failure::new(2, format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "lpts"))
                .collect();
            entries.sort();
            files.extend(entries);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(|f| load(f)).collect()
}

fn load_samples(pos: &[PathBuf], neg: &[PathBuf]) -> Result<SampleSet, Failure> {
    let positives = load_many(pos)?;
    let negatives = load_many(neg)?;
    SampleSet::new(positives, negatives).map_err(|e| Failure::new(2, e.to_string()))
}

fn solver_config(cli: &Cli) -> Result<SolverConfig, Failure> {
    let mut cfg = match &cli.solver_cmd {
        Some(s) => {
            let cmd: Vec<String> = s.split_whitespace().map(str::to_string).collect();
            if cmd.is_empty() {
                return Err(Failure::new(2, "--solver-cmd is empty"));
            }
            SolverConfig::new(cmd)
        }
        None => SolverConfig::resolve().map_err(Failure::from)?,
    };
    cfg.timeout = std::time::Duration::from_secs(cli.timeout_s);
    Ok(cfg)
}

fn emit(json: bool, value: serde_json::Value, text: String) {
    if json {
        println!("{value}");
    } else {
        println!("{text}");
    }
}

fn backend(b: BackendArg, cli: &Cli) -> Result<Backend, Failure> {
    Ok(match b {
        BackendArg::Enumerate => Backend::Enumerate,
        BackendArg::Solver => Backend::Solver(solver_config(cli)?),
    })
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    match &cli.cmd {
        Cmd::Validate { file } => {
            let l = load(file)?;
            emit(
                cli.json,
                json!({
                    "name": l.name(),
                    "states": l.n_states(),
                    "transitions": l.transitions().len(),
                    "alphabet": l.alphabet().iter().collect::<Vec<_>>(),
                }),
                format!(
                    "valid: {} ({} states, {} transitions, alphabet {{{}}})",
                    l.name(),
                    l.n_states(),
                    l.transitions().len(),
                    l.alphabet().iter().cloned().collect::<Vec<_>>().join(" ")
                ),
            );
            Ok(0)
        }
        Cmd::Classify { file } => {
            let l = load(file)?;
            let c = classify(&l);
            emit(
                cli.json,
                json!({ "tree": c.is_tree, "reactive": c.is_reactive }),
                format!("tree: {}\nreactive: {}", c.is_tree, c.is_reactive),
            );
            Ok(0)
        }
        Cmd::Compose { f1, f2, output } => {
            let (a, b) = (load(f1)?, load(f2)?);
            let composed = compose(&a, &b);
            save(output, &serialize_lpts(composed.lpts()))?;
            emit(
                cli.json,
                json!({
                    "states": composed.lpts().n_states(),
                    "transitions": composed.lpts().transitions().len(),
                    "output": output.display().to_string(),
                }),
                format!(
                    "composed: {} states, {} transitions -> {}",
                    composed.lpts().n_states(),
                    composed.lpts().transitions().len(),
                    output.display()
                ),
            );
            Ok(0)
        }
        Cmd::CheckSim { f1, f2, cex } => {
            let (a, b) = (load(f1)?, load(f2)?);
            let check = simulates(&a, &b);
            if check.holds {
                emit(
                    cli.json,
                    json!({ "holds": true }),
                    format!("simulation holds: {} <= {}", a.name(), b.name()),
                );
                Ok(0)
            } else {
                let (tree, mapping) = check.cex.expect("failed check carries a counterexample");
                let mut cex_path = serde_json::Value::Null;
                if let Some(p) = cex {
                    save(p, &serialize_cex(&tree, &mapping, &a))?;
                    cex_path = json!(p.display().to_string());
                }
                emit(
                    cli.json,
                    json!({
                        "holds": false,
                        "cex_states": tree.tree.n_states(),
                        "cex_file": cex_path,
                    }),
                    format!(
                        "simulation fails: {} </= {} (counterexample tree with {} states{})",
                        a.name(),
                        b.name(),
                        tree.tree.n_states(),
                        cex.as_ref()
                            .map(|p| format!(", written to {}", p.display()))
                            .unwrap_or_default()
                    ),
                );
                Ok(1)
            }
        }
        Cmd::CheckEquiv { f1, f2 } => {
            let (a, b) = (load(f1)?, load(f2)?);
            let eq = equivalent(&a, &b);
            emit(
                cli.json,
                json!({
                    "equal": eq.equal,
                    "forward_holds": eq.cex_forward.is_none(),
                    "backward_holds": eq.cex_backward.is_none(),
                }),
                if eq.equal {
                    format!("equivalent: {} ~ {}", a.name(), b.name())
                } else {
                    format!(
                        "not equivalent: {} <= {}: {}; {} <= {}: {}",
                        a.name(),
                        b.name(),
                        eq.cex_forward.is_none(),
                        b.name(),
                        a.name(),
                        eq.cex_backward.is_none()
                    )
                },
            );
            Ok(if eq.equal { 0 } else { 1 })
        }
        Cmd::LearnConsistent {
            pos,
            neg,
            mode,
            backend: b,
            max_k,
            output,
        } => {
            let samples = load_samples(pos, neg)?;
            let result = match mode {
                ModeArg::Partition => {
                    learning::learn_min_partition(&samples, &backend(*b, cli)?, *max_k)?
                }
                ModeArg::Stochastic => {
                    if matches!(b, BackendArg::Enumerate) {
                        return Err(Failure::new(
                            2,
                            "stochastic mode requires the solver backend",
                        ));
                    }
                    learning::learn_min_stochastic(&samples, &solver_config(cli)?, *max_k)?
                }
            };
            let model_text = serialize_lpts(&result.quotient);
            let witness_text = match &result.witness {
                Witness::Partition(p) => learning::serialize_partition(&samples, p),
                Witness::Stochastic(sp) => learning::serialize_stochastic(&samples, sp),
            };
            if let Some(p) = output {
                save(p, &model_text)?;
            }
            emit(
                cli.json,
                json!({
                    "size": result.size,
                    "model": model_text,
                    "witness": witness_text,
                    "trace": result
                        .search_trace
                        .iter()
                        .map(|t| json!({ "k": t.k, "sat": t.sat }))
                        .collect::<Vec<_>>(),
                }),
                format!(
                    "least size: {}\n\n{}\n{}",
                    result.size,
                    model_text.trim_end(),
                    witness_text.trim_end()
                ),
            );
            Ok(0)
        }
        Cmd::ActiveLearn {
            target,
            mode,
            max_rounds,
            max_k,
        } => {
            let cfg = solver_config(cli)?;
            let mut teacher = FriendlyTeacher {
                target: load(target)?,
            };
            let bounds = Bounds {
                max_rounds: *max_rounds,
                max_k: *max_k,
            };
            let transcript = active::learn(&mut teacher, (*mode).into(), &cfg, &bounds)?;
            match &transcript.outcome {
                Outcome::Converged(h) => {
                    emit(
                        cli.json,
                        json!({
                            "converged": true,
                            "rounds": transcript.rounds.len(),
                            "max_hypothesis_states": transcript.max_hypothesis_states(),
                            "model": serialize_lpts(h),
                        }),
                        format!(
                            "converged after {} rounds (largest hypothesis: {} states)\n\n{}",
                            transcript.rounds.len(),
                            transcript.max_hypothesis_states(),
                            serialize_lpts(h).trim_end()
                        ),
                    );
                    Ok(0)
                }
                Outcome::BoundExceeded => Err(Failure::new(
                    4,
                    format!("no convergence within {max_rounds} rounds"),
                )),
            }
        }
        Cmd::AdversarialDemo {
            lambda,
            rounds,
            mode,
            max_k,
        } => {
            let l0 = parse_rational(lambda)
                .filter(lpts::rational::in_unit_interval)
                .ok_or_else(|| {
                    Failure::new(2, "--lambda must be a rational strictly between 0 and 1")
                })?;
            let cfg = solver_config(cli)?;
            let t = active::adversarial_demo(&l0, *rounds, (*mode).into(), &cfg, *max_k)?;
            let lines: Vec<String> = t
                .rounds
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    format!(
                        "round {:2}: lambda = {:>8}  hypothesis {} states  teacher: {}",
                        i + 1,
                        format_rational(&r.lambda),
                        r.hypothesis.n_states(),
                        r.response_kind
                    )
                })
                .collect();
            emit(
                cli.json,
                json!({
                    "rounds": t.rounds.len(),
                    "lambda_history": t
                        .lambda_history
                        .iter()
                        .map(format_rational)
                        .collect::<Vec<_>>(),
                    "final_lambda": format_rational(&t.final_lambda),
                    "exhausted": t.exhausted,
                }),
                format!(
                    "{}\nfinal lambda: {} ({} bumps); learner exhausted: {}",
                    lines.join("\n"),
                    format_rational(&t.final_lambda),
                    t.lambda_history.len() - 1,
                    t.exhausted
                ),
            );
            Ok(0)
        }
        Cmd::Agr {
            l1,
            l2,
            spec_file,
            mode,
            max_rounds,
            max_k,
            assumption,
            cex,
        } => {
            let (m1, m2, p) = (load(l1)?, load(l2)?, load(spec_file)?);
            let cfg = solver_config(cli)?;
            let outcome = agr::check_asym(&m1, &m2, &p, (*mode).into(), &cfg, *max_rounds, *max_k)?;
            match outcome.verdict {
                AgrVerdict::Holds => {
                    let a = outcome.assumption.expect("holds verdict carries an assumption");
                    if let Some(path) = assumption {
                        save(path, &serialize_lpts(&a))?;
                    }
                    emit(
                        cli.json,
                        json!({
                            "holds": true,
                            "assumption": serialize_lpts(&a),
                            "assumption_states": a.n_states(),
                            "rounds": outcome.stats.rounds,
                        }),
                        format!(
                            "property holds ({} rounds, assumption with {} states)\n\n{}",
                            outcome.stats.rounds,
                            a.n_states(),
                            serialize_lpts(&a).trim_end()
                        ),
                    );
                    Ok(0)
                }
                AgrVerdict::Violated => {
                    let c = outcome.real_cex.expect("violated verdict carries a counterexample");
                    let mut cex_path = serde_json::Value::Null;
                    if let Some(path) = cex {
                        save(path, &serialize_lpts(&c.tree))?;
                        cex_path = json!(path.display().to_string());
                    }
                    emit(
                        cli.json,
                        json!({
                            "holds": false,
                            "cex_states": c.tree.n_states(),
                            "cex_file": cex_path,
                            "rounds": outcome.stats.rounds,
                        }),
                        format!(
                            "property fails ({} rounds, counterexample tree with {} states{})",
                            outcome.stats.rounds,
                            c.tree.n_states(),
                            cex.as_ref()
                                .map(|p| format!(", written to {}", p.display()))
                                .unwrap_or_default()
                        ),
                    );
                    Ok(1)
                }
            }
        }
        Cmd::EmitSmt {
            pos,
            neg,
            k,
            kind,
            output,
        } => {
            let samples = load_samples(pos, neg)?;
            let script = match kind {
                ModeArg::Partition => lpts::smt::encode_partition(&samples, *k),
                ModeArg::Stochastic => lpts::smt::encode_stochastic(&samples, *k),
            };
            save(output, &script.text)?;
            emit(
                cli.json,
                json!({ "output": output.display().to_string(), "bytes": script.text.len() }),
                format!("wrote {} ({} bytes)", output.display(), script.text.len()),
            );
            Ok(0)
        }
        Cmd::Generate {
            seed,
            kind,
            max_states,
            output,
        } => {
            let cfg = GenConfig {
                max_states: *max_states,
                ..GenConfig::default()
            };
            let mut rng = generate::rng_from_seed(*seed);
            let model = match kind {
                GenKind::General => generate::random_lpts(&mut rng, &cfg),
                GenKind::Reactive => generate::random_reactive(&mut rng, &cfg),
                GenKind::Tree => generate::random_tree(&mut rng, &cfg, 3),
            };
            let text = serialize_lpts(&model);
            match output {
                Some(p) => {
                    save(p, &text)?;
                    emit(
                        cli.json,
                        json!({ "output": p.display().to_string(), "states": model.n_states() }),
                        format!("wrote {} ({} states)", p.display(), model.n_states()),
                    );
                }
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
