use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use trc_core::abstraction::{abstract_var, compile_combinator, optimize, CombinatorSpec, OptimizeOptions};
use trc_core::corpus::{self, CorpusIndex, CorpusOptions};
use trc_core::kernel::{check_script, Registry, TheoremRecord};
use trc_core::script::parse_scripts;
use trc_core::stratify::{stratify, AssignmentDisplay, StratifyResult};
use trc_core::{ext_equal, normalize, parse, render, EngineConfig, ExtResult, RuleSet, Term};

// Output may be piped into `head`; a closed pipe is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Verification kernel for TRC, an illative combinatory logic.
#[derive(Parser, Debug)]
#[command(name = "trc", version)]
struct Cli {
    #[command(flatten)]
    engine: EngineFlags,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct EngineFlags {
    /// Read engine settings from a `key = value` file; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Maximum rewrite steps per normalisation.
    #[arg(long, global = true)]
    fuel: Option<usize>,
    /// Fresh variables tried by extensional equality.
    #[arg(long, global = true)]
    ext_depth: Option<usize>,
    /// Use the pair-application and Abst axioms exactly as printed.
    #[arg(long, global = true)]
    printed_axioms: bool,
    #[arg(long, global = true)]
    no_surjective_pairing: bool,
    #[arg(long, global = true)]
    no_eq_refl: bool,
    /// Worker threads for corpus checking (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug)]
struct TermArg {
    /// Term text; quote it as one shell argument.
    term: Option<String>,
    /// Read the term from a file instead.
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse a term and print its canonical rendering.
    Parse(TermArg),
    /// Rewrite a term to normal form.
    Normalize {
        #[command(flatten)]
        term: TermArg,
        /// Print every step as `<step#> <position> <rule> ⊢ <term>`.
        #[arg(long)]
        trace: bool,
    },
    /// Decide equality extensionally (sound, incomplete).
    Eq { left: String, right: String },
    /// Find an integer type assignment or a contradiction witness.
    Stratify(TermArg),
    /// Abstract a variable out of a term.
    Abstract {
        var: String,
        term: String,
        #[arg(long)]
        optimize: bool,
        /// Allow eta reduction while optimising.
        #[arg(long)]
        eta: bool,
    },
    /// Compile combinator specifications (`name x y = body`, one per line).
    Compile {
        file: Option<PathBuf>,
        /// A single specification given inline.
        #[arg(long)]
        spec: Option<String>,
        #[arg(long)]
        optimize: bool,
        #[arg(long)]
        eta: bool,
    },
    /// Check proof scripts against the corpus registry.
    Check {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Corpus providing the theorems the scripts may use.
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Start from an empty registry instead of the corpus.
        #[arg(long)]
        no_corpus: bool,
    },
    /// Check the whole corpus in dependency order.
    Corpus {
        #[arg(long)]
        dir: Option<PathBuf>,
        /// Print each entry with its status and dependencies.
        #[arg(long)]
        list: bool,
        /// Print the normalisation traces behind each verdict.
        #[arg(long)]
        trace: bool,
    },
}

fn ruleset(flags: &EngineFlags) -> Result<RuleSet> {
    let mut cfg = match &flags.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            EngineConfig::from_config_text(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => EngineConfig::default(),
    };
    if let Some(f) = flags.fuel {
        cfg.fuel = f;
    }
    if let Some(d) = flags.ext_depth {
        cfg.ext_depth = d;
    }
    if flags.printed_axioms {
        cfg.corrected_axioms = false;
    }
    if flags.no_surjective_pairing {
        cfg.surjective_pairing = false;
    }
    if flags.no_eq_refl {
        cfg.eq_reflexivity = false;
    }
    cfg.validate()?;
    Ok(RuleSet::standard(cfg))
}

fn read_term(arg: &TermArg) -> Result<Term> {
    let text = match (&arg.term, &arg.file) {
        (Some(t), None) => t.clone(),
        (None, Some(p)) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (Some(_), Some(_)) => bail!("give either a term or --file, not both"),
        (None, None) => bail!("missing term (pass it as an argument or via --file)"),
    };
    term(&text)
}

fn term(text: &str) -> Result<Term> {
    parse(text).with_context(|| format!("cannot parse `{}`", text.trim()))
}

fn corpus_dir(dir: &Option<PathBuf>) -> PathBuf {
    match dir {
        Some(d) => d.clone(),
        None if Path::new("corpus/index").exists() => PathBuf::from("corpus"),
        None => corpus::default_dir(),
    }
}

/// `Ok(true)` is success, `Ok(false)` a mathematical failure.
fn run(cli: Cli) -> Result<bool> {
    let rs = ruleset(&cli.engine)?;
    match cli.cmd {
        Command::Parse(arg) => {
            say!("{}", render(&read_term(&arg)?));
            Ok(true)
        }
        Command::Normalize { term: arg, trace } => {
            let t = read_term(&arg)?;
            let n = normalize(&t, &rs);
            if trace {
                n.trace_lines().iter().for_each(|l| say!("{l}"));
            }
            say!("{}", n.result);
            if n.exhausted {
                say!("EXHAUSTED after {} steps", n.trace.len());
            }
            Ok(!n.exhausted)
        }
        Command::Eq { left, right } => {
            let (s, t) = (term(&left)?, term(&right)?);
            match ext_equal(&s, &t, &rs) {
                ExtResult::Equal(ev) => {
                    say!("EQUAL {}", ev.summary());
                    Ok(true)
                }
                ExtResult::Unknown { left, right, exhausted } => {
                    let why = if exhausted { " (fuel exhausted)" } else { "" };
                    say!("UNKNOWN {left} vs {right}{why}");
                    Ok(false)
                }
            }
        }
        Command::Stratify(arg) => {
            let t = read_term(&arg)?;
            match stratify(&t) {
                StratifyResult::Stratified(m) => {
                    say!("{}", AssignmentDisplay(&m));
                    Ok(true)
                }
                StratifyResult::Unsatisfiable(w) => {
                    say!("UNSTRATIFIABLE");
                    w.render(&t).iter().for_each(|l| say!("  {l}"));
                    Ok(false)
                }
            }
        }
        Command::Abstract { var, term: text, optimize: opt, eta } => {
            let t = term(&text)?;
            match abstract_var(&var, &t) {
                Ok(r) => {
                    let r = if opt { optimize(&r, OptimizeOptions { eta }) } else { r };
                    say!("{r}");
                    Ok(true)
                }
                Err(e) => {
                    say!("{e}");
                    Ok(false)
                }
            }
        }
        Command::Compile { file, spec, optimize: opt, eta } => {
            let specs = match (file, spec) {
                (Some(p), None) => {
                    let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
                    CombinatorSpec::parse_file(&text)?
                }
                (None, Some(s)) => vec![CombinatorSpec::parse(&s)?],
                _ => bail!("give exactly one of FILE or --spec"),
            };
            let opts = opt.then_some(OptimizeOptions { eta });
            let mut ok = true;
            for s in &specs {
                match compile_combinator(s, &rs, opts) {
                    Ok(t) => say!("{} = {t}", s.name),
                    Err(e) => {
                        ok = false;
                        say!("{e}");
                    }
                }
            }
            Ok(ok)
        }
        Command::Check { files, dir, no_corpus } => {
            let mut registry = if no_corpus {
                Registry::new()
            } else {
                let opts = CorpusOptions { jobs: cli.engine.jobs };
                corpus::run_corpus(&corpus_dir(&dir), &rs, Registry::new(), opts)?.registry
            };
            let mut ok = true;
            for f in &files {
                let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
                let scripts = parse_scripts(&text).with_context(|| format!("in {}", f.display()))?;
                for s in &scripts {
                    let report = check_script(s, &registry, &rs);
                    say!("{}", report.line());
                    if report.is_pass() {
                        let record = TheoremRecord::from_script(s, Some(f.display().to_string()));
                        if let Err(e) = registry.register(record, &report) {
                            say!("NOTE {e}");
                            ok = false;
                        }
                    } else {
                        ok = false;
                    }
                }
            }
            Ok(ok)
        }
        Command::Corpus { dir, list, trace } => {
            let dir = corpus_dir(&dir);
            let index = CorpusIndex::load(&dir)?;
            let opts = CorpusOptions { jobs: cli.engine.jobs };
            let run = corpus::run_index(&dir, &index, &rs, Registry::new(), opts)?;
            let lines = if list { run.listing(&index) } else { run.report_lines(trace) };
            lines.iter().for_each(|l| say!("{l}"));
            Ok(run.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
