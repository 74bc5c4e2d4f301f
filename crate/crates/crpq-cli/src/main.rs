//! `crpq`: evaluate CRPQs, decide containment, generate PCP reductions and
//! run the seeded cross-validation suites.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use crpq::containment::{contains, ContainOptions, Outcome, Strategy, Verdict, Witness};
use crpq::eval::{eval_membership_named, evaluate, render_tuple, Limits, Semantics};
use crpq::graph::GraphDb;
use crpq::oracle::{run_suite, Suite};
use crpq::pcp::{reduce, PcpInstance};
use crpq::query::Crpq;
use crpq::regex::render_symbol;
use crpq::Error;

const EXIT_NOT_CONTAINED: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_RESOURCE: u8 = 3;
const EXIT_UNKNOWN: u8 = 4;

#[derive(Parser)]
#[command(name = "crpq", version, about = "Conjunctive regular path queries: evaluation and containment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    St,
    Ainj,
    Qinj,
}

impl From<SemanticsArg> for Semantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::St => Semantics::St,
            SemanticsArg::Ainj => Semantics::AInj,
            SemanticsArg::Qinj => Semantics::QInj,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DeciderArg {
    Auto,
    Bounded,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a query over a graph.
    Eval {
        graph: PathBuf,
        query: PathBuf,
        #[arg(long, value_enum, default_value = "st")]
        semantics: SemanticsArg,
        /// Check membership of one tuple of node names, e.g. `u,v`.
        #[arg(long)]
        tuple: Option<String>,
    },
    /// Decide or refute containment of Q1 in Q2.
    Contain {
        q1: PathBuf,
        q2: PathBuf,
        #[arg(long, value_enum, default_value = "st")]
        semantics: SemanticsArg,
        /// Word length bound for bounded search.
        #[arg(long)]
        max_len: Option<usize>,
        #[arg(long, value_enum, default_value = "auto")]
        decider: DeciderArg,
    },
    /// Generate the containment instance of a PCP instance.
    Reduce {
        pcp: PathBuf,
        /// Writes PREFIX.q1, PREFIX.q2 and PREFIX.manifest.
        #[arg(long)]
        out_prefix: PathBuf,
    },
    /// Run a seeded cross-validation suite.
    Oracle {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
        /// hierarchy, ainj-expansions (alias lemma44), qinj-vs-fin, cqcq or profiles.
        #[arg(long)]
        suite: String,
    },
    /// Parse a query and print it in canonical form.
    Fmt { query: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn load_query(path: &Path) -> Result<Crpq> {
    Crpq::parse(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn render_word(w: &[String]) -> String {
    if w.is_empty() {
        "eps".to_string()
    } else {
        w.iter().map(|s| render_symbol(s)).collect::<Vec<_>>().join(" ")
    }
}

fn render_witness(q1: &Crpq, w: &Witness) -> String {
    let mut out = String::from("witness:\n");
    for (a, word) in q1.atoms.iter().zip(&w.words) {
        out.push_str(&format!("  {} -[{}]-> {}: {}\n", a.source, a.regex, a.target, render_word(word)));
    }
    for b in &w.blocks {
        out.push_str(&format!("  identify: {}\n", b.join(" = ")));
    }
    out.push_str(&format!("  expansion: {}\n", w.expansion.cq));
    out
}

fn cmd_eval(graph: &Path, query: &Path, sem: Semantics, tuple: Option<&str>, limits: &Limits) -> Result<u8> {
    let g = GraphDb::parse(&read(graph)?).with_context(|| format!("in {}", graph.display()))?;
    let q = load_query(query)?;
    if let Some(t) = tuple {
        let names: Vec<&str> = if t.trim().is_empty() { Vec::new() } else { t.split(',').map(str::trim).collect() };
        println!("{}", eval_membership_named(&q, &g, &names, sem, limits)?);
    } else if q.is_boolean() {
        println!("{}", eval_membership_named(&q, &g, &[], sem, limits)?);
    } else {
        let mut rows: Vec<String> = evaluate(&q, &g, sem, limits)?.iter().map(|t| render_tuple(&g, t)).collect();
        rows.sort();
        for r in rows {
            println!("{r}");
        }
    }
    Ok(0)
}

fn cmd_contain(q1: &Crpq, q2: &Crpq, sem: Semantics, opts: &ContainOptions) -> Result<u8> {
    let Outcome { verdict, decider, notes } = contains(q1, q2, sem, opts)?;
    let code = match &verdict {
        Verdict::Contained => {
            println!("CONTAINED");
            0
        }
        Verdict::NotContained(w) => {
            println!("NOT_CONTAINED");
            print!("{}", render_witness(q1, w));
            EXIT_NOT_CONTAINED
        }
        Verdict::Unknown { bound } => {
            println!("UNKNOWN(bound={bound})");
            EXIT_UNKNOWN
        }
    };
    println!("decider: {decider}");
    for n in notes {
        println!("note: {}", n.replace('\n', "\n  "));
    }
    Ok(code)
}

fn cmd_reduce(pcp: &Path, prefix: &Path) -> Result<u8> {
    let inst = PcpInstance::parse(&read(pcp)?).with_context(|| format!("in {}", pcp.display()))?;
    let out = reduce(&inst);
    let with_ext = |ext: &str| {
        let mut p = prefix.as_os_str().to_owned();
        p.push(format!(".{ext}"));
        PathBuf::from(p)
    };
    for (ext, text) in [("q1", format!("{}\n", out.q1)), ("q2", format!("{}\n", out.q2)), ("manifest", out.manifest())]
    {
        let path = with_ext(ext);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_oracle(seed: u64, instances: usize, suite: &str, limits: &Limits) -> Result<u8> {
    let suite: Suite = suite.parse()?;
    let report = run_suite(suite, seed, instances, limits)?;
    println!("{report}");
    Ok(if report.passed() { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    let limits = Limits::from_env()?;
    match cli.command {
        Command::Eval { graph, query, semantics, tuple } => {
            cmd_eval(&graph, &query, semantics.into(), tuple.as_deref(), &limits)
        }
        Command::Contain { q1, q2, semantics, max_len, decider } => {
            let strategy = match decider {
                DeciderArg::Auto => Strategy::Auto,
                DeciderArg::Bounded => Strategy::Bounded,
                DeciderArg::Exact => Strategy::Exact,
            };
            let opts = ContainOptions { max_len, strategy, limits, ..ContainOptions::default() };
            cmd_contain(&load_query(&q1)?, &load_query(&q2)?, semantics.into(), &opts)
        }
        Command::Reduce { pcp, out_prefix } => cmd_reduce(&pcp, &out_prefix),
        Command::Oracle { seed, instances, suite } => cmd_oracle(seed, instances, &suite, &limits),
        Command::Fmt { query } => {
            println!("{}", load_query(&query)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Resource(_)) => EXIT_RESOURCE,
                _ => EXIT_INPUT,
            };
            ExitCode::from(code)
        }
    }
}
