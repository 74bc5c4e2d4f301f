//! Acceptance suite: one pass/fail line per criterion, nonzero exit on any
//! failure. Seeds, instance counts and time limits are pinned below.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode, Output};
use std::time::{Duration, Instant};

use crpq::containment::{contains, find_counterexample_bounded, ContainOptions, Decider, Strategy, Verdict};
use crpq::eval::{Limits, Semantics};
use crpq::nfa::{intersection_emptiness, intersection_witness, Nfa};
use crpq::oracle::{run_suite, Suite, SuiteReport};
use crpq::pcp::{
    claim_check, forbidden_scan, is_well_formed, reduce, search_index_blocks, solutions_up_to, witness_expansion,
    BlockSearch, PcpInstance,
};
use crpq::query::Crpq;
use crpq::regex::Regex;
use crpq::Error;

const SEED: u64 = 42;
const HIERARCHY_INSTANCES: usize = 200;
const HIERARCHY_LIMIT: Duration = Duration::from_secs(60);
const AINJ_EXPANSION_QUERIES: usize = 100;
const CQCQ_PAIRS: usize = 100;
const CQCQ_LIMIT: Duration = Duration::from_secs(30);
const QINJ_PAIRS: usize = 100;
const PROFILE_NFAS: usize = 20;
const CLAIM_SAMPLES: usize = 500;
const MAX_INDEX_BLOCKS: usize = 3;
const PCP_LIMIT: Duration = Duration::from_secs(300);

struct Check {
    passed: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Check { passed, detail: detail.into() }
    }
}

fn q(text: &str) -> Crpq {
    Crpq::parse(text).expect("fixed query parses")
}

fn suite_check(suite: Suite, n: usize) -> Result<(Check, SuiteReport), Error> {
    let report = run_suite(suite, SEED, n, &Limits::default())?;
    let mut detail = format!(
        "{} instances, {} checks, {} skipped, {} failures",
        report.instances,
        report.checks,
        report.skipped,
        report.failures.len()
    );
    if let Some(f) = report.failures.first() {
        detail.push_str(&format!("; first: {}", f.replace('\n', " | ")));
    }
    Ok((Check::new(report.passed(), detail), report))
}

fn timed_suite(suite: Suite, n: usize, limit: Option<Duration>) -> Result<Check, Error> {
    let start = Instant::now();
    let (mut c, _) = suite_check(suite, n)?;
    if let Some(limit) = limit {
        let t = start.elapsed();
        c.passed &= t < limit;
        c.detail.push_str(&format!("; limit {}s", limit.as_secs()));
    }
    Ok(c)
}

fn hierarchy() -> Result<Check, Error> {
    timed_suite(Suite::Hierarchy, HIERARCHY_INSTANCES, Some(HIERARCHY_LIMIT))
}

fn worked_example() -> Result<Check, Error> {
    let (q1, q2) = (q("Q() := x -[a]-> y, y -[b]-> z"), q("Q() := x -[ab]-> y"));
    let (p1, p2) = (q("Q() := x -[a]-> y, x -[b]-> y"), q("Q() := x -[a]-> y, x2 -[b]-> y2"));
    let opts = ContainOptions { strategy: Strategy::Exact, ..ContainOptions::default() };
    let holds = |a: &Crpq, b: &Crpq, sem| contains(a, b, sem, &opts).map(|o| o.verdict);
    let mut wrong = Vec::new();
    let cases = [
        ("Q1' ainj Q2'", &p1, &p2, Semantics::AInj, true),
        ("Q1' qinj Q2'", &p1, &p2, Semantics::QInj, false),
        ("Q1' st Q2'", &p1, &p2, Semantics::St, true),
        ("Q1 qinj Q2", &q1, &q2, Semantics::QInj, true),
        ("Q1 st Q2", &q1, &q2, Semantics::St, true),
        ("Q1 ainj Q2", &q1, &q2, Semantics::AInj, false),
    ];
    for (name, a, b, sem, contained) in cases {
        let v = holds(a, b, sem)?;
        match (&v, contained) {
            (Verdict::Contained, true) => {}
            (Verdict::NotContained(w), false) => {
                let x_z =
                    |b: &Vec<String>| b.len() == 2 && b.contains(&"x".to_string()) && b.contains(&"z".to_string());
                if sem == Semantics::AInj && !(w.blocks.len() == 1 && x_z(&w.blocks[0])) {
                    wrong.push(format!("{name}: witness identifies {:?}, expected x = z", w.blocks));
                }
            }
            _ => wrong.push(format!("{name}: {}", v.label())),
        }
    }
    let detail = if wrong.is_empty() { "6 verdicts exact".to_string() } else { wrong.join("; ") };
    Ok(Check::new(wrong.is_empty(), detail))
}

fn ainj_expansions() -> Result<Check, Error> {
    timed_suite(Suite::AinjExpansions, AINJ_EXPANSION_QUERIES, None)
}

fn cqcq() -> Result<Check, Error> {
    timed_suite(Suite::Cqcq, CQCQ_PAIRS, Some(CQCQ_LIMIT))
}

fn qinj_vs_fin() -> Result<Check, Error> {
    let (mut c, report) = suite_check(Suite::QinjVsFin, QINJ_PAIRS)?;
    let compared = report.counter("star-free pairs compared");
    c.passed &= compared == QINJ_PAIRS as u64;
    c.detail.push_str(&format!(
        "; {compared} star-free pairs compared, {} starred pairs refuted by bounded search",
        report.counter("starred pairs refuted by bounded search")
    ));
    Ok(c)
}

fn profiles() -> Result<Check, Error> {
    let (mut c, report) = suite_check(Suite::Profiles, PROFILE_NFAS)?;
    c.detail.push_str(&format!("; {} saturation checks skipped (2B > 16)", report.skipped));
    Ok(c)
}

fn crpq_cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crpq")).args(args).current_dir(dir).output().expect("crpq binary runs")
}

fn pcp_pipeline() -> Result<Check, Error> {
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("crpq-acceptance-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temporary directory");
    let mut problems = Vec::new();
    let mut notes = Vec::new();
    let opts = ContainOptions::default();

    let solvable: [(&str, &[(&str, &str)], &[usize], usize); 2] =
        [("aa", &[("a", "a")], &[1], 3), ("a_ab_ba_a", &[("a", "ab"), ("ba", "a")], &[1, 2], 9)];
    for (name, pairs, solution, max_len) in solvable {
        let inst = PcpInstance::new(pairs)?;
        fs::write(dir.join(name), inst.to_string()).expect("write instance");
        let reduced = crpq_cli(&["reduce", name, "--out-prefix", name], &dir);
        if !reduced.status.success() {
            problems.push(format!("{name}: reduce failed"));
            continue;
        }
        let (f1, f2) = (format!("{name}.q1"), format!("{name}.q2"));
        let len = max_len.to_string();
        let args = ["contain", &f1, &f2, "--semantics", "ainj", "--decider", "bounded", "--max-len", &len];
        let o = crpq_cli(&args, &dir);
        let first = String::from_utf8_lossy(&o.stdout).lines().next().unwrap_or("").to_string();
        if o.status.code() != Some(1) {
            problems.push(format!("{name} {solution:?}: contain printed {first}"));
            continue;
        }
        let out = reduce(&inst);
        let Verdict::NotContained(w) = find_counterexample_bounded(&out.q1, &out.q2, Semantics::AInj, max_len, &opts)?
        else {
            problems.push(format!("{name}: library search disagrees with the CLI"));
            continue;
        };
        let f = witness_expansion(&out, &w)?;
        if !(is_well_formed(&f, &out)? && forbidden_scan(&f, &out)) {
            problems.push(format!("{name}: witness is not a well-formed clean expansion"));
        }
        notes.push(format!("{name} refuted"));
    }

    let out = reduce(&PcpInstance::new(&[("a", "b")])?);
    match search_index_blocks(&out, MAX_INDEX_BLOCKS, &opts)? {
        BlockSearch::NoneUpTo(k) => notes.push(format!("a_b: no counterexample up to {k} blocks")),
        other => problems.push(format!("a_b: {other:?}")),
    }

    for (name, pairs) in
        [("aa", vec![("a", "a")]), ("a_ab_ba_a", vec![("a", "ab"), ("ba", "a")]), ("a_b", vec![("a", "b")])]
    {
        let out = reduce(&PcpInstance::new(&pairs)?);
        let sols = solutions_up_to(&out.instance, MAX_INDEX_BLOCKS);
        let r = claim_check(&out, &sols, CLAIM_SAMPLES, SEED, &opts)?;
        if r.checked < CLAIM_SAMPLES || !r.disagreements.is_empty() {
            problems.push(format!(
                "{name}: claim disagreements {} of {} (well-formed but forbidden label {}, clean but ill-formed {}, union form {}, single query {})",
                r.disagreements.len(),
                r.checked,
                r.well_formed_but_hit,
                r.clean_but_ill_formed,
                r.union_mismatch,
                r.single_mismatch
            ));
        } else {
            notes.push(format!("{name}: claim holds on {} samples", r.checked));
        }
    }
    let _ = fs::remove_dir_all(&dir);
    let t = start.elapsed();
    if t >= PCP_LIMIT {
        problems.push(format!("took {}s, limit {}s", t.as_secs(), PCP_LIMIT.as_secs()));
    }
    let passed = problems.is_empty();
    problems.extend(notes);
    Ok(Check::new(passed, problems.join("; ")))
}

fn words_up_to(alphabet: &[&str], n: usize) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..n {
        layer = layer
            .iter()
            .flat_map(|w| alphabet.iter().map(move |a| [w.clone(), vec![a.to_string()]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn intersection() -> Result<Check, Error> {
    let cases: [(&[&str], bool); 8] = [
        (&["a*b", "b*a"], true),
        (&["a^+", "b^+"], true),
        (&["a*b", "(a+b)*b"], false),
        (&["a*", "b*"], false),
        (&["(ab)*", "a(ba)*b"], false),
        (&["(aa)^+", "a(aa)*"], true),
        (&["(a+b)*a(a+b)", "(a+b)*b", "a*b*"], false),
        (&["(a+b)*a(a+b)", "(a+b)*b", "b*a*"], true),
    ];
    let words = words_up_to(&["a", "b"], 8);
    let mut wrong = Vec::new();
    for (regexes, empty) in cases {
        let rs: Vec<Regex> = regexes.iter().map(|r| Regex::parse(r)).collect::<Result<_, _>>()?;
        let nfas: Vec<Nfa> = rs.iter().map(Nfa::from_regex).collect();
        let refs: Vec<&Nfa> = nfas.iter().collect();
        let brute_empty = !words.iter().any(|w| rs.iter().all(|r| r.matches(w)));
        let witness_ok = match intersection_witness(&refs) {
            Some(w) => rs.iter().all(|r| r.matches(&w)),
            None => empty,
        };
        if intersection_emptiness(&refs) != empty || brute_empty != empty || !witness_ok {
            wrong.push(regexes.join(" & "));
        }
    }
    let detail =
        if wrong.is_empty() { format!("{} cases exact", cases.len()) } else { format!("wrong: {}", wrong.join(", ")) };
    Ok(Check::new(wrong.is_empty(), detail))
}

fn undecidable_request() -> Result<Check, Error> {
    let q1 = q("Q() := x -[a*b]-> y");
    let q2 = q("Q() := x -[a^+]-> y, y -[b*]-> z");
    let opts = ContainOptions { strategy: Strategy::Exact, ..ContainOptions::default() };
    let lib = match contains(&q1, &q2, Semantics::AInj, &opts) {
        Err(Error::Undecidable(m)) => Ok(m),
        other => Err(format!("library returned {other:?}")),
    };
    let dir = std::env::temp_dir().join(format!("crpq-acceptance-undecidable-{}", std::process::id()));
    fs::create_dir_all(&dir).expect("temporary directory");
    fs::write(dir.join("q1"), format!("{q1}\n")).expect("write query");
    fs::write(dir.join("q2"), format!("{q2}\n")).expect("write query");
    let o = crpq_cli(&["contain", "q1", "q2", "--semantics", "ainj", "--decider", "exact"], &dir);
    let _ = fs::remove_dir_all(&dir);
    let stderr = String::from_utf8_lossy(&o.stderr);
    let auto = contains(&q1, &q2, Semantics::AInj, &ContainOptions { max_len: Some(4), ..ContainOptions::default() })?;
    let ok = lib.is_ok()
        && o.status.code() == Some(2)
        && stderr.contains("undecidable")
        && auto.decider == Decider::BoundedSearch;
    let detail = match lib {
        Ok(m) => format!("diagnostic: {m}; CLI exit {:?}; auto strategy uses {}", o.status.code(), auto.decider),
        Err(e) => e,
    };
    Ok(Check::new(ok, detail))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Result<Check, Error>); 9] = [
        ("semantics hierarchy", hierarchy),
        ("worked example verdicts", worked_example),
        ("a-inj-expansion characterisations agree", ainj_expansions),
        ("CQ/CQ a-inj decider vs brute force", cqcq),
        ("q-inj abstraction decider vs finite deciders", qinj_vs_fin),
        ("profile machine", profiles),
        ("PCP pipeline", pcp_pipeline),
        ("intersection emptiness", intersection),
        ("exact a-inj CRPQ/CRPQ is refused as undecidable", undecidable_request),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let c = run().unwrap_or_else(|e| Check::new(false, format!("error: {e}")));
        let status = if c.passed { "PASS" } else { "FAIL" };
        println!("criterion {}: {status} {name} ({:.2}s): {}", i + 1, start.elapsed().as_secs_f64(), c.detail);
        failed += usize::from(!c.passed);
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
