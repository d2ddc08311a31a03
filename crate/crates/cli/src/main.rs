use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ofms_core::adversary::{ratio_floor, run_adversary, AdversaryError};
use ofms_core::analysis::{check_lemmas, classify, competitive_ratio, LemmaOptions, LemmaReport};
use ofms_core::campaign::{evaluate, minimize_witness, run_campaign, Execution, FuzzConfig};
use ofms_core::engine::{CommitmentModel, Simulation};
use ofms_core::model::{check_trace, trace_makespan, Tap, Trace};
use ofms_core::offline::{brute_force_opt, opt, prefix_table, BRUTE_FORCE_CAP};
use ofms_core::scalar::{Approx, FLOAT_TOLERANCE};
use ofms_core::tapgen::{random_tap, GenParams, Style};
use ofms_core::{NumericMode, PolicyKind, QNum, Scalar};
use serde_json::json;
use sha2::{Digest, Sha256};

const EXIT_INPUT: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "ofms", version, about = "One fast machine, many slow machines: online scheduling lab")]
struct Cli {
    /// Arithmetic used by the simulator.
    #[arg(long, global = true, env = "OFMS_NUMERIC", default_value = "exact")]
    numeric: NumericMode,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a policy on a TAP file and report its ratio.
    Run(RunArgs),
    /// Re-analyze a trace file against its TAP.
    Analyze(AnalyzeArgs),
    /// Random campaign checking the ratio bound and lemma invariants.
    Fuzz(FuzzArgs),
    /// Play the lower-bound adversary against a policy.
    Adversary(AdversaryArgs),
    /// Print the offline optimum and its prefix table.
    Verify(VerifyArgs),
    /// Emit a generated TAP.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    tap: PathBuf,
    #[arg(long, default_value = "h")]
    policy: PolicyKind,
    /// Commitment model enforced by the engine; defaults to the policy's own.
    #[arg(long)]
    model: Option<CommitmentModel>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Also check the standby-load inequality.
    #[arg(long)]
    lemma5: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    tap: PathBuf,
    trace: PathBuf,
    #[arg(long, default_value = "eventual")]
    model: CommitmentModel,
    /// Run the lemma checks (meaningful for H traces).
    #[arg(long)]
    lemmas: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StyleArg {
    Uniform,
    Bursty,
    Staircase,
    All,
}

impl StyleArg {
    fn styles(self) -> Vec<Style> {
        match self {
            StyleArg::Uniform => vec![Style::Uniform],
            StyleArg::Bursty => vec![Style::Bursty],
            StyleArg::Staircase => vec![Style::Staircase],
            StyleArg::All => Style::ALL.to_vec(),
        }
    }
}

#[derive(Args)]
struct GenFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value = "1/16")]
    f_min: QNum,
    #[arg(long, default_value = "4")]
    f_max: QNum,
    #[arg(long, default_value = "1")]
    slowdown_min: QNum,
    #[arg(long, default_value = "4")]
    slowdown_max: QNum,
    #[arg(long, default_value = "8")]
    horizon: QNum,
    #[arg(long, default_value_t = 0.2)]
    p_infinite: f64,
}

impl GenFlags {
    fn params(&self, style: Style) -> GenParams {
        GenParams {
            seed: self.seed,
            n: self.n,
            f_range: (self.f_min.clone(), self.f_max.clone()),
            slowdown_range: (self.slowdown_min.clone(), self.slowdown_max.clone()),
            horizon: self.horizon.clone(),
            p_infinite_s: self.p_infinite,
            style,
        }
    }
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    gen: GenFlags,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, value_enum, default_value = "all")]
    style: StyleArg,
    /// Use exactly `--n` tasks per TAP instead of drawing 1..=n.
    #[arg(long)]
    fixed_n: bool,
    #[arg(long, default_value = "h")]
    policy: PolicyKind,
    /// Violations are reported but do not fail the run.
    #[arg(long)]
    expect_violations: bool,
    #[arg(long, default_value = "ofms-witnesses")]
    witness_dir: PathBuf,
    /// At most this many failures are minimized and written.
    #[arg(long, default_value_t = 10)]
    max_witnesses: usize,
    #[arg(long)]
    lemma5: bool,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AdversaryArgs {
    #[arg(long, default_value = "h")]
    policy: PolicyKind,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Write the delivered TAP and the trace here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct VerifyArgs {
    tap: PathBuf,
    /// Cross-check against exhaustive search.
    #[arg(long)]
    oracle: bool,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    gen: GenFlags,
    #[arg(long, default_value = "uniform")]
    style: Style,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error that maps to an exit code.
struct Failure(u8, anyhow::Error);

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure(EXIT_INPUT, e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.numeric == NumericMode::Float {
        eprintln!(
            "warning: float mode: comparisons use relative tolerance {FLOAT_TOLERANCE:e}; results are approximate"
        );
    }
    let result = match cli.command {
        Cmd::Run(args) => cmd_run(args, cli.numeric),
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Fuzz(args) => cmd_fuzz(args, cli.numeric),
        Cmd::Adversary(args) => cmd_adversary(args),
        Cmd::Verify(args) => cmd_verify(args),
        Cmd::Gen(args) => cmd_gen(args).map_err(Failure::from),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn read_tap(path: &Path) -> Result<Tap> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Tap::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn digest(tap: &Tap) -> String {
    let hash = Sha256::digest(tap.to_json().as_bytes());
    hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn show_exact(x: &QNum) -> String {
    if x.is_infinite() {
        "inf".into()
    } else if *x == QNum::phi() {
        format!("φ (≈{:.10})", x.to_f64())
    } else {
        format!("{x} (≈{:.10})", x.to_f64())
    }
}

fn show_float(x: &Approx) -> String {
    if x.same(&Approx::phi()) {
        format!("φ (≈{:.10})", x.0)
    } else {
        format!("≈{:.10}", x.0)
    }
}

fn lemma_summary(report: &LemmaReport) -> String {
    let failed: Vec<String> = report.failures().map(|o| format!("{:?}", o.lemma)).collect();
    if failed.is_empty() {
        format!("all {} checks pass", report.outcomes.len())
    } else {
        format!("FAILED: {}", failed.join(", "))
    }
}

fn cmd_run(args: RunArgs, mode: NumericMode) -> Result<u8, Failure> {
    let tap = read_tap(&args.tap)?;
    let model = args.model.unwrap_or(args.policy.model());
    let eventual = args.policy.model() == CommitmentModel::Eventual;
    match mode {
        NumericMode::Exact => {
            let sim = Simulation::with_model(tap.clone(), args.policy.build::<QNum>(), model)
                .map_err(|e| anyhow::anyhow!("{}", e.kind))?;
            let trace =
                sim.run().map_err(|e| Failure(EXIT_VIOLATION, anyhow::anyhow!("simulation failed: {}", e.kind)))?;
            if let Err(v) = check_trace(&tap, &trace, model) {
                return Err(Failure(EXIT_VIOLATION, anyhow::anyhow!("illegal trace: {v}")));
            }
            if let Some(path) = &args.trace_out {
                write_file(path, &trace.to_text())?;
            }
            let makespan =
                if tap.is_empty() { QNum::zero() } else { trace_makespan(&trace).map_err(anyhow::Error::from)? };
            let c = opt(&tap).completion;
            let ratio = competitive_ratio(&tap, &trace).map_err(anyhow::Error::from)?;
            let lemmas = (args.policy == PolicyKind::H)
                .then(|| check_lemmas(&tap, &trace, LemmaOptions { standby_load: args.lemma5 }));
            let ratio_ok = !eventual || ratio <= QNum::phi();
            let lemmas_ok = lemmas.as_ref().is_none_or(|r| r.all_passed());
            if args.json {
                let doc = json!({
                    "tap_digest": digest(&tap),
                    "policy": args.policy.name(),
                    "model": model.to_string(),
                    "numeric": "exact",
                    "makespan": makespan.to_string(),
                    "makespan_approx": makespan.to_f64(),
                    "opt_completion": c.to_string(),
                    "opt_completion_approx": c.to_f64(),
                    "ratio": ratio.to_string(),
                    "ratio_approx": ratio.to_f64(),
                    "lemmas": lemmas,
                    "trace_file": args.trace_out,
                });
                println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            } else {
                println!("tap digest   {}", digest(&tap));
                println!("policy       {} ({} model)", args.policy, model);
                println!("makespan     {}", show_exact(&makespan));
                println!("C^inf        {}", show_exact(&c));
                println!("ratio        {}", show_exact(&ratio));
                if let Some(r) = &lemmas {
                    println!("lemmas       {}", lemma_summary(r));
                    if !r.all_passed() {
                        print!("{}", r.to_text());
                    }
                }
                if let Some(path) = &args.trace_out {
                    println!("trace        {}", path.display());
                }
            }
            Ok(if ratio_ok && lemmas_ok { 0 } else { EXIT_VIOLATION })
        }
        NumericMode::Float => {
            let float_tap: Tap<Approx> = tap.to_float();
            let sim = Simulation::with_model(float_tap.clone(), args.policy.build::<Approx>(), model)
                .map_err(|e| anyhow::anyhow!("{}", e.kind))?;
            let trace =
                sim.run().map_err(|e| Failure(EXIT_VIOLATION, anyhow::anyhow!("simulation failed: {}", e.kind)))?;
            if let Some(path) = &args.trace_out {
                write_file(path, &trace.to_text())?;
            }
            let makespan =
                if tap.is_empty() { Approx(0.0) } else { trace_makespan(&trace).map_err(anyhow::Error::from)? };
            let c = opt(&float_tap).completion;
            let ratio = competitive_ratio(&float_tap, &trace).map_err(anyhow::Error::from)?;
            let ratio_ok = !eventual || ratio.le(&Approx::phi());
            if args.json {
                let doc = json!({
                    "tap_digest": digest(&tap),
                    "policy": args.policy.name(),
                    "model": model.to_string(),
                    "numeric": "float",
                    "makespan_approx": makespan.0,
                    "opt_completion_approx": c.0,
                    "ratio_approx": ratio.0,
                    "trace_file": args.trace_out,
                });
                println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
            } else {
                println!("tap digest   {}", digest(&tap));
                println!("policy       {} ({} model)", args.policy, model);
                println!("makespan     {}", show_float(&makespan));
                println!("C^inf        {}", show_float(&c));
                println!("ratio        {}", show_float(&ratio));
            }
            Ok(if ratio_ok { 0 } else { EXIT_VIOLATION })
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<u8, Failure> {
    let tap = read_tap(&args.tap)?;
    let text = fs::read_to_string(&args.trace).with_context(|| format!("reading {}", args.trace.display()))?;
    let trace = Trace::from_text(&text).with_context(|| format!("parsing {}", args.trace.display()))?;
    if let Err(v) = check_trace(&tap, &trace, args.model) {
        return Err(Failure(EXIT_VIOLATION, anyhow::anyhow!("illegal trace: {v}")));
    }
    let ratio = competitive_ratio(&tap, &trace).map_err(anyhow::Error::from)?;
    let sets = classify(&tap, &trace);
    let lemmas = args.lemmas.then(|| check_lemmas(&tap, &trace, LemmaOptions::default()));
    if args.json {
        let doc = json!({
            "tap_digest": digest(&tap),
            "ratio": ratio.to_string(),
            "ratio_approx": ratio.to_f64(),
            "sets": sets,
            "lemmas": lemmas,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!("tap digest   {}", digest(&tap));
        println!("ratio        {}", show_exact(&ratio));
        println!("A            {:?}", sets.actual);
        println!("F_big        {:?}", sets.fake_big);
        println!("F_small      {:?}", sets.fake_small);
        println!("slow         {:?}", sets.h_slow);
        if let Some(r) = &lemmas {
            println!("lemmas       {}", lemma_summary(r));
        }
    }
    Ok(if lemmas.is_none_or(|r| r.all_passed()) { 0 } else { EXIT_VIOLATION })
}

fn cmd_fuzz(args: FuzzArgs, mode: NumericMode) -> Result<u8, Failure> {
    let lemmas = LemmaOptions { standby_load: args.lemma5 };
    let config = FuzzConfig {
        seed: args.gen.seed,
        count: args.count,
        params: args.gen.params(Style::Uniform),
        styles: args.style.styles(),
        vary_n: !args.fixed_n,
        policy: args.policy,
        mode,
        lemmas,
        execution: if args.sequential { Execution::Sequential } else { Execution::default() },
    };
    let report = run_campaign(&config).map_err(anyhow::Error::from)?;

    let mut written = Vec::new();
    for failure in report.failures.iter().take(args.max_witnesses) {
        let tap = Tap::from_json(&failure.tap).map_err(anyhow::Error::from)?;
        let small = minimize_witness(&tap, |t| !evaluate(t, args.policy, mode, lemmas).passed());
        let path = args.witness_dir.join(format!("witness-{}-{}.json", args.policy, failure.seed));
        write_file(&path, &small.to_json())?;
        written.push(path);
    }

    let fmt_opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.10}"));
    if args.json {
        let doc = json!({ "report": report, "witnesses": written });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!("policy       {} ({} mode)", report.policy, report.mode);
        println!("cases        {} (seed {})", report.count, report.seed);
        println!("failures     {}", report.failures.len());
        println!(
            "ratio        min {} max {} mean {}",
            fmt_opt(report.min_ratio),
            fmt_opt(report.max_ratio),
            fmt_opt(report.mean_ratio)
        );
        if mode == NumericMode::Float {
            println!("near ties    {} cases", report.near_tie_cases);
        }
        for f in report.failures.iter().take(args.max_witnesses) {
            println!("  case {} seed {} ({}): {:?}", f.index, f.seed, f.style, f.violations);
        }
        for path in &written {
            println!("witness      {}", path.display());
        }
    }
    Ok(if report.passed() || args.expect_violations { 0 } else { EXIT_VIOLATION })
}

fn cmd_adversary(args: AdversaryArgs) -> Result<u8, Failure> {
    let run = run_adversary(args.policy.build::<QNum>(), args.k).map_err(|e| match e {
        AdversaryError::BadK(_) => Failure(EXIT_INPUT, e.into()),
        other => Failure(EXIT_VIOLATION, other.into()),
    })?;
    if let Some(dir) = &args.out_dir {
        write_file(&dir.join("delivered.json"), &run.delivered.to_json())?;
        write_file(&dir.join("trace.tsv"), &run.trace.to_text())?;
    }
    let floor = ratio_floor(args.k);
    if args.json {
        let doc = json!({
            "policy": run.policy,
            "k": run.k,
            "delivered": run.delivered.len(),
            "truncation_time": run.truncation_time.as_ref().map(|t| t.to_string()),
            "move_ratio": run.move_ratio.as_ref().map(|t| t.to_string()),
            "makespan": run.makespan.as_ref().map(|t| t.to_string()),
            "opt_completion": run.opt_completion.to_string(),
            "final_ratio": run.final_ratio.to_string(),
            "final_ratio_approx": run.final_ratio.to_f64(),
            "floor": floor.to_string(),
            "meets_floor": run.meets_floor(),
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!("policy       {}", run.policy);
        println!("k            {}", run.k);
        println!("delivered    {} tasks", run.delivered.len());
        match &run.truncation_time {
            Some(t) => println!(
                "truncated    at {} (move ratio {})",
                show_exact(t),
                run.move_ratio.as_ref().map_or("-".into(), show_exact)
            ),
            None => println!("truncated    never"),
        }
        println!("C            {}", show_exact(&run.opt_completion));
        println!("ratio        {}", show_exact(&run.final_ratio));
        println!("floor        {}", show_exact(&floor));
    }
    Ok(if run.meets_floor() { 0 } else { EXIT_VIOLATION })
}

fn cmd_verify(args: VerifyArgs) -> Result<u8, Failure> {
    let tap = read_tap(&args.tap)?;
    let result = opt(&tap);
    let table = prefix_table(&tap);
    let oracle = if args.oracle {
        if tap.len() > BRUTE_FORCE_CAP {
            return Err(Failure(
                EXIT_INPUT,
                anyhow::anyhow!("--oracle supports at most {BRUTE_FORCE_CAP} tasks, got {}", tap.len()),
            ));
        }
        Some(brute_force_opt(&tap).map_err(anyhow::Error::from)?)
    } else {
        None
    };
    let matches = oracle.as_ref().is_none_or(|o| o.completion == result.completion);
    if args.json {
        let doc = json!({
            "tap_digest": digest(&tap),
            "slow": result.plan.slow_ids().collect::<Vec<_>>(),
            "fast": result.plan.fast_ids().collect::<Vec<_>>(),
            "completion": result.completion.to_string(),
            "fast_runtime": result.fast_runtime.to_string(),
            "prefixes": table.iter().map(|(t, r)| json!({"t": t.to_string(), "completion": r.completion.to_string()})).collect::<Vec<_>>(),
            "oracle_completion": oracle.as_ref().map(|o| o.completion.to_string()),
            "oracle_match": oracle.as_ref().map(|_| matches),
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
    } else {
        println!("tap digest   {}", digest(&tap));
        println!("slow         {:?}", result.plan.slow_ids().collect::<Vec<_>>());
        println!("fast         {:?}", result.plan.fast_ids().collect::<Vec<_>>());
        println!("C^inf        {}", show_exact(&result.completion));
        println!("fast C^inf   {}", show_exact(&result.fast_runtime));
        println!("prefix table");
        for (t, r) in &table {
            println!("  t = {:<24} C^t = {}", t.to_string(), show_exact(&r.completion));
        }
        if let Some(o) = &oracle {
            println!("oracle       {} ({})", show_exact(&o.completion), if matches { "match" } else { "MISMATCH" });
        }
    }
    Ok(if matches { 0 } else { EXIT_VIOLATION })
}

fn cmd_gen(args: GenArgs) -> Result<u8> {
    let tap = random_tap(&args.gen.params(args.style))?;
    match &args.out {
        Some(path) => write_file(path, &tap.to_json())?,
        None => println!("{}", tap.to_json()),
    }
    Ok(0)
}
