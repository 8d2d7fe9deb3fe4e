//! Command-line front end.
//!
//! Exit codes: 0 when every check passed, 1 when a check failed or a run
//! errored, 2 for usage and input errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use crate::applications::{
    pp_decide, sd_decide, sd_error_exact, CollisionFinder, CountClass, FunctionFamily, LweFamily,
    LweParams, PpConfig, ToyTwoRegular, TruthTable,
};
use crate::circuit::{parse_circuit, Circuit};
use crate::engine::{Probability, RunConfig};
use crate::error::{Error, Result};
use crate::mbqc::{
    all_zero_probability, build_brickwork, mbqc_run_rewind, teleported_output, BrickworkSpec,
    MeasurementPattern,
};
use crate::mitigation::{mitigate, mitigate_postselect, required_coins, FlaggedState};
use crate::report::Report;
use crate::rng::{from_seed, split_seed};
use crate::statevector::SnapshotRegistry;
use crate::trials::run_trials;
use crate::{pathsum, stabilizer, statevector};

#[derive(Debug, Parser)]
#[command(
    name = "rwsim",
    version,
    about = "Quantum circuits with rewinding, cloning and postselection"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a circuit file on one backend.
    Simulate(SimulateArgs),
    /// Run a protocol demo.
    #[command(subcommand)]
    Demo(Demo),
    /// Same as `demo mitigate`.
    Mitigate(MitigateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendKind {
    Sv,
    Stab,
    Pathsum,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the report to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub circuit: PathBuf,
    #[arg(long, value_enum, default_value = "sv")]
    pub backend: BackendKind,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.0)]
    pub min_postselect_prob: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Demo {
    /// Decide whether a random function has fewer than half ones.
    Pp(PpArgs),
    /// Find collisions with a single rewind.
    Collision(CollisionArgs),
    /// Distinguish two circuits' output distributions.
    Sd(SdArgs),
    /// Rewind-driven measurement-based computation on a brickwork state.
    Mbqc(MbqcArgs),
    /// Amplitude mitigation on a flagged two-qubit state.
    Mitigate(MitigateArgs),
}

#[derive(Debug, Args)]
pub struct PpArgs {
    #[arg(long, default_value_t = 3)]
    pub n: u32,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    /// Copies per ratio; defaults to the arity-based count.
    #[arg(long)]
    pub copies: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyKind {
    Toy,
    Lwe,
}

#[derive(Debug, Args)]
pub struct CollisionArgs {
    #[arg(long, value_enum, default_value = "toy")]
    pub family: FamilyKind,
    /// Image bits of the toy family (3 with rewinding, 8 without).
    #[arg(long)]
    pub toy_bits: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub lwe_n: usize,
    #[arg(long, default_value_t = 16)]
    pub lwe_q: u64,
    #[arg(long, default_value_t = 2)]
    pub lwe_m: usize,
    #[arg(long, default_value_t = 1)]
    pub lwe_mu: u64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub no_rewind: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SdArgs {
    #[arg(long)]
    pub c0: PathBuf,
    #[arg(long)]
    pub c1: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct MbqcArgs {
    #[arg(long, default_value_t = 2)]
    pub rows: usize,
    #[arg(long, default_value_t = 5)]
    pub cols: usize,
    /// Pattern file; all angles zero when omitted.
    #[arg(long)]
    pub pattern: Option<PathBuf>,
    /// Rewinds per measured qubit; defaults to the number of measured qubits.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Variant {
    Rewind,
    Postselect,
}

#[derive(Debug, Args)]
pub struct MitigateArgs {
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value = "rewind")]
    pub variant: Variant,
    /// Coin retention probability of the postselection variant.
    #[arg(long, default_value_t = 0.5)]
    pub q: f64,
    /// Coin count; defaults to the smallest reaching target probability 1/2.
    #[arg(long)]
    pub m: Option<usize>,
    #[command(flatten)]
    pub common: Common,
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate(a) => &a.common,
            Command::Mitigate(a) => &a.common,
            Command::Demo(d) => match d {
                Demo::Pp(a) => &a.common,
                Demo::Collision(a) => &a.common,
                Demo::Sd(a) => &a.common,
                Demo::Mbqc(a) => &a.common,
                Demo::Mitigate(a) => &a.common,
            },
        }
    }
}

/// Runs a parsed command and returns its report, without printing.
pub fn execute(command: &Command) -> Result<Report> {
    let start = Instant::now();
    let mut report = match command {
        Command::Simulate(a) => simulate(a)?,
        Command::Mitigate(a) => demo_mitigate(a)?,
        Command::Demo(d) => match d {
            Demo::Pp(a) => demo_pp(a)?,
            Demo::Collision(a) => demo_collision(a)?,
            Demo::Sd(a) => demo_sd(a)?,
            Demo::Mbqc(a) => demo_mbqc(a)?,
            Demo::Mitigate(a) => demo_mitigate(a)?,
        },
    };
    report.duration = Some(start.elapsed());
    Ok(report)
}

fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Parse { .. }
            | Error::Validation(_)
            | Error::UnsupportedGate { .. }
            | Error::InvalidArgument(_)
            | Error::InvalidTargets(_)
            | Error::QubitBudget { .. }
            | Error::PathSumLimit { .. }
            | Error::NoAcceptQubit
            | Error::Io(_)
    )
}

/// Parses `args`, runs the command, prints the report and returns the
/// process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(report) => {
            let text = report.render();
            print!("{text}");
            if let Some(path) = &cli.command.common().out {
                if let Err(e) = std::fs::write(path, &text) {
                    eprintln!("error: writing {}: {e}", path.display());
                    return 2;
                }
            }
            if report.passed() {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if is_input_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn compact_key(key: &str) -> String {
    if key.is_empty() {
        "none".into()
    } else {
        key.replace(' ', ",")
    }
}

fn sample_bit<R: Rng + ?Sized>(p1: f64, rng: &mut R) -> u8 {
    u8::from(rng.random::<f64>() < p1)
}

/// Exact enumeration is skipped above this many measurements.
const EXACT_MEASUREMENT_LIMIT: usize = 16;

pub fn simulate(args: &SimulateArgs) -> Result<Report> {
    let circuit = parse_circuit(&read(&args.circuit)?)?;
    let cfg = RunConfig {
        min_postselect_prob: args.min_postselect_prob,
        ..RunConfig::default()
    };
    let mut report = Report::new("simulate");
    report
        .push("circuit", args.circuit.display())
        .push("backend", format!("{:?}", args.backend).to_lowercase())
        .push("seed", args.common.seed)
        .push("qubits", circuit.n_qubits);
    match args.backend {
        BackendKind::Pathsum => {
            let p =
                pathsum::acceptance_probability(&circuit, &cfg, pathsum::DEFAULT_PATH_BIT_LIMIT)?;
            report.push("p_accept", p);
            let dist =
                pathsum::outcome_distribution(&circuit, &cfg, pathsum::DEFAULT_PATH_BIT_LIMIT)?;
            for (k, p) in dist {
                report.push(format!("exact.{}", compact_key(&k)), p);
            }
        }
        BackendKind::Sv | BackendKind::Stab => {
            let results = sample_runs(&circuit, args, &cfg)?;
            summarize_samples(&mut report, &results, args.trials);
            exact_for_sampling_backend(&mut report, &circuit, args.backend, &cfg)?;
        }
    }
    Ok(report)
}

type Sample = (String, Option<u8>);

fn sample_runs(circuit: &Circuit, args: &SimulateArgs, cfg: &RunConfig) -> Result<Vec<Sample>> {
    if args.backend == BackendKind::Stab {
        crate::engine::check_gate_set::<stabilizer::StabilizerTableau>(circuit)?;
    }
    run_trials(
        args.trials,
        args.common.seed,
        args.common.jobs,
        |_, rng| -> Result<Sample> {
            match args.backend {
                BackendKind::Sv => {
                    let r = statevector::run(circuit, rng, cfg)?;
                    Ok((r.record.outcome_key(), r.accept_bit))
                }
                _ => {
                    let e = stabilizer::run(circuit, rng, cfg)?;
                    let accept = circuit
                        .accept
                        .map(|q| sample_bit(e.final_state.outcome_probability(q, 1).to_f64(), rng));
                    Ok((e.record.outcome_key(), accept))
                }
            }
        },
    )
    .into_iter()
    .collect()
}

fn summarize_samples(report: &mut Report, results: &[Sample], trials: usize) {
    report.push("trials", trials);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut accepted = 0usize;
    for (i, (key, accept)) in results.iter().enumerate() {
        *counts.entry(key).or_insert(0) += 1;
        accepted += usize::from(*accept == Some(1));
        let accept = accept.map_or("-".to_string(), |b| b.to_string());
        report.push(
            format!("trial.{i}"),
            format!("{} accept={accept}", compact_key(key)),
        );
    }
    for (k, c) in counts {
        report.push(format!("count.{}", compact_key(k)), c);
        report.push(
            format!("freq.{}", compact_key(k)),
            c as f64 / trials.max(1) as f64,
        );
    }
    report.push("accept_rate", accepted as f64 / trials.max(1) as f64);
}

fn exact_for_sampling_backend(
    report: &mut Report,
    circuit: &Circuit,
    backend: BackendKind,
    cfg: &RunConfig,
) -> Result<()> {
    if circuit.measurement_count() > EXACT_MEASUREMENT_LIMIT {
        return Ok(());
    }
    match (backend, circuit.accept) {
        (BackendKind::Sv, Some(_)) => {
            report.push(
                "p_accept_exact",
                statevector::exact_acceptance(circuit, cfg)?,
            );
        }
        (BackendKind::Stab, Some(q)) => {
            let p = stabilizer::stab_strong_probability(
                circuit,
                &[(q, 1)],
                stabilizer::DEFAULT_DEPTH_LIMIT,
            )?;
            report.push("p_accept_exact", p);
        }
        _ => {}
    }
    Ok(())
}

fn random_promise_table<R: Rng + ?Sized>(n: u32, rng: &mut R) -> Result<TruthTable> {
    loop {
        let t = TruthTable::random(n, 1, rng)?;
        if t.count() > 0 {
            return Ok(t);
        }
    }
}

pub fn demo_pp(args: &PpArgs) -> Result<Report> {
    if args.n == 0 || args.n > 10 {
        return Err(Error::InvalidArgument(format!(
            "n = {} outside 1..=10",
            args.n
        )));
    }
    let mut cfg = PpConfig::for_arity(args.n);
    if let Some(c) = args.copies {
        cfg.copies = c.max(1);
    }
    let results = run_trials(args.trials, args.common.seed, args.common.jobs, |_, rng| {
        let table = random_promise_table(args.n, rng)?;
        let decision = pp_decide(&table, &cfg, rng)?;
        Ok((table.count(), decision))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new("demo pp");
    report
        .push("n", args.n)
        .push("trials", args.trials)
        .push("seed", args.common.seed)
        .push("copies_per_k", cfg.copies)
        .push("threshold", cfg.threshold);
    let (mut correct, mut fallbacks, mut failures) = (0usize, 0usize, 0usize);
    for (i, (s, d)) in results.iter().enumerate() {
        let expected = CountClass::of(args.n, *s);
        correct += usize::from(expected == d.class);
        fallbacks += d.fallbacks;
        failures += d.failures;
        report.push(
            format!("trial.{i}"),
            format!(
                "s={s} expected={expected} decided={} fallbacks={} failures={}",
                d.class, d.fallbacks, d.failures
            ),
        );
    }
    let accuracy = correct as f64 / args.trials.max(1) as f64;
    report
        .push("correct", correct)
        .push("accuracy", accuracy)
        .push("fallbacks", fallbacks)
        .push("failures", failures);
    report.check("accuracy_at_least_0.99", accuracy >= 0.99);
    Ok(report)
}

pub fn demo_collision(args: &CollisionArgs) -> Result<Report> {
    let mut report = Report::new("demo collision");
    report
        .push("family", format!("{:?}", args.family).to_lowercase())
        .push("trials", args.trials)
        .push("seed", args.common.seed)
        .push("rewind", !args.no_rewind);
    let (family, claw_key): (Box<dyn FunctionFamily>, Option<LweFamily>) = match args.family {
        FamilyKind::Toy => {
            let bits = args.toy_bits.unwrap_or(if args.no_rewind { 8 } else { 3 });
            (Box::new(ToyTwoRegular { image_bits: bits }), None)
        }
        FamilyKind::Lwe => {
            let params = LweParams::toy(args.lwe_n, args.lwe_q, args.lwe_m, args.lwe_mu)?;
            let mut key_rng = from_seed(split_seed(args.common.seed, u64::MAX));
            match LweFamily::keygen_injective(params.clone(), &mut key_rng, 10_000) {
                Ok(f) => {
                    report.push("key", "injective");
                    (Box::new(f.clone()), Some(f))
                }
                Err(_) => {
                    report.push("key", "uniform");
                    (Box::new(LweFamily::keygen(params, &mut key_rng)), None)
                }
            }
        }
    };
    report
        .push("function", family.name())
        .push("domain", family.domain_size())
        .push("input_bits", family.input_bits())
        .push("output_bits", family.output_bits());
    let allow_rewind = !args.no_rewind;
    let finder = CollisionFinder::new(family.as_ref())?;
    let pairs = run_trials(args.trials, args.common.seed, args.common.jobs, |_, rng| {
        finder.find(rng, allow_rewind)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut found = 0usize;
    let mut verified = true;
    let mut claws = true;
    for (i, pair) in pairs.iter().enumerate() {
        match pair {
            Some((a, b)) => {
                found += 1;
                verified &= a != b && family.eval(*a) == family.eval(*b);
                if let Some(k) = &claw_key {
                    claws &= k.is_claw(*a, *b);
                }
                report.push(format!("trial.{i}"), format!("{a},{b}"));
            }
            None => {
                report.push(format!("trial.{i}"), "none");
            }
        }
    }
    let freq = found as f64 / args.trials.max(1) as f64;
    report.push("found", found).push("frequency", freq);
    report.check("pairs_verify", verified);
    if claw_key.is_some() {
        report.check("pairs_are_claws", claws);
    }
    if args.family == FamilyKind::Toy {
        if allow_rewind {
            report.check("frequency_at_least_0.45", freq >= 0.45);
        } else if family.output_bits() >= 8 {
            report.check("frequency_at_most_0.05", freq <= 0.05);
        }
    }
    Ok(report)
}

pub fn demo_sd(args: &SdArgs) -> Result<Report> {
    let c0 = TruthTable::parse(&read(&args.c0)?)?;
    let c1 = TruthTable::parse(&read(&args.c1)?)?;
    let exact = sd_error_exact(&c0, &c1)?;
    let outputs = run_trials(args.trials, args.common.seed, args.common.jobs, |_, rng| {
        sd_decide(&c0, &c1, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let ones = outputs.iter().filter(|&&b| b == 1).count();
    let freq = ones as f64 / args.trials.max(1) as f64;
    let p1 = rational_to_f64(&exact.p_err_prime);
    let sigma = (p1 * (1.0 - p1) / args.trials.max(1) as f64).sqrt();

    let mut report = Report::new("demo sd");
    report
        .push("c0", args.c0.display())
        .push("c1", args.c1.display())
        .push("trials", args.trials)
        .push("seed", args.common.seed)
        .push("p_err", &exact.p_err)
        .push("p_err_prime", &exact.p_err_prime)
        .push("d_tv", &exact.d_tv)
        .push("ones", ones)
        .push("frequency_one", freq)
        .push("sigma", sigma);
    report.check("exact_relations", exact.check().is_ok());
    report.check(
        "frequency_within_4_sigma",
        (freq - p1).abs() <= 4.0 * sigma + 1e-12,
    );
    Ok(report)
}

fn rational_to_f64(r: &num_rational::BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn demo_mbqc(args: &MbqcArgs) -> Result<Report> {
    let spec = BrickworkSpec::new(args.rows, args.cols)?;
    let pattern = match &args.pattern {
        Some(p) => MeasurementPattern::parse(spec, &read(p)?)?,
        None => MeasurementPattern::identity(spec),
    };
    let budget = args.budget.unwrap_or(spec.rows() * (spec.cols() - 1));
    let graph = build_brickwork(&spec)?;
    let target = teleported_output(&pattern)?;
    let runs = run_trials(args.trials, args.common.seed, args.common.jobs, |_, rng| {
        mbqc_run_rewind(graph.clone(), &pattern, budget, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut report = Report::new("demo mbqc");
    report
        .push("rows", args.rows)
        .push("cols", args.cols)
        .push(
            "pattern",
            args.pattern
                .as_ref()
                .map_or("identity".to_string(), |p| p.display().to_string()),
        )
        .push("budget", budget)
        .push("trials", args.trials)
        .push("seed", args.common.seed)
        .push("edges", spec.edges().len());
    let mut all_zero = 0usize;
    let mut min_fidelity = 1.0f64;
    let mut halves = true;
    for (i, run) in runs.iter().enumerate() {
        halves &= run
            .zero_probabilities
            .iter()
            .all(|p| (p - 0.5).abs() < 1e-12);
        let outcomes: String = run.outcomes.iter().map(|b| b.to_string()).collect();
        report.push(
            format!("trial.{i}"),
            format!(
                "outcomes={outcomes} rewinds={} all_zero={}",
                run.rewinds, run.all_zero
            ),
        );
        if run.all_zero {
            all_zero += 1;
            min_fidelity = min_fidelity.min(run.output.fidelity(&target));
        }
    }
    report
        .push("all_zero", all_zero)
        .push(
            "all_zero_frequency",
            all_zero as f64 / args.trials.max(1) as f64,
        )
        .push("all_zero_probability", all_zero_probability(&spec, budget))
        .push("min_fidelity", min_fidelity);
    report.check("zero_probability_half", halves);
    report.check(
        "output_matches_teleported_state",
        min_fidelity >= 1.0 - 1e-9,
    );
    Ok(report)
}

pub fn demo_mitigate(args: &MitigateArgs) -> Result<Report> {
    if args.n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let fs = FlaggedState::from_probability(args.p)?;
    let mut report = Report::new("demo mitigate");
    report
        .push("p", args.p)
        .push("n", args.n)
        .push("seed", args.common.seed)
        .push("variant", format!("{:?}", args.variant).to_lowercase());
    match args.variant {
        Variant::Rewind => {
            let mut rng = from_seed(args.common.seed);
            let mut registry = SnapshotRegistry::new();
            let (out, trace) = mitigate(fs, args.n, &mut registry, &mut rng)?;
            for (i, e) in trace.events.iter().enumerate() {
                report.push(
                    format!("event.{i}"),
                    format!("i={} c={} z={}", e.level, e.retries, e.outcome),
                );
            }
            let odds = out.odds();
            report
                .push("outcome", format!("{:?}", trace.outcome).to_lowercase())
                .push("levels", trace.levels_completed())
                .push("final_p", out.nontarget_probability())
                .push("final_odds", odds);
            report.check("trace_legal", trace.check(args.n).is_ok());
            if trace.is_success() {
                report.check("final_odds_at_least_1", odds >= 1.0 - 1e-9);
            }
        }
        Variant::Postselect => {
            let m = args.m.unwrap_or_else(|| required_coins(args.p, args.q));
            let out = mitigate_postselect(fs, args.q, m)?;
            let target = 1.0 - out.nontarget_probability();
            let want = (1.0 - args.p) / (1.0 - args.p + args.p * args.q.powi(m as i32));
            report
                .push("q", args.q)
                .push("m", m)
                .push("target_probability", target)
                .push("final_odds", out.odds());
            report.check("matches_closed_form", (target - want).abs() < 1e-12);
            if args.m.is_none() {
                report.check("target_at_least_half", target >= 0.5 - 1e-12);
            }
        }
    }
    Ok(report)
}
