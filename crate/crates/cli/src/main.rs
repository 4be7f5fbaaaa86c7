//! `qcap` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or parse error, 3 dimension cap exceeded,
//! 4 parameter validity violated, 5 a checked verdict failed.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use qcap::bounds::{
    branch_switch_holds, eq24_min_k, eq24_rhs, figure1_csv, figure1_rows, figure2_crossing, figure2_csv,
    figure2_rows, k0, lemma_b1, theorem1_gap, theorem1_positive, theorem2_clause_k1, theorem2_positive,
    theorem3_c, theorem3_max_k, BoundParams, BoundTable,
};
use qcap::channels::{build, parse_channel_spec, Channel};
use qcap::experiments::{
    study_additive_complement, study_direct_sum_lemma, study_platypus_superadditivity, StudyReport,
    DEFAULT_PLATYPUS_DLIST,
};
use qcap::numfmt::{format_number, round_sig, SIGNIFICANT_DIGITS};
use qcap::optimize::{
    maximize_coherent_information, maximize_private_information, Argmax, OptimizeResult, OptimizerConfig, Rank,
};
use qcap::protocol::{evaluate_eq7_variant, protocol_sweep, RocketVariant, UnitarySource};
use qcap::qmat::set_dim_cap;
use qcap::{Execution, QcapError};

const EXIT_USAGE: u8 = 2;
const EXIT_CAP: u8 = 3;
const EXIT_VALIDITY: u8 = 4;
const EXIT_VERDICT: u8 = 5;

#[derive(Parser)]
#[command(name = "qcap", version, about = "One-shot capacities, bounds and protocol simulation for quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Lower bound on Q(1) by maximizing coherent information.
    Q1(OptimizeArgs),
    /// Lower bound on P(1) by maximizing private information over ensembles.
    P1(OptimizeArgs),
    /// Closed-form capacity bounds and figure data.
    Bounds {
        #[command(subcommand)]
        action: BoundsAction,
    },
    /// Simulate the entanglement-assisted rocket protocol.
    Protocol(ProtocolArgs),
    /// Run a scripted study.
    Study(StudyArgs),
}

#[derive(Args)]
struct OptimizerFlags {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    /// Factor rank: "full" or a positive integer.
    #[arg(long, default_value = "full")]
    rank: Rank,
    /// Ensemble size for private information (default 2·dA).
    #[arg(long)]
    ensemble_size: Option<usize>,
    /// Run restarts sequentially.
    #[arg(long)]
    sequential: bool,
}

impl OptimizerFlags {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            restarts: self.restarts,
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            rank: self.rank,
            ensemble_size: self.ensemble_size,
            execution: execution(self.sequential),
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    /// Channel expression, e.g. "tensor(platypus:d=3, erasure:p=0.5,d=2)".
    #[arg(long)]
    spec: String,
    #[command(flatten)]
    opt: OptimizerFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long)]
    n: u64,
    /// Erasure probability (theorem 1 fixes it to 1/2).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: u32,
}

impl ParamArgs {
    fn params(&self) -> Result<BoundParams, QcapError> {
        let p = self.p.ok_or_else(|| QcapError::InvalidParameter("--p is required".into()))?;
        BoundParams::new(self.n, p, self.alpha)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum BoundsAction {
    /// log₂ f and log₂ f^c for k = 1..k_max.
    Figure1 {
        #[command(flatten)]
        params: ParamArgs,
        /// Last row (default n).
        #[arg(long)]
        k_max: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// U_k against Q_max for k = 1..n.
    Figure2 {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Every named bound at one k, or at all k = 1..n.
    Table {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long)]
        k: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Evaluate theorem predicates and thresholds, one PASS/FAIL line each.
    Check {
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, value_enum, default_value_t = Theorem::All)]
        theorem: Theorem,
        /// Threshold for the theorem-3 search (default n+1).
        #[arg(long)]
        j_max: Option<u64>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Theorem {
    Theorem1,
    Theorem2,
    Clause,
    Eq24,
    Theorem3,
    BranchSwitch,
    All,
}

#[derive(Args)]
struct ProtocolArgs {
    #[arg(long)]
    d: usize,
    /// direct or complement (default: both with --eq7, direct otherwise).
    #[arg(long)]
    variant: Option<RocketVariant>,
    /// clifford (d = 2 only) or haar; default clifford at d = 2, haar otherwise.
    #[arg(long)]
    unitaries: Option<UnitarySource>,
    /// Pairs to sample (default 50; 200 for --eq7 with haar).
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluate the coherent information of rocket ⊗ erasure at the protocol input.
    #[arg(long)]
    eq7: bool,
    /// Erasure probability for --eq7.
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StudyName {
    DirectSum,
    Platypus,
    AdditiveComplement,
}

#[derive(Args)]
struct StudyArgs {
    #[arg(value_enum)]
    name: StudyName,
    /// Dimensions for the platypus study.
    #[arg(long, value_delimiter = ',')]
    dlist: Option<Vec<usize>>,
    /// Dimensions for the additive-complement study.
    #[arg(long, value_delimiter = ',', default_value = "3,4")]
    d: Vec<usize>,
    #[arg(long, default_value_t = 2)]
    k_max: usize,
    #[command(flatten)]
    opt: OptimizerFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Command failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<QcapError> for Failure {
    fn from(e: QcapError) -> Self {
        let code = match e {
            QcapError::Parse(_) | QcapError::InvalidParameter(_) => EXIT_USAGE,
            QcapError::DimensionTooLarge { .. } => EXIT_CAP,
            _ => EXIT_VALIDITY,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure { code: 1, message: e.to_string() }
    }
}

type CmdResult = Result<u8, Failure>;

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Rounds every float in a JSON tree to the emitted precision.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            json!(round_sig(n.as_f64().unwrap_or(f64::NAN), SIGNIFICANT_DIGITS))
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(v: Value, out: Option<&PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(&round_json(v)).map_err(|e| Failure { code: 1, message: e.to_string() })?;
    emit(&(text + "\n"), out)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

fn describe_channel(ch: &Channel) -> Value {
    let f = ch.to_flagged();
    json!({
        "input_dim": f.input_dim(),
        "output_dim": f.output_dim(),
        "env_dim": f.env_dim(),
        "branches": f.len(),
    })
}

fn argmax_json(a: &Argmax) -> Value {
    match a {
        Argmax::State(rho) => json!({ "kind": "state", "eigenvalues": rho.eigenvalues() }),
        Argmax::Ensemble(ens) => json!({
            "kind": "ensemble",
            "members": ens.members().iter().map(|(p, rho)| json!({ "probability": p, "eigenvalues": rho.eigenvalues() })).collect::<Vec<_>>(),
        }),
    }
}

fn result_json(spec: &str, ch: &Channel, cfg: &OptimizerConfig, quantity: &str, r: &OptimizeResult) -> Value {
    json!({
        "quantity": quantity,
        "spec": spec,
        "channel": describe_channel(ch),
        "value": r.value,
        "best_restart": r.best_restart,
        "iterations_used": r.iterations_used,
        "converged": r.converged,
        "restarts": to_value(&r.restarts_summary),
        "argmax": argmax_json(&r.argmax),
        "config": to_value(cfg),
    })
}

fn cmd_optimize(args: &OptimizeArgs, private: bool) -> CmdResult {
    let spec = parse_channel_spec(&args.spec).map_err(QcapError::from)?;
    let ch = build(&spec)?;
    let cfg = args.opt.config();
    let (quantity, r) = if private {
        ("p1", maximize_private_information(&ch, &cfg)?)
    } else {
        ("q1", maximize_coherent_information(&ch, &cfg)?)
    };
    emit_json(result_json(&spec.to_string(), &ch, &cfg, quantity, &r), args.out.as_ref())?;
    Ok(0)
}

fn table_csv(tables: &[BoundTable]) -> String {
    let cell = |x: Option<f64>| x.map(format_number).unwrap_or_default();
    let mut out = String::from("k,U,L,Uc,Lc,U_prime,U_double_prime,f,fc,P_upper,Pc_upper,Q_next_lower,Qc_next_lower\n");
    for t in tables {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.k,
            format_number(t.u),
            format_number(t.l),
            format_number(t.uc),
            format_number(t.lc),
            format_number(t.u_prime),
            format_number(t.u_double_prime),
            cell(t.f),
            cell(t.fc),
            format_number(t.private_upper),
            format_number(t.private_upper_complement),
            cell(t.quantum_lower_next),
            cell(t.quantum_lower_next_complement),
        );
    }
    out
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run_check(params: &ParamArgs, theorem: Theorem, j_max: Option<u64>) -> Result<(String, bool), QcapError> {
    if theorem == Theorem::Theorem1 {
        let bp = BoundParams::new(params.n, params.p.unwrap_or(0.5), params.alpha)?;
        bp.require_thm1()?;
        let ok = theorem1_positive(params.n, params.alpha)?;
        let last = theorem1_gap(params.n, params.alpha, params.n)?;
        return Ok((format!("theorem1: gap(k) > 0 for 1 <= k <= {}; gap(n) = {}", params.n, format_number(last)), ok));
    }
    let bp = params.params()?;
    Ok(match theorem {
        Theorem::Theorem2 => {
            let ok = theorem2_positive(&bp)?;
            (format!("theorem2: f > 0 on 2..={n} and fc > 0 on 1..={n}", n = bp.n), ok)
        }
        Theorem::Clause => {
            let c = theorem2_clause_k1(&bp)?;
            (
                format!("clause: L(2) = {} > max P(1) upper = {}", format_number(c.lower_q2), format_number(c.upper_p1_max)),
                c.holds,
            )
        }
        Theorem::Eq24 => {
            let min_k = eq24_min_k(&bp)?;
            let shown = min_k.map(|k| k.to_string()).unwrap_or_else(|| "none".into());
            (format!("eq24: rhs = {} min_k = {shown}", format_number(eq24_rhs(&bp))), min_k.is_some())
        }
        Theorem::Theorem3 => {
            let max_k = theorem3_max_k(&bp, j_max)?;
            let detail = match max_k {
                Some(k) => format!(
                    "c({k}) = {}, c({}) = {}",
                    format_number(theorem3_c(&bp, k)?),
                    k + 1,
                    format_number(theorem3_c(&bp, k + 1)?)
                ),
                None => "no k <= k0 qualifies".into(),
            };
            let shown = max_k.map(|k| k.to_string()).unwrap_or_else(|| "none".into());
            let line = format!(
                "theorem3: k0 = {} j_max = {} {detail} max_k = {shown}",
                format_number(k0(&bp)?),
                j_max.unwrap_or(bp.n + 1)
            );
            (line, max_k.is_some())
        }
        _ => {
            let ok = branch_switch_holds(&bp)?;
            (format!("branch-switch: U(k) <= (1-2p)n^alpha iff k <= k0 = {}", format_number(k0(&bp)?)), ok)
        }
    })
}

/// One line per check. With `all`, checks whose parameter predicate fails
/// are reported as SKIP instead of aborting.
fn check_lines(params: &ParamArgs, theorem: Theorem, j_max: Option<u64>) -> Result<(Vec<String>, bool), Failure> {
    const ALL: [Theorem; 6] =
        [Theorem::Theorem1, Theorem::Theorem2, Theorem::Clause, Theorem::Eq24, Theorem::Theorem3, Theorem::BranchSwitch];
    if theorem != Theorem::All {
        let (line, ok) = run_check(params, theorem, j_max)?;
        return Ok((vec![format!("{line} {}", pass(ok))], ok));
    }
    let mut lines = Vec::new();
    let mut all_ok = true;
    for t in ALL {
        match run_check(params, t, j_max) {
            Ok((line, ok)) => {
                all_ok &= ok;
                lines.push(format!("{line} {}", pass(ok)));
            }
            Err(QcapError::Validity(msg)) => {
                let name = t.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
                lines.push(format!("{name}: SKIP ({msg})"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((lines, all_ok))
}

fn cmd_bounds(action: &BoundsAction) -> CmdResult {
    match action {
        BoundsAction::Figure1 { params, k_max, out, format } => {
            let bp = params.params()?;
            let rows = figure1_rows(&bp, k_max.unwrap_or(bp.n))?;
            let body = match format {
                Format::Csv => figure1_csv(&rows),
                Format::Json => serde_json::to_string_pretty(&round_json(to_value(&rows))).unwrap_or_default() + "\n",
            };
            emit(&body, out.as_ref())?;
            if let Some(path) = out {
                emit_json(json!({ "figure": 1, "rows": rows.len(), "out": path }), None)?;
            }
            Ok(0)
        }
        BoundsAction::Figure2 { params, out, format } => {
            let bp = params.params()?;
            let rows = figure2_rows(&bp)?;
            let body = match format {
                Format::Csv => figure2_csv(&rows),
                Format::Json => serde_json::to_string_pretty(&round_json(to_value(&rows))).unwrap_or_default() + "\n",
            };
            emit(&body, out.as_ref())?;
            let crossing = figure2_crossing(&rows);
            let summary = json!({ "figure": 2, "rows": rows.len(), "out": out, "crossing": to_value(&crossing) });
            if out.is_some() {
                emit_json(summary, None)?;
            } else {
                eprintln!("{}", round_json(summary));
            }
            Ok(0)
        }
        BoundsAction::Table { params, k, out, format } => {
            let bp = params.params()?;
            let ks: Vec<u64> = match k {
                Some(k) => vec![*k],
                None => (1..=bp.n).collect(),
            };
            let tables = ks.iter().map(|&k| lemma_b1(&bp, k)).collect::<Result<Vec<_>, _>>()?;
            match format {
                Format::Csv => emit(&table_csv(&tables), out.as_ref())?,
                Format::Json => emit_json(json!({ "params": to_value(&bp), "k0": k0(&bp)?, "rows": to_value(&tables) }), out.as_ref())?,
            }
            Ok(0)
        }
        BoundsAction::Check { params, theorem, j_max } => {
            let (lines, ok) = check_lines(params, *theorem, *j_max)?;
            for line in lines {
                println!("{line}");
            }
            Ok(if ok { 0 } else { EXIT_VERDICT })
        }
    }
}

fn cmd_protocol(args: &ProtocolArgs) -> CmdResult {
    let source = args.unitaries.unwrap_or(if args.d == 2 { UnitarySource::Clifford } else { UnitarySource::Haar });
    let exec = execution(args.sequential);
    if args.eq7 {
        let p = args.p.ok_or_else(|| Failure { code: EXIT_USAGE, message: "--eq7 needs --p".into() })?;
        let variants = match args.variant {
            Some(v) => vec![v],
            None => vec![RocketVariant::Direct, RocketVariant::Complement],
        };
        let samples = args.samples.unwrap_or(qcap::channels::DEFAULT_ROCKET_SAMPLES);
        let reports = variants
            .iter()
            .map(|&v| evaluate_eq7_variant(args.d, p, v, source, samples, args.seed, exec).map(|r| to_value(&r)))
            .collect::<Result<Vec<_>, _>>()?;
        emit_json(json!({ "eq7": reports }), args.out.as_ref())?;
        return Ok(0);
    }
    if args.p.is_some() {
        return Err(Failure { code: EXIT_USAGE, message: "--p is only used with --eq7".into() });
    }
    let variant = args.variant.unwrap_or(RocketVariant::Direct);
    let sweep = protocol_sweep(args.d, variant, source, args.samples.unwrap_or(50), args.seed, exec)?;
    emit_json(to_value(&sweep), args.out.as_ref())?;
    Ok(0)
}

fn merge_reports(mut reports: Vec<StudyReport>, key: &str, values: &[usize]) -> StudyReport {
    let mut merged = reports.remove(0);
    for r in reports {
        merged.points.extend(r.points);
        merged.verdicts.extend(r.verdicts);
        merged.notes.extend(r.notes);
    }
    merged.parameters.insert(key.into(), json!(values));
    merged
}

fn cmd_study(args: &StudyArgs) -> CmdResult {
    let cfg = args.opt.config();
    let report = match args.name {
        StudyName::DirectSum => study_direct_sum_lemma(&cfg)?,
        StudyName::Platypus => {
            let dlist = args.dlist.clone().unwrap_or_else(|| DEFAULT_PLATYPUS_DLIST.to_vec());
            study_platypus_superadditivity(&dlist, &cfg)?
        }
        StudyName::AdditiveComplement => {
            if args.d.is_empty() {
                return Err(Failure { code: EXIT_USAGE, message: "--d needs at least one value".into() });
            }
            let reports = args
                .d
                .iter()
                .map(|&d| study_additive_complement(d, args.k_max, &cfg))
                .collect::<Result<Vec<_>, _>>()?;
            merge_reports(reports, "d", &args.d)
        }
    };
    let ok = report.hard_verdicts_pass();
    let mut value = to_value(&report);
    if let Value::Object(map) = &mut value {
        map.insert("hard_verdicts_pass".into(), json!(ok));
    }
    emit_json(value, args.out.as_ref())?;
    Ok(if ok { 0 } else { EXIT_VERDICT })
}

fn apply_dim_cap() -> Result<(), Failure> {
    if let Ok(raw) = std::env::var("QCAP_DIM_CAP") {
        let cap: usize = raw.trim().parse().ok().filter(|&c| c > 0).ok_or_else(|| Failure {
            code: EXIT_USAGE,
            message: format!("QCAP_DIM_CAP must be a positive integer, got '{raw}'"),
        })?;
        set_dim_cap(cap);
    }
    Ok(())
}

fn run(cli: &Cli) -> CmdResult {
    apply_dim_cap()?;
    match &cli.command {
        Command::Q1(args) => cmd_optimize(args, false),
        Command::P1(args) => cmd_optimize(args, true),
        Command::Bounds { action } => cmd_bounds(action),
        Command::Protocol(args) => cmd_protocol(args),
        Command::Study(args) => cmd_study(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("qcap: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
