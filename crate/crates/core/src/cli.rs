//! `cpcomp` command-line front end.
//!
//! Exit codes: 0 for a definitive answer, 2 when a check ran out of budget
//! without deciding, 1 for any error including usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{self, BoundResult, Variant};
use crate::checker::{check_finite, check_unique, CheckerLimits, FiniteVerdict, RequiredCount, UniqueVerdict};
use crate::constraint::{build_constraint_tensor, check_assumption1, default_basis, BasisChoice, ConstraintTensor};
use crate::error::{Error, Result};
use crate::experiment::{self, ExperimentConfig, GenConfig};
use crate::oracle::{generic_jacobian_rank, OracleMode, OracleOptions, QBlock};
use crate::pattern::{format_pattern, read_pattern, SamplingPattern};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;

/// Environment variable read for `--seed` when the flag is absent.
pub const SEED_ENV: &str = "CPCOMP_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "cpcomp",
    version,
    about = "Finite and unique completability of sampled low-CP-rank tensors",
    long_about = "Decides finite and unique completability of a partially observed tensor of \
given CP rank from its sampling pattern alone, cross-checks verdicts with an exact \
generic Jacobian rank over GF(2^31 - 1), and evaluates sample-complexity bounds.\n\n\
Pattern files start with `dims: n_1 ... n_d`, followed by one whitespace-separated \
tuple per line (0-based unless --one-based) or by a dense 0/1 body in mixed-radix \
order with the first mode most significant. Lines starting with `#` are ignored.\n\n\
Exit codes: 0 definitive, 2 inconclusive, 1 error."
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Combinatorial test for finite completability.
    CheckFinite(CheckArgs),
    /// Sufficient combinatorial test for unique completability.
    CheckUnique(CheckArgs),
    /// Build the constraint tensor and write it as a pattern file.
    Constraint(ConstraintArgs),
    /// Exact generic Jacobian ranks of the sample map.
    Oracle(OracleArgs),
    /// Evaluate one sample-complexity bound (JSON).
    Bounds(BoundsArgs),
    /// Unfolding vs CP sample totals over a rank range (CSV).
    Figure1(Figure1Args),
    /// Draw a Bernoulli sampling pattern.
    Gen(GenArgs),
    /// Monte-Carlo completability sweep over a grid of p (CSV).
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
struct PatternInput {
    /// Pattern file.
    pattern: PathBuf,
    /// Read and write tuple coordinates starting at 1.
    #[arg(long)]
    one_based: bool,
    /// CP rank.
    #[arg(long, short)]
    rank: usize,
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    input: PatternInput,
    /// Basis entries per last-mode row, as a pattern file over the same dims.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Search budgets: `exhaustive[,search[,random]]`.
    #[arg(long, value_parser = parse_limits)]
    limits: Option<CheckerLimits>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Machine-readable output.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ConstraintArgs {
    #[command(flatten)]
    input: PatternInput,
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Write the tensor here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Write the slice-to-row mapping here.
    #[arg(long)]
    sidecar: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Reduced,
    Full,
    Variety,
    All,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum QArg {
    Generic,
    Identity,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    input: PatternInput,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    /// Random evaluation points; the maximum rank is reported.
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Fixed block of the canonical pattern.
    #[arg(long, value_enum, default_value_t = QArg::Generic)]
    q_block: QArg,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundKind {
    /// Rank-k matrix with n rows and N columns.
    Matrix,
    /// Unfolding with |I| row modes.
    Unfolding,
    CpFinite,
    CpUnique,
    /// Per-entry sampling probability, finite variant.
    PFinite,
    /// Per-entry sampling probability, unique variant.
    PUnique,
}

#[derive(Debug, Args)]
struct BoundsArgs {
    #[arg(long, value_enum)]
    kind: BoundKind,
    #[arg(long)]
    n: f64,
    /// Tensor order.
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// Rank (k for the matrix bound).
    #[arg(long)]
    r: f64,
    #[arg(long)]
    eps: f64,
    /// Row-mode count for the unfolding bound; defaults to the best one.
    #[arg(long)]
    isize: Option<usize>,
    /// Column count N for the matrix bound; defaults to n.
    #[arg(long)]
    columns: Option<f64>,
    /// Also report the smallest integer counts exceeding the thresholds.
    #[arg(long)]
    integer: bool,
}

#[derive(Debug, Args)]
struct Figure1Args {
    #[arg(long, default_value_t = 1000.0)]
    n: f64,
    #[arg(long, default_value_t = 7)]
    d: usize,
    #[arg(long, default_value_t = 0.001)]
    eps: f64,
    #[arg(long, default_value_t = 1)]
    rmin: usize,
    #[arg(long, default_value_t = 150)]
    rmax: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenArgs {
    /// Comma-separated dims, e.g. `8,8,8`.
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long)]
    p: f64,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Top up last-mode rows holding fewer than --rank entries.
    #[arg(long, requires = "rank")]
    enforce_assumption1: bool,
    #[arg(long, short)]
    rank: Option<usize>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CheckerArg {
    OracleReduced,
    OracleFull,
    Combinatorial,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    dims: Vec<usize>,
    #[arg(long, short)]
    rank: usize,
    /// Explicit comma-separated grid; overrides the start/stop/step triple.
    #[arg(long, value_delimiter = ',')]
    p_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    p_start: f64,
    #[arg(long, default_value_t = 0.95)]
    p_stop: f64,
    #[arg(long, default_value_t = 0.05)]
    p_step: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = CheckerArg::OracleReduced)]
    checker: CheckerArg,
    #[arg(long)]
    enforce_assumption1: bool,
    #[arg(long, value_parser = parse_limits)]
    limits: Option<CheckerLimits>,
    /// Evaluation points per oracle call.
    #[arg(long, default_value_t = 2)]
    oracle_trials: usize,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_limits(s: &str) -> std::result::Result<CheckerLimits, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() > 3 {
        return Err("expected at most three comma-separated budgets".into());
    }
    let mut values = parts.iter().map(|p| p.parse::<usize>().map_err(|e| format!("`{p}`: {e}")));
    let mut limits = CheckerLimits::default();
    limits.max_subset_exhaustive = values.next().transpose()?.unwrap_or(limits.max_subset_exhaustive);
    if let Some(v) = values.next().transpose()? {
        limits.max_candidate_search = v;
    }
    if let Some(v) = values.next().transpose()? {
        limits.random_samples = v;
    }
    if limits.max_subset_exhaustive > 30 {
        return Err("exhaustive budget above 30 would enumerate over a billion subsets".into());
    }
    Ok(limits)
}

/// Parses `argv` (program name first), runs the command, and returns the
/// process exit code. Output goes to the given writers.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_ERROR
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::CheckFinite(a) => check_finite_cmd(a, out),
        Command::CheckUnique(a) => check_unique_cmd(a, out),
        Command::Constraint(a) => constraint_cmd(a, out),
        Command::Oracle(a) => oracle_cmd(a, out),
        Command::Bounds(a) => bounds_cmd(a, out),
        Command::Figure1(a) => figure1_cmd(a, out),
        Command::Gen(a) => gen_cmd(a, out, err),
        Command::Experiment(a) => experiment_cmd(a, out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn emit_to(path: Option<&Path>, out: &mut dyn Write, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(io_err(p)),
        None => emit(out, text),
    }
}

fn emit_json<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialize");
    emit(out, &format!("{text}\n"))
}

/// Pattern plus its constraint tensor, or the Assumption-1 failure that
/// prevents building one.
struct Prepared {
    pattern: SamplingPattern,
    rank: usize,
    tensor: std::result::Result<ConstraintTensor, (usize, usize)>,
}

fn prepare(input: &PatternInput, basis: Option<&Path>) -> Result<Prepared> {
    let pattern = read_pattern(&input.pattern, input.one_based)?;
    let rank = input.rank;
    if rank == 0 {
        return Err(Error::InvalidRank);
    }
    if let Some(f) = check_assumption1(&pattern, rank).first_failure() {
        return Ok(Prepared {
            pattern,
            rank,
            tensor: Err((f.row, f.observed)),
        });
    }
    let basis = match basis {
        Some(path) => {
            let file = read_pattern(path, input.one_based)?;
            if file.dims() != pattern.dims() {
                return Err(Error::InvalidBasis(format!(
                    "basis dims {:?} differ from pattern dims {:?}",
                    file.dims(),
                    pattern.dims()
                )));
            }
            BasisChoice::from_tuples(&pattern, rank, file.observed())?
        }
        None => default_basis(&pattern, rank)?,
    };
    let tensor = build_constraint_tensor(&pattern, rank, &basis)?;
    Ok(Prepared {
        pattern,
        rank,
        tensor: Ok(tensor),
    })
}

fn header(p: &Prepared) -> Value {
    let d = p.pattern.order();
    json!({
        "dims": p.pattern.dims(),
        "rank": p.rank,
        "observed": p.pattern.len(),
        "required_count": RequiredCount::new(&p.pattern.dims()[..d - 1], p.rank).value(),
        "slices": p.tensor.as_ref().map(|t| t.len()).ok(),
    })
}

fn merge(mut base: Value, extra: Value) -> Value {
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

fn check_finite_cmd(a: CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let p = prepare(&a.input, a.basis.as_deref())?;
    let limits = CheckerLimits {
        seed: a.seed,
        ..a.limits.unwrap_or_default()
    };
    let verdict = match &p.tensor {
        Ok(ct) => check_finite(ct, &limits),
        Err((row, observed)) => FiniteVerdict::NotFinite {
            reason: crate::checker::NotFiniteReason::Assumption1 {
                row: *row,
                observed: *observed,
            },
        },
    };
    let shift = usize::from(a.input.one_based);
    if a.json {
        let v = serde_json::to_value(&verdict).expect("verdict serializes");
        emit_json(out, &merge(header(&p), v))?;
    } else {
        let line = match &verdict {
            FiniteVerdict::Finite { witness } => format!("finite\nwitness slices: {}", join_ids(witness, shift)),
            FiniteVerdict::NotFinite { reason } => format!("not finite\nreason: {reason:?}"),
            FiniteVerdict::Inconclusive { nodes } => {
                format!("inconclusive\nsearch stopped after {nodes} nodes; raise --limits")
            }
        };
        emit(out, &format!("{line}\n"))?;
    }
    Ok(if verdict.is_conclusive() { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn check_unique_cmd(a: CheckArgs, out: &mut dyn Write) -> Result<i32> {
    let p = prepare(&a.input, a.basis.as_deref())?;
    let limits = CheckerLimits {
        seed: a.seed,
        ..a.limits.unwrap_or_default()
    };
    let verdict = match &p.tensor {
        Ok(ct) => check_unique(ct, &limits),
        Err((row, observed)) => UniqueVerdict::NotApplicable {
            reason: format!("row {row} holds {observed} observations, fewer than rank {}", p.rank),
        },
    };
    let shift = usize::from(a.input.one_based);
    if a.json {
        let v = serde_json::to_value(&verdict).expect("verdict serializes");
        emit_json(out, &merge(header(&p), v))?;
    } else {
        let text = match &verdict {
            UniqueVerdict::Unique { witness } => {
                let mut s = format!("unique\nfinite part: {}\n", join_ids(&witness.finite_part, shift));
                for (i, e) in witness.extras.iter().enumerate() {
                    s.push_str(&format!("extra {i}: {}\n", join_ids(e, shift)));
                }
                s
            }
            UniqueVerdict::Inconclusive { reason } => format!("inconclusive\nreason: {reason}\n"),
            UniqueVerdict::NotApplicable { reason } => format!("not unique\nreason: {reason}\n"),
        };
        emit(out, &text)?;
    }
    Ok(if verdict.is_conclusive() { EXIT_OK } else { EXIT_INCONCLUSIVE })
}

fn join_ids(ids: &[usize], shift: usize) -> String {
    ids.iter().map(|i| (i + shift).to_string()).collect::<Vec<_>>().join(" ")
}

fn constraint_cmd(a: ConstraintArgs, out: &mut dyn Write) -> Result<i32> {
    let p = prepare(&a.input, a.basis.as_deref())?;
    let ct = p.tensor.map_err(|(row, observed)| Error::Assumption1Violated {
        row,
        observed,
        rank: p.rank,
    })?;
    emit_to(a.out.as_deref(), out, &ct.to_pattern_text(a.input.one_based))?;
    if let Some(path) = &a.sidecar {
        std::fs::write(path, ct.sidecar_text(a.input.one_based)).map_err(io_err(path))?;
    }
    Ok(EXIT_OK)
}

fn oracle_cmd(a: OracleArgs, out: &mut dyn Write) -> Result<i32> {
    let pattern = read_pattern(&a.input.pattern, a.input.one_based)?;
    let mode = match a.mode {
        ModeArg::Reduced => OracleMode::Reduced,
        ModeArg::Full => OracleMode::Full,
        ModeArg::Variety => OracleMode::Variety,
        ModeArg::All => OracleMode::All,
    };
    let opts = OracleOptions {
        trials: a.trials,
        seed: a.seed,
        q_block: match a.q_block {
            QArg::Generic => QBlock::Generic,
            QArg::Identity => QBlock::Identity,
        },
    };
    let report = generic_jacobian_rank(&pattern, a.input.rank, mode, &opts)?;
    if a.json {
        emit_json(out, &report)?;
    } else {
        let show = |v: Option<i64>| v.map_or("-".to_string(), |x| x.to_string());
        let verdict = |v: Option<bool>| match v {
            Some(true) => "finite",
            Some(false) => "not finite",
            None => "-",
        };
        let text = format!(
            "required count: {}\nreduced rank:   {}\nfull rank:      {}\nvariety rank:   {}\n\
             reduced verdict: {}\nvariety verdict: {}\nstable across trials: {}\n",
            report.required_count,
            show(report.reduced_rank),
            show(report.full_rank.map(|x| x as i64)),
            show(report.variety_rank.map(|x| x as i64)),
            verdict(report.verdict_paper),
            verdict(report.verdict_variety),
            report.stable,
        );
        emit(out, &text)?;
    }
    Ok(EXIT_OK)
}

fn with_integer(mut v: Value, l: f64, columns: f64) -> Value {
    let per_column = bounds::strict_integer(l);
    if let Some(o) = v.as_object_mut() {
        o.insert("integer_per_column_l".into(), json!(per_column));
        o.insert("integer_total_samples".into(), json!(per_column * columns));
    }
    v
}

fn bounds_cmd(a: BoundsArgs, out: &mut dyn Write) -> Result<i32> {
    let count = |b: BoundResult, a: &BoundsArgs| -> Value {
        let (l, cols) = (b.per_column_l, b.columns);
        let v = json!({
            "in_regime": b.in_regime(),
            "per_column_l": b.per_column_l,
            "total_samples": b.total_samples,
            "columns": b.columns,
            "probability_lower_bound": b.probability_lower_bound,
            "applicability": b.applicability,
        });
        if a.integer { with_integer(v, l, cols) } else { v }
    };
    let value = match a.kind {
        BoundKind::Matrix => count(bounds::matrix_bound(a.n, a.columns.unwrap_or(a.n), a.r, a.eps)?, &a),
        BoundKind::Unfolding => {
            let isize = a.isize.unwrap_or_else(|| bounds::best_unfolding_isize(a.d));
            merge(json!({ "isize": isize }), count(bounds::unfolding_bound(a.n, a.d, a.r, a.eps, isize)?, &a))
        }
        BoundKind::CpFinite => count(bounds::cp_finite_bound(a.n, a.d, a.r, a.eps)?, &a),
        BoundKind::CpUnique => count(bounds::cp_unique_bound(a.n, a.d, a.r, a.eps)?, &a),
        BoundKind::PFinite | BoundKind::PUnique => {
            let variant = if matches!(a.kind, BoundKind::PFinite) { Variant::Finite } else { Variant::Unique };
            let s = bounds::sampling_probability_bound(a.n, a.d, a.r, a.eps, variant)?;
            let mut v = serde_json::to_value(&s).expect("bound serializes");
            if let Some(o) = v.as_object_mut() {
                o.insert("in_regime".into(), json!(s.applicability.iter().all(|c| c.holds)));
            }
            v
        }
    };
    emit_json(out, &value)?;
    Ok(EXIT_OK)
}

fn figure1_cmd(a: Figure1Args, out: &mut dyn Write) -> Result<i32> {
    let rows = bounds::figure1_table(a.n, a.d, a.rmin, a.rmax, a.eps)?;
    emit_to(a.out.as_deref(), out, &bounds::figure1_csv(&rows))?;
    Ok(EXIT_OK)
}

fn gen_cmd(a: GenArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let generated = experiment::generate_pattern(&GenConfig {
        dims: a.dims,
        p: a.p,
        seed: a.seed,
        enforce_assumption1: a.enforce_assumption1,
        rank: a.rank.unwrap_or(1),
    })?;
    emit_to(a.out.as_deref(), out, &format_pattern(&generated.pattern))?;
    if a.enforce_assumption1 {
        let _ = writeln!(err, "forced entries: {}", generated.forced);
    }
    Ok(EXIT_OK)
}

fn experiment_cmd(a: ExperimentArgs, out: &mut dyn Write) -> Result<i32> {
    let grid = match a.p_grid {
        Some(g) => g,
        None => experiment::linear_grid(a.p_start, a.p_stop, a.p_step)?,
    };
    let mut cfg = ExperimentConfig::new(a.dims, a.rank, grid, a.trials, a.seed);
    cfg.checker = match a.checker {
        CheckerArg::OracleReduced => experiment::Checker::OracleReduced,
        CheckerArg::OracleFull => experiment::Checker::OracleFull,
        CheckerArg::Combinatorial => experiment::Checker::Combinatorial,
    };
    cfg.enforce_assumption1 = a.enforce_assumption1;
    cfg.limits = a.limits.unwrap_or_default();
    cfg.oracle_trials = a.oracle_trials;
    let rows = experiment::run_experiment(&cfg)?;
    emit_to(a.out.as_deref(), out, &experiment::experiment_csv(&rows))?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verify_cli() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn limits_grammar() {
        let l = parse_limits("12").unwrap();
        assert_eq!(l.max_subset_exhaustive, 12);
        assert_eq!(l.max_candidate_search, CheckerLimits::default().max_candidate_search);
        let l = parse_limits("10,500,7").unwrap();
        assert_eq!((l.max_subset_exhaustive, l.max_candidate_search, l.random_samples), (10, 500, 7));
        assert!(parse_limits("1,2,3,4").is_err());
        assert!(parse_limits("x").is_err());
        assert!(parse_limits("40").is_err());
    }
}
