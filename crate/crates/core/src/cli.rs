//! `lt`: run axiom checks, norm bounds, cone and order-unit certificates and
//! algebra reports from JSON inputs.
//!
//! Exit codes: 0 when every asserted property holds, 1 when a checked
//! property fails (the report carries the counterexample), 2 on input or
//! usage errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::algebra::{involution, submult_entry, AlgebraElement};
use crate::axioms::{check_all, Budget, Tolerances, Verdict};
use crate::error::{LtError, Result};
use crate::lambda::LambdaSequence;
use crate::order::{
    cone_add, lambda_capital_ub, order_unit_bound, psd_falsifier, verify_block, verify_certificate,
    ConeCertificate, Falsification,
};
use crate::tensorspace::{lambda_norm_ub, min_norm, realize, Decomposition, TensorElement};

pub const SCHEMA: &str = "lt-report/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Axioms,
    Norm,
    Cone,
    Ossys,
    Algebra,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Axioms => "axioms",
            Command::Norm => "norm",
            Command::Cone => "cone",
            Command::Ossys => "ossys",
            Command::Algebra => "algebra",
        }
    }
}

#[derive(Clone, Debug, clap::Args)]
pub struct CommonArgs {
    /// λ-sequence: a JSON spec file, or `kronecker:M`, `schur:M`, `matprod:M`.
    #[arg(long)]
    pub lambda: String,
    /// Input JSON for the command.
    #[arg(long, alias = "element")]
    pub input: Option<PathBuf>,
    /// Tolerance for sampled and positivity checks.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Enumeration cap per exact check.
    #[arg(long, default_value_t = 1_000_000)]
    pub budget: u64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Largest level tried by `axioms` and `algebra`.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Check the structural conditions of a λ-sequence.
    Axioms(CommonArgs),
    /// Norm sandwich for an element and candidate decompositions.
    Norm(CommonArgs),
    /// Verify cone certificates, their sum and Λ-norm blocks.
    Cone(CommonArgs),
    /// Order-unit certificates for self-adjoint elements (two slots).
    Ossys(CommonArgs),
    /// Products, involution and submultiplicativity.
    Algebra(CommonArgs),
}

#[derive(Debug, Parser)]
#[command(name = "lt", version, about = "λ-tensor products of matrix algebras")]
struct Cli {
    #[command(subcommand)]
    sub: Sub,
}

/// Parsed invocation.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub args: CommonArgs,
}

/// Outcome of a run: exit code and report.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub code: i32,
    pub report: Value,
}

pub fn load_lambda(arg: &str) -> Result<LambdaSequence> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path)?;
        return LambdaSequence::from_json(&text);
    }
    let Some((kind, m)) = arg.split_once(':') else {
        return Err(LtError::InvalidSpec(format!("{arg}: no such file")));
    };
    let m: usize = m
        .parse()
        .map_err(|_| LtError::InvalidSpec(format!("bad arity in {arg}")))?;
    match kind {
        "kronecker" => LambdaSequence::kronecker(m),
        "schur" => LambdaSequence::schur(m),
        "matprod" | "matrix" => LambdaSequence::matprod(m),
        _ => Err(LtError::InvalidSpec(format!("unknown builtin {kind}"))),
    }
}

fn read_input<T: for<'de> Deserialize<'de>>(path: &Option<PathBuf>) -> Result<Option<T>> {
    let Some(p) = path else { return Ok(None) };
    let text = fs::read_to_string(p)?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| LtError::InvalidSpec(format!("{}: {e}", p.display())))
}

fn require_input<T: for<'de> Deserialize<'de>>(path: &Option<PathBuf>, command: &str) -> Result<T> {
    read_input(path)?.ok_or_else(|| LtError::InvalidSpec(format!("{command} needs --input")))
}

fn tolerances(tol: f64) -> Tolerances {
    Tolerances {
        exact: tol.min(Tolerances::default().exact),
        psd: tol,
    }
}

/// Input of `norm`.
#[derive(Debug, Deserialize)]
struct NormInput {
    #[serde(default)]
    element: Option<TensorElement>,
    candidates: Vec<Decomposition>,
}

/// Input of `cone`.
#[derive(Debug, Deserialize)]
struct ConeInput {
    certificates: Vec<ConeCertificate>,
    #[serde(default)]
    claimed: Vec<Option<TensorElement>>,
}

/// Input of `ossys`.
#[derive(Debug, Deserialize)]
struct OssysInput {
    elements: Vec<Decomposition>,
}

/// Input of `algebra`; without it, seeded random pairs are drawn.
#[derive(Debug, Deserialize)]
struct AlgebraInput {
    pairs: Vec<[Decomposition; 2]>,
}

fn run_axioms(lambda: &LambdaSequence, a: &CommonArgs) -> Result<(bool, Value)> {
    let budget = Budget {
        max_level: a.levels,
        trials: a.trials,
        seed: a.seed,
        cap: a.budget,
        tol: tolerances(a.tol),
        ..Budget::default()
    };
    let report = check_all(lambda, &budget);
    let ok = report.overall() != Verdict::Fail;
    Ok((ok, serde_json::to_value(&report)?))
}

fn run_norm(lambda: &LambdaSequence, a: &CommonArgs) -> Result<(bool, Value)> {
    let input: NormInput = require_input(&a.input, "norm")?;
    let element = match input.element {
        Some(e) => e,
        None => realize(
            lambda,
            input.candidates.first().ok_or(LtError::EmptyCandidates)?,
        )?,
    };
    let ub = lambda_norm_ub(lambda, &element, &input.candidates)?;
    let lower = min_norm(&element);
    let holds = lower <= ub.upper + a.tol;
    Ok((
        holds,
        json!({
            "min_norm": lower,
            "upper_bound": ub.upper,
            "best_index": ub.best_index,
            "values": ub.values,
            "best": ub.best,
            "sandwich_holds": holds,
        }),
    ))
}

fn run_cone(lambda: &LambdaSequence, a: &CommonArgs) -> Result<(bool, Value)> {
    let input: ConeInput = require_input(&a.input, "cone")?;
    if input.certificates.is_empty() {
        return Err(LtError::InvalidSpec("no certificates given".into()));
    }
    let mut ok = true;
    let mut items = Vec::new();
    for (i, cert) in input.certificates.iter().enumerate() {
        let claimed = input.claimed.get(i).cloned().flatten();
        let check = verify_certificate(lambda, cert, claimed.as_ref());
        ok &= check.valid;
        let mut item = json!({ "index": i, "check": check });
        if check.valid {
            let element = cert.realize(lambda)?;
            item["falsifier"] = match psd_falsifier(lambda, &element) {
                Ok(f) => {
                    ok &= f.verdict == Falsification::Inconclusive;
                    serde_json::to_value(f)?
                }
                Err(e) => json!({ "refused": e.to_string() }),
            };
            item["capital"] = match lambda_capital_ub(lambda, &cert.decomposition()) {
                Ok(bc) => {
                    let bcheck = verify_block(lambda, &bc);
                    ok &= bcheck.valid && bc.value <= cert.value() + a.tol;
                    json!({ "value": bc.value, "certificate_value": cert.value(), "valid": bcheck.valid })
                }
                Err(e) => json!({ "refused": e.to_string() }),
            };
        }
        items.push(item);
    }
    let mut sum = input.certificates[0].clone();
    let mut expected = sum.realize(lambda)?;
    for c in &input.certificates[1..] {
        sum = cone_add(lambda, &sum, c)?;
        expected = expected.try_add(&c.realize(lambda)?)?;
    }
    let sum_check = verify_certificate(lambda, &sum, Some(&expected));
    ok &= sum_check.valid;
    Ok((ok, json!({ "certificates": items, "sum": { "level": sum.level, "check": sum_check } })))
}

fn run_ossys(lambda: &LambdaSequence, a: &CommonArgs) -> Result<(bool, Value)> {
    let input: OssysInput = require_input(&a.input, "ossys")?;
    let mut ok = true;
    let mut items = Vec::new();
    for (i, dec) in input.elements.iter().enumerate() {
        let u = realize(lambda, dec)?;
        let ob = order_unit_bound(lambda, dec)?;
        let unit = TensorElement::identity(&u.spec).scale_real(ob.k_prime);
        let plus = unit.try_add(&u)?;
        let minus = unit.try_add(&u.scale_real(-1.0))?;
        let cp = verify_certificate(lambda, &ob.plus, Some(&plus));
        let cm = verify_certificate(lambda, &ob.minus, Some(&minus));
        let pp = plus.flat.is_psd(a.tol)?;
        let pm = minus.flat.is_psd(a.tol)?;
        let good = cp.valid && cm.valid && pp.psd && pm.psd;
        ok &= good;
        items.push(json!({
            "index": i,
            "k": ob.k,
            "k_prime": ob.k_prime,
            "plus": cp,
            "minus": cm,
            "plus_min_eig": pp.min_eig,
            "minus_min_eig": pm.min_eig,
            "ok": good,
        }));
    }
    Ok((ok, json!({ "elements": items })))
}

fn run_algebra(lambda: &LambdaSequence, a: &CommonArgs) -> Result<(bool, Value)> {
    let pairs: Vec<(AlgebraElement, AlgebraElement)> = match read_input::<AlgebraInput>(&a.input)? {
        Some(inp) => inp
            .pairs
            .into_iter()
            .map(|[x, y]| Ok((AlgebraElement::new(lambda, x)?, AlgebraElement::new(lambda, y)?)))
            .collect::<Result<_>>()?,
        None => {
            let dims = vec![2; lambda.arity()];
            let lv = a.levels.clamp(1, 2);
            (0..a.trials)
                .map(|i| {
                    let levels = (1 + i % lv, 1 + (i / lv) % lv);
                    crate::algebra::random_pair(lambda, &dims, levels, a.seed, i as u64)
                })
                .collect::<Result<_>>()?
        }
    };
    let mut ok = true;
    let mut entries = Vec::new();
    let mut refused = None;
    for (x, y) in &pairs {
        let e = submult_entry(lambda, x, y)?;
        ok &= e.holds && e.oracle_residual <= a.tol * (1.0 + x.flat.max_abs() * y.flat.max_abs());
        let mut item = serde_json::to_value(&e)?;
        match involution(lambda, x) {
            Ok(xs) => {
                let adj = (&xs.flat - &x.flat.adjoint()).max_abs();
                let dv = (xs.value() - x.value()).abs();
                ok &= adj <= a.tol && dv <= a.tol * (1.0 + x.value());
                item["involution_residual"] = json!(adj);
            }
            Err(e) => refused = Some(e.to_string()),
        }
        entries.push(item);
    }
    Ok((
        ok,
        json!({ "pairs": entries, "involution_refused": refused }),
    ))
}

/// Runs one command; never panics on bad input.
pub fn run(config: &RunConfig) -> RunOutcome {
    let a = &config.args;
    let mut report = json!({
        "schema": SCHEMA,
        "version": env!("CARGO_PKG_VERSION"),
        "command": config.command.name(),
        "seed": a.seed,
        "tolerances": tolerances(a.tol),
        "budget": { "cap": a.budget, "trials": a.trials, "levels": a.levels },
    });
    if !(a.tol > 0.0) || a.budget == 0 || a.trials == 0 || a.levels == 0 {
        report["status"] = json!("error");
        report["error"] = json!("tol must be positive; budget, trials and levels at least 1");
        return RunOutcome { code: 2, report };
    }
    let result = load_lambda(&a.lambda).and_then(|lambda| {
        report["lambda"] = json!({ "name": lambda.name(), "arity": lambda.arity(), "spec": lambda.spec() });
        match config.command {
            Command::Axioms => run_axioms(&lambda, a),
            Command::Norm => run_norm(&lambda, a),
            Command::Cone => run_cone(&lambda, a),
            Command::Ossys => run_ossys(&lambda, a),
            Command::Algebra => run_algebra(&lambda, a),
        }
    });
    match result {
        Ok((ok, body)) => {
            report["status"] = json!(if ok { "pass" } else { "fail" });
            report["result"] = body;
            RunOutcome {
                code: if ok { 0 } else { 1 },
                report,
            }
        }
        Err(e) => {
            report["status"] = json!("error");
            report["error"] = json!(e.to_string());
            RunOutcome { code: 2, report }
        }
    }
}

/// Writes through a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| LtError::InvalidSpec(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("LT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Parses `args` (including the program name), runs, writes the report.
pub fn main_with_args<I, T>(args: I) -> i32
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
    configure_threads();
    let (command, args) = match cli.sub {
        Sub::Axioms(a) => (Command::Axioms, a),
        Sub::Norm(a) => (Command::Norm, a),
        Sub::Cone(a) => (Command::Cone, a),
        Sub::Ossys(a) => (Command::Ossys, a),
        Sub::Algebra(a) => (Command::Algebra, a),
    };
    let config = RunConfig { command, args };
    let outcome = run(&config);
    let text = match serde_json::to_string_pretty(&outcome.report) {
        Ok(t) => t + "\n",
        Err(e) => {
            eprintln!("lt: {e}");
            return 2;
        }
    };
    match &config.args.out {
        Some(p) => {
            if let Err(e) = write_atomic(p, &text) {
                eprintln!("lt: cannot write {}: {e}", p.display());
                return 2;
            }
        }
        None => print!("{text}"),
    }
    if outcome.code == 2 {
        if let Some(e) = outcome.report.get("error") {
            eprintln!("lt: {}", e.as_str().unwrap_or_default());
        }
    }
    outcome.code
}

pub fn main() -> i32 {
    main_with_args(std::env::args_os())
}
