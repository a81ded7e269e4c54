//! Problem files, reports and the commands behind the `maslov-sturm` binary.

use crate::error::{Error, Result};
use crate::focal::{focal_index, FocalRecord};
use crate::integrate::integrate_fundamental;
use crate::lab;
use crate::maslov::{maslov_index_with, MaslovOptions, MaslovResult};
use crate::operator::{OperatorKind, TimeDependentOperator};
use crate::perturb::{perturbation_stability_with, PerturbOptions, PerturbationReport};
use crate::quadruple::{Precision, Quadruple};
use crate::real::{rational_from_f64, Real, DD};
use crate::spectral::{morse_equality_check, MorseReport};
use crate::symplectic::SymBilinear;
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

pub const DEFAULT_STEPS: usize = 4096;
pub const DEFAULT_TOL: f64 = 1e-9;
pub const BUILTINS: [&str; 4] = ["counterexample", "generator-loop", "harmonic", "evaporation"];

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::UnknownBuiltin(_) | Error::InvalidArgument(_) => 2,
        Error::Admissibility(_) | Error::DegenerateMetric(_) | Error::DimensionMismatch(_) => 3,
        Error::FinalInstantFocal(_) => 4,
        _ => 1,
    }
}

// ---------------------------------------------------------------- parsing

/// "p/q", integers and decimals ("-1.25e-3") as exact rationals.
pub fn parse_exact(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if s.contains('/') {
        return BigRational::from_str(s).ok();
    }
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let mut r = BigRational::from_integer(BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?);
    let e = exp - frac.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let p = (0..e.unsigned_abs()).fold(BigRational::one(), |acc, _| acc * &ten);
    r = if e >= 0 { r * p } else { r / p };
    Some(if neg { -r } else { r })
}

fn field<'a>(v: &'a Value, key: &str, path: &str) -> Result<&'a Value> {
    v.get(key).ok_or_else(|| Error::Parse(format!("{path}: missing field `{key}`")))
}

fn number_dd(v: &Value, path: &str) -> Result<DD> {
    match v {
        Value::Number(x) => x.as_f64().map(DD::from).ok_or_else(|| Error::Parse(format!("{path}: not a finite number"))),
        Value::String(s) => parse_exact(s)
            .map(|r| DD::from_rational(&r))
            .ok_or_else(|| Error::Parse(format!("{path}: cannot read `{s}` as an exact number"))),
        _ => Err(Error::Parse(format!("{path}: expected a number or an exact string"))),
    }
}

fn number(v: &Value, path: &str) -> Result<f64> {
    number_dd(v, path).map(|d| d.to_f64())
}

fn array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array().ok_or_else(|| Error::Parse(format!("{path}: expected an array")))
}

fn numbers_dd(v: &Value, len: usize, path: &str) -> Result<Vec<DD>> {
    let a = array(v, path)?;
    if a.len() != len {
        return Err(Error::Parse(format!("{path}: expected {len} entries, found {}", a.len())));
    }
    a.iter().enumerate().map(|(i, x)| number_dd(x, &format!("{path}[{i}]"))).collect()
}

fn numbers(v: &Value, len: usize, path: &str) -> Result<Vec<f64>> {
    Ok(numbers_dd(v, len, path)?.into_iter().map(|d| d.to_f64()).collect())
}

fn matrix_dd(v: &Value, n: usize, path: &str) -> Result<DMatrix<DD>> {
    Ok(DMatrix::from_row_slice(n, n, &numbers_dd(v, n * n, path)?))
}

fn operator(v: &Value, n: usize) -> Result<TimeDependentOperator> {
    let kind = field(v, "kind", "R")?.as_str().ok_or_else(|| Error::Parse("R.kind: expected a string".into()))?;
    match kind {
        "polynomial" => {
            let cs = array(field(v, "coeffs", "R")?, "R.coeffs")?;
            let coeffs = cs
                .iter()
                .enumerate()
                .map(|(k, c)| matrix_dd(c, n, &format!("R.coeffs[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            TimeDependentOperator::polynomial_dd(coeffs, n)
        }
        "rational" => {
            let ns = array(field(v, "num", "R")?, "R.num")?;
            let num = ns
                .iter()
                .enumerate()
                .map(|(k, c)| matrix_dd(c, n, &format!("R.num[{k}]")))
                .collect::<Result<Vec<_>>>()?;
            let den_v = array(field(v, "den", "R")?, "R.den")?;
            let den = den_v.iter().enumerate().map(|(k, x)| number_dd(x, &format!("R.den[{k}]"))).collect::<Result<Vec<_>>>()?;
            if num.is_empty() || den.is_empty() {
                return Err(Error::Parse("R: rational kind needs non-empty `num` and `den`".into()));
            }
            TimeDependentOperator::rational(num, den, n)
        }
        "samples" => {
            let gv = array(field(v, "grid", "R")?, "R.grid")?;
            let grid = gv.iter().enumerate().map(|(i, x)| number(x, &format!("R.grid[{i}]"))).collect::<Result<Vec<_>>>()?;
            let vv = array(field(v, "values", "R")?, "R.values")?;
            if vv.len() != grid.len() {
                return Err(Error::Parse(format!("R.values: expected {} entries, found {}", grid.len(), vv.len())));
            }
            let values = vv
                .iter()
                .enumerate()
                .map(|(i, m)| Ok(DMatrix::from_row_slice(n, n, &numbers(m, n * n, &format!("R.values[{i}]"))?)))
                .collect::<Result<Vec<_>>>()?;
            TimeDependentOperator::sampled(grid, values).map_err(|e| Error::Parse(format!("R: {e}")))
        }
        other => Err(Error::Parse(format!("R.kind: unknown kind `{other}`"))),
    }
}

/// Parse a problem file. Syntax and field errors map to `Error::Parse`;
/// a well-formed but inadmissible quadruple to `Error::Admissibility`.
pub fn parse_problem(text: &str) -> Result<Quadruple> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| Error::Parse(format!("line {} column {}: {e}", e.line(), e.column())))?;
    let n = field(&v, "n", "")?.as_u64().ok_or_else(|| Error::Parse("n: expected a positive integer".into()))? as usize;
    if n == 0 {
        return Err(Error::Parse("n: expected a positive integer".into()));
    }
    let iv = numbers(field(&v, "interval", "")?, 2, "interval")?;
    let g = DMatrix::from_row_slice(n, n, &numbers(field(&v, "g", "")?, n * n, "g")?);
    let pv = array(field(&v, "P", "")?, "P")?;
    let k = pv.len();
    let mut p = DMatrix::zeros(n, k);
    for (j, col) in pv.iter().enumerate() {
        let c = numbers(col, n, &format!("P[{j}]"))?;
        for i in 0..n {
            p[(i, j)] = c[i];
        }
    }
    let s = DMatrix::from_row_slice(k, k, &numbers(field(&v, "S", "")?, k * k, "S")?);
    let r = operator(field(&v, "R", "")?, n)?;
    let precision = match v.get("precision").map(|p| p.as_str()) {
        None | Some(Some("f64")) => Precision::F64,
        Some(Some("dd")) => Precision::DoubleDouble,
        _ => return Err(Error::Parse("precision: expected \"f64\" or \"dd\"".into())),
    };
    let q = Quadruple::new(SymBilinear::new(g), r, p, SymBilinear::new(s), (iv[0], iv[1]))?;
    Ok(q.with_precision(precision))
}

pub fn read_problem(path: &Path) -> Result<Quadruple> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

// ---------------------------------------------------------------- emission

/// A number as JSON: plain when it is a double, an exact "p/q" string otherwise.
fn dd_json(x: DD) -> Value {
    if x.lo == 0.0 {
        json!(x.hi)
    } else {
        let r = rational_from_f64(x.hi) + rational_from_f64(x.lo);
        Value::String(if r.denom().is_one() { r.numer().to_string() } else { format!("{}/{}", r.numer(), r.denom()) })
    }
}

fn row_major_dd(m: &DMatrix<DD>) -> Value {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(dd_json(m[(i, j)]));
        }
    }
    Value::Array(out)
}

fn row_major(m: &DMatrix<f64>) -> Value {
    row_major_dd(&m.map(DD::from))
}

pub fn problem_json(q: &Quadruple) -> Value {
    let r = match &q.r.kind {
        OperatorKind::Polynomial { coeffs } => {
            json!({"kind": "polynomial", "coeffs": coeffs.iter().map(row_major_dd).collect::<Vec<_>>()})
        }
        OperatorKind::Rational { num, den } => json!({
            "kind": "rational",
            "num": num.iter().map(row_major_dd).collect::<Vec<_>>(),
            "den": den.iter().map(|&d| dd_json(d)).collect::<Vec<_>>(),
        }),
        OperatorKind::Sampled { grid, values, .. } => json!({
            "kind": "samples",
            "grid": grid,
            "values": values.iter().map(row_major).collect::<Vec<_>>(),
        }),
    };
    let p: Vec<Value> = (0..q.k()).map(|j| json!(q.p_basis.column(j).iter().cloned().collect::<Vec<f64>>())).collect();
    let mut v = json!({
        "n": q.n(),
        "interval": [q.a, q.b],
        "g": row_major(q.g.matrix()),
        "P": p,
        "S": row_major(q.s.matrix()),
        "R": r,
    });
    if q.precision == Precision::DoubleDouble {
        v["precision"] = json!("dd");
    }
    v
}

/// Compact JSON with sorted keys (serde_json orders object keys).
pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("values serialize");
    s.push('\n');
    s
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub steps: usize,
    pub tol: f64,
    pub spectral: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions { steps: DEFAULT_STEPS, tol: DEFAULT_TOL, spectral: false }
    }
}

pub struct Analysis {
    pub report: Value,
    pub maslov: MaslovResult,
    pub spectral: Option<MorseReport>,
}

fn record_json(r: &FocalRecord) -> Value {
    json!({"t": r.t, "multiplicity": r.multiplicity, "signature": r.signature, "degenerate": r.degenerate_flag})
}

pub fn analyze(id: &str, q: &Quadruple, o: &AnalyzeOptions) -> Result<Analysis> {
    if o.steps < 16 {
        return Err(Error::InvalidArgument(format!("--steps {} < 16", o.steps)));
    }
    if !(o.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("--tol {} must be positive", o.tol)));
    }
    let t0 = Instant::now();
    let path = integrate_fundamental(q, o.steps)?;
    let t_int = t0.elapsed().as_secs_f64();
    let mut mo = MaslovOptions::default();
    mo.focal.tol_rank = o.tol.max(1e-14);
    let t1 = Instant::now();
    let m = maslov_index_with(q, &path, &mo)?;
    let t_mas = t1.elapsed().as_secs_f64();
    let i_foc = focal_index(&m.records);
    let t2 = Instant::now();
    let spectral = if o.spectral { Some(morse_equality_check(q)?) } else { None };
    let t_spec = t2.elapsed().as_secs_f64();
    let mult: usize = m.records.iter().map(|r| r.multiplicity).sum();
    let spec_json = spectral.as_ref().map(|s| {
        json!({
            "i_spec": s.i_spec,
            "lambda_maslov": s.lambda_maslov,
            "lambda_floor": s.lambda_floor,
            "abstained": s.abstained,
            "eigenvalues": s.eigenpoints.iter().map(|p| json!({
                "lambda": p.lambda, "dim": p.dim, "signature": p.signature, "degenerate": p.degenerate_flag,
            })).collect::<Vec<_>>(),
        })
    });
    let mut agreement = json!({
        "i_foc_equals_mu": i_foc == m.mu,
        "signature_sum_equals_mu": m.agreement_flag,
        "bound_holds": m.mu.unsigned_abs() as usize <= mult,
    });
    if let Some(s) = &spectral {
        agreement["i_spec_equals_mu"] = json!(s.spec_equals_mu);
    }
    let report = json!({
        "problem": id,
        "n": q.n(),
        "interval": [q.a, q.b],
        "focal_records": m.records.iter().map(record_json).collect::<Vec<_>>(),
        "any_degenerate": m.records.iter().any(|r| r.degenerate_flag),
        "i_foc": i_foc,
        "mu": m.mu,
        "signature_sum": m.signature_sum,
        "bound": m.bound,
        "epsilon_start": m.epsilon_start,
        "segments": m.segments.iter().map(|s| json!({
            "t_start": s.t_start, "t_end": s.t_end, "n_plus_start": s.n_plus_start, "n_plus_end": s.n_plus_end,
        })).collect::<Vec<_>>(),
        "spectral": spec_json,
        "agreement": agreement,
        "tolerances": {
            "steps": o.steps,
            "tol": o.tol,
            "tol_rank": mo.focal.tol_rank,
            "inertia": mo.tol,
            "precision": if q.precision == Precision::DoubleDouble { "dd" } else { "f64" },
        },
        "diagnostics": {"max_drift": path.max_drift, "max_lagrange_residual": path.max_lagrange_residual},
        "runtime": {"integrate_s": t_int, "maslov_s": t_mas, "spectral_s": t_spec},
    });
    Ok(Analysis { report, maslov: m, spectral })
}

/// The report without wall-clock fields (for reproducibility comparisons).
pub fn normalized(report: &Value) -> Value {
    let mut r = report.clone();
    if let Some(o) = r.as_object_mut() {
        o.remove("runtime");
    }
    r
}

pub fn trace_csv(m: &MaslovResult) -> String {
    let mut s = String::from("t,det_A,n_plus_in_current_chart,segment_id\n");
    for row in &m.trace {
        s.push_str(&format!("{},{},{},{}\n", row.t, row.det_a, row.n_plus, row.segment_id));
    }
    s
}

fn file_id(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "problem".into())
}

/// `analyze`: report to `out` (trace next to it as .csv) or to stdout.
pub fn cmd_analyze(file: &Path, o: &AnalyzeOptions, out: Option<&Path>) -> Result<String> {
    let q = read_problem(file)?;
    let a = analyze(&file_id(file), &q, o)?;
    let text = to_json_string(&a.report);
    if let Some(out) = out {
        write_file(out, &text)?;
        write_file(&out.with_extension("csv"), &trace_csv(&a.maslov))?;
    }
    Ok(text)
}

// ---------------------------------------------------------------- perturb

pub fn perturbation_json(r: &PerturbationReport) -> Value {
    serde_json::to_value(r).expect("report serializes")
}

pub fn perturbation_table(r: &PerturbationReport) -> String {
    let opt = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut s = String::from("trial,mu,i_foc,status\n");
    for t in &r.trials {
        let status = t.skipped.clone().unwrap_or_else(|| "ok".into()).replace(',', ";");
        s.push_str(&format!("{},{},{},{}\n", t.trial, opt(t.mu), opt(t.i_foc), status));
    }
    s.push_str(&format!(
        "# epsilon={} seed={} baseline_mu={} baseline_i_foc={} admissible={} skipped={} mu_unchanged={} i_foc_equals_mu={}\n",
        r.epsilon, r.seed, r.baseline_mu, r.baseline_i_foc, r.admissible, r.skipped, r.mu_unchanged, r.i_foc_equals_mu
    ));
    s
}

pub fn cmd_perturb(file: &Path, epsilon: f64, trials: usize, seed: u64, o: &PerturbOptions) -> Result<PerturbationReport> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidArgument(format!("--epsilon {epsilon} must be non-negative")));
    }
    let q = read_problem(file)?;
    perturbation_stability_with(&q, epsilon, trials, seed, o)
}

// ---------------------------------------------------------------- builtins

pub fn harmonic_quadruple() -> Quadruple {
    Quadruple::new(
        SymBilinear::identity(1),
        TimeDependentOperator::constant(DMatrix::from_element(1, 1, -1.0)),
        DMatrix::zeros(1, 0),
        SymBilinear::zeros(0),
        (0.0, 3.5),
    )
    .expect("admissible")
}

/// Problems behind a builtin name (the generator loop is a curve of
/// Lagrangians, not a quadruple, and has none).
pub fn builtin_problems(name: &str) -> Result<Vec<(String, Quadruple)>> {
    match name {
        "harmonic" => Ok(vec![("harmonic".into(), harmonic_quadruple())]),
        "counterexample" => Ok(vec![("counterexample".into(), lab::counterexample_quadruple()?.0)]),
        "evaporation" => Ok(vec![
            ("evaporation".into(), lab::evaporation_quadruple()?),
            ("evaporation-perturbed".into(), lab::evaporation_perturbed(EVAPORATION_DELTA, 4000)?),
        ]),
        "generator-loop" => Ok(vec![]),
        other => Err(Error::UnknownBuiltin(other.into())),
    }
}

pub const EVAPORATION_DELTA: f64 = 1e-3;

fn generator_loop_report() -> Result<Value> {
    let mut forward = serde_json::Map::new();
    let mut reversed = serde_json::Map::new();
    for n in 1..=3 {
        let l = lab::generator_loop(n)?;
        forward.insert(n.to_string(), json!(l.maslov(0.0, 0.7, 256, 0)?));
        reversed.insert(n.to_string(), json!(l.maslov(0.7, 0.0, 256, 0)?));
    }
    Ok(json!({"problem": "generator-loop", "interval": [0.0, 0.7], "mu": forward, "mu_reversed": reversed}))
}

/// Write `<name>.json` problem files, `<name>.report.json` reports and
/// `<name>.csv` traces into `dir`; returns the written paths.
pub fn cmd_builtin(name: &str, dir: &Path, o: &AnalyzeOptions) -> Result<Vec<PathBuf>> {
    let problems = builtin_problems(name)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    if name == "generator-loop" {
        let p = dir.join("generator-loop.report.json");
        write_file(&p, &to_json_string(&generator_loop_report()?))?;
        written.push(p);
        return Ok(written);
    }
    for (id, q) in problems {
        let pf = dir.join(format!("{id}.json"));
        write_file(&pf, &to_json_string(&problem_json(&q)))?;
        // analyze the file as written, so the report is reproducible from it
        let q = read_problem(&pf)?;
        let opts = AnalyzeOptions { spectral: o.spectral || id == "harmonic", ..*o };
        let a = analyze(&id, &q, &opts)?;
        let rp = dir.join(format!("{id}.report.json"));
        write_file(&rp, &to_json_string(&a.report))?;
        let cp = dir.join(format!("{id}.csv"));
        write_file(&cp, &trace_csv(&a.maslov))?;
        written.extend([pf, rp, cp]);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_numbers() {
        assert_eq!(parse_exact("3/4"), Some(BigRational::new(3.into(), 4.into())));
        assert_eq!(parse_exact("-1.25e-1"), Some(BigRational::new((-1).into(), 8.into())));
        assert_eq!(parse_exact("12"), Some(BigRational::from_integer(12.into())));
        assert_eq!(parse_exact("1e3"), Some(BigRational::from_integer(1000.into())));
        assert!(parse_exact("x").is_none() && parse_exact("").is_none() && parse_exact("1.2.3").is_none());
        assert!(parse_exact("1/0").is_none() || parse_exact("1/0").map(|r| r.is_integer()).unwrap_or(true));
    }

    #[test]
    fn dd_json_round_trips() {
        let x = DD::from_rational(&BigRational::new(1.into(), 3.into()));
        let v = dd_json(x);
        assert!(v.is_string());
        assert_eq!(number_dd(&v, "x").unwrap(), x);
        assert_eq!(dd_json(DD::from(0.5)), json!(0.5));
    }

    #[test]
    fn parse_errors_are_addressed() {
        let e = parse_problem("{\"n\": 1,").unwrap_err();
        assert!(matches!(e, Error::Parse(ref m) if m.starts_with("line 1")), "{e}");
        let bad = r#"{"n":2,"interval":[0,1],"g":[1,0,0,1],"P":[],"S":[],"R":{"kind":"polynomial","coeffs":[[1,2,3]]}}"#;
        let e = parse_problem(bad).unwrap_err();
        assert!(matches!(e, Error::Parse(ref m) if m.contains("R.coeffs[0]")), "{e}");
        let asym = r#"{"n":2,"interval":[0,1],"g":[1,0,0,1],"P":[],"S":[],"R":{"kind":"polynomial","coeffs":[[0,1,0,0]]}}"#;
        assert_eq!(exit_code(&parse_problem(asym).unwrap_err()), 3);
        let kind = r#"{"n":1,"interval":[0,1],"g":[1],"P":[],"S":[],"R":{"kind":"spline"}}"#;
        assert!(matches!(parse_problem(kind), Err(Error::Parse(_))));
    }

    #[test]
    fn problem_json_round_trip() {
        let q = harmonic_quadruple();
        let back = parse_problem(&to_json_string(&problem_json(&q))).unwrap();
        assert_eq!(back, q);
        let (ce, _) = lab::counterexample_quadruple().unwrap();
        let back = parse_problem(&to_json_string(&problem_json(&ce))).unwrap();
        assert_eq!(back, ce);
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(builtin_problems("nope"), Err(Error::UnknownBuiltin(_))));
    }
}
