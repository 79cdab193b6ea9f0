//! Batch front-end: `gdft <command> --config <path> --out <path>`.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
//! 3 infeasible input (density outside the domain, state off the facet).

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use itertools::Itertools;
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::abelian::{facet_theory, representable_polytope, weight_decomposition};
use crate::boundary::{
    abelian_boundary_force, finite_difference_force, nonabelian_boundary_force, parse_eps_list, BoundaryForceQuery,
    BoundaryForceResult, DEFAULT_EPS,
};
use crate::error::{Error, Result};
use crate::geometry::{FacetInequality, Polytope};
use crate::liegroup::{
    builtin_algebra, classify_facets, dimer_algebra, facet_theory_nonabelian, kirwan_polytope_seeded, momentum_theory,
    qubit_qutrit_interaction, rep_weights, AlgebraSpec, QubitQutritCouplings,
};
use crate::search::{ensemble_functional, pure_functional, SearchOptions, SearchResult};
use crate::theory::{
    build_theory, matrix_from_json, ComplexMatrixJson, DensityVector, FunctionalTheoryModel, HermitianOperator,
    QuantumState, TheoryConfig, TheoryKind,
};
use crate::verify;

const GRID_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Domain,
    FunctionalGrid,
    Gradfield,
    BoundaryForce,
    Kirwan,
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "gdft", version, about = "Generalized ground-state functional theory toolkit")]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub multistarts: Option<usize>,
    #[arg(long = "eps-list")]
    pub eps_list: Option<String>,
}

/// Configuration file: either a bare theory or a theory with algebra and parameters.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub theory: Option<TheoryConfig>,
    #[serde(default)]
    pub algebra: Option<AlgebraSpec>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if value.get("kind").is_some() {
            let theory: TheoryConfig = serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
            return Ok(Self { theory: Some(theory), ..Self::default() });
        }
        serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn theory(&self) -> Result<&TheoryConfig> {
        self.theory.as_ref().ok_or_else(|| Error::Config("missing key \"theory\"".into()))
    }

    fn param<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<Option<T>> {
        self.params
            .get(key)
            .map(|v| serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("param \"{key}\": {e}"))))
            .transpose()
    }

    fn require<T: for<'de> Deserialize<'de>>(&self, key: &str) -> Result<T> {
        self.param(key)?.ok_or_else(|| Error::Config(format!("missing param \"{key}\"")))
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::Io(_)
        | Error::Csv(_)
        | Error::NonHermitianInput(_)
        | Error::DimensionMismatch { .. }
        | Error::LinearlyDependentBasis { .. }
        | Error::InvalidArgument(_)
        | Error::UnsupportedAlgebra(_) => 1,
        Error::NotRepresentable(_)
        | Error::NotInRelativeInterior
        | Error::NotOnFacet(_)
        | Error::EmptyFacet
        | Error::CriticalFacetPoint => 3,
        _ => 2,
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Full-precision scientific notation (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn configure_workers() -> Result<()> {
    if let Ok(raw) = std::env::var("GDFT_WORKERS") {
        let n: usize = raw
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("GDFT_WORKERS must be a positive integer, got {raw:?}")))?;
        if n == 0 {
            return Err(Error::Config("GDFT_WORKERS must be positive".into()));
        }
        // A second initialization in the same process keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_entry() -> i32 {
    main_entry_from(std::env::args_os())
}

/// As [`main_entry`], with explicit arguments (the first is the program name).
pub fn main_entry_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Dispatches one command; `Ok` carries the exit code.
pub fn run(cli: &Cli) -> Result<i32> {
    configure_workers()?;
    if cli.command == Command::Verify {
        let table = verify::run_all();
        let text = verify::format_table(&table);
        print!("{text}");
        if let Some(out) = &cli.out {
            write_atomic(out, text.as_bytes())?;
        }
        return Ok(if table.iter().all(|r| r.passed) { 0 } else { 2 });
    }
    let config_path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let out = cli.out.as_ref().ok_or_else(|| Error::Config("--out is required".into()))?;
    let config = RunConfig::load(config_path)?;
    let mut opts = SearchOptions::with_seed(cli.seed.unwrap_or(0));
    if let Some(m) = cli.multistarts {
        opts.multistarts = m;
    }
    let output = match cli.command {
        Command::Domain => domain(&config)?,
        Command::FunctionalGrid => functional_grid(&config, &opts)?,
        Command::Gradfield => gradfield(&config, &opts)?,
        Command::BoundaryForce => {
            let eps = match &cli.eps_list {
                Some(text) => parse_eps_list(text)?,
                None => config.param::<Vec<f64>>("eps_list")?.unwrap_or_else(|| DEFAULT_EPS.to_vec()),
            };
            boundary_force(&config, &opts, &eps)?
        }
        Command::Kirwan => kirwan(&config, cli.seed.unwrap_or(0x5eed))?,
        Command::Verify => unreachable!("handled above"),
    };
    write_atomic(out, output.as_bytes())?;
    Ok(0)
}

fn domain(config: &RunConfig) -> Result<String> {
    let theory = build_theory(config.theory()?)?;
    let wd = weight_decomposition(&theory)?;
    let poly = representable_polytope(&wd)?;
    let mut value = serde_json::to_value(poly.to_json())?;
    value["labels"] = json!(theory.labels());
    value["dim"] = json!(poly.dim());
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

/// Barycentric grid `Σ (a_i/steps) v_i` over the polytope's vertices.
pub fn domain_grid(poly: &Polytope, steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps == 0 {
        return Err(Error::Config("grid steps must be positive".into()));
    }
    let k = poly.vertices.len();
    let count = (1..k).fold(1f64, |acc, i| acc * (steps + i) as f64 / i as f64);
    if count > GRID_LIMIT as f64 {
        return Err(Error::Config(format!("grid of {count:.0} points exceeds the limit")));
    }
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for parts in compositions(steps, k) {
        let p: Vec<f64> = (0..poly.ambient_dim)
            .map(|j| parts.iter().zip(&poly.vertices).map(|(&a, v)| a as f64 * v[j]).sum::<f64>() / steps as f64)
            .collect();
        let key: Vec<i64> = p.iter().map(|x| (x * 1e9).round() as i64).collect();
        if seen.insert(key) {
            out.push(p);
        }
    }
    Ok(out)
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .rev()
        .flat_map(|first| {
            compositions(total - first, parts - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

fn grid_points(config: &RunConfig, poly: &Polytope, margin: f64) -> Result<Vec<Vec<f64>>> {
    if let Some(points) = config.param::<Vec<Vec<f64>>>("points")? {
        return Ok(points);
    }
    let steps: usize = config.require("steps")?;
    let interior: bool = config.param("interior")?.unwrap_or(margin > 0.0);
    let pts = domain_grid(poly, steps)?;
    Ok(if interior { pts.into_iter().filter(|p| poly.boundary_distance(p) > margin.max(1e-9)).collect() } else { pts })
}

fn evaluate_functional(
    theory: &FunctionalTheoryModel,
    rho: &[f64],
    opts: &SearchOptions,
    ensemble: bool,
) -> Result<SearchResult> {
    let rho = DensityVector::new(rho.to_vec());
    if ensemble {
        ensemble_functional(theory, &rho, opts, None)
    } else {
        pure_functional(theory, &rho, opts)
    }
}

fn csv_text(header: Vec<String>, rows: Vec<Vec<String>>) -> Result<String> {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    wtr.write_record(&header)?;
    for row in rows {
        wtr.write_record(&row)?;
    }
    let bytes = wtr.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn functional_grid(config: &RunConfig, opts: &SearchOptions) -> Result<String> {
    let theory = build_theory(config.theory()?)?;
    let ensemble = match config.param::<String>("functional")?.as_deref() {
        None | Some("pure") => false,
        Some("ensemble") => true,
        Some(other) => return Err(Error::Config(format!("unknown functional {other:?}"))),
    };
    let points = match config.param::<Vec<Vec<f64>>>("points")? {
        Some(p) => p,
        None => grid_points(config, &representable_polytope(&weight_decomposition(&theory)?)?, 0.0)?,
    };
    let rows = points
        .par_iter()
        .map(|rho| {
            let r = evaluate_functional(&theory, rho, opts, ensemble)?;
            let mut row: Vec<String> = rho.iter().map(|&x| fmt_f64(x)).collect();
            row.extend([fmt_f64(r.value), fmt_f64(r.constraint_residual), r.starts_converged.to_string()]);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = theory.labels().to_vec();
    header.extend(["value", "residual", "starts_converged"].map(String::from));
    csv_text(header, rows)
}

fn gradfield(config: &RunConfig, opts: &SearchOptions) -> Result<String> {
    let theory = build_theory(config.theory()?)?;
    let poly = representable_polytope(&weight_decomposition(&theory)?)?;
    let scale = poly.vertices.iter().flat_map(|v| v.iter().map(|x| x.abs())).fold(1.0, f64::max);
    let h: f64 = config.param("h")?.unwrap_or(1e-3 * scale);
    if h <= 0.0 {
        return Err(Error::Config("step h must be positive".into()));
    }
    let points = grid_points(config, &poly, 2.0 * h)?;
    let tangent = poly.affine_hull.tangent.clone();
    let rows = points
        .par_iter()
        .map(|rho| {
            let f = evaluate_functional(&theory, rho, opts, false)?.value;
            let mut grad2 = 0.0;
            for t in tangent.column_iter() {
                let shifted = |sign: f64| rho.iter().zip(t.iter()).map(|(r, d)| r + sign * h * d).collect::<Vec<_>>();
                let fp = evaluate_functional(&theory, &shifted(1.0), opts, false)?.value;
                let fm = evaluate_functional(&theory, &shifted(-1.0), opts, false)?.value;
                grad2 += ((fp - fm) / (2.0 * h)).powi(2);
            }
            let mut row: Vec<String> = rho.iter().map(|&x| fmt_f64(x)).collect();
            row.extend([fmt_f64(f), fmt_f64(grad2.sqrt())]);
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut header = theory.labels().to_vec();
    header.extend(["F", "abs_dF"].map(String::from));
    csv_text(header, rows)
}

#[derive(Debug, Deserialize)]
struct FacetParam {
    #[serde(rename = "S")]
    normal: Vec<f64>,
    #[serde(alias = "c")]
    nu: f64,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum InteractionParam {
    QubitQutrit { qubit_qutrit: QubitQutritCouplings },
    Matrix(ComplexMatrixJson),
}

fn force_report(result: &BoundaryForceResult, fit: &crate::boundary::ForceFit, f_star: f64) -> Result<String> {
    let value = json!({
        "G_formula": result.g,
        "G_fit": fit.g_fit,
        "intercept": fit.intercept,
        "fit_rms": fit.rms,
        "F_star": f_star,
        "contributions": result.contributions,
        "eps_points": fit.eps_points.iter().map(|(e, f)| json!([e, f])).collect::<Vec<_>>(),
        "optimal_v": result.optimal_v,
        "regular": result.regular,
        "phase_spread": result.phase_spread,
        "sufficiently_nice": result.sufficiently_nice,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn boundary_force(config: &RunConfig, opts: &SearchOptions, eps: &[f64]) -> Result<String> {
    if config.algebra.is_some() {
        return nonabelian_force_from_algebra(config, opts, eps);
    }
    let tc = config.theory()?;
    if tc.kind == TheoryKind::Dimer {
        return dimer_force(tc, opts, eps);
    }
    let theory = build_theory(tc)?;
    let wd = weight_decomposition(&theory)?;
    let facet = match (config.param::<FacetParam>("facet")?, config.param::<usize>("facet_index")?) {
        (Some(f), _) => FacetInequality::new(DVector::from_vec(f.normal), f.nu),
        (None, Some(i)) => representable_polytope(&wd)?
            .inequalities
            .get(i)
            .cloned()
            .ok_or_else(|| Error::Config(format!("facet index {i} out of range")))?,
        (None, None) => return Err(Error::Config("missing param \"facet\" or \"facet_index\"".into())),
    };
    let rho_star: Vec<f64> = config.require("rho_star")?;
    let eta: Vec<f64> = config.param("eta")?.unwrap_or_else(|| facet.normal.as_slice().to_vec());
    let gamma: Vec<f64> = config.param("gamma")?.unwrap_or_else(|| rho_star.clone());
    let query = BoundaryForceQuery::new(
        &facet,
        DensityVector::new(rho_star.clone()),
        DensityVector::new(eta.clone()),
        DensityVector::new(gamma),
    )?;
    let ft = facet_theory(&theory, &wd, &query.facet)?;
    let base = pure_functional(&ft.model, &query.rho_star, opts)?;
    let phi = ft.lift(base.state.amplitudes().expect("pure search result"));
    let result = abelian_boundary_force(&theory, &wd, &query, &[QuantumState::pure(phi)?])?;
    let fit =
        finite_difference_force(&theory, &rho_star, &eta, eps, opts, &|e| result.seed_state(e).into_iter().collect())?;
    force_report(&result, &fit, base.value)
}

fn dimer_force(tc: &TheoryConfig, opts: &SearchOptions, eps: &[f64]) -> Result<String> {
    let n = tc.n.ok_or_else(|| Error::Config("missing key \"N\"".into()))?;
    let theta = tc.theta.ok_or_else(|| Error::Config("missing key \"theta\"".into()))?;
    let theory = build_theory(tc)?;
    let alg = dimer_algebra(n, theta)?;
    let axis = [theta.sin(), 0.0, theta.cos()];
    let rho: Vec<f64> = axis.iter().map(|a| a * n as f64).collect();
    let eta: Vec<f64> = axis.iter().map(|a| -a).collect();
    let nf = facet_theory_nonabelian(&alg, &theory, &[-1.0], -(n as f64))?;
    nonabelian_report(&theory, &alg, &nf, &rho, &eta, opts, eps)
}

fn nonabelian_force_from_algebra(config: &RunConfig, opts: &SearchOptions, eps: &[f64]) -> Result<String> {
    let alg = builtin_algebra(config.algebra.as_ref().expect("checked by caller"))?;
    let w = match config.require::<InteractionParam>("interaction")? {
        InteractionParam::QubitQutrit { qubit_qutrit } => {
            if alg.hilbert_dim() != 6 {
                return Err(Error::Config("qubit_qutrit interaction needs the 2⊗3 algebra".into()));
            }
            qubit_qutrit_interaction(&qubit_qutrit)
        }
        InteractionParam::Matrix(m) => HermitianOperator::new(matrix_from_json(&m)?)?,
    };
    let theory = momentum_theory(&alg, w)?;
    let s: Vec<f64> = config.require("S")?;
    let c0: f64 = config.require("c")?;
    let rho: Vec<f64> = config.require("rho_star")?;
    let eta: Vec<f64> = config.require("eta")?;
    let nf = facet_theory_nonabelian(&alg, &theory, &s, c0)?;
    nonabelian_report(&theory, &alg, &nf, &rho, &eta, opts, eps)
}

fn nonabelian_report(
    theory: &FunctionalTheoryModel,
    alg: &crate::liegroup::LieAlgebraData,
    nf: &crate::liegroup::NonabelianFacet,
    rho: &[f64],
    eta: &[f64],
    opts: &SearchOptions,
    eps: &[f64],
) -> Result<String> {
    let base = pure_functional(&nf.model, &DensityVector::new(nf.facet_density(alg, rho)), opts)?;
    let phi = &nf.embedding * base.state.amplitudes().expect("pure search result");
    let result = nonabelian_boundary_force(theory, &nf.data, rho, eta, &[QuantumState::pure(phi)?])?;
    let fit = finite_difference_force(theory, rho, eta, eps, opts, &|e| result.seed_state(e).into_iter().collect())?;
    force_report(&result, &fit, base.value)
}

fn kirwan(config: &RunConfig, seed: u64) -> Result<String> {
    let spec = match &config.algebra {
        Some(a) => a.clone(),
        None => config.require::<AlgebraSpec>("algebra")?,
    };
    let alg = builtin_algebra(&spec)?;
    let k = kirwan_polytope_seeded(&alg, seed)?;
    let classes = classify_facets(&k, &rep_weights(&alg)?);
    let mut value = serde_json::to_value(k.report(&alg.name))?;
    value["facets"] = classes
        .iter()
        .map(|f| json!({"S": f.inequality.normal.as_slice(), "c": f.inequality.offset, "class": f.class}))
        .collect();
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

/// Renders rows as `name | verdict | detail`.
pub fn table_line(id: &str, name: &str, passed: bool, detail: &str) -> String {
    let mut s = String::new();
    let _ = write!(s, "{id:>3} | {name:<36} | {} | {detail}", if passed { "PASS" } else { "FAIL" });
    s
}

/// Comma-separated list of values in full precision.
pub fn join_values(values: &[f64]) -> String {
    values.iter().map(|&x| fmt_f64(x)).join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bare_theory_and_run_config_parse() {
        let bare = RunConfig::parse(r#"{"kind":"bosonic","d":2,"N":4,"P":0}"#).unwrap();
        assert_eq!(bare.theory.unwrap().kind, TheoryKind::Bosonic);
        let full = RunConfig::parse(r#"{"algebra":{"su3_adjoint":true},"params":{"x":1}}"#).unwrap();
        assert!(full.algebra.is_some() && full.theory.is_none());
        assert!(matches!(RunConfig::parse(r#"{"bogus":1}"#), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        assert_eq!(exit_code(&Error::Config("x".into())), 1);
        assert_eq!(exit_code(&Error::NotRepresentable(1.0)), 3);
        assert_eq!(exit_code(&Error::DidNotConverge(1.0)), 2);
    }

    #[test]
    fn triangle_grid_has_expected_size() {
        let tri = Polytope::from_points(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(domain_grid(&tri, 4).unwrap().len(), 15);
    }

    #[test]
    fn csv_numbers_carry_seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    }
}

#[cfg(test)]
mod end_to_end {
    use std::path::{Path, PathBuf};

    use serde_json::Value;

    use super::main_entry_from;

    fn run(dir: &Path, args: &[&str], config: &str) -> (i32, PathBuf) {
        let cfg = dir.join("config.json");
        let out = dir.join("out");
        std::fs::write(&cfg, config).unwrap();
        let mut argv: Vec<std::ffi::OsString> = vec!["gdft".into()];
        argv.extend(args.iter().map(Into::into));
        argv.extend(["--config".into(), cfg.into_os_string(), "--out".into(), out.clone().into_os_string()]);
        (main_entry_from(argv), out)
    }

    fn read_json(p: &Path) -> Value {
        serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
    }

    #[test]
    fn domain_of_three_site_sector_is_a_hexagon() {
        let dir = tempfile::tempdir().unwrap();
        let (code, out) = run(dir.path(), &["domain"], r#"{"kind":"bosonic","d":3,"N":12,"P":1}"#);
        assert_eq!(code, 0);
        let v = read_json(&out);
        assert_eq!(v["dim"], 2);
        assert_eq!(v["vertices"].as_array().unwrap().len(), 6);
        assert_eq!(v["inequalities"].as_array().unwrap().len(), 6);
    }

    #[test]
    fn kirwan_su3_has_two_bounding_inequalities() {
        let dir = tempfile::tempdir().unwrap();
        let (code, out) = run(dir.path(), &["kirwan"], r#"{"algebra":{"su3_adjoint":true}}"#);
        assert_eq!(code, 0);
        let v = read_json(&out);
        assert_eq!(v["bounding"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn functional_grid_writes_csv_rows() {
        let dir = tempfile::tempdir().unwrap();
        let config = r#"{"theory":{"kind":"qubit","lambda":1.0},"params":{"points":[[0.0],[0.6]]}}"#;
        let (code, out) = run(dir.path(), &["functional-grid", "--seed", "3"], config);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(out).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        let last: Vec<f64> = rows[2].split(',').take(2).map(|x| x.parse().unwrap()).collect();
        assert!((last[1] + 0.8).abs() < 1e-6, "{}", rows[2]);
    }

    #[test]
    fn exit_codes_distinguish_config_infeasible_and_numeric() {
        let dir = tempfile::tempdir().unwrap();
        let (code, _) = run(dir.path(), &["domain"], r#"{"kind":"bosonic","d":3}"#);
        assert_eq!(code, 1);
        let outside = r#"{"theory":{"kind":"qubit","lambda":1.0},"params":{"points":[[1.5]]}}"#;
        let (code, _) = run(dir.path(), &["functional-grid"], outside);
        assert_eq!(code, 3);
        let wall = r#"{"algebra":{"su2_product":2,"irreps":[2,3]},"params":{"interaction":{"qubit_qutrit":{"u1":1,"u2":0,"u3":0,"k1":0,"k3":0}},"S":[1.0,0.0],"c":0.0,"rho_star":[0,0,0,0,0,1],"eta":[0,0,1,0,0,0]}}"#;
        let (code, _) = run(dir.path(), &["boundary-force"], wall);
        assert_eq!(code, 2);
        assert_eq!(main_entry_from(["gdft", "no-such-command"]), 1);
    }

    #[test]
    fn hubbard_boundary_force_report() {
        let dir = tempfile::tempdir().unwrap();
        let s = 6f64.sqrt();
        let config = format!(
            r#"{{"theory":{{"kind":"bosonic","d":3,"N":6,"P":0}},"params":{{"facet":{{"S":[{a},{b},{b}],"nu":{nu}}},"rho_star":[0,3,3]}}}}"#,
            a = 2.0 / s,
            b = -1.0 / s,
            nu = -6.0 / s
        );
        let (code, out) = run(dir.path(), &["boundary-force", "--eps-list", "1e-4,1e-3,1e-2"], &config);
        assert_eq!(code, 0);
        let v = read_json(&out);
        let expected = 4.0 * 2f64.powf(0.25) * 3f64.powf(0.75) / 9.0 * 30f64.sqrt();
        assert!((v["G_formula"].as_f64().unwrap() - expected).abs() < 1e-9);
        assert!(v["G_fit"].as_f64().unwrap() > 0.0);
        assert_eq!(v["eps_points"].as_array().unwrap().len(), 3);
        let total: f64 = v["contributions"].as_array().unwrap().iter().map(|c| c["value"].as_f64().unwrap()).sum();
        assert!((2.0 * total.sqrt() - expected).abs() < 1e-9);
    }
}
