//! Batch drivers behind the `lagphase` binary.
//!
//! Three commands: `verify` runs the exact identity suites and sampled
//! property checks, `scan-eps` sweeps the five-dimensional ε-family, and
//! `solve` integrates the profile ODE both ways and verifies the resulting
//! subsolution. Every command returns an [`Outcome`] holding the rendered
//! document and the exit code; the binary only does I/O.

use std::f64::consts::{FRAC_PI_2, PI};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Error;
use crate::odepsi::{decay_fit, default_radii, DecayFit, PsiModel, BETA_WARN};
use crate::phasepoly::{phase_h, z_eval, zstar, PhaseSpec, ZstarMode, LEVEL_SET_TOL};
use crate::subsol::{verify_subsolution, GridSpec, SubsolutionSpec, VerificationReport};
use crate::symfun::{
    elem_sym_all, elem_sym_excl_all, gen_sym_table, newton_check, qio_sum, rational_ones,
    recombine_with_table, sigma_product_terms, ExclusionSet, ProductRegime, Rational,
};
use crate::xiquant::{
    admissibility, epsilon_family, epsilon_family_m_closed_form, level_set_from_weights, m_value,
    xi_select, AdmissibilityClass, EigenVector,
};

/// Version tag carried by every JSON document.
pub const SCHEMA_VERSION: u32 = 1;
/// Name of the generator behind `--seed`.
pub const PRNG_NAME: &str = "ChaCha8Rng";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lagphase", version, about = "Phase polynomials, decay exponents and subsolution checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandLine,
}

#[derive(Debug, Subcommand)]
pub enum CommandLine {
    /// Exact identity suites and sampled property checks.
    Verify(Options),
    /// Sweep m(5π/3, a_ε) over ε ∈ [0, π/12].
    ScanEps(Options),
    /// Solve for ψ both ways and verify the subsolution.
    Solve(Options),
}

#[derive(Debug, Clone, Args)]
pub struct Options {
    /// Dimension.
    #[arg(long)]
    pub n: Option<usize>,
    /// Phase: radians, `critical`, or a multiple of pi such as `5pi/3`.
    #[arg(long)]
    pub theta: Option<String>,
    /// Comma separated eigenvalues.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// `eps:<value>` or `iso`.
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rmax: Option<f64>,
    /// Scan points (scan-eps) or verification shells (solve).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Exact rational arithmetic (verify only; it is already the default there).
    #[arg(long)]
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Verify,
    ScanEps,
    Solve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Eps(f64),
    Iso,
}

/// Validated parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n: Option<usize>,
    pub theta: Option<f64>,
    pub a: Option<Vec<f64>>,
    pub family: Option<Family>,
    pub beta: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub rmax: f64,
    pub grid: Option<usize>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub exact: bool,
}

/// Rendered output plus exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub status: i32,
    pub body: String,
    /// Human-oriented lines for stderr.
    pub messages: Vec<String>,
}

impl Outcome {
    fn invalid(msg: impl Into<String>) -> Self {
        Self { status: EXIT_INVALID, body: String::new(), messages: vec![msg.into()] }
    }
}

/// Parses `critical`, plain radians, or `[c]pi[/d]`.
pub fn parse_theta(text: &str, n: Option<usize>) -> Result<f64, String> {
    let t = text.trim().to_ascii_lowercase();
    if t == "critical" {
        let n = n.ok_or("--theta critical needs --n")?;
        return Ok((n as f64 - 2.0) * FRAC_PI_2);
    }
    if let Some(pos) = t.find("pi") {
        let coeff = t[..pos].trim().trim_end_matches('*');
        let c = match coeff {
            "" => 1.0,
            "-" => -1.0,
            s => s.parse::<f64>().map_err(|_| format!("bad theta coefficient in `{text}`"))?,
        };
        let rest = t[pos + 2..].trim();
        let d = if rest.is_empty() {
            1.0
        } else {
            let den = rest.strip_prefix('/').ok_or(format!("bad theta `{text}`"))?;
            den.trim().parse::<f64>().map_err(|_| format!("bad theta denominator in `{text}`"))?
        };
        let v = c * PI / d;
        return if v.is_finite() { Ok(v) } else { Err(format!("bad theta `{text}`")) };
    }
    t.parse::<f64>().map_err(|_| format!("bad theta `{text}`"))
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("bad entry `{s}` in --a")))
        .collect()
}

fn parse_family(text: &str) -> Result<Family, String> {
    if text == "iso" {
        return Ok(Family::Iso);
    }
    let v = text.strip_prefix("eps:").ok_or(format!("unknown family `{text}`"))?;
    Ok(Family::Eps(v.parse::<f64>().map_err(|_| format!("bad epsilon `{v}`"))?))
}

impl RunConfig {
    /// Checks everything that does not need a computation.
    pub fn from_cli(command: Command, opts: &Options) -> Result<Self, String> {
        if opts.exact && command != Command::Verify {
            return Err("--exact is only supported by verify".into());
        }
        let a = opts.a.as_deref().map(parse_list).transpose()?;
        let family = opts.family.as_deref().map(parse_family).transpose()?;
        if a.is_some() && family.is_some() {
            return Err("--a and --family are mutually exclusive".into());
        }
        let theta = opts.theta.as_deref().map(|t| parse_theta(t, opts.n)).transpose()?;
        let beta = opts.beta.unwrap_or(2.0);
        let gamma = opts.gamma.unwrap_or(1.0);
        let alpha = opts.alpha.unwrap_or(0.0);
        let rmax = opts.rmax.unwrap_or(1e4);
        if !beta.is_finite() || !gamma.is_finite() || !alpha.is_finite() || !rmax.is_finite() {
            return Err("numeric flags must be finite".into());
        }
        let format = opts.format.unwrap_or(match command {
            Command::ScanEps => Format::Csv,
            _ => Format::Json,
        });
        Ok(Self {
            command,
            n: opts.n,
            theta,
            a,
            family,
            beta,
            gamma,
            alpha,
            rmax,
            grid: opts.grid,
            seed: opts.seed,
            out: opts.out.clone(),
            format,
            exact: command == Command::Verify,
        })
    }

    pub fn from_command_line(cli: &Cli) -> Result<Self, String> {
        match &cli.command {
            CommandLine::Verify(o) => Self::from_cli(Command::Verify, o),
            CommandLine::ScanEps(o) => Self::from_cli(Command::ScanEps, o),
            CommandLine::Solve(o) => Self::from_cli(Command::Solve, o),
        }
    }
}

/// Dispatches on `config.command`.
pub fn execute(config: &RunConfig) -> Outcome {
    match config.command {
        Command::Verify => run_verify(config),
        Command::ScanEps => run_scan_epsilon(config),
        Command::Solve => run_solve(config),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable report");
    s.push('\n');
    s
}

fn csv_text<F>(header: &[&str], write_rows: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    write_rows(&mut w).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf8 csv")
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that round-trips.
    format!("{v:?}")
}

// ---------------------------------------------------------------- verify

/// Replaceable kernels, so a test harness can inject a fault.
#[derive(Clone, Copy)]
pub struct VerifyHooks {
    pub zstar_closed: fn(&[Rational]) -> Rational,
}

impl Default for VerifyHooks {
    fn default() -> Self {
        Self { zstar_closed: |a| zstar(a, ZstarMode::ClosedForm) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub n: usize,
    /// Exact entries as `p/q` strings (floats in their shortest form).
    pub a: Vec<String>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Smallest slack over the suite for inequality checks.
    pub worst_margin: Option<f64>,
    pub counterexample: Option<Counterexample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZstarOnes {
    pub n: usize,
    pub value: String,
    pub expected: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub schema_version: u32,
    pub command: Command,
    pub seed: u64,
    pub prng: &'static str,
    pub exact: bool,
    pub passed: bool,
    pub suites: Vec<SuiteReport>,
    pub zstar_ones: Vec<ZstarOnes>,
}

fn rat_str(v: &Rational) -> String {
    if v.denom().is_one() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

fn random_rational_vec(rng: &mut ChaCha8Rng) -> Vec<Rational> {
    let n = rng.gen_range(3..=8);
    (0..n)
        .map(|_| {
            let p: i64 = rng.gen_range(-20..=20);
            let q: i64 = rng.gen_range(1..=12);
            Rational::new(BigInt::from(p), BigInt::from(q))
        })
        .collect()
}

/// Runs one exact check per vector in parallel; the first failure in input
/// order is kept as the counterexample.
fn exact_suite<F>(name: &str, vectors: &[Vec<Rational>], check: F) -> SuiteReport
where
    F: Fn(&[Rational]) -> (usize, Option<String>) + Sync,
{
    let results: Vec<(usize, Option<String>)> = vectors.par_iter().map(|a| check(a)).collect();
    let cases = results.iter().map(|r| r.0).sum();
    let failures = results.iter().filter(|r| r.1.is_some()).count();
    let counterexample = vectors.iter().zip(&results).find_map(|(a, r)| {
        r.1.as_ref().map(|detail| Counterexample {
            n: a.len(),
            a: a.iter().map(rat_str).collect(),
            detail: detail.clone(),
        })
    });
    SuiteReport { name: name.into(), cases, failures, worst_margin: None, counterexample }
}

fn float_counterexample(a: &[f64], detail: String) -> Counterexample {
    Counterexample { n: a.len(), a: a.iter().map(|v| fmt_f64(*v)).collect(), detail }
}

/// Random supercritical-or-critical phase with a matching level-set point.
pub fn random_level_set_point(rng: &mut ChaCha8Rng, n_range: std::ops::RangeInclusive<usize>) -> (PhaseSpec, EigenVector) {
    loop {
        let n = rng.gen_range(n_range.clone());
        let lo = (n as f64 - 2.0) * FRAC_PI_2;
        let hi = n as f64 * FRAC_PI_2;
        let theta = lo + rng.gen_range(0.0..1.0) * (hi - lo) * 0.98;
        let Ok(spec) = PhaseSpec::new(n, theta) else { continue };
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.2..1.0)).collect();
        if let Ok(a) = level_set_from_weights(&weights, &spec) {
            if a.as_slice().iter().all(|v| *v < 1e8) {
                return (spec, a);
            }
        }
    }
}

/// Identity and property suites.
pub fn run_verify(config: &RunConfig) -> Outcome {
    run_verify_with(config, VerifyHooks::default())
}

pub fn run_verify_with(config: &RunConfig, hooks: VerifyHooks) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vectors: Vec<Vec<Rational>> = (0..200).map(|_| random_rational_vec(&mut rng)).collect();
    let mut suites = Vec::new();

    let closed = hooks.zstar_closed;
    suites.push(exact_suite("zstar_modes", &vectors, |a| {
        let p = zstar(a, ZstarMode::Product);
        let c = closed(a);
        (1, (p != c).then(|| format!("product {} != closed form {}", rat_str(&p), rat_str(&c))))
    }));

    let zstar_ones: Vec<ZstarOnes> = (3..=12)
        .map(|n| {
            let v = closed(&rational_ones(n));
            let expected = BigInt::from(n as u64) << (n - 1);
            ZstarOnes { n, value: rat_str(&v), expected: expected.to_string() }
        })
        .collect();
    let bad_ones = zstar_ones.iter().find(|z| z.value != z.expected);
    suites.push(SuiteReport {
        name: "zstar_ones".into(),
        cases: zstar_ones.len(),
        failures: zstar_ones.iter().filter(|z| z.value != z.expected).count(),
        worst_margin: None,
        counterexample: bad_ones.map(|z| Counterexample {
            n: z.n,
            a: vec!["1".into(); z.n],
            detail: format!("got {}, expected {}", z.value, z.expected),
        }),
    });

    suites.push(exact_suite("sigma_products", &vectors, |a| {
        let n = a.len();
        let s = elem_sym_all(a);
        let table = gen_sym_table(a);
        let mut cases = 0;
        for k in 0..=n {
            for j in 0..=k {
                let mut regimes = Vec::new();
                if j + k <= n {
                    regimes.push(ProductRegime::Low);
                }
                if j + k >= n {
                    regimes.push(ProductRegime::High);
                }
                for regime in regimes {
                    cases += 1;
                    let terms = sigma_product_terms(j, k, n, regime).expect("valid indices");
                    if recombine_with_table(&terms, &table) != &s[j] * &s[k] {
                        return (cases, Some(format!("sigma_{j} sigma_{k} ({regime:?})")));
                    }
                }
            }
        }
        (cases, None)
    }));

    let qio_bad: Vec<i64> = (0..=20)
        .filter(|&q| {
            let want = if q == 0 { BigInt::one() } else { BigInt::zero() };
            qio_sum(q).map(|v| v != want).unwrap_or(true)
        })
        .collect();
    suites.push(SuiteReport {
        name: "qio".into(),
        cases: 21,
        failures: qio_bad.len(),
        worst_margin: None,
        counterexample: qio_bad.first().map(|q| Counterexample {
            n: 0,
            a: vec![],
            detail: format!("Q = {q}"),
        }),
    });

    suites.push(exact_suite("sigma_split", &vectors, |a| {
        let n = a.len();
        let s = elem_sym_all(a);
        let loo: Vec<Vec<Rational>> = (1..=n)
            .map(|i| elem_sym_excl_all(a, &ExclusionSet::single(i).expect("valid")).expect("in range"))
            .collect();
        let mut cases = 0;
        for k in 1..=n {
            let mut weighted = Rational::zero();
            for i in 0..n {
                cases += 1;
                let below = if k <= n - 1 { loo[i][k].clone() } else { Rational::zero() };
                if below + &a[i] * &loo[i][k - 1] != s[k] {
                    return (cases, Some(format!("split at k={k}, i={}", i + 1)));
                }
                weighted += &a[i] * &loo[i][k - 1];
            }
            cases += 1;
            if weighted != Rational::from_integer(BigInt::from(k)) * &s[k] {
                return (cases, Some(format!("weighted sum at k={k}")));
            }
        }
        (cases, None)
    }));

    let mut gs_cases = 0;
    let mut gs_bad = None;
    for n in 1..=10usize {
        let table = gen_sym_table(&rational_ones(n));
        for k in 0..=n {
            for j in 0..=k {
                gs_cases += 1;
                let want = num_integer::binomial(n as u64, k as u64) * num_integer::binomial(k as u64, j as u64);
                if table[k][j] != Rational::from_integer(BigInt::from(want)) && gs_bad.is_none() {
                    gs_bad = Some(Counterexample {
                        n,
                        a: vec!["1".into(); n],
                        detail: format!("S_{k}^{j} = {}", rat_str(&table[k][j])),
                    });
                }
            }
        }
    }
    suites.push(SuiteReport {
        name: "gen_sym_ones".into(),
        cases: gs_cases,
        failures: usize::from(gs_bad.is_some()),
        worst_margin: None,
        counterexample: gs_bad,
    });

    // Sampled floating-point properties.
    let mut worst = f64::INFINITY;
    let mut bad = None;
    let mut failures = 0;
    for _ in 0..200 {
        let n = rng.gen_range(1..=8);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..10.0)).collect();
        let rep = newton_check(&a);
        let s = elem_sym_all(&a);
        for (k, m) in &rep.margins {
            worst = worst.min(m / (s[*k] * s[*k]));
        }
        if !rep.pass {
            failures += 1;
            bad.get_or_insert_with(|| float_counterexample(&a, "negative Newton margin".into()));
        }
    }
    suites.push(SuiteReport {
        name: "newton".into(),
        cases: 200,
        failures,
        worst_margin: Some(worst),
        counterexample: bad,
    });

    let samples: Vec<(PhaseSpec, EigenVector)> =
        (0..500).map(|_| random_level_set_point(&mut rng, 3..=6)).collect();

    let mut worst = f64::INFINITY;
    let mut bad = None;
    let mut failures = 0;
    for (spec, a) in &samples {
        let n = a.len();
        let p = xi_select(spec, a);
        let mut ok = true;
        for k in 1..=n {
            let kn = k as f64 / n as f64;
            worst = worst.min(kn - p.lower[k]).min(p.upper[k] - kn);
            ok &= p.lower[k] <= kn + 1e-12 && kn <= p.upper[k] + 1e-12;
            if k < n {
                ok &= p.lower[k] <= p.lower[k + 1] + 1e-12 && p.upper[k] <= p.upper[k + 1] + 1e-12;
            }
        }
        if !ok {
            failures += 1;
            bad.get_or_insert_with(|| float_counterexample(a.as_slice(), "xi chain".into()));
        }
    }
    suites.push(SuiteReport {
        name: "xi_chains".into(),
        cases: samples.len(),
        failures,
        worst_margin: Some(worst),
        counterexample: bad,
    });

    let mut worst = f64::INFINITY;
    let mut bad = None;
    let mut failures = 0;
    for (spec, a) in &samples {
        let n = a.len() as f64;
        match m_value(spec, a) {
            Ok(m) => {
                worst = worst.min(m).min(n - m);
                if !(m > 0.0 && m <= n * (1.0 + 1e-12)) {
                    failures += 1;
                    bad.get_or_insert_with(|| float_counterexample(a.as_slice(), format!("m = {m}")));
                }
            }
            Err(e) => {
                failures += 1;
                bad.get_or_insert_with(|| float_counterexample(a.as_slice(), e.to_string()));
            }
        }
    }
    suites.push(SuiteReport {
        name: "m_bounds".into(),
        cases: samples.len(),
        failures,
        worst_margin: Some(worst),
        counterexample: bad,
    });

    // Z = ρ·sin(H − Θ) with ρ = Π√(1 + λ²).
    let mut worst = 0.0f64;
    let mut bad = None;
    let mut failures = 0;
    for _ in 0..300 {
        let n = rng.gen_range(3..=6);
        let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let Ok(spec) = PhaseSpec::new(n, rng.gen_range(0.0..(n as f64 - 0.01)) * FRAC_PI_2) else { continue };
        let rho: f64 = lam.iter().map(|l| (1.0 + l * l).sqrt()).product();
        let oracle = rho * (phase_h(&lam) - spec.theta()).sin();
        let err = (z_eval(&spec, &lam) - oracle).abs() / rho;
        worst = worst.max(err);
        if err > 1e-10 {
            failures += 1;
            bad.get_or_insert_with(|| float_counterexample(&lam, format!("relative gap {err}")));
        }
    }
    suites.push(SuiteReport {
        name: "sign_dichotomy".into(),
        cases: 300,
        failures,
        worst_margin: Some(-worst),
        counterexample: bad,
    });

    let passed = suites.iter().all(|s| s.failures == 0);
    let report = VerifyReport {
        schema_version: SCHEMA_VERSION,
        command: Command::Verify,
        seed: config.seed,
        prng: PRNG_NAME,
        exact: true,
        passed,
        suites,
        zstar_ones,
    };
    let mut messages: Vec<String> = report
        .suites
        .iter()
        .map(|s| format!("{}: {} cases, {} failures", s.name, s.cases, s.failures))
        .collect();
    for s in report.suites.iter().filter(|s| s.failures > 0) {
        if let Some(c) = &s.counterexample {
            messages.push(format!("counterexample for {}: a = [{}] ({})", s.name, c.a.join(", "), c.detail));
        }
    }
    let body = match config.format {
        Format::Json => to_json(&report),
        Format::Csv => csv_text(&["suite", "cases", "failures", "worst_margin"], |w| {
            for s in &report.suites {
                w.write_record([
                    s.name.clone(),
                    s.cases.to_string(),
                    s.failures.to_string(),
                    s.worst_margin.map(fmt_f64).unwrap_or_default(),
                ])?;
            }
            Ok(())
        }),
    };
    Outcome { status: if passed { EXIT_OK } else { EXIT_CHECK_FAILED }, body, messages }
}

// ---------------------------------------------------------------- scan-eps

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub eps: f64,
    pub m: f64,
    pub m_closed_form: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub max_discrepancy: f64,
    pub monotone_decreasing: bool,
    /// `ε*` with `m(ε*) = 2`, if the grid brackets one.
    pub crossing: Option<f64>,
}

fn family_m(spec: &PhaseSpec, eps: f64) -> Result<f64, Error> {
    m_value(spec, &epsilon_family(eps)?)
}

/// `m(5π/3, a_ε)` on `points` uniform values of `ε ∈ [0, π/12]`.
pub fn scan_epsilon(points: usize) -> Result<ScanResult, Error> {
    if points < 2 {
        return Err(Error::OutOfRange("scan needs at least two points".into()));
    }
    let spec = PhaseSpec::new(5, 5.0 * PI / 3.0)?;
    let end = PI / 12.0;
    let rows = (0..points)
        .into_par_iter()
        .map(|i| {
            let eps = if i + 1 == points { end } else { end * i as f64 / (points - 1) as f64 };
            let m = family_m(&spec, eps)?;
            let closed = epsilon_family_m_closed_form(eps);
            Ok(ScanRow { eps, m, m_closed_form: closed, abs_diff: (m - closed).abs() })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let max_discrepancy = rows.iter().map(|r| r.abs_diff).fold(0.0, f64::max);
    let monotone_decreasing = rows.windows(2).all(|w| w[1].m < w[0].m);
    let crossing = match rows.windows(2).find(|w| w[0].m > 2.0 && w[1].m <= 2.0) {
        None => None,
        Some(w) => {
            let (mut lo, mut hi) = (w[0].eps, w[1].eps);
            while hi - lo > 1e-14 {
                let mid = 0.5 * (lo + hi);
                if family_m(&spec, mid)? > 2.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(0.5 * (lo + hi))
        }
    };
    Ok(ScanResult { rows, max_discrepancy, monotone_decreasing, crossing })
}

#[derive(Serialize)]
struct ScanDocument<'a> {
    schema_version: u32,
    command: Command,
    theta: f64,
    #[serde(flatten)]
    result: &'a ScanResult,
}

pub fn run_scan_epsilon(config: &RunConfig) -> Outcome {
    if config.n.is_some_and(|n| n != 5) {
        return Outcome::invalid("scan-eps is defined for n = 5 only");
    }
    let points = config.grid.unwrap_or(97);
    let result = match scan_epsilon(points) {
        Ok(r) => r,
        Err(e) => return Outcome::invalid(e.to_string()),
    };
    let mut messages = vec![
        format!("max discrepancy vs closed form: {:e}", result.max_discrepancy),
        format!("monotone decreasing: {}", result.monotone_decreasing),
    ];
    match result.crossing {
        Some(c) => messages.push(format!("m = 2 crossing at eps = {c}")),
        None => messages.push("no m = 2 crossing on the grid".into()),
    }
    let body = match config.format {
        Format::Csv => csv_text(&["eps", "m", "m_closed_form", "abs_diff"], |w| {
            for r in &result.rows {
                w.write_record([fmt_f64(r.eps), fmt_f64(r.m), fmt_f64(r.m_closed_form), fmt_f64(r.abs_diff)])?;
            }
            Ok(())
        }),
        Format::Json => to_json(&ScanDocument {
            schema_version: SCHEMA_VERSION,
            command: Command::ScanEps,
            theta: 5.0 * PI / 3.0,
            result: &result,
        }),
    };
    let ok = result.monotone_decreasing && result.max_discrepancy <= 1e-9;
    Outcome { status: if ok { EXIT_OK } else { EXIT_CHECK_FAILED }, body, messages }
}

// ---------------------------------------------------------------- solve

/// Route agreement required of the two ψ solvers.
pub const ROUTE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub r: f64,
    pub psi_numeric: f64,
    pub psi_implicit: f64,
    pub excess_numeric: f64,
    pub excess_implicit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialFractionReport {
    pub roots: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteAgreement {
    pub max_gap: f64,
    pub integrator_tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuValue {
    pub big_r: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GPrimeReport {
    pub at_one: f64,
    pub limit: f64,
    pub max_abs_along_trajectory: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub klass: &'static str,
    pub m: Option<f64>,
}

fn klass_name(c: AdmissibilityClass) -> &'static str {
    match c {
        AdmissibilityClass::NotInA0 => "not_in_A0",
        AdmissibilityClass::InA0Only => "in_A0_only",
        AdmissibilityClass::InA => "in_A",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub schema_version: u32,
    pub command: Command,
    pub n: usize,
    pub theta: f64,
    pub a: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub m: f64,
    pub admissibility: AdmissibilityReport,
    pub partial_fractions: PartialFractionReport,
    pub leading_constant: f64,
    pub trajectory: Vec<TrajectoryRow>,
    pub route_agreement: RouteAgreement,
    pub mu: Vec<MuValue>,
    pub decay_fit: Option<DecayFit>,
    pub g_prime: GPrimeReport,
    pub verification: VerificationReport,
    pub warnings: Vec<String>,
    pub passed: bool,
}

#[derive(Serialize)]
struct InadmissibleDocument {
    schema_version: u32,
    command: Command,
    error: &'static str,
    klass: &'static str,
    m: Option<f64>,
}

/// Resolves `(PhaseSpec, a)` from `--n/--theta/--a/--family`.
pub fn resolve_problem(config: &RunConfig) -> Result<(PhaseSpec, Vec<f64>), String> {
    match (&config.a, config.family) {
        (Some(a), None) => {
            let n = config.n.unwrap_or(a.len());
            if n != a.len() {
                return Err(format!("--a has {} entries but --n is {n}", a.len()));
            }
            let theta = config.theta.unwrap_or_else(|| phase_h(a));
            let spec = PhaseSpec::new(n, theta).map_err(|e| e.to_string())?;
            Ok((spec, a.clone()))
        }
        (None, Some(Family::Eps(eps))) => {
            if config.n.is_some_and(|n| n != 5) {
                return Err("the eps family lives in dimension 5".into());
            }
            let theta = 5.0 * PI / 3.0;
            if config.theta.is_some_and(|t| (t - theta).abs() > 1e-12) {
                return Err("the eps family lives on theta = 5pi/3".into());
            }
            let a = epsilon_family(eps).map_err(|e| e.to_string())?;
            Ok((PhaseSpec::new(5, theta).map_err(|e| e.to_string())?, a.into_vec()))
        }
        (None, Some(Family::Iso)) => {
            let n = config.n.ok_or("--family iso needs --n")?;
            let theta = config.theta.ok_or("--family iso needs --theta")?;
            let spec = PhaseSpec::new(n, theta).map_err(|e| e.to_string())?;
            Ok((spec, spec.iso_vector()))
        }
        (None, None) => Err("solve needs --a or --family".into()),
        (Some(_), Some(_)) => Err("--a and --family are mutually exclusive".into()),
    }
}

pub fn run_solve(config: &RunConfig) -> Outcome {
    let (spec, a) = match resolve_problem(config) {
        Ok(p) => p,
        Err(e) => return Outcome::invalid(e),
    };
    if !spec.in_supported_range() {
        return Outcome::invalid(format!("theta = {} is below the critical phase", spec.theta()));
    }
    let dev = (phase_h(&a) - spec.theta()).abs();
    if dev > LEVEL_SET_TOL {
        return Outcome::invalid(Error::NotOnLevelSet(dev).to_string());
    }
    let adm = admissibility(&a, &spec);
    let adm_report = AdmissibilityReport { klass: klass_name(adm.class), m: adm.m };
    if adm.class != AdmissibilityClass::InA {
        let doc = InadmissibleDocument {
            schema_version: SCHEMA_VERSION,
            command: Command::Solve,
            error: "inadmissible",
            klass: adm_report.klass,
            m: adm.m,
        };
        return Outcome {
            status: EXIT_INVALID,
            body: to_json(&doc),
            messages: vec![format!(
                "inadmissible input: klass={} m={}",
                adm_report.klass,
                adm.m.map(fmt_f64).unwrap_or_else(|| "undefined".into())
            )],
        };
    }
    if !(config.rmax > 1.0) {
        return Outcome::invalid("--rmax must exceed 1");
    }
    match solve_inner(config, &spec, &a, adm_report) {
        Ok(report) => {
            let mut messages = report.warnings.clone();
            messages.push(format!(
                "m = {}, route gap = {:e}, min(H - theta) = {:e}, min Z = {:e}",
                report.m,
                report.route_agreement.max_gap,
                report.verification.min_h_minus_theta,
                report.verification.min_z
            ));
            let status = if report.passed { EXIT_OK } else { EXIT_CHECK_FAILED };
            let body = match config.format {
                Format::Json => to_json(&report),
                Format::Csv => csv_text(
                    &["r", "psi_numeric", "psi_implicit", "excess_numeric", "excess_implicit"],
                    |w| {
                        for t in &report.trajectory {
                            w.write_record([
                                fmt_f64(t.r),
                                fmt_f64(t.psi_numeric),
                                fmt_f64(t.psi_implicit),
                                fmt_f64(t.excess_numeric),
                                fmt_f64(t.excess_implicit),
                            ])?;
                        }
                        Ok(())
                    },
                ),
            };
            Outcome { status, body, messages }
        }
        Err(e) => Outcome::invalid(e.to_string()),
    }
}

fn solve_inner(
    config: &RunConfig,
    spec: &PhaseSpec,
    a: &[f64],
    admissibility: AdmissibilityReport,
) -> Result<SolveReport, Error> {
    let sub = SubsolutionSpec::new(config.alpha, config.beta, config.gamma, a, spec)?;
    let model: &PsiModel = sub.model();
    let beta = config.beta;
    let mut warnings = Vec::new();
    if beta > BETA_WARN {
        warnings.push(format!("beta = {beta} exceeds {BETA_WARN}; partial-fraction conditioning degrades"));
    }

    let radii = default_radii(config.rmax);
    let implicit = model.implicit_at(beta, &radii)?;
    let mut tol = 1e-10;
    let (numeric, max_gap) = loop {
        let numeric = model.integrate_at(beta, &radii, tol)?;
        let gap = numeric
            .samples
            .iter()
            .zip(&implicit.samples)
            .map(|(x, y)| (x.psi - y.psi).abs())
            .fold(0.0, f64::max);
        if gap <= ROUTE_TOL || tol <= 1e-13 {
            break (numeric, gap);
        }
        tol *= 0.1;
    };
    let trajectory = numeric
        .samples
        .iter()
        .zip(&implicit.samples)
        .map(|(x, y)| TrajectoryRow {
            r: x.r,
            psi_numeric: x.psi,
            psi_implicit: y.psi,
            excess_numeric: x.excess,
            excess_implicit: y.excess,
        })
        .collect();

    let fit = if beta > 1.0 && config.rmax >= 1e3 { Some(decay_fit(&numeric)?) } else { None };
    let mu = [1.0, 10.0, 100.0]
        .iter()
        .map(|f| {
            let big_r = f * config.gamma;
            Ok(MuValue { big_r, value: model.mu(beta, big_r)? })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let max_abs_g_prime = numeric
        .samples
        .iter()
        .map(|s| model.g_prime(s.psi).map(f64::abs))
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let grid = GridSpec {
        shells: config.grid.unwrap_or(20),
        r_max: 50.0 * config.gamma,
        quasi_random_dirs: 100,
    };
    let verification = verify_subsolution(&sub, &grid)?;
    let pf = model.partial_fractions();
    let route_ok = max_gap <= ROUTE_TOL;
    Ok(SolveReport {
        schema_version: SCHEMA_VERSION,
        command: Command::Solve,
        n: spec.n(),
        theta: spec.theta(),
        a: a.to_vec(),
        alpha: config.alpha,
        beta,
        gamma: config.gamma,
        m: model.m(),
        admissibility,
        partial_fractions: PartialFractionReport { roots: pf.roots.clone(), k: pf.k.clone() },
        leading_constant: model.leading_constant(beta),
        trajectory,
        route_agreement: RouteAgreement { max_gap, integrator_tol: tol, passed: route_ok },
        mu,
        decay_fit: fit,
        g_prime: GPrimeReport {
            at_one: model.g_prime(1.0)?,
            limit: model.g_prime_limit(),
            max_abs_along_trajectory: max_abs_g_prime,
        },
        passed: route_ok && verification.passed,
        verification,
        warnings,
    })
}

/// Entry point shared by the binary and the tests: parse, run, write.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let config = match RunConfig::from_command_line(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INVALID;
        }
    };
    let outcome = execute(&config);
    for m in &outcome.messages {
        eprintln!("{m}");
    }
    if !outcome.body.is_empty() {
        match &config.out {
            Some(path) => {
                if let Err(e) = std::fs::write(path, &outcome.body) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return EXIT_INVALID;
                }
            }
            None => print!("{}", outcome.body),
        }
    }
    outcome.status
}
