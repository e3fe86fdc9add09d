//! Subcommand implementations. Every command turns into a list of checks.

use std::path::Path;

use anyhow::{anyhow, Context};
use charfn_core::charfn::{
    align_factorizations, coincidence, conjugate_tuple, construct, factorization_residual,
    factorization_residual_exact, find_k_inner, functional_model, random_unitary, sample_points, CharFnCaps,
    CharFnData, Construction,
};
use charfn_core::dilation::kernel_vector_action;
use charfn_core::exact::ExactTuple;
use charfn_core::kernel::{
    admissibility_report, b_series, factorize_with_cnp, is_cnp, is_positive_quotient, KernelFactorization,
    KernelSeries, KernelSpec, ScalarMode,
};
use charfn_core::linalg::{max_abs, CVector, Tolerances};
use charfn_core::model::{impossibility_closed_form, quadratic_window};
use charfn_core::multiindex::MultiIndex;
use charfn_core::rational;
use charfn_core::tuple::{defect_data, purity_check, OperatorTuple};
use charfn_core::Error;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::presets::{self, Preset, TupleSource};
use crate::report::{timed, timed_one, Check, Environment, RunReport};
use crate::{CharfnArgs, CharfnCmd, Cli, Command, InputError, KernelArgs, KernelCmd, Mode};

const COMPOSITE_TOL: f64 = 1e-8;
const STEP_TOL: f64 = 1e-10;
const SAMPLE_RADIUS: f64 = 0.6;
// Small enough that a chance approximation within 1e-12 is implausible.
const MAX_DENOMINATOR: i64 = 10_000;
const THETA_ZERO: f64 = 1e-12;

/// Thresholds and seed shared by every check of one run.
#[derive(Clone, Debug)]
pub struct Settings {
    pub mode: Mode,
    pub composite: f64,
    pub step: f64,
    pub seed: u64,
    pub tol: Tolerances,
}

impl Settings {
    pub fn from_cli(cli: &Cli) -> Self {
        let g = &cli.global;
        let tol = Tolerances { degree_cap: g.degree_cap, ..Tolerances::default() };
        Self {
            mode: g.mode,
            composite: g.tol.unwrap_or(COMPOSITE_TOL),
            step: g.tol.unwrap_or(STEP_TOL),
            seed: g.seed,
            tol,
        }
    }

    fn exact(&self) -> bool {
        self.mode == Mode::Exact
    }

    fn scalar_mode(&self) -> ScalarMode {
        match self.mode {
            Mode::Exact => ScalarMode::Exact,
            Mode::Float => ScalarMode::Float { tol: self.step },
        }
    }

    fn environment(&self) -> Environment {
        Environment {
            mode: match self.mode {
                Mode::Exact => "exact".into(),
                Mode::Float => "float".into(),
            },
            tolerances: self.tol,
            composite_tolerance: self.composite,
            step_tolerance: self.step,
            seed: self.seed,
        }
    }
}

fn input(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(InputError(msg.into()))
}

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn load_spec(path: &Path, truncation: Option<usize>) -> anyhow::Result<KernelSpec> {
    let spec = KernelSpec::from_json(&read(path)?).map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(match truncation {
        Some(n) => spec.with_truncation(n),
        None => spec,
    })
}

fn build_kernel(spec: &KernelSpec) -> anyhow::Result<KernelSeries> {
    spec.build().map_err(|e| input(format!("kernel spec: {e}")))
}

fn load_kernel(path: &Path, truncation: Option<usize>) -> anyhow::Result<KernelSeries> {
    build_kernel(&load_spec(path, truncation)?)
}

fn strings(c: &[rational::Rational]) -> Vec<String> {
    c.iter().map(rational::format).collect()
}

/// Runs the parsed command. `Err` carrying an [`InputError`] means exit 2.
pub fn run(cli: &Cli) -> anyhow::Result<RunReport> {
    let settings = Settings::from_cli(cli);
    let config = serde_json::to_value(cli).context("config echo")?;
    let (name, checks) = match &cli.command {
        Command::Kernel { cmd } => kernel(cmd, &settings)?,
        Command::Charfn { cmd } => charfn(cmd, &settings)?,
        Command::Impossibility { m, n, n_max } => ("impossibility".into(), impossibility(*m, *n, *n_max)?),
        Command::Suite { jobs } => ("suite".into(), suite(*jobs, &settings)?),
    };
    Ok(RunReport::new(name, config, settings.environment(), checks))
}

fn kernel(cmd: &KernelCmd, s: &Settings) -> anyhow::Result<(String, Vec<Check>)> {
    Ok(match cmd {
        KernelCmd::Info(KernelArgs { spec, n }) => {
            let k = load_kernel(spec, *n)?;
            let checks = vec![
                timed_one(|| {
                    Check::certificate(
                        "coefficients",
                        json!({ "label": k.label(), "d": k.dim(), "a": strings(k.coeffs()), "b": strings(b_series(&k).coeffs()) }),
                    )
                }),
                timed_one(|| Check::certificate("admissibility", json!(admissibility_report(&k)))),
                timed_one(|| Check::certificate("cnp", json!(is_cnp(&k, s.scalar_mode())))),
            ];
            ("kernel info".into(), checks)
        }
        KernelCmd::Cnp(KernelArgs { spec, n }) => {
            let k = load_kernel(spec, *n)?;
            let check = timed_one(|| cnp_check("cnp", &k, s));
            ("kernel cnp".into(), vec![check])
        }
        KernelCmd::Quotient { num, den, n } => {
            let k = load_kernel(num, *n)?;
            let l = load_kernel(den, *n)?;
            if k.dim() != l.dim() {
                return Err(input(format!("dimension mismatch: {} vs {}", k.dim(), l.dim())));
            }
            let q = charfn_core::kernel::quotient(k.coeffs(), l.coeffs()).map_err(|e| input(e.to_string()))?;
            let check = timed_one(|| {
                let cert = is_positive_quotient(&k, &l).expect("divisor validated above");
                Check::exact("positive_quotient", cert.holds())
                    .with_detail(json!({ "certificate": cert, "quotient": strings(q.coeffs()) }))
            });
            ("kernel quotient".into(), vec![check])
        }
        KernelCmd::Factor { spec, cnp, n } => {
            let k = load_kernel(spec, *n)?;
            let sk = load_kernel(cnp, *n)?;
            let check = timed_one(|| match factorize_with_cnp(&k, &sk) {
                Ok(f) => Check::exact("factorization", true).with_detail(json!({
                    "s": strings(f.s().coeffs()),
                    "g": strings(f.g().coeffs()),
                    "truncation": f.truncation(),
                })),
                Err(e) => Check::failed("factorization", e),
            });
            ("kernel factor".into(), vec![check])
        }
    })
}

fn cnp_check(name: &str, k: &KernelSeries, s: &Settings) -> Check {
    let cert = is_cnp(k, s.scalar_mode());
    let check = if s.exact() { Check::exact(name, cert.holds()) } else { Check::verdict(name, cert.holds()) };
    check.with_detail(json!(cert))
}

/// One `charfn build|verify` run, resolved from flags or a preset.
#[derive(Clone, Debug)]
struct Job {
    kernel: KernelSpec,
    cnp: KernelSpec,
    tuple: TupleSource,
    window: Option<usize>,
    samples: usize,
}

fn resolve(args: &CharfnArgs) -> anyhow::Result<Job> {
    let (kernel, cnp, tuple) = if let Some(name) = &args.preset {
        let p = presets::find(name).map_err(|e| input(e.to_string()))?;
        (p.kernel, p.cnp, p.tuple)
    } else {
        let (Some(spec), Some(cnp)) = (&args.spec, &args.cnp) else {
            return Err(input("either --preset or both --spec and --cnp are required"));
        };
        let tuple = match (&args.tuple, args.model_degree) {
            (Some(path), _) => TupleSource::Matrices(presets::parse_tuple(&read(path)?).map_err(|e| input(format!("{e:#}")))?),
            (None, Some(n)) => TupleSource::Model(n),
            (None, None) => return Err(input("one of --tuple or --model-degree is required")),
        };
        (load_spec(spec, None)?, load_spec(cnp, None)?, tuple)
    };
    let (kernel, cnp) = match args.n {
        Some(n) => (kernel.with_truncation(n), cnp.with_truncation(n)),
        None => (kernel, cnp),
    };
    Ok(Job { kernel, cnp, tuple, window: args.window, samples: args.samples })
}

impl From<&Preset> for Job {
    fn from(p: &Preset) -> Self {
        Job { kernel: p.kernel.clone(), cnp: p.cnp.clone(), tuple: p.tuple.clone(), window: None, samples: 50 }
    }
}

/// Kernels and tuple of a job. Input problems surface here, before any check runs.
struct Prepared {
    k: KernelSeries,
    s: KernelSeries,
    t: OperatorTuple,
    model_degree: Option<usize>,
}

fn prepare(job: &Job) -> anyhow::Result<Prepared> {
    let k = build_kernel(&job.kernel)?;
    let s = build_kernel(&job.cnp)?;
    if k.dim() != s.dim() {
        return Err(input(format!("kernel dimension {} differs from CNP factor dimension {}", k.dim(), s.dim())));
    }
    let (t, model_degree) = match &job.tuple {
        TupleSource::Model(n) => (charfn_core::model::model_tuple(&k, *n).map_err(|e| input(e.to_string()))?, Some(*n)),
        TupleSource::Matrices(m) => (OperatorTuple::new(m.clone(), None).map_err(|e| input(e.to_string()))?, None),
    };
    if t.dim() != k.dim() {
        return Err(input(format!("tuple has {} operators, kernel dimension is {}", t.dim(), k.dim())));
    }
    Ok(Prepared { k, s, t, model_degree })
}

fn charfn(cmd: &CharfnCmd, s: &Settings) -> anyhow::Result<(String, Vec<Check>)> {
    let (name, args, full) = match cmd {
        CharfnCmd::Build(a) => ("charfn build", a, false),
        CharfnCmd::Verify(a) => ("charfn verify", a, true),
    };
    let job = resolve(args)?;
    let prepared = prepare(&job)?;
    let mut dump = None;
    let checks = charfn_checks(&job, &prepared, s, full, args.dump.is_some().then_some(&mut dump));
    if let (Some(path), Some(coeffs)) = (&args.dump, dump) {
        let text = serde_json::to_string_pretty(&coeffs)?;
        std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok((name.into(), checks))
}

fn first_error(checks: &[Check]) -> bool {
    checks.iter().any(|c| c.verdict == crate::report::Verdict::Fail)
}

/// Construction plus (for `full`) the invariant suite. Stops after the first
/// stage that fails, since later checks would only restate it.
fn charfn_checks(job: &Job, p: &Prepared, s: &Settings, full: bool, dump: Option<&mut Option<Value>>) -> Vec<Check> {
    let mut out = Vec::new();
    let f = match factorize_with_cnp(&p.k, &p.s) {
        Ok(f) => f,
        Err(e) => return vec![Check::failed("factorization", e)],
    };
    let defect = match defect_data(&p.t, &p.k, &p.s, &s.tol) {
        Ok(d) => d,
        Err(e) => return vec![Check::failed("contraction", e)],
    };
    out.push(timed_one(|| {
        let rep = purity_check(&p.t, &p.k, &defect, &s.tol);
        Check::residual("purity", rep.residual, s.composite).with_detail(json!({ "exact_limit": rep.exact }))
    }));
    if full && s.exact() {
        if let Some(n) = p.model_degree {
            out.extend(timed(|| exact_model_checks(&p.k, &p.s, &f, n)));
        }
    }
    if first_error(&out) {
        return out;
    }
    let caps = CharFnCaps { index_window: job.window, beta_degree: None };
    let con = match construct(&p.t, &f, caps, &s.tol) {
        Ok(c) => c,
        Err(e) => {
            out.push(Check::failed("construction", e));
            return out;
        }
    };
    out.push(theta_certificate(&con.cfn));
    if let Some(slot) = dump {
        *slot = Some(json!(con.cfn.theta_dump()));
    }
    if full {
        out.extend(verify_checks(p, &f, &con, job.samples, s));
    }
    out
}

fn exact_model_checks(k: &KernelSeries, sk: &KernelSeries, f: &KernelFactorization, n: usize) -> Vec<Check> {
    let t = match ExactTuple::model(k, n) {
        Ok(t) => t,
        Err(e) => return vec![Check::failed("exact_model", e)],
    };
    let dsq = match t.defect_sq(k) {
        Ok(d) => d,
        Err(e) => return vec![Check::failed("delta_e0_exact", e)],
    };
    let purity = t.purity_sum(k, &dsq).map(|m| m == t.identity());
    let lemma_pi = t.lifted_sum(f.g().coeffs(), 0, &dsq).and_then(|lhs| Ok(lhs == t.defect_sq(sk)?));
    vec![
        Check::exact("delta_e0_exact", dsq == t.e0()),
        match purity {
            Ok(ok) => Check::exact("purity_exact", ok),
            Err(e) => Check::failed("purity_exact", e),
        },
        match lemma_pi {
            Ok(ok) => Check::exact("lemma_pi_exact", ok),
            Err(e) => Check::failed("lemma_pi_exact", e),
        },
    ]
}

fn theta_certificate(cfn: &CharFnData) -> Check {
    let nonzero: Vec<Value> = cfn
        .theta_dump()
        .into_iter()
        .zip(&cfn.theta)
        .filter(|(_, (_, m))| max_abs(m) > THETA_ZERO)
        .map(|(d, _)| json!(d))
        .collect();
    Check::certificate(
        "theta",
        json!({
            "rank": cfn.rank(),
            "domain_dim": cfn.domain_dim(),
            "window": cfn.window,
            "exact": cfn.exact,
            "tail_free": cfn.tail_free,
            "nonzero_coefficients": nonzero,
        }),
    )
}

fn pairs(d: usize, count: usize, seed: u64) -> Vec<(Vec<Complex64>, Vec<Complex64>)> {
    let pts = sample_points(d, 2 * count, SAMPLE_RADIUS, seed);
    pts.chunks(2).map(|c| (c[0].clone(), c[1].clone())).collect()
}

fn worst<T>(items: impl IntoIterator<Item = T>, mut f: impl FnMut(T) -> charfn_core::Result<f64>) -> charfn_core::Result<f64> {
    items.into_iter().try_fold(0.0f64, |acc, x| Ok(acc.max(f(x)?)))
}

fn residual_or_fail(name: &str, r: charfn_core::Result<f64>, tol: f64) -> Check {
    match r {
        Ok(r) => Check::residual(name, r, tol),
        Err(e) => Check::failed(name, e),
    }
}

fn verify_checks(p: &Prepared, f: &KernelFactorization, con: &Construction, sample_count: usize, s: &Settings) -> Vec<Check> {
    let Construction { cfn, dilation, multiplier } = con;
    let t = &p.t;
    let d = t.dim();
    let samples = pairs(d, sample_count, s.seed);
    let mut out = Vec::new();

    out.push(timed_one(|| Check::residual("dilation_isometry", dilation.isometry_residual(), s.step)));
    out.push(timed_one(|| {
        let r = dilation.intertwining_residual(t).into_iter().fold(0.0, f64::max);
        Check::residual("dilation_intertwining", r, s.step)
    }));
    out.push(timed_one(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        let r = worst(&samples, |(w, _)| {
            let xi = CVector::from_fn(dilation.rank, |_, _| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            Ok(kernel_vector_action(dilation, t, &p.k, &cfn.defect, w, &xi, &s.tol)?.difference)
        });
        residual_or_fail("dilation_kernel_action", r, s.step)
    }));

    let rep = cfn.block_report();
    out.push(Check::residual("lemma_pi", rep.pi_star_pi, s.composite));
    out.push(Check::residual("gamma_identity", rep.gamma_identity.max(rep.defect_identity), s.composite));
    out.push(
        Check::residual("block_relations", rep.max_relation(), s.composite)
            .with_detail(json!({ "tt": rep.relation_tt, "pt": rep.relation_pt, "pp": rep.relation_pp })),
    );
    let unitarity = if rep.square { rep.unitary_left.max(rep.unitary_right) } else { rep.unitary_right };
    out.push(Check::residual("unitarity", unitarity, s.composite).with_detail(json!({ "square": rep.square })));

    out.push(timed_one(|| residual_or_fail("eq_i4", worst(&samples, |(z, _)| cfn.i4_residual(z, &s.tol)), s.composite)));
    out.push(timed_one(|| {
        let r = samples
            .iter()
            .map(|(z, _)| {
                let (lhs, rhs) = cfn.z_norm_sq(z);
                if lhs < 1.0 {
                    (lhs - rhs).abs()
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max);
        Check::residual("z_contraction", r, s.composite)
    }));
    out.push(timed_one(|| residual_or_fail("lemma1", cfn.lemma1_residual(&samples, &s.tol), s.composite)));

    out.push(timed_one(|| match factorization_residual(dilation, multiplier) {
        Ok(r) => Check::residual("factorization_restricted", r.restricted, s.composite)
            .with_detail(json!({ "restricted_degree": r.restricted_degree, "unrestricted": r.unrestricted })),
        Err(e) => Check::failed("factorization_restricted", e),
    }));
    if s.exact() && cfn.tail_free && dilation.exact {
        out.push(timed_one(|| match factorization_residual_exact(dilation, multiplier, MAX_DENOMINATOR) {
            Ok(r) => Check::exact("factorization_exact", r == rational::q(0)).with_detail(json!(rational::format(&r))),
            Err(Error::ExactUnavailable(why)) => Check::certificate("factorization_exact", json!({ "unavailable": why })),
            Err(e) => Check::failed("factorization_exact", e),
        }));
    }

    out.push(timed_one(|| {
        let p_nil = t.nilpotency().unwrap_or(cfn.window + 1);
        match find_k_inner(t, f, 3, 2 * p_nil + 2, &s.tol) {
            Ok((c, ki)) => Check::residual("k_inner", ki.shift_orthogonality.max(ki.isometry), s.composite)
                .with_detail(json!({ "dim": ki.dim, "window": c.window, "max_eigenvalue": ki.max_eigenvalue })),
            Err(e) => Check::failed("k_inner", e),
        }
    }));
    out.push(timed_one(|| match functional_model(t, dilation, multiplier) {
        Ok(fm) => Check::residual("functional_model", fm.max_residual(), s.composite).with_detail(json!({
            "intertwining": fm.intertwining,
            "equivalence": fm.equivalence,
            "range_orthogonality": fm.range_orthogonality,
        })),
        Err(e) => Check::failed("functional_model", e),
    }));
    out
}

fn impossibility(m: u32, n: u32, n_max: usize) -> anyhow::Result<Vec<Check>> {
    if m == 0 || n == 0 {
        return Err(input("m and n must be at least 1"));
    }
    let trunc = n_max + 4;
    let km = KernelSeries::bergman(m, 1, trunc).map_err(|e| input(e.to_string()))?;
    let l = KernelSeries::bergman(n, 1, trunc).map_err(|e| input(e.to_string()))?;
    let mut out = Vec::new();
    let mut first_violation = None;
    let mut values = Vec::new();
    for big_n in 0..=n_max {
        let closed = impossibility_closed_form(m, n, big_n);
        if closed < rational::q(0) && first_violation.is_none() {
            first_violation = Some((big_n, rational::format(&closed)));
        }
        values.push(rational::format(&closed));
        out.push(timed_one(|| {
            let name = format!("form_N{big_n}");
            let value = quadratic_window(&km, &l, big_n, big_n + 3)
                .and_then(|w| w.evaluate(&w.unit_vector(&MultiIndex::new(vec![big_n as u32 + 2])?)?));
            match value {
                Ok(v) => Check::residual(name, (v - rational::to_f64(&closed)).abs(), 1e-12)
                    .with_detail(json!({ "closed_form": rational::format(&closed), "matrix": v })),
                Err(e) => Check::failed(name, e),
            }
        }));
    }
    let detail = json!({
        "m": m,
        "n": n,
        "n_max": n_max,
        "first_violation": first_violation.as_ref().map(|(n, v)| json!({ "N": n, "value": v })),
        "values": values,
    });
    if n == 1 {
        out.push(Check::verdict("no_violation", first_violation.is_none()).with_detail(detail));
    } else {
        out.push(Check::certificate("first_violation", detail));
    }
    Ok(out)
}

/// A suite entry: independent, seeded, and internally sequential.
enum Entry {
    Verify(Preset),
    Cnp(&'static str, KernelSpec, bool),
    Impossibility(u32, u32, usize),
    Coincidence(Preset),
    Alignment(usize, usize),
}

impl Entry {
    fn name(&self) -> String {
        match self {
            Entry::Verify(p) => format!("verify/{}", p.name),
            Entry::Cnp(name, _, _) => format!("cnp/{name}"),
            Entry::Impossibility(m, n, _) => format!("impossibility/m{m}-n{n}"),
            Entry::Coincidence(p) => format!("coincidence/{}", p.name),
            Entry::Alignment(d, n) => format!("alignment/d{d}-n{n}"),
        }
    }
}

fn suite_entries() -> Vec<Entry> {
    let mut out: Vec<Entry> = presets::suite_matrix().into_iter().map(Entry::Verify).collect();
    out.push(Entry::Cnp("szego-200", KernelSpec::Szego { d: 1, truncation: 200 }, true));
    for m in 2..=6 {
        let name: &'static str = ["", "", "bergman-m2", "bergman-m3", "bergman-m4", "bergman-m5", "bergman-m6"][m as usize];
        out.push(Entry::Cnp(name, KernelSpec::Bergman { m, d: 1, truncation: 50 }, false));
    }
    out.push(Entry::Cnp("dirichlet-50", KernelSpec::Dirichlet { d: 1, truncation: 50 }, true));
    for m in 1..=5 {
        for n in 1..=4 {
            let n_max = if n == 1 { 50 } else { 20 };
            if m == 5 && n > 1 {
                continue;
            }
            out.push(Entry::Impossibility(m, n, n_max));
        }
    }
    for p in presets::suite_matrix() {
        let small = matches!(p.tuple, TupleSource::Model(n) if (1..=2).contains(&n)) && p.name.contains("-d1-");
        if small {
            out.push(Entry::Coincidence(p));
        }
    }
    for d in 1..=2 {
        for n in 0..=3 {
            out.push(Entry::Alignment(d, n));
        }
    }
    out
}

fn run_entry(entry: &Entry, s: &Settings) -> Vec<Check> {
    let name = entry.name();
    let checks = timed(|| match entry {
        Entry::Verify(p) => {
            let job = Job::from(p);
            match prepare(&job) {
                Ok(prep) => charfn_checks(&job, &prep, s, true, None),
                Err(e) => vec![Check::failed("prepare", e)],
            }
        }
        Entry::Cnp(_, spec, expected) => match spec.build() {
            Ok(k) => {
                let cert = is_cnp(&k, s.scalar_mode());
                vec![Check::exact("expected_verdict", cert.holds() == *expected).with_detail(json!(cert))]
            }
            Err(e) => vec![Check::failed("build", e)],
        },
        Entry::Impossibility(m, n, n_max) => {
            impossibility(*m, *n, *n_max).unwrap_or_else(|e| vec![Check::failed("impossibility", e)])
        }
        Entry::Coincidence(p) => vec![coincidence_check(p, s)],
        Entry::Alignment(d, n) => vec![alignment_check(*d, *n, s)],
    });
    checks.into_iter().map(|c| c.prefixed(&name)).collect()
}

fn coincidence_check(p: &Preset, s: &Settings) -> Check {
    let run = || -> charfn_core::Result<Check> {
        let k = p.kernel.build()?;
        let f = factorize_with_cnp(&k, &p.cnp.build()?)?;
        let TupleSource::Model(n) = p.tuple else {
            return Err(Error::InvalidInput("coincidence entries use model tuples".into()));
        };
        let t = charfn_core::model::model_tuple(&k, n)?;
        let tw = conjugate_tuple(&t, &random_unitary(t.size(), s.seed))?;
        let a = charfn_core::charfn::build_charfn(&t, &f, CharFnCaps::default(), &s.tol)?;
        let b = charfn_core::charfn::build_charfn(&tw, &f, CharFnCaps::default(), &s.tol)?;
        let co = coincidence(&a, &b, s.seed)?;
        Ok(Check::verdict("conjugate_coincides", co.coincide).with_residual(co.residual).with_detail(json!(co)))
    };
    run().unwrap_or_else(|e| Check::failed("conjugate_coincides", e))
}

fn alignment_check(d: usize, n: usize, s: &Settings) -> Check {
    let run = || -> charfn_core::Result<Check> {
        let da = KernelSeries::drury_arveson(d, 32);
        let dir = KernelSeries::dirichlet(d, 32);
        let k = KernelSeries::product(&da, &dir)?;
        let t = charfn_core::model::model_tuple(&k, n)?;
        let c1 = charfn_core::charfn::build_charfn(&t, &factorize_with_cnp(&k, &da)?, CharFnCaps::default(), &s.tol)?;
        let c2 = charfn_core::charfn::build_charfn(&t, &factorize_with_cnp(&k, &dir)?, CharFnCaps::default(), &s.tol)?;
        let pts = sample_points(d, 30, SAMPLE_RADIUS, s.seed);
        let al = align_factorizations(&c1, &c2, &pts, &s.tol)?;
        Ok(Check::residual("gram", al.gram_residual, s.composite).with_detail(json!(al)))
    };
    run().unwrap_or_else(|e| Check::failed("gram", e))
}

fn suite(jobs: usize, s: &Settings) -> anyhow::Result<Vec<Check>> {
    let entries = suite_entries();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().context("thread pool")?;
    let per_entry: Vec<Vec<Check>> = pool.install(|| {
        entries
            .par_iter()
            .enumerate()
            .map(|(i, e)| {
                let local = Settings { seed: s.seed.wrapping_add(i as u64), ..s.clone() };
                run_entry(e, &local)
            })
            .collect()
    });
    Ok(per_entry.into_iter().flatten().collect())
}
