//! Dispatch of analyses and assembly of the report.

use std::time::Instant;

use gammastab_core::error::Error;
use gammastab_core::frames::{
    adjudicate_lower_constant, exponential_family_constants, frame_constants_cck, frame_constants_gram, gram_embedding, gram_matrix, ExponentialFamily,
};
use gammastab_core::gaussian::{riesz_sandwich, OperatorMatrix};
use gammastab_core::linalg::{c64, frobenius_norm};
use gammastab_core::mc::Sampling;
use gammastab_core::scp::{
    bounded_perturbation_solution, datko_pazy_certify, invariant_measure_exists, perturbed_invariant_measure_check, rank_one_failure_witness,
    resolvent_transform_norm, solution_exists, ScpProblem,
};
use gammastab_core::semigroup::{
    neumann_resolvent, rbound_laplace_check, resolvent, resolvent_rbound_datko, spectral_abscissa, DatkoConfig, Generator, LaplaceCheckConfig,
    C_UNIV, C_UNIV_FORMULA,
};
use gammastab_core::verify::{run_all, CriterionResult, VerifyConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::spec::{matrix, Analysis, Group, System, SystemSpecFile};

/// Upper limit on Neumann terms when sizing the series from the tolerance.
const MAX_NEUMANN_TERMS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settings {
    pub seed: u64,
    pub samples: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Constant {
    pub formula: &'static str,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
    Error,
    Skipped,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisOutcome {
    pub name: &'static str,
    pub group: Group,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<&'static str>,
    pub inputs: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub passed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionEntry {
    #[serde(flatten)]
    pub result: CriterionResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: Subcommand,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<SystemSpecFile>,
    pub settings: Settings,
    pub c_univ: Constant,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub analyses: Vec<AnalysisOutcome>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub criteria: Vec<CriterionEntry>,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subcommand {
    Frames,
    Stability,
    Scp,
    Verify,
}

impl Subcommand {
    fn group(self) -> Option<Group> {
        match self {
            Subcommand::Frames => Some(Group::Frames),
            Subcommand::Stability => Some(Group::Stability),
            Subcommand::Scp => Some(Group::Scp),
            Subcommand::Verify => None,
        }
    }
}

fn default_analyses(group: Group) -> Vec<Analysis> {
    match group {
        Group::Frames => vec![Analysis::FrameConstants { a: 0.5, rho: 0.0, n: 200 }],
        Group::Stability => vec![Analysis::Stability {}],
        Group::Scp => vec![Analysis::InvariantMeasure {}],
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

struct Done {
    method: &'static str,
    passed: bool,
    result: Value,
}

fn method(sys: &System, sampled: bool) -> &'static str {
    if sampled && !sys.space.is_hilbert() {
        "monte-carlo"
    } else {
        "exact"
    }
}

fn execute(sys: &System, analysis: &Analysis, sampling: Sampling, tolerance: f64) -> Result<Done, Error> {
    let gen = || Generator::new(sys.a.clone(), sys.space);
    let prob = || ScpProblem::new(gen()?, sys.b.clone());
    match analysis {
        Analysis::FrameConstants { a, rho, n } => {
            let family = ExponentialFamily::with_len(*a, *rho, *n)?;
            let cck = frame_constants_cck(&family, 4096, tolerance)?;
            let gram = frame_constants_gram(&gram_matrix(&family, &family.indices())?)?;
            let closed = exponential_family_constants(*a)?;
            let cck_error = (cck.hilbert_sq() - closed.hilbert_sq()).abs();
            let gram_gap = (gram.hilbert_sq() - cck.hilbert_sq()).abs() / cck.hilbert_sq();
            Ok(Done {
                method: "quadrature",
                passed: cck_error <= 1e-6 && gram_gap <= 0.02,
                result: json!({
                    "cck": { "method": "quadrature", "constants": cck, "hilbert_sq": cck.hilbert_sq(), "bessel_sq": cck.bessel_sq() },
                    "gram": { "method": "exact", "n": n, "constants": gram, "hilbert_sq": gram.hilbert_sq(), "bessel_sq": gram.bessel_sq() },
                    "closed_form": { "method": "exact", "hilbert_sq_formula": "e^{2a}/(e^{2a}-1)", "bessel_sq_formula": "1/(e^{2a}-1)", "constants": closed },
                    "cck_abs_error": cck_error,
                    "gram_rel_gap": gram_gap,
                }),
            })
        }
        Analysis::LowerConstant { a, rho, sizes } => {
            let adj = adjudicate_lower_constant(*a, *rho, sizes)?;
            Ok(Done { method: "exact", passed: adj.monotone_from_above && adj.alternative_rejected, result: to_value(&adj) })
        }
        Analysis::RieszSandwich { a, rho } => {
            let family = ExponentialFamily::with_len(*a, *rho, sys.b.ncols())?;
            let f = gram_embedding(&gram_matrix(&family, &family.indices())?);
            let r = OperatorMatrix::new(sys.b.clone())?;
            let report = riesz_sandwich(&r, &f, &exponential_family_constants(*a)?, &sys.space, sampling)?;
            Ok(Done { method: method(sys, true), passed: report.holds, result: to_value(&report) })
        }
        Analysis::Stability {} => {
            let cert = resolvent_rbound_datko(&gen()?, &DatkoConfig::default(), sampling)?;
            Ok(Done { method: method(sys, true), passed: cert.valid, result: to_value(&cert) })
        }
        Analysis::LaplaceCheck { delta, n_values, trials } => {
            let config = LaplaceCheckConfig { n_values: n_values.clone(), trials: *trials, seed: sys.mc.seed };
            let report = rbound_laplace_check(&gen()?, *delta, &config, sampling)?;
            Ok(Done { method: method(sys, true), passed: report.holds, result: to_value(&report) })
        }
        Analysis::Neumann { lambda, terms } => {
            let g = gen()?;
            let cert = resolvent_rbound_datko(&g, &DatkoConfig::default(), sampling)?;
            let lam = c64(lambda[0], lambda[1]);
            let probe = neumann_resolvent(&g, lam, cert.epsilon0, 1)?;
            let n = terms.unwrap_or_else(|| {
                let q = probe.ratio;
                if q <= 0.0 {
                    1
                } else {
                    // relative error q^N/(1-q) ≤ tolerance
                    let n = ((tolerance * (1.0 - q)).ln() / q.ln()).ceil();
                    (n.max(1.0) as usize).min(MAX_NEUMANN_TERMS)
                }
            });
            let approx = neumann_resolvent(&g, lam, cert.epsilon0, n)?;
            let direct = resolvent(&g, lam)?;
            let rel_error = frobenius_norm(&(&approx.matrix - &direct)) / frobenius_norm(&direct);
            Ok(Done {
                method: "exact",
                passed: rel_error <= tolerance,
                result: json!({ "epsilon0": cert.epsilon0, "series": approx, "relative_error_vs_direct": rel_error }),
            })
        }
        Analysis::DatkoPazy {} => {
            let r = datko_pazy_certify(&gen()?, sampling)?;
            let passed = r.shifted_norms_finite && r.abscissa_bound_holds && r.rank_one.consistent && r.certificate.valid;
            Ok(Done { method: method(sys, true), passed, result: to_value(&r) })
        }
        Analysis::Solution { horizon } => {
            let r = solution_exists(&prob()?, *horizon, sampling)?;
            Ok(Done { method: method(sys, true), passed: r.exists, result: to_value(&r) })
        }
        Analysis::InvariantMeasure {} => {
            let r = invariant_measure_exists(&prob()?, sampling)?;
            Ok(Done { method: method(sys, true), passed: r.exists, result: to_value(&r) })
        }
        Analysis::TransformNorm {} => {
            let r = resolvent_transform_norm(&prob()?, sampling)?;
            Ok(Done { method: if sys.space.is_hilbert() { "quadrature" } else { "monte-carlo" }, passed: true, result: to_value(&r) })
        }
        Analysis::Perturbation { p } => {
            let p = matrix(p, sys.a.nrows(), sys.a.nrows(), "P").map_err(Error::InvalidArgument)?;
            let r = perturbed_invariant_measure_check(&prob()?, &p, sampling)?;
            Ok(Done { method: method(sys, true), passed: r.holds, result: to_value(&r) })
        }
        Analysis::PerturbedSolution { p, horizon } => {
            let p = matrix(p, sys.a.nrows(), sys.a.nrows(), "P").map_err(Error::InvalidArgument)?;
            let r = bounded_perturbation_solution(&prob()?, &p, *horizon, sampling)?;
            Ok(Done { method: method(sys, true), passed: r.transform_bound_holds && r.envelope_holds, result: to_value(&r) })
        }
    }
}

/// Spectral information attached to a failed stability analysis.
fn diagnose(sys: &System) -> Option<Value> {
    let gen = Generator::new(sys.a.clone(), sys.space).ok()?;
    let s = spectral_abscissa(&gen).ok()?;
    let witness = rank_one_failure_witness(&gen).ok()?;
    Some(json!({ "spectral_abscissa": s, "hurwitz": s < 0.0, "rank_one_witness": witness }))
}

fn run_one(sys: &System, analysis: &Analysis, index: usize, settings: &Settings, timings: bool) -> AnalysisOutcome {
    let start = Instant::now();
    let sampling = Sampling::Auto(sys.mc.derive(index as u64));
    let outcome = execute(sys, analysis, sampling, settings.tolerance);
    let elapsed_s = timings.then(|| start.elapsed().as_secs_f64());
    let base = AnalysisOutcome {
        name: analysis.name(),
        group: analysis.group(),
        status: Status::Ok,
        method: None,
        inputs: to_value(analysis),
        passed: None,
        result: None,
        error: None,
        diagnosis: None,
        elapsed_s,
    };
    match outcome {
        Ok(done) => AnalysisOutcome {
            status: if done.passed { Status::Ok } else { Status::Failed },
            method: Some(done.method),
            passed: Some(done.passed),
            result: Some(done.result),
            ..base
        },
        Err(e) => {
            let diagnosis = matches!(e, Error::NotStable(_)).then(|| diagnose(sys)).flatten();
            AnalysisOutcome { status: Status::Error, passed: Some(false), error: Some(e.to_string()), diagnosis, ..base }
        }
    }
}

fn skipped(analysis: &Analysis) -> AnalysisOutcome {
    AnalysisOutcome {
        name: analysis.name(),
        group: analysis.group(),
        status: Status::Skipped,
        method: None,
        inputs: to_value(analysis),
        passed: None,
        result: None,
        error: None,
        diagnosis: None,
        elapsed_s: None,
    }
}

pub fn c_univ() -> Constant {
    Constant { formula: C_UNIV_FORMULA, value: C_UNIV }
}

/// Runs the analyses of one subcommand on a validated system.
pub fn analyze(sys: &System, subcommand: Subcommand, settings: Settings, timings: bool) -> Report {
    let group = subcommand.group().expect("analysis subcommand");
    let requested = if sys.analyses.is_empty() { default_analyses(group) } else { sys.analyses.clone() };
    let sys = System { mc: gammastab_core::mc::McConfig::new(settings.samples, settings.seed), ..sys.clone() };
    let analyses: Vec<AnalysisOutcome> = requested
        .iter()
        .enumerate()
        .map(|(i, a)| if a.group() == group { run_one(&sys, a, i, &settings, timings) } else { skipped(a) })
        .collect();
    let passed = analyses.iter().all(|a| matches!(a.status, Status::Ok | Status::Skipped));
    Report {
        tool: "gamma-stab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        spec: Some(sys.file.clone()),
        settings,
        c_univ: c_univ(),
        analyses,
        criteria: Vec::new(),
        passed,
    }
}

pub fn verify(spec: Option<SystemSpecFile>, settings: Settings, timings: bool) -> Report {
    let results = run_all(&VerifyConfig { samples: settings.samples, seed: settings.seed });
    let passed = results.iter().all(|r| r.passed);
    let criteria = results
        .into_iter()
        .map(|r| {
            let elapsed_s = timings.then_some(r.elapsed.as_secs_f64());
            CriterionEntry { result: r, elapsed_s }
        })
        .collect();
    Report {
        tool: "gamma-stab",
        version: env!("CARGO_PKG_VERSION"),
        subcommand: Subcommand::Verify,
        spec,
        settings,
        c_univ: c_univ(),
        analyses: Vec::new(),
        criteria,
        passed,
    }
}
