//! System specification files: parsing and validation.

use gammastab_core::linalg::{c64, CMat};
use gammastab_core::mc::McConfig;
use gammastab_core::space::SpaceSpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> (f64, f64) {
        match self {
            Entry::Real(x) => (x, 0.0),
            Entry::Complex([re, im]) => (re, im),
        }
    }
}

pub type Rows = Vec<Vec<Entry>>;

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Dimension {
    pub m: usize,
    pub d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NormName {
    #[default]
    L2,
    Lp,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceField {
    #[serde(default)]
    pub norm: NormName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct McField {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for McField {
    fn default() -> Self {
        Self { samples: default_samples(), seed: 0 }
    }
}

fn default_samples() -> usize {
    100_000
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

fn n200() -> usize {
    200
}

fn sizes() -> Vec<usize> {
    vec![25, 50, 100, 200, 400]
}

fn n_values() -> Vec<usize> {
    vec![0, 4, 16, 64]
}

fn trials() -> usize {
    3
}

/// One requested analysis with its parameters.
#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    FrameConstants {
        #[serde(default = "half")]
        a: f64,
        #[serde(default)]
        rho: f64,
        #[serde(default = "n200")]
        n: usize,
    },
    LowerConstant {
        #[serde(default = "half")]
        a: f64,
        #[serde(default)]
        rho: f64,
        #[serde(default = "sizes")]
        sizes: Vec<usize>,
    },
    /// Uses `B` as the operator `R`, against an exponential family of length `d`.
    RieszSandwich {
        #[serde(default = "half")]
        a: f64,
        #[serde(default)]
        rho: f64,
    },
    Stability {},
    LaplaceCheck {
        #[serde(default = "one")]
        delta: f64,
        #[serde(default = "n_values")]
        n_values: Vec<usize>,
        #[serde(default = "trials")]
        trials: usize,
    },
    Neumann {
        lambda: [f64; 2],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        terms: Option<usize>,
    },
    DatkoPazy {},
    Solution {
        #[serde(default = "one")]
        horizon: f64,
    },
    InvariantMeasure {},
    TransformNorm {},
    Perturbation {
        #[serde(rename = "P")]
        p: Rows,
    },
    PerturbedSolution {
        #[serde(rename = "P")]
        p: Rows,
        #[serde(default = "one")]
        horizon: f64,
    },
}

impl Analysis {
    pub fn name(&self) -> &'static str {
        match self {
            Analysis::FrameConstants { .. } => "frame_constants",
            Analysis::LowerConstant { .. } => "lower_constant",
            Analysis::RieszSandwich { .. } => "riesz_sandwich",
            Analysis::Stability {} => "stability",
            Analysis::LaplaceCheck { .. } => "laplace_check",
            Analysis::Neumann { .. } => "neumann",
            Analysis::DatkoPazy {} => "datko_pazy",
            Analysis::Solution { .. } => "solution",
            Analysis::InvariantMeasure {} => "invariant_measure",
            Analysis::TransformNorm {} => "transform_norm",
            Analysis::Perturbation { .. } => "perturbation",
            Analysis::PerturbedSolution { .. } => "perturbed_solution",
        }
    }

    pub fn group(&self) -> Group {
        match self {
            Analysis::FrameConstants { .. } | Analysis::LowerConstant { .. } | Analysis::RieszSandwich { .. } => Group::Frames,
            Analysis::Stability {} | Analysis::LaplaceCheck { .. } | Analysis::Neumann { .. } | Analysis::DatkoPazy {} => Group::Stability,
            _ => Group::Scp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Frames,
    Stability,
    Scp,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpecFile {
    pub dimension: Dimension,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(default)]
    pub space: SpaceField,
    #[serde(default)]
    pub mc: McField,
    /// Names, or objects `{"name": ..., params...}`.
    #[serde(default)]
    pub analyses: Vec<Value>,
}

/// A validated specification.
#[derive(Debug, Clone)]
pub struct System {
    pub file: SystemSpecFile,
    pub a: CMat,
    pub b: CMat,
    pub space: SpaceSpec,
    pub mc: McConfig,
    pub analyses: Vec<Analysis>,
}

pub fn parse(text: &str) -> Result<SystemSpecFile, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        format!("parse error at line {}, column {} (field `{}`): {}", inner.line(), inner.column(), path, inner)
    })
}

pub fn matrix(rows: &Rows, nrows: usize, ncols: usize, what: &str) -> Result<CMat, String> {
    if rows.len() != nrows {
        return Err(format!("{what}: expected {nrows} rows, found {}", rows.len()));
    }
    let mut out = CMat::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != ncols {
            return Err(format!("{what}: row {i} has {} entries, expected {ncols}", row.len()));
        }
        for (j, e) in row.iter().enumerate() {
            let (re, im) = e.value();
            if !(re.is_finite() && im.is_finite()) {
                return Err(format!("{what}[{i}][{j}] is not finite"));
            }
            out[(i, j)] = c64(re, im);
        }
    }
    Ok(out)
}

fn analysis(value: &Value, index: usize) -> Result<Analysis, String> {
    let object = match value {
        Value::String(name) => serde_json::json!({ "name": name }),
        other => other.clone(),
    };
    serde_path_to_error::deserialize(object).map_err(|e| {
        let path = e.path().to_string();
        format!("analyses[{index}] (field `{path}`): {}", e.into_inner())
    })
}

pub fn validate(file: SystemSpecFile) -> Result<System, String> {
    let Dimension { m, d } = file.dimension;
    if m == 0 || d == 0 {
        return Err(format!("dimension: m and d must be positive, got m = {m}, d = {d}"));
    }
    let a = matrix(&file.a, m, m, "A")?;
    let b = matrix(&file.b, m, d, "B")?;
    let space = match (file.space.norm, file.space.p) {
        (NormName::L2, None) => SpaceSpec::l2(m),
        (NormName::L2, Some(2.0)) => SpaceSpec::l2(m),
        (NormName::L2, Some(p)) => return Err(format!("space: norm l2 with p = {p}")),
        (NormName::Lp, None) => return Err("space: norm lp requires p".into()),
        (NormName::Lp, Some(p)) => SpaceSpec::lp(m, p).map_err(|e| format!("space: {e}"))?,
    };
    if file.mc.samples == 0 {
        return Err("mc.samples must be positive".into());
    }
    let mc = McConfig::new(file.mc.samples, file.mc.seed);
    let analyses = file.analyses.iter().enumerate().map(|(i, v)| analysis(v, i)).collect::<Result<Vec<_>, _>>()?;
    for item in &analyses {
        match item {
            Analysis::Perturbation { p } | Analysis::PerturbedSolution { p, .. } => {
                matrix(p, m, m, "P")?;
            }
            Analysis::FrameConstants { n, .. } if *n == 0 => return Err("frame_constants: n must be positive".into()),
            _ => {}
        }
    }
    Ok(System { file, a, b, space, mc, analyses })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"dimension": {"m": 1, "d": 1}, "A": [[-1]], "B": [[1]], "analyses": ["invariant_measure"]}"#;

    #[test]
    fn scalar_spec_round_trips() {
        let file = parse(SCALAR).unwrap();
        let sys = validate(file.clone()).unwrap();
        assert_eq!(sys.analyses, vec![Analysis::InvariantMeasure {}]);
        assert_eq!(sys.a[(0, 0)], c64(-1.0, 0.0));
        assert_eq!(sys.mc.samples, 100_000);
        let again = parse(&serde_json::to_string(&file).unwrap()).unwrap();
        assert_eq!(again, file);
    }

    #[test]
    fn complex_entries_and_parameters() {
        let text = r#"{"dimension": {"m": 2, "d": 1}, "A": [[[-1, 2], 0], [0, -2]], "B": [[1], [0.5]],
            "space": {"norm": "lp", "p": 4}, "mc": {"samples": 10, "seed": 7},
            "analyses": [{"name": "neumann", "lambda": [0.01, 3]}, {"name": "laplace_check", "delta": 0.5}]}"#;
        let sys = validate(parse(text).unwrap()).unwrap();
        assert_eq!(sys.a[(0, 0)], c64(-1.0, 2.0));
        assert_eq!(sys.space.p(), 4.0);
        assert_eq!(sys.analyses[1], Analysis::LaplaceCheck { delta: 0.5, n_values: vec![0, 4, 16, 64], trials: 3 });
    }

    #[test]
    fn diagnostics_name_the_field() {
        let e = parse(r#"{"dimension": {"m": "x", "d": 1}, "A": [], "B": []}"#).unwrap_err();
        assert!(e.contains("dimension.m") && e.contains("line 1"), "{e}");
        let e = parse("{\"dimension\": ").unwrap_err();
        assert!(e.contains("line"), "{e}");
    }

    #[test]
    fn validation_errors() {
        let bad = |t: &str| validate(parse(t).unwrap()).unwrap_err();
        assert!(bad(r#"{"dimension": {"m": 2, "d": 1}, "A": [[-1]], "B": [[1]]}"#).contains("A"));
        assert!(bad(r#"{"dimension": {"m": 1, "d": 1}, "A": [[-1]], "B": [[1, 2]]}"#).contains("B"));
        assert!(bad(r#"{"dimension": {"m": 1, "d": 1}, "A": [[-1]], "B": [[1]], "space": {"norm": "lp", "p": 0.5}}"#).contains("space"));
        assert!(bad(r#"{"dimension": {"m": 1, "d": 1}, "A": [[-1]], "B": [[1]], "mc": {"samples": 0}}"#).contains("samples"));
        assert!(bad(r#"{"dimension": {"m": 1, "d": 1}, "A": [[-1]], "B": [[1]], "analyses": ["bogus"]}"#).contains("analyses[0]"));
        assert!(bad(r#"{"dimension": {"m": 1, "d": 1}, "A": [[-1]], "B": [[1]], "analyses": [{"name": "stability", "x": 1}]}"#).contains("analyses[0]"));
    }
}
