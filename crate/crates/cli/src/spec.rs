//! Spec file schema. A spec is a JSON document with exactly one of the
//! problem sections `function`, `mapping` or `sip`, an optional `gauge`,
//! `region` and `config`, and a list of analyses.

use errbound::errorbounds::Mode;
use errbound::gauge::Convexity;
use errbound::geometry::Norm;
use errbound::slopes::SlopeKind;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A real number that may be infinite, written as a JSON number or as one of
/// the strings `"inf"`, `"+inf"`, `"-inf"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extended(pub f64);

impl Serialize for Extended {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        errbound::ext::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for Extended {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Extended(v)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(Extended(f64::INFINITY)),
                "-inf" | "-infinity" => Ok(Extended(f64::NEG_INFINITY)),
                _ => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got \"{s}\""))),
            },
        }
    }
}

fn one() -> Extended {
    Extended(1.0)
}

fn infinite() -> Extended {
    Extended(f64::INFINITY)
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping: Option<MappingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sip: Option<SipSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSpec>,
    pub analysis: Vec<AnalysisSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    #[serde(default)]
    pub config: ConfigSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub norm: Option<Norm>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub a: Vec<f64>,
    pub b: f64,
}

/// A C¹ expression with one partial-derivative expression per variable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothSpec {
    pub value: String,
    pub gradient: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `max_k ⟨a_k, x⟩ + b_k`.
    MaxAffine {
        pieces: Vec<AffineSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Vec<f64>>,
    },
    /// Max of C¹ expressions in `x1..xn`, each with its declared gradient.
    MaxSmooth {
        dim: usize,
        pieces: Vec<SmoothSpec>,
        #[serde(default)]
        convex: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<RegionSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Vec<f64>>,
    },
    /// A black box given by one expression on a domain box.
    Expression {
        dim: usize,
        expr: String,
        #[serde(default)]
        convex: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        domain: Option<RegionSpec>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        anchor: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MappingSpec {
    /// `gph F = {(x, y) : a·(x, y) ≤ b for every inequality}`.
    Polyhedral {
        x_dim: usize,
        y_dim: usize,
        inequalities: Vec<AffineSpec>,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_region: Option<RegionSpec>,
    },
    /// A sample of graph points `(x, y)` concatenated.
    Sampled {
        x_dim: usize,
        y_dim: usize,
        points: Vec<Vec<f64>>,
        #[serde(default = "default_cloud_tol")]
        tol: f64,
        x_bar: Vec<f64>,
        y_bar: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_region: Option<RegionSpec>,
    },
}

fn default_cloud_tol() -> f64 {
    1e-9
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexSpec {
    pub a: f64,
    pub b: f64,
    pub mesh: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SipSpec {
    pub n: usize,
    /// ψ as an expression in `x1..xn`.
    pub objective: String,
    /// ∇ψ, required unless ψ is affine.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_gradient: Option<Vec<String>>,
    /// `g_t(x)` as an expression in `t, x1..xn`.
    pub constraints: String,
    /// ∇ₓg_t, required unless `g_t` is affine in `x`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints_gradient: Option<Vec<String>>,
    #[serde(rename = "T")]
    pub index: IndexSpec,
    pub c_bar: Vec<f64>,
    /// `b̄_t` as an expression in `t`.
    pub b_bar: String,
    pub x_bar: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<RegionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    Identity,
    /// `t/τ`.
    Linear {
        tau: f64,
    },
    /// `t^q/τ`.
    Holder {
        tau: f64,
        q: f64,
    },
    /// `∫₀^t ν` for a piecewise-linear density through the knots.
    NuTable {
        knots: Vec<(f64, f64)>,
    },
    /// φ as an expression in `t`. Without `derivative` the gauge is only
    /// continuous.
    Expression {
        phi: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        derivative: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inverse: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        convexity: Option<Convexity>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormKind {
    #[default]
    Linear,
    Gauge,
    Psi,
    NuIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantSpec {
    #[default]
    Plain,
    Graph,
}

fn default_slope() -> SlopeKind {
    SlopeKind::Local
}

fn conventional() -> Mode {
    Mode::Conventional
}

fn both() -> Mode {
    Mode::Both
}

fn default_threshold() -> f64 {
    1e-3
}

fn default_successive() -> usize {
    3
}

fn default_samples() -> usize {
    64
}

/// One requested analysis; `type` selects the variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisSpec {
    /// Error bound modulus at the anchor; with `use_gauge`, the φ-modulus.
    Modulus {
        #[serde(default)]
        use_gauge: bool,
    },
    Slope {
        kind: SlopeKind,
        point: Vec<f64>,
    },
    HolderOrder {
        q: f64,
    },
    Direct {
        #[serde(default)]
        form: FormKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
    },
    SufficientLinear {
        tau: f64,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
        #[serde(default = "unit")]
        alpha: f64,
        #[serde(default = "default_slope")]
        slope: SlopeKind,
    },
    /// Gauge-form sufficient conditions; `composite` selects the slope of
    /// φ∘f instead of a weighted slope of f.
    SufficientNonlinear {
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
        #[serde(default = "unit")]
        alpha: f64,
        #[serde(default = "conventional")]
        mode: Mode,
        #[serde(default = "default_slope")]
        slope: SlopeKind,
        #[serde(default)]
        composite: bool,
    },
    /// ψ or ν-integral forms built from the top-level gauge.
    SufficientPsi {
        form: FormKind,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
        #[serde(default = "unit")]
        alpha: f64,
        #[serde(default = "conventional")]
        mode: Mode,
        #[serde(default = "default_slope")]
        slope: SlopeKind,
        #[serde(default)]
        composite: bool,
    },
    NecessaryLinear {
        tau: f64,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
    },
    NecessaryNonlinear {
        #[serde(default)]
        form: FormKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
        #[serde(default = "both")]
        mode: Mode,
    },
    Perturbed {
        tau: f64,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "one")]
        mu: Extended,
        #[serde(default = "unit")]
        alpha: f64,
        #[serde(default = "default_slope")]
        slope: SlopeKind,
    },
    Subregularity {
        #[serde(default)]
        variant: VariantSpec,
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
    },
    Calmness {
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
    },
    /// Plain subregularity, its conversion to graph subregularity with the
    /// gauge `(c+1)φ`, and a check of the converted bound.
    GraphConversion {
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "one")]
        mu: Extended,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<f64>,
    },
    MappingSufficient {
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
        #[serde(default = "unit")]
        alpha: f64,
        #[serde(default = "conventional")]
        mode: Mode,
        #[serde(default = "default_slope")]
        slope: SlopeKind,
        #[serde(default)]
        composite: bool,
    },
    SipSolve,
    SipSlater,
    LevelCalmness {
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "infinite")]
        mu: Extended,
    },
    Falsify {
        #[serde(default = "default_threshold")]
        threshold: f64,
        #[serde(default = "default_successive")]
        successive: usize,
    },
    ObjectiveGap {
        #[serde(default = "one")]
        delta: Extended,
        #[serde(default = "one")]
        mu: Extended,
        #[serde(default = "default_samples")]
        samples: usize,
    },
}

impl AnalysisSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisSpec::Modulus { .. } => "modulus",
            AnalysisSpec::Slope { .. } => "slope",
            AnalysisSpec::HolderOrder { .. } => "holder_order",
            AnalysisSpec::Direct { .. } => "direct",
            AnalysisSpec::SufficientLinear { .. } => "sufficient_linear",
            AnalysisSpec::SufficientNonlinear { .. } => "sufficient_nonlinear",
            AnalysisSpec::SufficientPsi { .. } => "sufficient_psi",
            AnalysisSpec::NecessaryLinear { .. } => "necessary_linear",
            AnalysisSpec::NecessaryNonlinear { .. } => "necessary_nonlinear",
            AnalysisSpec::Perturbed { .. } => "perturbed",
            AnalysisSpec::Subregularity { .. } => "subregularity",
            AnalysisSpec::Calmness { .. } => "calmness",
            AnalysisSpec::GraphConversion { .. } => "graph_conversion",
            AnalysisSpec::MappingSufficient { .. } => "mapping_sufficient",
            AnalysisSpec::SipSolve => "sip_solve",
            AnalysisSpec::SipSlater => "sip_slater",
            AnalysisSpec::LevelCalmness { .. } => "level_calmness",
            AnalysisSpec::Falsify { .. } => "falsify",
            AnalysisSpec::ObjectiveGap { .. } => "objective_gap",
        }
    }
}
