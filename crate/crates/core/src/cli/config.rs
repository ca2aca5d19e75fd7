//! Run configuration: TOML or JSON, validated before any computation.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expr::{Expr, Scope};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::operator::{check_coercivity, DenseOperatorPair, RandomSymmetricSpec, SampleState};
use crate::quasilinear::{check_ql_coercivity, random_samples, QlCoefficients};
use crate::spectral::{DomainKind, SpectralTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SolveLinear,
    SolveQl,
    SteinVerify,
    PsiTest,
    Bootstrap,
    Moments,
    Tightness,
    Analyticity,
    CheckCoercivity,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SolveLinear => "solve-linear",
            ExperimentKind::SolveQl => "solve-ql",
            ExperimentKind::SteinVerify => "stein-verify",
            ExperimentKind::PsiTest => "psi-test",
            ExperimentKind::Bootstrap => "bootstrap",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Tightness => "tightness",
            ExperimentKind::Analyticity => "analyticity",
            ExperimentKind::CheckCoercivity => "check-coercivity",
        }
    }

    fn needs_pair(self) -> bool {
        matches!(
            self,
            ExperimentKind::SolveLinear
                | ExperimentKind::SteinVerify
                | ExperimentKind::Moments
                | ExperimentKind::Tightness
                | ExperimentKind::Analyticity
        )
    }

    fn needs_coefficients(self) -> bool {
        matches!(self, ExperimentKind::SolveQl | ExperimentKind::Bootstrap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripleSpec {
    pub domain: String,
    #[serde(default)]
    pub dim: usize,
    #[serde(default = "one")]
    pub components: usize,
    #[serde(default)]
    pub eigenvalues: Option<Vec<f64>>,
}

fn one() -> usize {
    1
}

impl TripleSpec {
    pub fn build(&self) -> Result<SpectralTriple> {
        match self.domain.as_str() {
            "interval" => SpectralTriple::new(DomainKind::Interval, self.dim, self.components),
            "square" => SpectralTriple::new(DomainKind::Square, self.dim, self.components),
            "custom" => {
                let ev = self
                    .eigenvalues
                    .clone()
                    .ok_or_else(|| Error::Config("custom domain needs eigenvalues".into()))?;
                SpectralTriple::from_eigenvalues(ev, self.components)
            }
            other => Err(Error::Config(format!(
                "unknown domain {other:?} (interval, square or custom)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    /// `riesz`, `laplacian`, `scalar` or `random-symmetric`.
    pub family: String,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub lower: Option<f64>,
    #[serde(default)]
    pub upper: Option<f64>,
    #[serde(default)]
    pub noise_strength: Option<f64>,
    #[serde(default)]
    pub bandwidth: Option<usize>,
    /// The `M` of the coercivity estimate.
    #[serde(default)]
    pub m: f64,
    #[serde(default)]
    pub require_lambda: Option<f64>,
}

impl PairSpec {
    pub fn random_spec(&self, seed: u64, modes: usize) -> RandomSymmetricSpec {
        let d = RandomSymmetricSpec::default();
        RandomSymmetricSpec {
            seed: self.seed.unwrap_or(seed),
            lower: self.lower.unwrap_or(d.lower),
            upper: self.upper.unwrap_or(d.upper),
            noise: self.noise_strength.unwrap_or(d.noise),
            modes,
            bandwidth: self.bandwidth.unwrap_or(d.bandwidth),
        }
    }

    pub fn build(
        &self,
        triple: &SpectralTriple,
        modes: usize,
        seed: u64,
    ) -> Result<DenseOperatorPair> {
        let pair = match self.family.as_str() {
            "riesz" => DenseOperatorPair::riesz(triple, modes),
            "laplacian" => DenseOperatorPair::laplacian(triple, modes),
            "scalar" => {
                if triple.len() != 1 {
                    return Err(Error::Config(
                        "the scalar pair needs a one-dimensional triple".into(),
                    ));
                }
                let a = self
                    .a
                    .ok_or_else(|| Error::Config("scalar pair needs a".into()))?;
                let mut p = DenseOperatorPair::scalar(a, self.b.unwrap_or(0.0));
                p.noise_modes = modes.max(1);
                p
            }
            "random-symmetric" => {
                DenseOperatorPair::random_symmetric(triple, &self.random_spec(seed, modes))?
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown pair family {other:?} (riesz, laplacian, scalar or random-symmetric)"
                )))
            }
        };
        Ok(if self.shift != 0.0 {
            pair.shifted(self.shift)
        } else {
            pair
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(String),
    Many(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    /// One expression (`a·I`) or `d²` expressions, row-major; shared by all components.
    #[serde(default)]
    pub a: Option<OneOrMany>,
    /// `b[n][j]`; the state variable `y` is the component's own value.
    #[serde(default)]
    pub b: Option<Vec<Vec<String>>>,
    /// Shorthand for `b_{0,0} = β`.
    #[serde(default)]
    pub beta: Option<f64>,
    /// One expression for every component, or one per component.
    #[serde(default)]
    pub phi: Option<OneOrMany>,
    /// Shorthand for `φ^α = −c (y^α)³`.
    #[serde(default)]
    pub cubic: Option<f64>,
    /// One expression per noise mode, shared by all components.
    #[serde(default)]
    pub g: Option<Vec<String>>,
    #[serde(default)]
    pub require_lambda: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_y_max")]
    pub y_max: f64,
    /// Exponent `h` of the growth bound `|Φ| + |φ| ≲ 1 + |y|^h`.
    #[serde(default = "default_growth")]
    pub growth_exponent: f64,
}

fn default_growth() -> f64 {
    3.0
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self {
            a: None,
            b: None,
            beta: None,
            phi: None,
            cubic: None,
            g: None,
            require_lambda: None,
            samples: default_samples(),
            y_max: default_y_max(),
            growth_exponent: default_growth(),
        }
    }
}

fn default_samples() -> usize {
    2000
}

fn default_y_max() -> f64 {
    4.0
}

fn parse_all(exprs: &[String], scope: Scope) -> Result<Vec<Expr>> {
    exprs.iter().map(|s| Expr::parse(s, scope)).collect()
}

impl CoefficientSpec {
    pub fn build(&self, triple: &SpectralTriple, modes: usize) -> Result<QlCoefficients> {
        let n = triple.components();
        let Some(d) = triple.domain().spatial_dim() else {
            return Err(Error::Config(
                "quasilinear runs need an interval or square domain".into(),
            ));
        };
        let scope = Scope {
            spatial_dim: d,
            components: n,
        };
        let mut c = QlCoefficients::heat(n, d, modes)?;
        let mut timed = false;
        if let Some(a) = &self.a {
            let exprs = match a {
                OneOrMany::One(s) => vec![Expr::parse(s, scope)?],
                OneOrMany::Many(v) if v.len() == d * d => parse_all(v, scope)?,
                OneOrMany::Many(v) => {
                    return Err(Error::Config(format!(
                        "a needs 1 or {} expressions, got {}",
                        d * d,
                        v.len()
                    )))
                }
            };
            let uses_y = exprs.iter().any(Expr::uses_y);
            timed |= exprs.iter().any(Expr::uses_t);
            let exprs = Arc::new(exprs);
            c = c.with_a(uses_y, move |p, _, out| {
                if exprs.len() == 1 {
                    let v = exprs[0].eval(p.t, p.x, p.y);
                    out.fill(0.0);
                    for i in 0..d {
                        out[i * d + i] = v;
                    }
                } else {
                    for (o, e) in out.iter_mut().zip(exprs.iter()) {
                        *o = e.eval(p.t, p.x, p.y);
                    }
                }
            });
        }
        match (&self.b, self.beta) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either b or beta, not both".into()))
            }
            (Some(rows), None) => {
                if rows.len() != modes || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config(format!(
                        "b needs {modes} rows of {d} expressions"
                    )));
                }
                let own = Scope {
                    spatial_dim: d,
                    components: 1,
                };
                let exprs: Vec<Expr> = rows
                    .iter()
                    .flatten()
                    .map(|s| Expr::parse(s, own))
                    .collect::<Result<_>>()?;
                let uses_y = exprs.iter().any(Expr::uses_y);
                timed |= exprs.iter().any(Expr::uses_t);
                c = c.with_b(uses_y, move |t, x, ya, _, out| {
                    for (o, e) in out.iter_mut().zip(&exprs) {
                        *o = e.eval(t, x, &[ya]);
                    }
                });
            }
            (None, Some(beta)) => c = c.with_constant_gradient_noise(beta),
            (None, None) => {}
        }
        match (&self.phi, self.cubic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either phi or cubic, not both".into()))
            }
            (Some(phi), None) => {
                let exprs = match phi {
                    OneOrMany::One(s) => vec![Expr::parse(s, scope)?; n],
                    OneOrMany::Many(v) if v.len() == n => parse_all(v, scope)?,
                    OneOrMany::Many(v) => {
                        return Err(Error::Config(format!(
                            "phi needs 1 or {n} expressions, got {}",
                            v.len()
                        )))
                    }
                };
                let uses_y = exprs.iter().any(Expr::uses_y);
                timed |= exprs.iter().any(Expr::uses_t);
                c = c.with_phi(uses_y, move |p, alpha| exprs[alpha].eval(p.t, p.x, p.y));
            }
            (None, Some(k)) => c = c.with_cubic_reaction(k),
            (None, None) => {}
        }
        if let Some(g) = &self.g {
            if g.len() != modes {
                return Err(Error::Config(format!(
                    "g needs {modes} expressions, got {}",
                    g.len()
                )));
            }
            let exprs = parse_all(g, scope)?;
            let uses_y = exprs.iter().any(Expr::uses_y);
            timed |= exprs.iter().any(Expr::uses_t);
            c = c.with_g(uses_y, move |p, _, out| {
                for (o, e) in out.iter_mut().zip(&exprs) {
                    *o = e.eval(p.t, p.x, p.y);
                }
            });
        }
        Ok(c.with_time_dependence(timed).with_name("config"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default = "one")]
    pub modes: usize,
    #[serde(default)]
    pub steps: Option<usize>,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
}

fn default_t_end() -> f64 {
    1.0
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            modes: 1,
            steps: None,
            dt: None,
            t_end: 1.0,
        }
    }
}

impl NoiseSpec {
    pub fn n_steps(&self) -> Result<usize> {
        match (self.steps, self.dt) {
            (Some(_), Some(_)) => Err(Error::Config("give either steps or dt, not both".into())),
            (Some(0), None) => Err(Error::Config("steps must be positive".into())),
            (Some(s), None) => Ok(s),
            (None, Some(dt)) if dt > 0.0 && dt.is_finite() => {
                let s = (self.t_end / dt).round();
                if s < 1.0 || ((s * dt) - self.t_end).abs() > 1e-9 * self.t_end {
                    return Err(Error::Config(format!(
                        "dt = {dt} does not divide t_end = {}",
                        self.t_end
                    )));
                }
                Ok(s as usize)
            }
            (None, Some(dt)) => Err(Error::Config(format!("dt = {dt} must be positive"))),
            (None, None) => Ok(100),
        }
    }

    pub fn build(&self, seed: u64) -> Result<NoiseModel> {
        NoiseModel::uniform(self.modes, self.n_steps()?, self.t_end, seed)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    /// Leading Galerkin coefficients; the rest are zero.
    #[serde(default)]
    pub u0: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingSpec {
    #[serde(default)]
    pub f: Option<Vec<f64>>,
    /// One coefficient vector per noise mode.
    #[serde(default)]
    pub g: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Numerics {
    pub paths: usize,
    pub first_path: u64,
    pub m: Option<f64>,
    pub r_trunc: Option<f64>,
    pub grid_points: Option<usize>,
    pub kernel_nodes: usize,
    pub y_window: f64,
    pub q: f64,
    pub m_list: Vec<f64>,
    pub r_list: Vec<f64>,
    pub p_list: Vec<f64>,
    pub theta: f64,
    pub p: f64,
    pub radii: Vec<f64>,
    pub eps: f64,
    pub battery: usize,
    pub r: f64,
    pub big_r: Option<f64>,
    pub c_p: f64,
    pub h: f64,
    pub probes: usize,
    /// `[re, im]` pairs; defaults to a small interior set.
    pub z_grid: Option<Vec<[f64; 2]>>,
    pub martingale_tests: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            paths: 100,
            first_path: 0,
            m: None,
            r_trunc: None,
            grid_points: None,
            kernel_nodes: crate::quasilinear::mollify::DEFAULT_KERNEL_NODES,
            y_window: crate::quasilinear::mollify::DEFAULT_Y_WINDOW,
            q: 4.0,
            m_list: vec![1.0, 2.0, 4.0],
            r_list: vec![1.0, 2.0, 4.0, 8.0],
            p_list: vec![2.0],
            theta: 0.4,
            p: 4.0,
            radii: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            eps: 0.05,
            battery: 1,
            r: 0.5,
            big_r: None,
            c_p: 1.0,
            h: 1e-3,
            probes: 64,
            z_grid: None,
            martingale_tests: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub triple: Option<TripleSpec>,
    #[serde(default)]
    pub pair: Option<PairSpec>,
    #[serde(default)]
    pub coefficients: Option<CoefficientSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub forcing: ForcingSpec,
    #[serde(default)]
    pub numerics: Numerics,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before
        .rfind('\n')
        .map_or(before.chars().count(), |i| before[i + 1..].chars().count())
        + 1;
    (line, col)
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let at = e.span().map(|s| line_col(text, s.start));
            let msg = e.message().to_string();
            Error::Config(match at {
                Some((l, c)) => format!("line {l}, column {c}: {msg}"),
                None => msg,
            })
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))
    }

    /// `.json` files are JSON, everything else is TOML.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("json"))
        {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn triple(&self) -> Result<SpectralTriple> {
        self.triple
            .as_ref()
            .ok_or_else(|| Error::Config(format!("{} needs a [triple] section", self.kind.name())))?
            .build()
    }

    pub fn u0(&self, len: usize) -> Result<Vec<f64>> {
        if self.initial.u0.len() > len {
            return Err(Error::Config(format!(
                "u0 has {} entries, the state has {len}",
                self.initial.u0.len()
            )));
        }
        let mut u = self.initial.u0.clone();
        u.resize(len, 0.0);
        Ok(u)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub field: String,
    pub message: String,
}

fn issue(field: &str, message: impl Into<String>) -> Issue {
    Issue {
        field: field.into(),
        message: message.into(),
    }
}

/// Every problem that can be detected without simulating.
pub fn validate(cfg: &RunConfig) -> Vec<Issue> {
    let mut out = Vec::new();
    let n = &cfg.numerics;
    let kind = cfg.kind;

    if kind == ExperimentKind::PsiTest {
        if !(n.q > 2.0) {
            out.push(issue("numerics.q", format!("q = {} must exceed 2", n.q)));
        }
        if n.m_list.is_empty() || n.m_list.iter().any(|&m| !(m >= 1.0)) {
            out.push(issue("numerics.m_list", "m values must be ≥ 1"));
        }
        return out;
    }

    if !(cfg.noise.t_end > 0.0 && cfg.noise.t_end.is_finite()) {
        out.push(issue(
            "noise.t_end",
            format!("t_end = {} must be positive", cfg.noise.t_end),
        ));
    }
    if let Err(e) = cfg.noise.n_steps() {
        out.push(issue(
            if cfg.noise.dt.is_some() {
                "noise.dt"
            } else {
                "noise.steps"
            },
            e.to_string(),
        ));
    }
    if n.paths == 0 {
        out.push(issue("numerics.paths", "need at least one path"));
    }

    let triple = match cfg.triple() {
        Ok(t) => Some(t),
        Err(e) => {
            out.push(issue("triple", e.to_string()));
            None
        }
    };
    if let Some(t) = &triple {
        if let Err(e) = cfg.u0(t.len()) {
            out.push(issue("initial.u0", e.to_string()));
        }
    }

    if kind.needs_pair() && cfg.pair.is_none() {
        out.push(issue(
            "pair",
            format!("{} needs a [pair] section", kind.name()),
        ));
    }
    if kind.needs_coefficients() && cfg.coefficients.is_none() {
        out.push(issue(
            "coefficients",
            format!("{} needs a [coefficients] section", kind.name()),
        ));
    }
    if kind == ExperimentKind::CheckCoercivity && cfg.pair.is_none() && cfg.coefficients.is_none() {
        out.push(issue(
            "pair",
            "check-coercivity needs a [pair] or [coefficients] section",
        ));
    }

    if let (Some(t), Some(p)) = (&triple, &cfg.pair) {
        match p.build(t, cfg.noise.modes, cfg.seed) {
            Ok(pair) => {
                if let Some(f) = &cfg.forcing.f {
                    if f.len() != t.len() {
                        out.push(issue(
                            "forcing.f",
                            format!("f has {} entries, the state has {}", f.len(), t.len()),
                        ));
                    }
                }
                if let Some(g) = &cfg.forcing.g {
                    if g.len() != cfg.noise.modes || g.iter().any(|v| v.len() != t.len()) {
                        out.push(issue(
                            "forcing.g",
                            format!("g needs {} vectors of length {}", cfg.noise.modes, t.len()),
                        ));
                    }
                }
                if let Some(lambda) = p.require_lambda {
                    match check_coercivity(&pair, t, 0.0, &SampleState::deterministic(), 0, p.m) {
                        Ok(r) if r.lambda < lambda => out.push(issue(
                            "pair.require_lambda",
                            format!("coercivity violation: λ = {} < required {lambda}", r.lambda),
                        )),
                        Ok(_) => {}
                        Err(e) => out.push(issue("pair", e.to_string())),
                    }
                }
            }
            Err(e) => out.push(issue("pair", e.to_string())),
        }
    }

    if let (Some(t), Some(c)) = (&triple, &cfg.coefficients) {
        match c.build(t, cfg.noise.modes) {
            Ok(coeffs) => {
                if let Some(lambda) = c.require_lambda {
                    let samples =
                        random_samples(&coeffs, c.samples, cfg.noise.t_end, c.y_max, cfg.seed);
                    match check_ql_coercivity(&coeffs, &samples) {
                        Ok(r) if !r.is_coercive(lambda) => out.push(issue(
                            "coefficients.require_lambda",
                            format!(
                                "coercivity violation: sampled margin {} < required λ = {lambda}",
                                r.margin
                            ),
                        )),
                        Ok(_) => {}
                        Err(e) => out.push(issue("coefficients", e.to_string())),
                    }
                }
            }
            Err(e) => out.push(issue("coefficients", e.to_string())),
        }
    }

    if let Some(m) = n.m {
        if !(m >= 1.0 && m.is_finite()) {
            out.push(issue("numerics.m", format!("m = {m} must be ≥ 1")));
        } else if !(n.y_window > 1.0 / m) {
            out.push(issue(
                "numerics.y_window",
                format!(
                    "mollifier guard: y-window {} does not exceed the kernel support {}",
                    n.y_window,
                    1.0 / m
                ),
            ));
        }
    }
    if n.kernel_nodes < 4 {
        out.push(issue(
            "numerics.kernel_nodes",
            "mollifier guard: need at least 4 kernel nodes",
        ));
    }
    if let Some(r) = n.r_trunc {
        if !(r > 0.0) {
            out.push(issue(
                "numerics.r_trunc",
                format!("truncation radius {r} must be positive"),
            ));
        }
    }
    if let (Some(g), Some(t)) = (n.grid_points, &triple) {
        let kmax = t
            .wave_numbers()
            .iter()
            .flat_map(|w| w.iter().copied())
            .max()
            .unwrap_or(1);
        if g <= kmax {
            out.push(issue(
                "numerics.grid_points",
                format!("{g} points cannot resolve wave number {kmax}"),
            ));
        }
    }

    match kind {
        ExperimentKind::Bootstrap => {
            if !(n.q > 2.0) {
                out.push(issue("numerics.q", format!("q = {} must exceed 2", n.q)));
            }
            if n.m_list.is_empty() || n.m_list.iter().any(|&m| !(m >= 1.0)) {
                out.push(issue("numerics.m_list", "ψ levels m must be ≥ 1"));
            }
            if n.r_list.is_empty() || n.r_list.iter().any(|&r| !(r > 0.0)) {
                out.push(issue(
                    "numerics.r_list",
                    "truncation radii must be positive",
                ));
            }
        }
        ExperimentKind::Moments => {
            if n.p_list.is_empty() || n.p_list.iter().any(|&p| !(p >= 1.0)) {
                out.push(issue("numerics.p_list", "moment exponents must be ≥ 1"));
            }
        }
        ExperimentKind::Tightness => {
            if !(n.theta > 1.0 / n.p && n.theta < 0.5) {
                out.push(issue(
                    "numerics.theta",
                    format!("need 1/p < θ < 1/2, got θ = {}, p = {}", n.theta, n.p),
                ));
            }
            if n.radii.is_empty()
                || n.radii.iter().any(|&r| !(r >= 0.0))
                || n.radii.windows(2).any(|w| !(w[1] > w[0]))
            {
                out.push(issue(
                    "numerics.radii",
                    "radii must be non-negative and increasing",
                ));
            }
            if !(n.eps > 0.0 && n.eps <= 1.0) {
                out.push(issue("numerics.eps", "ε must lie in (0, 1]"));
            }
            if n.battery == 0 {
                out.push(issue("numerics.battery", "battery needs at least one pair"));
            }
            if n.battery > 1
                && cfg
                    .pair
                    .as_ref()
                    .is_some_and(|p| p.family != "random-symmetric" || p.seed.is_some())
            {
                out.push(issue(
                    "numerics.battery",
                    "a battery needs a random-symmetric pair without a fixed seed",
                ));
            }
        }
        ExperimentKind::SteinVerify | ExperimentKind::Analyticity => {
            if !(n.r > 0.0 && n.r < 1.0) {
                out.push(issue(
                    "numerics.r",
                    format!("r = {} must lie in (0, 1)", n.r),
                ));
            }
            if n.big_r.is_some_and(|r| !(r > 1.0)) {
                out.push(issue("numerics.big_r", "R must exceed 1"));
            }
            if !(n.q > 2.0) {
                out.push(issue("numerics.q", format!("q = {} must exceed 2", n.q)));
            }
            if kind == ExperimentKind::Analyticity && !(n.h >= 1e-5) {
                out.push(issue(
                    "numerics.h",
                    format!("step h = {} is below the cancellation guard 1e-5", n.h),
                ));
            }
        }
        _ => {}
    }
    out
}
