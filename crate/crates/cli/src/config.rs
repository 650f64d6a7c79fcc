//! Scenario configuration: JSON schema, validation with field-path error
//! messages, and construction of the core objects.

use contact_algebroids::algebroid::{
    action_so3_on_r3, atiyah_trivial, lie_algebra, so3, tangent_bundle, AlgebroidModel, AtiyahData,
    Side, State,
};
use contact_algebroids::error::CoreError;
use contact_algebroids::expr::{parse, ExprContext};
use contact_algebroids::field::{Arity, ScalarField};
use contact_algebroids::hamiltonian::ContactHamiltonianSystem;
use contact_algebroids::lagrangian::ContactLagrangianSystem;
use serde::Deserialize;
use std::collections::BTreeMap;

/// Errors that must map to exit code 2 (configuration) vs 3 (numerics).
#[derive(Debug)]
pub enum CmdError {
    Config(String),
    Numerics(String),
}

impl std::fmt::Display for CmdError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CmdError::Config(msg) => write!(f, "configuration error: {}", msg),
            CmdError::Numerics(msg) => write!(f, "numerical failure: {}", msg),
        }
    }
}

impl std::error::Error for CmdError {}

pub fn core_error(e: CoreError) -> CmdError {
    match e {
        CoreError::Parse(_)
        | CoreError::UnboundParameter(_)
        | CoreError::DimensionMismatch { .. }
        | CoreError::WrongSide { .. }
        | CoreError::StructureValidation { .. }
        | CoreError::Invalid(_) => CmdError::Config(e.to_string()),
        CoreError::Eval(_)
        | CoreError::SingularHessian { .. }
        | CoreError::NewtonDivergence { .. }
        | CoreError::Integration { .. } => CmdError::Numerics(e.to_string()),
    }
}

fn config_err(path: &str, msg: impl std::fmt::Display) -> CmdError {
    CmdError::Config(format!("{}: {}", path, msg))
}

// ---------------------------------------------------------------------------
// Raw JSON schema
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub label: Option<String>,
    pub algebroid: AlgebroidConfig,
    pub system: SystemConfig,
    pub initial_state: InitialStateConfig,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub checks: Vec<CheckConfig>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub legendre_compare: Option<LegendreCompareConfig>,
    #[serde(default)]
    pub hamilton_jacobi: Option<HamiltonJacobiConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebroidConfig {
    TangentBundle {
        n: usize,
    },
    So3,
    LieAlgebra {
        m: usize,
        /// Dense constants `c[gamma][alpha][beta]`, 0-based nesting.
        constants: Vec<Vec<Vec<f64>>>,
    },
    ActionSo3OnR3,
    AtiyahTrivial {
        base_dim: usize,
        fiber_dim: usize,
        /// Dense constants of the structure algebra.
        algebra: Vec<Vec<Vec<f64>>>,
        /// `connection[a][i] = A^a_i(q)`, expressions in q1..q_base.
        connection: Vec<Vec<String>>,
        /// `curvature[a]` lists B^a_{ij} for i < j in lexicographic order.
        curvature: Vec<Vec<String>>,
    },
    Custom {
        n: usize,
        m: usize,
        /// `anchor[i][alpha] = rho^i_alpha(q)` as expression strings.
        anchor: Vec<Vec<String>>,
        /// Structure entries with 1-based indices, alpha < beta.
        structure: Vec<StructureEntry>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureEntry {
    pub gamma: usize,
    pub alpha: usize,
    pub beta: usize,
    pub expr: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub side: SideConfig,
    pub expression: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SideConfig {
    Lagrangian,
    Hamiltonian,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    pub q: Vec<f64>,
    pub w: Vec<f64>,
    pub s: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum IntegratorConfig {
    Rk4 {
        h: f64,
        t_end: f64,
        #[serde(default = "default_sample_every")]
        sample_every: usize,
    },
    Adaptive {
        tol: f64,
        t_end: f64,
        #[serde(default = "default_sample_every")]
        sample_every: usize,
    },
}

fn default_sample_every() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub name: String,
    pub tolerance: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LegendreCompareConfig {
    #[serde(default = "default_gap_tolerance")]
    pub tolerance: f64,
}

fn default_gap_tolerance() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonJacobiConfig {
    /// Generating function f(q); the section is its 1-jet.
    pub f: String,
    #[serde(default)]
    pub parameters: BTreeMap<String, f64>,
    pub grid: GridConfig,
    pub tolerance: f64,
    #[serde(default = "default_equation")]
    pub equation: HjEquationConfig,
    #[serde(default)]
    pub projected: Option<ProjectedConfig>,
}

fn default_equation() -> HjEquationConfig {
    HjEquationConfig::Hamiltonian
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum HjEquationConfig {
    Hamiltonian,
    Evolution,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Points per axis.
    pub points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectedConfig {
    pub q0: Vec<f64>,
    pub t_end: f64,
    pub h: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_gap_tolerance")]
    pub gap_tolerance: f64,
}

// ---------------------------------------------------------------------------
// Construction of core objects
// ---------------------------------------------------------------------------

/// Either dynamical system, tagged by side.
pub enum SideSystem {
    Lagrangian(ContactLagrangianSystem),
    Hamiltonian(ContactHamiltonianSystem),
}

impl SideSystem {
    pub fn side(&self) -> Side {
        match self {
            SideSystem::Lagrangian(_) => Side::Lagrangian,
            SideSystem::Hamiltonian(_) => Side::Hamiltonian,
        }
    }

    pub fn model(&self) -> &AlgebroidModel {
        match self {
            SideSystem::Lagrangian(sys) => &sys.model,
            SideSystem::Hamiltonian(sys) => &sys.model,
        }
    }

    pub fn field(&self) -> &ScalarField {
        match self {
            SideSystem::Lagrangian(sys) => &sys.lagrangian,
            SideSystem::Hamiltonian(sys) => &sys.hamiltonian,
        }
    }
}

/// A loaded, validated scenario.
pub struct Scenario {
    pub label: String,
    pub system: SideSystem,
    pub initial: State,
    pub integrator: IntegratorConfig,
    pub checks: Vec<CheckConfig>,
    pub seed: u64,
    pub legendre_compare: Option<LegendreCompareConfig>,
    pub hamilton_jacobi: Option<HamiltonJacobiConfig>,
}

pub fn load(path: &std::path::Path, seed_override: Option<u64>) -> Result<Scenario, CmdError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CmdError::Config(format!("cannot read {}: {}", path.display(), e)))?;
    let raw: ScenarioConfig =
        serde_json::from_str(&text).map_err(|e| CmdError::Config(e.to_string()))?;
    build(raw, seed_override)
}

fn dense_constants(path: &str, m: usize, c: &[Vec<Vec<f64>>]) -> Result<Vec<f64>, CmdError> {
    if c.len() != m
        || c.iter()
            .any(|x| x.len() != m || x.iter().any(|y| y.len() != m))
    {
        return Err(config_err(path, format!("expected a {0}x{0}x{0} array", m)));
    }
    let mut flat = Vec::with_capacity(m * m * m);
    for g in c {
        for a in g {
            flat.extend(a.iter().copied());
        }
    }
    Ok(flat)
}

fn base_expr_field(path: &str, src: &str, n: usize) -> Result<ScalarField, CmdError> {
    let ctx = ExprContext::base_only(n, &[]);
    let expr = parse(src, &ctx).map_err(|e| config_err(path, e))?;
    Ok(ScalarField::from_expr(expr, Arity::base_only(n)))
}

fn build_model(cfg: &AlgebroidConfig) -> Result<AlgebroidModel, CmdError> {
    match cfg {
        AlgebroidConfig::TangentBundle { n } => {
            tangent_bundle(*n).map_err(|e| config_err("algebroid.n", e))
        }
        AlgebroidConfig::So3 => Ok(so3()),
        AlgebroidConfig::LieAlgebra { m, constants } => {
            let flat = dense_constants("algebroid.constants", *m, constants)?;
            lie_algebra(*m, &flat, "lie_algebra").map_err(|e| config_err("algebroid", e))
        }
        AlgebroidConfig::ActionSo3OnR3 => Ok(action_so3_on_r3()),
        AlgebroidConfig::AtiyahTrivial {
            base_dim,
            fiber_dim,
            algebra,
            connection,
            curvature,
        } => {
            let nb = *base_dim;
            let d = *fiber_dim;
            let flat = dense_constants("algebroid.algebra", d, algebra)?;
            if connection.len() != d || connection.iter().any(|row| row.len() != nb) {
                return Err(config_err(
                    "algebroid.connection",
                    format!("expected {} rows of {} expressions", d, nb),
                ));
            }
            let pairs = nb * nb.saturating_sub(1) / 2;
            if curvature.len() != d || curvature.iter().any(|row| row.len() != pairs) {
                return Err(config_err(
                    "algebroid.curvature",
                    format!("expected {} rows of {} expressions (i < j pairs)", d, pairs),
                ));
            }
            let ctx = ExprContext::base_only(nb, &[]);
            let mut conn = Vec::with_capacity(d * nb);
            for (a, row) in connection.iter().enumerate() {
                for (i, src) in row.iter().enumerate() {
                    conn.push(parse(src, &ctx).map_err(|e| {
                        config_err(&format!("algebroid.connection[{}][{}]", a, i), e)
                    })?);
                }
            }
            let mut curv = Vec::with_capacity(d * pairs);
            for (a, row) in curvature.iter().enumerate() {
                for (k, src) in row.iter().enumerate() {
                    curv.push(parse(src, &ctx).map_err(|e| {
                        config_err(&format!("algebroid.curvature[{}][{}]", a, k), e)
                    })?);
                }
            }
            atiyah_trivial(
                &AtiyahData {
                    base_dim: nb,
                    fiber_dim: d,
                    algebra: flat,
                    connection: conn,
                    curvature: curv,
                },
                "atiyah_trivial",
            )
            .map_err(|e| config_err("algebroid", e))
        }
        AlgebroidConfig::Custom {
            n,
            m,
            anchor,
            structure,
        } => {
            let (n, m) = (*n, *m);
            if anchor.len() != n || anchor.iter().any(|row| row.len() != m) {
                return Err(config_err(
                    "algebroid.anchor",
                    format!("expected {} rows of {} expressions", n, m),
                ));
            }
            let mut entries = Vec::with_capacity(n * m);
            for (i, row) in anchor.iter().enumerate() {
                for (a, src) in row.iter().enumerate() {
                    entries.push(base_expr_field(
                        &format!("algebroid.anchor[{}][{}]", i, a),
                        src,
                        n,
                    )?);
                }
            }
            let pairs = m * (m - 1) / 2;
            let mut packed = vec![ScalarField::constant(0.0, Arity::base_only(n)); m * pairs];
            for (k, entry) in structure.iter().enumerate() {
                let path = format!("algebroid.structure[{}]", k);
                if entry.gamma == 0
                    || entry.gamma > m
                    || entry.alpha == 0
                    || entry.alpha > m
                    || entry.beta == 0
                    || entry.beta > m
                {
                    return Err(config_err(&path, "indices are 1-based and at most m"));
                }
                if entry.alpha >= entry.beta {
                    return Err(config_err(&path, "entries must have alpha < beta"));
                }
                let (g, a, b) = (entry.gamma - 1, entry.alpha - 1, entry.beta - 1);
                let idx = g * pairs + (a * m - a * (a + 1) / 2 + (b - a - 1));
                packed[idx] = base_expr_field(&format!("{}.expr", path), &entry.expr, n)?;
            }
            // Custom models are certified by the `check` command, not at
            // load time, so deliberately broken models can be exercised.
            AlgebroidModel::from_parts(n, m, entries, packed, "custom")
                .map_err(|e| config_err("algebroid", e))
        }
    }
}

fn build(raw: ScenarioConfig, seed_override: Option<u64>) -> Result<Scenario, CmdError> {
    let model = build_model(&raw.algebroid)?;

    let params: Vec<(String, f64)> = raw
        .system
        .parameters
        .iter()
        .map(|(k, v)| (k.clone(), *v))
        .collect();
    let names: Vec<&str> = params.iter().map(|(k, _)| k.as_str()).collect();
    let ctx = match raw.system.side {
        SideConfig::Lagrangian => ExprContext::lagrangian(model.n(), model.m(), &names),
        SideConfig::Hamiltonian => ExprContext::hamiltonian(model.n(), model.m(), &names),
    };
    let expr =
        parse(&raw.system.expression, &ctx).map_err(|e| config_err("system.expression", e))?;
    let bound = expr
        .bind_parameters(&params)
        .map_err(|p| config_err("system.parameters", format!("unbound parameter `{}`", p)))?;
    let field = ScalarField::from_expr(bound, Arity::new(model.n(), model.m()));

    let system = match raw.system.side {
        SideConfig::Lagrangian => SideSystem::Lagrangian(
            ContactLagrangianSystem::new(model, field).map_err(|e| config_err("system", e))?,
        ),
        SideConfig::Hamiltonian => SideSystem::Hamiltonian(
            ContactHamiltonianSystem::new(model, field).map_err(|e| config_err("system", e))?,
        ),
    };

    let model = system.model();
    if raw.initial_state.q.len() != model.n() {
        return Err(config_err(
            "initial_state.q",
            format!(
                "expected {} coordinates, got {}",
                model.n(),
                raw.initial_state.q.len()
            ),
        ));
    }
    if raw.initial_state.w.len() != model.m() {
        return Err(config_err(
            "initial_state.w",
            format!(
                "expected {} coordinates, got {}",
                model.m(),
                raw.initial_state.w.len()
            ),
        ));
    }
    let side = match raw.system.side {
        SideConfig::Lagrangian => Side::Lagrangian,
        SideConfig::Hamiltonian => Side::Hamiltonian,
    };
    let initial = State::new(
        raw.initial_state.q.clone(),
        raw.initial_state.w.clone(),
        raw.initial_state.s,
        side,
    );

    match &raw.integrator {
        IntegratorConfig::Rk4 { h, t_end, .. } => {
            if *h <= 0.0 || *t_end <= 0.0 {
                return Err(config_err("integrator", "h and t_end must be positive"));
            }
        }
        IntegratorConfig::Adaptive { tol, t_end, .. } => {
            if *tol <= 0.0 || *t_end <= 0.0 {
                return Err(config_err("integrator", "tol and t_end must be positive"));
            }
        }
    }

    for (k, check) in raw.checks.iter().enumerate() {
        validate_check(&format!("checks[{}]", k), check, &raw.system.side)?;
    }

    if let Some(hj) = &raw.hamilton_jacobi {
        if raw.system.side != SideConfig::Hamiltonian {
            return Err(config_err(
                "hamilton_jacobi",
                "requires a hamiltonian-side system",
            ));
        }
        let model = system.model();
        if hj.grid.min.len() != model.n() || hj.grid.max.len() != model.n() {
            return Err(config_err(
                "hamilton_jacobi.grid",
                format!("min/max must have {} entries", model.n()),
            ));
        }
        if hj.grid.points < 1 {
            return Err(config_err(
                "hamilton_jacobi.grid.points",
                "need at least one point",
            ));
        }
        if let Some(p) = &hj.projected {
            if p.q0.len() != model.n() {
                return Err(config_err(
                    "hamilton_jacobi.projected.q0",
                    format!("expected {} coordinates", model.n()),
                ));
            }
        }
        // Parse eagerly so syntax errors surface as config errors.
        let names: Vec<&str> = hj.parameters.keys().map(String::as_str).collect();
        let ctx = ExprContext::base_only(model.n(), &names);
        parse(&hj.f, &ctx).map_err(|e| config_err("hamilton_jacobi.f", e))?;
    }

    if raw.legendre_compare.is_some() && raw.system.side != SideConfig::Lagrangian {
        return Err(config_err(
            "legendre_compare",
            "requires a lagrangian-side system",
        ));
    }

    Ok(Scenario {
        label: raw.label.unwrap_or_else(|| "scenario".to_string()),
        system,
        initial,
        integrator: raw.integrator,
        checks: raw.checks,
        seed: seed_override.unwrap_or(raw.seed),
        legendre_compare: raw.legendre_compare,
        hamilton_jacobi: raw.hamilton_jacobi,
    })
}

/// Known check names, with the side each one applies to.
pub const CHECK_NAMES: &[(&str, Option<SideConfig>)] = &[
    ("structure_equations", None),
    ("antisymmetry", None),
    ("fd_crosscheck", None),
    ("section_residuals", None),
    ("ds_identity", Some(SideConfig::Lagrangian)),
    ("energy_dissipation", Some(SideConfig::Lagrangian)),
    ("reeb_contraction", Some(SideConfig::Lagrangian)),
    ("dissipation_identity", Some(SideConfig::Hamiltonian)),
    ("energy_drift", Some(SideConfig::Hamiltonian)),
];

fn validate_check(path: &str, check: &CheckConfig, side: &SideConfig) -> Result<(), CmdError> {
    match CHECK_NAMES.iter().find(|(n, _)| *n == check.name) {
        None => Err(config_err(
            path,
            format!(
                "unknown check `{}` (known: {})",
                check.name,
                CHECK_NAMES
                    .iter()
                    .map(|(n, _)| *n)
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
        )),
        Some((_, Some(required))) if required != side => Err(config_err(
            path,
            format!(
                "check `{}` applies to the {:?} side only",
                check.name, required
            ),
        )),
        _ => {
            if check.tolerance < 0.0 {
                return Err(config_err(path, "tolerance must be non-negative"));
            }
            Ok(())
        }
    }
}
