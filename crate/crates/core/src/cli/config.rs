//! JSON configuration documents. Players, nodes and edges are numbered from
//! 1 in documents and from 0 in the library.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{GameSpec, InteractionFn, LinearQuadraticBlock, LinearQuadraticCost, Network, PolyhedralSet};
use crate::linalg::{Mat, Vector};
use crate::monotonicity::{Branch, EvaluationMode};
use crate::quadratic::QuadraticGameSpec;
use crate::routing::{AffineTravelTime, AgentSpec, Population, RoadNetwork, RoutingScenario};
use crate::solver::{Metric, SolverConfig, StepRule};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameKind {
    Quadratic,
    FriedkinJohnsen,
    Routing,
    Generic,
}

impl GameKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GameKind::Quadratic => "quadratic",
            GameKind::FriedkinJohnsen => "friedkin_johnsen",
            GameKind::Routing => "routing",
            GameKind::Generic => "generic",
        }
    }
}

/// Dense matrix stored row-major with explicit dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_mat(m: &Mat) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.transpose().iter().copied().collect(),
        }
    }

    fn check(&self, path: &str, errors: &mut Vec<String>) -> bool {
        if self.data.len() != self.rows * self.cols {
            errors.push(format!(
                "{path}: {} entries for a {}×{} matrix",
                self.data.len(),
                self.rows,
                self.cols
            ));
            return false;
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            errors.push(format!("{path}: entries must be finite"));
            return false;
        }
        true
    }

    pub fn to_mat(&self) -> Mat {
        Mat::from_row_slice(self.rows, self.cols, &self.data)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum InteractionDoc {
    Linear { gamma: f64 },
    Softsign { gain: f64 },
}

impl InteractionDoc {
    pub fn to_fn(&self) -> InteractionFn {
        match *self {
            InteractionDoc::Linear { gamma } => InteractionFn::Linear { slope: gamma },
            InteractionDoc::Softsign { gain } => InteractionFn::Softsign { gain },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticDoc {
    pub p: MatrixDoc,
    pub interaction: InteractionDoc,
    /// Output chain coefficient; defaults to `f'(0)`.
    #[serde(default)]
    pub alpha_out: Option<f64>,
    #[serde(default = "one")]
    pub y_mean: f64,
    /// Shock realization; zero when absent.
    #[serde(default)]
    pub shock: Option<Vec<f64>>,
    #[serde(default)]
    pub pinned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FriedkinJohnsenDoc {
    pub p: MatrixDoc,
    pub theta: f64,
    /// Initial opinions `y ∈ [0,1]^N`.
    pub opinions: Vec<f64>,
    #[serde(default = "default_fj_iterations")]
    pub iterations: usize,
    #[serde(default = "default_fj_tol")]
    pub tol: f64,
    /// Player whose opinion is pinned to zero in the rumor comparison.
    #[serde(default)]
    pub pinned: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "model", rename_all = "snake_case")]
pub enum TravelTimeDoc {
    Affine {
        slope: Vec<f64>,
        param_slope: Vec<f64>,
        offset: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDoc {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    /// All edges when absent.
    #[serde(default)]
    pub known_edges: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PopulationDoc {
    pub players: usize,
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    #[serde(default)]
    pub hidden_edges: Vec<usize>,
    #[serde(default = "one")]
    pub informed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    /// Edge whose parameter is varied.
    pub edge: usize,
    pub values: Vec<f64>,
    pub informed_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingDoc {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub travel_time: TravelTimeDoc,
    pub params: Vec<f64>,
    #[serde(default)]
    pub agents: Option<Vec<AgentDoc>>,
    #[serde(default)]
    pub population: Option<PopulationDoc>,
    #[serde(default)]
    pub sweep: Option<SweepDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintDoc {
    #[serde(default)]
    pub ineq_matrix: Option<MatrixDoc>,
    #[serde(default)]
    pub ineq_rhs: Vec<f64>,
    #[serde(default)]
    pub eq_matrix: Option<MatrixDoc>,
    #[serde(default)]
    pub eq_rhs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericPlayerDoc {
    pub hessian: MatrixDoc,
    pub cross: MatrixDoc,
    pub loading: MatrixDoc,
    #[serde(default)]
    pub linear: Option<Vec<f64>>,
    #[serde(default)]
    pub constraints: Option<ConstraintDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericDoc {
    pub p: MatrixDoc,
    #[serde(default)]
    pub allow_diagonal: bool,
    pub players: Vec<GenericPlayerDoc>,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricDoc {
    Euclidean,
    HessianDiagonal,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverDoc {
    #[serde(default)]
    pub tol_res: Option<f64>,
    #[serde(default)]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub eps_active: Option<f64>,
    #[serde(default)]
    pub eps_strict: Option<f64>,
    /// Fixed step; automatic when absent.
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub metric: Option<MetricDoc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateModeDoc {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchDoc {
    SymmetricScaledIdentity,
    NormBound,
    DirectJacobian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateDoc {
    pub mode: CertificateModeDoc,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default, rename = "box")]
    pub sampling_box: Option<[f64; 2]>,
    #[serde(default)]
    pub branch: Option<BranchDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub schema_version: String,
    pub game: GameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<QuadraticDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub friedkin_johnsen: Option<FriedkinJohnsenDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub routing: Option<RoutingDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generic: Option<GenericDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateDoc>,
}

fn one() -> f64 {
    1.0
}

fn default_fj_iterations() -> usize {
    100_000
}

fn default_fj_tol() -> f64 {
    1e-13
}

fn default_samples() -> usize {
    200
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ConfigDocument> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Parses and validates a configuration document, reporting every
/// semantic problem at once.
pub fn parse_config_str(text: &str) -> Result<ConfigDocument> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ConfigDocument = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let location = format!("line {}, column {}", inner.line(), inner.column());
        let field = if path == "." {
            String::new()
        } else {
            format!("{path}: ")
        };
        Error::Validation(vec![format!("{field}{inner} ({location})")])
    })?;
    let errors = doc.validate();
    if errors.is_empty() {
        Ok(doc)
    } else {
        Err(Error::Validation(errors))
    }
}

fn index_ok(path: &str, idx: usize, count: usize, what: &str, errors: &mut Vec<String>) -> bool {
    if idx == 0 || idx > count {
        errors.push(format!("{path}: {what} {idx} outside 1..={count}"));
        false
    } else {
        true
    }
}

impl ConfigDocument {
    pub fn validate(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            errors.push(format!(
                "schema_version: unsupported version {:?}, expected {SCHEMA_VERSION:?}",
                self.schema_version
            ));
        }
        let present = [
            (GameKind::Quadratic, self.quadratic.is_some()),
            (GameKind::FriedkinJohnsen, self.friedkin_johnsen.is_some()),
            (GameKind::Routing, self.routing.is_some()),
            (GameKind::Generic, self.generic.is_some()),
        ];
        for (kind, has) in present {
            if kind == self.game && !has {
                errors.push(format!(
                    "{}: block required for game {:?}",
                    kind.as_str(),
                    kind.as_str()
                ));
            }
            if kind != self.game && has {
                errors.push(format!(
                    "{}: block not allowed for game {:?}",
                    kind.as_str(),
                    self.game.as_str()
                ));
            }
        }
        if let Some(q) = &self.quadratic {
            validate_quadratic(q, &mut errors);
        }
        if let Some(fj) = &self.friedkin_johnsen {
            validate_fj(fj, &mut errors);
        }
        if let Some(r) = &self.routing {
            validate_routing(r, &mut errors);
        }
        if let Some(g) = &self.generic {
            validate_generic(g, &mut errors);
        }
        if let Some(s) = &self.solver {
            if let Err(Error::Validation(list)) = solver_config(Some(s)).validate() {
                errors.extend(list.into_iter().map(|m| format!("solver: {m}")));
            }
        }
        if let Some(c) = &self.certificate {
            if c.mode == CertificateModeDoc::Sampled && c.samples == 0 {
                errors.push("certificate.samples: must be positive".into());
            }
            if let Some([lo, hi]) = c.sampling_box {
                if !(lo < hi) {
                    errors.push(format!("certificate.box: empty interval [{lo}, {hi}]"));
                }
            }
        }
        errors
    }

    pub fn solver_config(&self) -> SolverConfig {
        solver_config(self.solver.as_ref())
    }

    pub fn evaluation_mode(&self, seed: u64) -> EvaluationMode {
        match &self.certificate {
            Some(c) if c.mode == CertificateModeDoc::Sampled => EvaluationMode::Sampled {
                samples: c.samples,
                bounds: c.sampling_box.map(|[lo, hi]| (lo, hi)),
                seed,
            },
            _ => EvaluationMode::Analytic,
        }
    }

    pub fn forced_branch(&self) -> Option<Branch> {
        self.certificate.as_ref().and_then(|c| c.branch).map(|b| match b {
            BranchDoc::SymmetricScaledIdentity => Branch::SymmetricScaledIdentity,
            BranchDoc::NormBound => Branch::NormBound,
            BranchDoc::DirectJacobian => Branch::DirectJacobian,
        })
    }
}

fn solver_config(doc: Option<&SolverDoc>) -> SolverConfig {
    let mut cfg = SolverConfig::default();
    let Some(doc) = doc else { return cfg };
    if let Some(t) = doc.tol_res {
        cfg = cfg.with_tol(t);
    }
    if let Some(m) = doc.max_iter {
        cfg.max_iter = m;
    }
    if let Some(e) = doc.eps_active {
        cfg.eps_active = e;
    }
    if let Some(e) = doc.eps_strict {
        cfg.eps_strict = e;
    }
    if let Some(s) = doc.step {
        cfg.step = StepRule::Fixed(s);
    }
    if let Some(m) = doc.metric {
        cfg.metric = match m {
            MetricDoc::Euclidean => Metric::Euclidean,
            MetricDoc::HessianDiagonal => Metric::HessianDiagonal,
        };
    }
    cfg
}

fn validate_square(path: &str, p: &MatrixDoc, errors: &mut Vec<String>) -> bool {
    if !p.check(path, errors) {
        return false;
    }
    if p.rows != p.cols || p.rows == 0 {
        errors.push(format!(
            "{path}: must be square and non-empty, got {}×{}",
            p.rows, p.cols
        ));
        return false;
    }
    true
}

fn check_zero_diagonal(path: &str, p: &MatrixDoc, errors: &mut Vec<String>) {
    for i in 0..p.rows {
        let v = p.data[i * p.cols + i];
        if v != 0.0 {
            errors.push(format!("{path}: P_ii = 0 required, found P[{},{}] = {v}", i + 1, i + 1));
        }
    }
}

fn validate_quadratic(q: &QuadraticDoc, errors: &mut Vec<String>) {
    if !validate_square("quadratic.p", &q.p, errors) {
        return;
    }
    check_zero_diagonal("quadratic.p", &q.p, errors);
    let n = q.p.rows;
    if let Some(s) = &q.shock {
        if s.len() != n {
            errors.push(format!("quadratic.shock: {} entries for {n} players", s.len()));
        }
    }
    for (r, &k) in q.pinned.iter().enumerate() {
        index_ok(&format!("quadratic.pinned[{r}]"), k, n, "player", errors);
    }
    if !errors.is_empty() {
        return;
    }
    if let Err(Error::Validation(list)) = q.to_spec() {
        errors.extend(list.into_iter().map(|m| format!("quadratic: {m}")));
    }
}

fn validate_fj(fj: &FriedkinJohnsenDoc, errors: &mut Vec<String>) {
    if !validate_square("friedkin_johnsen.p", &fj.p, errors) {
        return;
    }
    let n = fj.p.rows;
    if fj.opinions.len() != n {
        errors.push(format!(
            "friedkin_johnsen.opinions: {} entries for {n} players",
            fj.opinions.len()
        ));
    }
    if let Some(k) = fj.pinned {
        index_ok("friedkin_johnsen.pinned", k, n, "player", errors);
    }
    if fj.iterations == 0 {
        errors.push("friedkin_johnsen.iterations: must be positive".into());
    }
    if !(fj.tol > 0.0) {
        errors.push("friedkin_johnsen.tol: must be positive".into());
    }
    if !(fj.theta > 0.0 && fj.theta.is_finite()) {
        errors.push(format!("friedkin_johnsen.theta: θ > 0 required, got {}", fj.theta));
    }
    if let Some(i) = fj.opinions.iter().position(|v| !(0.0..=1.0).contains(v)) {
        errors.push(format!("friedkin_johnsen.opinions[{i}]: must lie in [0,1]"));
    }
    if let Err(Error::Validation(list)) = crate::quadratic::check_row_stochastic(&fj.p.to_mat()) {
        errors.extend(list.into_iter().map(|m| format!("friedkin_johnsen.p: {m}")));
    }
    check_zero_diagonal("friedkin_johnsen.p", &fj.p, errors);
}

fn validate_routing(r: &RoutingDoc, errors: &mut Vec<String>) {
    let m = r.edges.len();
    if m == 0 {
        errors.push("routing.edges: at least one edge required".into());
    }
    for (e, &[u, v]) in r.edges.iter().enumerate() {
        let path = format!("routing.edges[{e}]");
        let ok = index_ok(&path, u, r.nodes, "node", errors) & index_ok(&path, v, r.nodes, "node", errors);
        if ok && u == v {
            errors.push(format!("{path}: self-loop at node {u}"));
        }
    }
    let TravelTimeDoc::Affine {
        slope,
        param_slope,
        offset,
    } = &r.travel_time;
    for (name, v) in [("slope", slope), ("param_slope", param_slope), ("offset", offset)] {
        if v.len() != m {
            errors.push(format!("routing.travel_time.{name}: {} entries for {m} edges", v.len()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            errors.push(format!("routing.travel_time.{name}: entries must be finite"));
        }
    }
    if r.params.len() != m {
        errors.push(format!("routing.params: {} entries for {m} edges", r.params.len()));
    }
    if slope.len() == m && param_slope.len() == m && r.params.len() == m {
        for e in 0..m {
            let c = slope[e] + param_slope[e] * r.params[e];
            if !(c > 0.0) {
                errors.push(format!("routing: C(y) ≻ 0 required, edge {} has slope {c}", e + 1));
            }
        }
    }
    match (&r.agents, &r.population) {
        (Some(_), Some(_)) => errors.push("routing: give either agents or population, not both".into()),
        (None, None) => errors.push("routing: agents or population required".into()),
        _ => {}
    }
    let mut check_demand = |path: &str, eta: f64| {
        if !(eta > 0.0 && eta.is_finite()) {
            errors.push(format!("{path}: η^i > 0 required, got {eta}"));
        }
    };
    if let Some(agents) = &r.agents {
        for (i, a) in agents.iter().enumerate() {
            check_demand(&format!("routing.agents[{i}].demand"), a.demand);
        }
    }
    if let Some(p) = &r.population {
        check_demand("routing.population.demand", p.demand);
    }
    if let Some(agents) = &r.agents {
        if agents.is_empty() {
            errors.push("routing.agents: at least one agent required".into());
        }
        for (i, a) in agents.iter().enumerate() {
            let path = format!("routing.agents[{i}]");
            index_ok(&path, a.origin, r.nodes, "origin", errors);
            index_ok(&path, a.destination, r.nodes, "destination", errors);
            if a.origin == a.destination {
                errors.push(format!("{path}: origin and destination coincide"));
            }
            for &e in a.known_edges.iter().flatten() {
                index_ok(&format!("{path}.known_edges"), e, m, "edge", errors);
            }
        }
    }
    if let Some(p) = &r.population {
        let path = "routing.population";
        if p.players == 0 {
            errors.push(format!("{path}.players: must be positive"));
        }
        index_ok(path, p.origin, r.nodes, "origin", errors);
        index_ok(path, p.destination, r.nodes, "destination", errors);
        if p.origin == p.destination {
            errors.push(format!("{path}: origin and destination coincide"));
        }
        for &e in &p.hidden_edges {
            index_ok(&format!("{path}.hidden_edges"), e, m, "edge", errors);
        }
        if let Err(e) = crate::routing::informed_count(p.players, p.informed_fraction) {
            errors.push(format!("{path}.informed_fraction: {e}"));
        }
        if let Some(s) = &r.sweep {
            for q in &s.informed_fractions {
                if let Err(e) = crate::routing::informed_count(p.players, *q) {
                    errors.push(format!("routing.sweep.informed_fractions: {e}"));
                }
            }
        }
    }
    if let Some(s) = &r.sweep {
        index_ok("routing.sweep.edge", s.edge, m, "edge", errors);
        if s.values.is_empty() {
            errors.push("routing.sweep.values: at least one value required".into());
        }
        if s.informed_fractions.is_empty() {
            errors.push("routing.sweep.informed_fractions: at least one fraction required".into());
        }
        if r.population.is_none() {
            errors.push("routing.sweep: requires a population block".into());
        }
        if slope.len() == m && param_slope.len() == m && s.edge >= 1 && s.edge <= m {
            for &v in &s.values {
                let c = slope[s.edge - 1] + param_slope[s.edge - 1] * v;
                if !(c > 0.0) {
                    errors.push(format!(
                        "routing.sweep.values: C(y) ≻ 0 required, value {v} gives slope {c}"
                    ));
                }
            }
        }
    }
}

fn validate_generic(g: &GenericDoc, errors: &mut Vec<String>) {
    if !validate_square("generic.p", &g.p, errors) {
        return;
    }
    if !g.allow_diagonal {
        check_zero_diagonal("generic.p", &g.p, errors);
    }
    let n_players = g.p.rows;
    if g.players.len() != n_players {
        errors.push(format!(
            "generic.players: {} entries for a {n_players}-player network",
            g.players.len()
        ));
    }
    let Some(first) = g.players.first() else { return };
    let n = first.hessian.rows;
    let mut params = 0;
    for (i, pl) in g.players.iter().enumerate() {
        let path = format!("generic.players[{i}]");
        for (name, m, cols) in [
            ("hessian", &pl.hessian, Some(n)),
            ("cross", &pl.cross, Some(n)),
            ("loading", &pl.loading, None),
        ] {
            if m.check(&format!("{path}.{name}"), errors) && (m.rows != n || cols.is_some_and(|c| m.cols != c)) {
                errors.push(format!(
                    "{path}.{name}: shape {}×{} does not match n = {n}",
                    m.rows, m.cols
                ));
            }
        }
        params += pl.loading.cols;
        if let Some(l) = &pl.linear {
            if l.len() != n {
                errors.push(format!("{path}.linear: {} entries, expected {n}", l.len()));
            }
        }
        if let Some(c) = &pl.constraints {
            if let Some(m) = &c.ineq_matrix {
                if m.check(&format!("{path}.constraints.ineq_matrix"), errors)
                    && (m.cols != n || m.rows != c.ineq_rhs.len())
                {
                    errors.push(format!(
                        "{path}.constraints.ineq_matrix: shape {}×{} inconsistent",
                        m.rows, m.cols
                    ));
                }
            } else if !c.ineq_rhs.is_empty() {
                errors.push(format!("{path}.constraints.ineq_rhs: given without ineq_matrix"));
            }
            if let Some(m) = &c.eq_matrix {
                if m.check(&format!("{path}.constraints.eq_matrix"), errors)
                    && (m.cols != n || m.rows != c.eq_rhs.len())
                {
                    errors.push(format!(
                        "{path}.constraints.eq_matrix: shape {}×{} inconsistent",
                        m.rows, m.cols
                    ));
                }
            } else if !c.eq_rhs.is_empty() {
                errors.push(format!("{path}.constraints.eq_rhs: given without eq_matrix"));
            }
        }
    }
    if g.params.len() != params {
        errors.push(format!(
            "generic.params: {} entries, loadings need {params}",
            g.params.len()
        ));
    }
}

impl QuadraticDoc {
    pub fn to_spec(&self) -> Result<QuadraticGameSpec> {
        let f = self.interaction.to_fn();
        QuadraticGameSpec::new(
            self.p.to_mat(),
            f,
            self.alpha_out.unwrap_or(f.slope_at_origin()),
            self.y_mean,
        )
    }

    pub fn shock_vector(&self) -> Vector {
        match &self.shock {
            Some(s) => Vector::from_vec(s.clone()),
            None => Vector::zeros(self.p.rows),
        }
    }

    pub fn pinned_players(&self) -> Vec<usize> {
        self.pinned.iter().map(|k| k - 1).collect()
    }
}

impl FriedkinJohnsenDoc {
    pub fn game(&self) -> Result<GameSpec> {
        let n = self.p.rows;
        let mut sets = vec![PolyhedralSet::unconstrained(1); n];
        if let Some(k) = self.pinned {
            sets[k - 1] = PolyhedralSet::affine(Mat::identity(1, 1), Vector::zeros(1))?;
        }
        GameSpec::new(
            Network::new(self.p.to_mat())?,
            sets,
            Arc::new(crate::game::FriedkinJohnsenCost::new(n, self.theta)),
        )
    }

    /// Parameters of the normalized game, `θ y`.
    pub fn game_params(&self) -> Vector {
        Vector::from_vec(self.opinions.clone()) * self.theta
    }
}

impl RoutingDoc {
    pub fn road_network(&self) -> Result<RoadNetwork> {
        RoadNetwork::new(self.nodes, self.edges.iter().map(|&[u, v]| (u - 1, v - 1)).collect())
    }

    pub fn travel_time(&self) -> Result<AffineTravelTime> {
        let TravelTimeDoc::Affine {
            slope,
            param_slope,
            offset,
        } = &self.travel_time;
        AffineTravelTime::new(
            Vector::from_vec(slope.clone()),
            Vector::from_vec(param_slope.clone()),
            Vector::from_vec(offset.clone()),
        )
    }

    pub fn params_vector(&self) -> Vector {
        Vector::from_vec(self.params.clone())
    }

    /// Scenario from the agent list, or from the population at the given
    /// informed fraction (its own fraction when `None`).
    pub fn scenario(&self, informed_fraction: Option<f64>) -> Result<RoutingScenario> {
        let net = self.road_network()?;
        let ttm = Arc::new(self.travel_time()?);
        if let Some(p) = &self.population {
            let population = Population {
                players: p.players,
                origin: p.origin - 1,
                destination: p.destination - 1,
                demand: p.demand,
                hidden: p.hidden_edges.iter().map(|e| e - 1).collect(),
            };
            return RoutingScenario::with_information(
                net,
                ttm,
                &population,
                informed_fraction.unwrap_or(p.informed_fraction),
            );
        }
        let m = net.num_edges();
        let agents = self
            .agents
            .iter()
            .flatten()
            .map(|a| AgentSpec {
                origin: a.origin - 1,
                destination: a.destination - 1,
                demand: a.demand,
                known_edges: match &a.known_edges {
                    Some(k) => k.iter().map(|e| e - 1).collect(),
                    None => (0..m).collect(),
                },
            })
            .collect();
        RoutingScenario::new(net, agents, ttm)
    }
}

impl GenericDoc {
    pub fn game(&self) -> Result<GameSpec> {
        let n = self.players[0].hessian.rows;
        let mut blocks = Vec::with_capacity(self.players.len());
        let mut sets = Vec::with_capacity(self.players.len());
        for pl in &self.players {
            blocks.push(LinearQuadraticBlock {
                hessian: pl.hessian.to_mat(),
                cross: pl.cross.to_mat(),
                loading: pl.loading.to_mat(),
                linear: pl
                    .linear
                    .as_ref()
                    .map_or_else(|| Vector::zeros(n), |l| Vector::from_vec(l.clone())),
            });
            let set = match &pl.constraints {
                None => PolyhedralSet::unconstrained(n),
                Some(c) => PolyhedralSet::new(
                    c.ineq_matrix
                        .as_ref()
                        .map_or_else(|| Mat::zeros(0, n), MatrixDoc::to_mat),
                    Vector::from_vec(c.ineq_rhs.clone()),
                    c.eq_matrix.as_ref().map_or_else(|| Mat::zeros(0, n), MatrixDoc::to_mat),
                    Vector::from_vec(c.eq_rhs.clone()),
                )?,
            };
            sets.push(set);
        }
        let network = if self.allow_diagonal {
            Network::with_diagonal(self.p.to_mat())?
        } else {
            Network::new(self.p.to_mat())?
        };
        GameSpec::new(network, sets, Arc::new(LinearQuadraticCost::new(blocks)?))
    }

    pub fn params_vector(&self) -> Vector {
        Vector::from_vec(self.params.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const QUAD: &str = r#"{
        "schema_version": "1",
        "game": "quadratic",
        "quadratic": {
            "p": {"rows": 2, "cols": 2, "data": [0, 1, 1, 0]},
            "interaction": {"kind": "linear", "gamma": 0.5}
        }
    }"#;

    #[test]
    fn parses_minimal_quadratic() {
        let doc = parse_config_str(QUAD).unwrap();
        assert_eq!(doc.game, GameKind::Quadratic);
        let spec = doc.quadratic.unwrap().to_spec().unwrap();
        assert_eq!(spec.gamma0(), 0.5);
    }

    #[test]
    fn rejects_unknown_keys_with_path() {
        let text = QUAD.replace("\"gamma\": 0.5", "\"gamma\": 0.5, \"beta\": 1");
        let Err(Error::Validation(msgs)) = parse_config_str(&text) else {
            panic!()
        };
        assert!(msgs[0].contains("quadratic.interaction"), "{msgs:?}");
        assert!(msgs[0].contains("beta"));
    }

    #[test]
    fn reports_all_semantic_errors() {
        let text = QUAD.replace("[0, 1, 1, 0]", "[1, 1, 1, 2]").replace("\"1\"", "\"9\"");
        let Err(Error::Validation(msgs)) = parse_config_str(&text) else {
            panic!()
        };
        assert!(msgs.iter().any(|m| m.contains("schema_version")));
        assert_eq!(msgs.iter().filter(|m| m.contains("P_ii = 0")).count(), 2);
    }

    #[test]
    fn malformed_json_reports_position() {
        let Err(Error::Validation(msgs)) = parse_config_str("{\n  \"schema_version\": ") else {
            panic!()
        };
        assert!(msgs[0].contains("line 2"), "{msgs:?}");
    }

    #[test]
    fn matrix_doc_round_trip() {
        let m = Mat::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let doc = MatrixDoc::from_mat(&m);
        assert_eq!(doc.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(doc.to_mat(), m);
    }
}
