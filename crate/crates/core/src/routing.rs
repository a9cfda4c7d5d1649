//! Atomic splittable routing with information constraints.
//!
//! Agent `i` ships `η^i` units from `o^i` to `d^i` over the edges it knows,
//! paying `p(z, y)ᵀ x^i` where `z = Σ_j x^j` is the total edge flow. The
//! game operator is `F_i = p(z, y) + ∇_z p(z, y) x^i`.

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{self, CostModel, Curvature, GameSpec, Network, PolyhedralSet};
use crate::linalg::{self, Mat, Vector};
use crate::sensitivity::{self, SensitivityResult};
use crate::solver::{self, EquilibriumResult, SolverConfig};

/// Directed road graph; nodes are `0..nodes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoadNetwork {
    nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl RoadNetwork {
    pub fn new(nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= nodes || v >= nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge {e} = ({u}, {v}) references a node outside 0..{nodes}"
                )));
            }
            if u == v {
                return Err(Error::InvalidArgument(format!("edge {e} is a self-loop at node {u}")));
            }
        }
        Ok(Self { nodes, edges })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// `H_{u,e} = −1`, `H_{v,e} = +1` for `e = (u, v)`.
    pub fn incidence(&self) -> Mat {
        let mut h = Mat::zeros(self.nodes, self.edges.len());
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            h[(u, e)] = -1.0;
            h[(v, e)] = 1.0;
        }
        h
    }

    fn reachable(&self, from: usize, to: usize, allowed: &[bool]) -> bool {
        let mut seen = vec![false; self.nodes];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(u) = queue.pop_front() {
            if u == to {
                return true;
            }
            for (e, &(a, b)) in self.edges.iter().enumerate() {
                if allowed[e] && a == u && !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        false
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSpec {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    /// Edge indices the agent may use.
    pub known_edges: Vec<usize>,
}

impl AgentSpec {
    pub fn knowing_all(origin: usize, destination: usize, demand: f64, edges: usize) -> Self {
        Self {
            origin,
            destination,
            demand,
            known_edges: (0..edges).collect(),
        }
    }
}

/// `x ≥ 0` on known edges, flow balance `H x = η (e_d − e_o)` reduced to
/// independent rows, and `x_e = 0` on unknown edges.
pub fn build_feasible_set(net: &RoadNetwork, agent: &AgentSpec) -> Result<PolyhedralSet> {
    let m = net.num_edges();
    if agent.origin >= net.nodes() || agent.destination >= net.nodes() {
        return Err(Error::InvalidArgument(format!(
            "origin/destination ({}, {}) outside 0..{}",
            agent.origin,
            agent.destination,
            net.nodes()
        )));
    }
    if agent.origin == agent.destination {
        return Err(Error::InvalidArgument("origin and destination coincide".into()));
    }
    if !(agent.demand >= 0.0 && agent.demand.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "demand must be non-negative, got {}",
            agent.demand
        )));
    }
    let mut known = vec![false; m];
    for &e in &agent.known_edges {
        if e >= m {
            return Err(Error::InvalidArgument(format!("known edge {e} outside 0..{m}")));
        }
        known[e] = true;
    }
    if agent.demand > 0.0 && !net.reachable(agent.origin, agent.destination, &known) {
        return Err(Error::Infeasible {
            context: format!(
                "no path from node {} to node {} over the known edges",
                agent.origin, agent.destination
            ),
            certificate: Vec::new(),
        });
    }

    let h = net.incidence();
    let mut rhs = Vector::zeros(net.nodes());
    rhs[agent.origin] = -agent.demand;
    rhs[agent.destination] = agent.demand;

    let pins: Vec<usize> = (0..m).filter(|&e| !known[e]).collect();
    let mut basis = Mat::zeros(0, m);
    for &e in &pins {
        basis = append_row(&basis, &unit_row(m, e));
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for k in 0..net.nodes() {
        let candidate = append_row(&basis, &h.row(k).transpose());
        if linalg::rank(&candidate) > basis.nrows() {
            basis = candidate;
            kept.push(k);
        } else {
            dropped.push(k);
        }
    }
    let mut eq_matrix = Mat::zeros(kept.len() + pins.len(), m);
    let mut eq_rhs = Vector::zeros(kept.len() + pins.len());
    for (r, &k) in kept.iter().enumerate() {
        eq_matrix.set_row(r, &h.row(k));
        eq_rhs[r] = rhs[k];
    }
    for (r, &e) in pins.iter().enumerate() {
        eq_matrix[(kept.len() + r, e)] = 1.0;
    }
    // Dropped balance rows must follow from the kept ones.
    for &k in &dropped {
        let combo = linalg::lstsq(&eq_matrix.transpose(), &h.row(k).transpose())?;
        let implied = combo.dot(&eq_rhs);
        if (implied - rhs[k]).abs() > 1e-9 * (1.0 + agent.demand) {
            return Err(Error::Infeasible {
                context: format!("flow balance at node {k} is inconsistent with the known edges"),
                certificate: Vec::new(),
            });
        }
    }

    let known_edges: Vec<usize> = (0..m).filter(|&e| known[e]).collect();
    let mut ineq = Mat::zeros(known_edges.len(), m);
    for (r, &e) in known_edges.iter().enumerate() {
        ineq[(r, e)] = -1.0;
    }
    PolyhedralSet::new(ineq, Vector::zeros(known_edges.len()), eq_matrix, eq_rhs)
}

fn unit_row(m: usize, e: usize) -> Vector {
    let mut v = Vector::zeros(m);
    v[e] = 1.0;
    v
}

fn append_row(a: &Mat, row: &Vector) -> Mat {
    let r = a.nrows();
    let mut out = a.clone().insert_row(r, 0.0);
    out.set_row(r, &row.transpose());
    out
}

/// Edge travel times `p_e(z_e, y)` with their partial derivatives. Every
/// edge depends only on its own flow.
pub trait TravelTimeModel: Send + Sync + fmt::Debug {
    fn edges(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn time(&self, z: &Vector, y: &Vector) -> Vector;
    /// `∂p_e/∂z_e`.
    fn time_z(&self, z: &Vector, y: &Vector) -> Vector;
    /// `∂²p_e/∂z_e²`.
    fn time_zz(&self, z: &Vector, y: &Vector) -> Vector;
    /// `∂p/∂y`, `|E| × D`.
    fn time_y(&self, z: &Vector, y: &Vector) -> Mat;
    /// `∂²p_e/∂z_e∂y`, `|E| × D`.
    fn time_zy(&self, z: &Vector, y: &Vector) -> Mat;
    fn curvature(&self) -> Curvature;
}

/// `p_e = (a_e + b_e y_e) z_e + c_e`, one parameter per edge.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTravelTime {
    pub slope: Vector,
    pub param_slope: Vector,
    pub offset: Vector,
}

impl AffineTravelTime {
    pub fn new(slope: Vector, param_slope: Vector, offset: Vector) -> Result<Self> {
        let m = slope.len();
        if param_slope.len() != m {
            return Err(Error::dims("param_slope", m, param_slope.len()));
        }
        if offset.len() != m {
            return Err(Error::dims("offset", m, offset.len()));
        }
        if slope
            .iter()
            .chain(param_slope.iter())
            .chain(offset.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidArgument("travel-time coefficients must be finite".into()));
        }
        Ok(Self {
            slope,
            param_slope,
            offset,
        })
    }

    /// Diagonal of `C(y)`.
    pub fn c_diag(&self, y: &Vector) -> Vector {
        &self.slope + self.param_slope.component_mul(y)
    }
}

impl TravelTimeModel for AffineTravelTime {
    fn edges(&self) -> usize {
        self.slope.len()
    }

    fn param_dim(&self) -> usize {
        self.slope.len()
    }

    fn time(&self, z: &Vector, y: &Vector) -> Vector {
        self.c_diag(y).component_mul(z) + &self.offset
    }

    fn time_z(&self, _: &Vector, y: &Vector) -> Vector {
        self.c_diag(y)
    }

    fn time_zz(&self, z: &Vector, _: &Vector) -> Vector {
        Vector::zeros(z.len())
    }

    fn time_y(&self, z: &Vector, _: &Vector) -> Mat {
        Mat::from_diagonal(&self.param_slope.component_mul(z))
    }

    fn time_zy(&self, _: &Vector, _: &Vector) -> Mat {
        Mat::from_diagonal(&self.param_slope)
    }

    fn curvature(&self) -> Curvature {
        Curvature::Constant
    }
}

/// Cost model `J^i = p(z, y)ᵀ x^i` with `z` the total flow. `gradient`
/// returns the full operator block, `hessian` its derivative in `x^i`
/// at fixed `z`.
#[derive(Debug, Clone)]
pub struct RoutingCost {
    ttm: Arc<dyn TravelTimeModel>,
}

impl RoutingCost {
    pub fn new(ttm: Arc<dyn TravelTimeModel>) -> Self {
        Self { ttm }
    }
}

impl CostModel for RoutingCost {
    fn name(&self) -> &'static str {
        "routing"
    }

    fn strategy_dim(&self) -> usize {
        self.ttm.edges()
    }

    fn param_dim(&self) -> usize {
        self.ttm.param_dim()
    }

    fn cost(&self, _: usize, own: &Vector, agg: &Vector, y: &Vector) -> f64 {
        self.ttm.time(agg, y).dot(own)
    }

    fn gradient(&self, _: usize, own: &Vector, agg: &Vector, y: &Vector) -> Vector {
        self.ttm.time(agg, y) + self.ttm.time_z(agg, y).component_mul(own)
    }

    fn hessian(&self, _: usize, _: &Vector, agg: &Vector, y: &Vector) -> Mat {
        Mat::from_diagonal(&self.ttm.time_z(agg, y))
    }

    fn cross_jacobian(&self, _: usize, own: &Vector, agg: &Vector, y: &Vector) -> Mat {
        let d = self.ttm.time_z(agg, y) + self.ttm.time_zz(agg, y).component_mul(own);
        Mat::from_diagonal(&d)
    }

    fn param_jacobian(&self, _: usize, own: &Vector, agg: &Vector, y: &Vector) -> Mat {
        let zy = self.ttm.time_zy(agg, y);
        self.ttm.time_y(agg, y) + Mat::from_diagonal(own) * zy
    }

    fn curvature(&self) -> Curvature {
        self.ttm.curvature()
    }
}

/// Identical agents sharing an origin, destination and demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub players: usize,
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
    /// Edges unknown to uninformed agents.
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct RoutingScenario {
    pub net: RoadNetwork,
    pub agents: Vec<AgentSpec>,
    pub ttm: Arc<dyn TravelTimeModel>,
}

impl RoutingScenario {
    pub fn new(net: RoadNetwork, agents: Vec<AgentSpec>, ttm: Arc<dyn TravelTimeModel>) -> Result<Self> {
        if ttm.edges() != net.num_edges() {
            return Err(Error::dims("travel-time model edges", net.num_edges(), ttm.edges()));
        }
        if agents.is_empty() {
            return Err(Error::InvalidArgument("routing game needs at least one agent".into()));
        }
        Ok(Self { net, agents, ttm })
    }

    /// Identical agents of which the first `round(q · players)` know every
    /// edge and the rest do not know `population.hidden`.
    pub fn with_information(
        net: RoadNetwork,
        ttm: Arc<dyn TravelTimeModel>,
        population: &Population,
        informed_fraction: f64,
    ) -> Result<Self> {
        let informed = informed_count(population.players, informed_fraction)?;
        let m = net.num_edges();
        let agents = (0..population.players)
            .map(|i| {
                let known_edges = (0..m)
                    .filter(|e| i < informed || !population.hidden.contains(e))
                    .collect();
                AgentSpec {
                    origin: population.origin,
                    destination: population.destination,
                    demand: population.demand,
                    known_edges,
                }
            })
            .collect();
        Self::new(net, agents, ttm)
    }

    pub fn game(&self) -> Result<GameSpec> {
        let sets = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                build_feasible_set(&self.net, a).map_err(|err| match err {
                    Error::Infeasible { context, certificate } => Error::Infeasible {
                        context: format!("agent {i}: {context}"),
                        certificate,
                    },
                    other => other,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        GameSpec::new(
            Network::all_to_all(self.agents.len()),
            sets,
            Arc::new(RoutingCost::new(self.ttm.clone())),
        )
    }
}

/// Number of informed agents; `q · players` must be an integer.
pub fn informed_count(players: usize, q: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::InvalidArgument(format!(
            "informed fraction must lie in [0,1], got {q}"
        )));
    }
    let exact = q * players as f64;
    let rounded = exact.round();
    if (exact - rounded).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "informed fraction {q} × {players} players = {exact} is not an integer"
        )));
    }
    Ok(rounded as usize)
}

pub fn routing_operator(scenario: &RoutingScenario, x: &Vector, y: &Vector) -> Result<Vector> {
    game::game_operator(&scenario.game()?, x, y)
}

/// `s = p(z, y)ᵀ z`.
pub fn total_travel_time(ttm: &dyn TravelTimeModel, z: &Vector, y: &Vector) -> f64 {
    ttm.time(z, y).dot(z)
}

/// `z = Σ_i x^i`.
pub fn total_flow(x: &Vector, players: usize, edges: usize) -> Vector {
    let mut z = Vector::zeros(edges);
    for i in 0..players {
        z += x.rows(i * edges, edges);
    }
    z
}

#[derive(Debug, Clone)]
pub struct RoutingReport {
    pub x_star: Vec<Vector>,
    pub z_star: Vector,
    pub s: f64,
    pub ds_dy: Vector,
    pub dz_dy: Mat,
    pub braess_edges: Vec<usize>,
    pub best_edge: usize,
    /// Parameters at which the sensitivity was evaluated.
    pub y_eval: Vector,
    /// `y_eval` differs from the requested `ȳ` after a degenerate first try.
    pub perturbed: bool,
    pub equilibrium: EquilibriumResult,
    pub sensitivity: SensitivityResult,
}

const BRAESS_TOL: f64 = 1e-9;
const PERTURBATION: f64 = 1e-7;

/// Sensitivities of flows and total travel time at a computed equilibrium.
pub fn flow_and_ttt_sensitivity(
    scenario: &RoutingScenario,
    spec: &GameSpec,
    eq: &EquilibriumResult,
    y_bar: &Vector,
) -> Result<RoutingReport> {
    let sens = sensitivity::sensitivity_matrix(spec, eq, y_bar)?;
    Ok(assemble_report(scenario, eq.clone(), sens, y_bar, false))
}

fn assemble_report(
    scenario: &RoutingScenario,
    eq: EquilibriumResult,
    sens: SensitivityResult,
    y: &Vector,
    perturbed: bool,
) -> RoutingReport {
    let players = scenario.agents.len();
    let m = scenario.net.num_edges();
    let z = total_flow(&eq.x_star, players, m);
    let d = sens.dx_dy.ncols();
    let mut dz_dy = Mat::zeros(m, d);
    for i in 0..players {
        dz_dy += sens.dx_dy.rows(i * m, m);
    }
    let ttm = scenario.ttm.as_ref();
    let p = ttm.time(&z, y);
    let marginal = &p + ttm.time_z(&z, y).component_mul(&z);
    let ds_dy = ttm.time_y(&z, y).transpose() * &z + dz_dy.transpose() * marginal;
    let scale = ds_dy.amax().max(1.0);
    let braess_edges = (0..d).filter(|&e| ds_dy[e] < -BRAESS_TOL * scale).collect();
    let best_edge = (0..d).fold(0, |best, e| if ds_dy[e] > ds_dy[best] { e } else { best });
    RoutingReport {
        x_star: (0..players).map(|i| eq.x_star.rows(i * m, m).into_owned()).collect(),
        s: total_travel_time(ttm, &z, y),
        z_star: z,
        ds_dy,
        dz_dy,
        braess_edges,
        best_edge,
        y_eval: y.clone(),
        perturbed,
        equilibrium: eq,
        sensitivity: sens,
    }
}

/// Solves the game at `ȳ` and evaluates the sensitivities. If strict
/// complementarity fails, `ȳ` is shifted by `1e-7` in every component and
/// the computation is retried once.
pub fn analyze(scenario: &RoutingScenario, y_bar: &Vector, cfg: &SolverConfig) -> Result<RoutingReport> {
    let spec = scenario.game()?;
    let eq = solver::solve_nash(&spec, y_bar, cfg)?;
    match sensitivity::sensitivity_matrix(&spec, &eq, y_bar) {
        Ok(sens) => Ok(assemble_report(scenario, eq, sens, y_bar, false)),
        Err(Error::CqViolation(report)) if report.full_row_rank => {
            let y = y_bar.add_scalar(PERTURBATION);
            let eq = solver::solve_nash(&spec, &y, &cfg.clone().with_initial(eq.x_star.clone()))?;
            let sens = sensitivity::sensitivity_matrix(&spec, &eq, &y)?;
            Ok(assemble_report(scenario, eq, sens, &y, true))
        }
        Err(e) => Err(e),
    }
}

/// Equilibrium total travel time at `y`.
pub fn equilibrium_travel_time(scenario: &RoutingScenario, y: &Vector, cfg: &SolverConfig) -> Result<f64> {
    let spec = scenario.game()?;
    let eq = solver::solve_nash(&spec, y, cfg)?;
    let z = total_flow(&eq.x_star, scenario.agents.len(), scenario.net.num_edges());
    Ok(total_travel_time(scenario.ttm.as_ref(), &z, y))
}

/// Central difference of the equilibrium total travel time along `direction`.
pub fn ttt_finite_difference(
    scenario: &RoutingScenario,
    y_bar: &Vector,
    direction: &Vector,
    h: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let plus = equilibrium_travel_time(scenario, &(y_bar + direction * h), cfg)?;
    let minus = equilibrium_travel_time(scenario, &(y_bar - direction * h), cfg)?;
    Ok((plus - minus) / (2.0 * h))
}

/// Four-node Wheatstone network with the classic Braess costs: two
/// congestible edges `(1,2)`, `(3,4)` with slope 40/150, two fixed-delay
/// edges `(2,4)`, `(1,3)` with slope 1/150 and offset 45, and a bridge
/// `(2,3)` with cost `y₅ z₅ / 150`. Node labels are zero-based here.
pub fn wheatstone(players: usize, demand: f64, informed_fraction: f64) -> Result<RoutingScenario> {
    let net = RoadNetwork::new(4, vec![(0, 1), (1, 3), (2, 3), (0, 2), (1, 2)])?;
    let ttm = AffineTravelTime::new(
        Vector::from_vec(vec![40.0, 1.0, 40.0, 1.0, 0.0]) / 150.0,
        Vector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]) / 150.0,
        Vector::from_vec(vec![0.0, 45.0, 0.0, 45.0, 0.0]),
    )?;
    let population = Population {
        players,
        origin: 0,
        destination: 3,
        demand,
        hidden: vec![4],
    };
    RoutingScenario::with_information(net, Arc::new(ttm), &population, informed_fraction)
}

/// Parameter vector with every edge at 1 and the bridge at `y5`.
pub fn wheatstone_params(y5: f64) -> Vector {
    Vector::from_vec(vec![1.0, 1.0, 1.0, 1.0, y5])
}
