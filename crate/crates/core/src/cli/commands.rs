use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ConfigDocument, GameKind};
use super::report::{fmt_f64, RunReport, Table};
use crate::error::{Error, Result};
use crate::game::GameSpec;
use crate::linalg::{self, Vector};
use crate::monotonicity::{self, MonotonicityCertificate};
use crate::quadratic::{self, TargetMode};
use crate::routing::{self, RoutingReport};
use crate::sensitivity::{self, ConstraintRow, SensitivityResult};
use crate::solver::{self, EquilibriumResult, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Certify,
    Sens,
    Centrality,
    Target,
    FjSim,
    RoutingSweep,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Certify => "certify",
            Command::Sens => "sens",
            Command::Centrality => "centrality",
            Command::Target => "target",
            Command::FjSim => "fj-sim",
            Command::RoutingSweep => "routing-sweep",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        [
            Command::Solve,
            Command::Certify,
            Command::Sens,
            Command::Centrality,
            Command::Target,
            Command::FjSim,
            Command::RoutingSweep,
        ]
        .into_iter()
        .find(|c| c.as_str() == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFlags {
    pub seed: u64,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

/// Runs `command` on a validated document. `raw` is the document text, used
/// for the input digest.
pub fn run(command: Command, doc: &ConfigDocument, raw: &[u8], flags: &RunFlags) -> Result<RunReport> {
    let start = Instant::now();
    let mut report = RunReport::new(command.as_str(), raw, flags.seed);
    report.diag("game", doc.game.as_str());
    let mut cfg = doc.solver_config();
    if let Some(t) = flags.tol {
        cfg = cfg.with_tol(t);
    }
    if let Some(m) = flags.max_iter {
        cfg.max_iter = m;
    }
    cfg.validate()?;
    match command {
        Command::Solve => solve(doc, &cfg, &mut report)?,
        Command::Certify => certify(doc, flags.seed, &mut report)?,
        Command::Sens => sens(doc, &cfg, &mut report)?,
        Command::Centrality => centrality(doc, &mut report)?,
        Command::Target => target(doc, &mut report)?,
        Command::FjSim => fj_sim(doc, &cfg, &mut report)?,
        Command::RoutingSweep => routing_sweep(doc, &cfg, &mut report)?,
    }
    report.wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(report)
}

fn unsupported(command: &str, game: GameKind) -> Error {
    Error::Configuration(format!(
        "command '{command}' does not apply to game '{}'",
        game.as_str()
    ))
}

/// The game and parameter vector a document describes.
pub fn game_and_params(doc: &ConfigDocument) -> Result<(GameSpec, Vector)> {
    match doc.game {
        GameKind::Quadratic => {
            let q = doc.quadratic.as_ref().expect("validated");
            let spec = q.to_spec()?;
            Ok((spec.pinned_game(&q.pinned_players())?, q.shock_vector()))
        }
        GameKind::FriedkinJohnsen => {
            let fj = doc.friedkin_johnsen.as_ref().expect("validated");
            Ok((fj.game()?, fj.game_params()))
        }
        GameKind::Routing => {
            let r = doc.routing.as_ref().expect("validated");
            Ok((r.scenario(None)?.game()?, r.params_vector()))
        }
        GameKind::Generic => {
            let g = doc.generic.as_ref().expect("validated");
            Ok((g.game()?, g.params_vector()))
        }
    }
}

fn state_labels(spec: &GameSpec, component: &str) -> Vec<String> {
    let n = spec.strategy_dim();
    (0..spec.total_dim())
        .map(|k| {
            if n == 1 {
                format!("x{}", k + 1)
            } else {
                format!("x{}_{component}{}", k / n + 1, k % n + 1)
            }
        })
        .collect()
}

fn param_labels(d: usize) -> Vec<String> {
    (1..=d).map(|k| format!("y{k}")).collect()
}

fn equilibrium_tables(spec: &GameSpec, eq: &EquilibriumResult, component: &str, report: &mut RunReport) {
    let n = spec.strategy_dim();
    let mut t = Table::new("equilibrium", &["player", component, "x"]);
    for (k, &v) in eq.x_star.iter().enumerate() {
        t.push(vec![(k / n + 1).to_string(), (k % n + 1).to_string(), fmt_f64(v)]);
    }
    report.tables.push(t);

    let mut m = Table::new("multipliers", &["kind", "player", "row", "value", "active"]);
    for k in 0..spec.num_inequalities() {
        let (player, local) = spec.inequality_owner(k).expect("row in range");
        m.push(vec![
            "inequality".into(),
            (player + 1).to_string(),
            (local + 1).to_string(),
            fmt_f64(eq.lambda[k]),
            eq.active_indices.contains(&k).to_string(),
        ]);
    }
    for k in 0..spec.num_equalities() {
        let (player, local) = spec.equality_owner(k).expect("row in range");
        m.push(vec![
            "equality".into(),
            (player + 1).to_string(),
            (local + 1).to_string(),
            fmt_f64(eq.mu[k]),
            "true".into(),
        ]);
    }
    report.tables.push(m);

    report.diag("residual", eq.residual);
    report.diag("iterations", eq.iterations);
    report.diag("stationarity", eq.stationarity);
    report.diag("multipliers_unique", eq.multipliers_unique);
    report.diag("min_hessian_eig", eq.min_hessian_eig);
    report.diag("step", eq.step);
    report.diag("active_inequalities", eq.active_indices.len());
}

fn solve(doc: &ConfigDocument, cfg: &SolverConfig, report: &mut RunReport) -> Result<()> {
    let (spec, y) = game_and_params(doc)?;
    let eq = solver::solve_nash(&spec, &y, cfg)?;
    let component = if doc.game == GameKind::Routing {
        "edge"
    } else {
        "component"
    };
    equilibrium_tables(&spec, &eq, component, report);
    if doc.game == GameKind::Routing {
        let r = doc.routing.as_ref().expect("validated");
        let scenario = r.scenario(None)?;
        let m = scenario.net.num_edges();
        let z = routing::total_flow(&eq.x_star, scenario.agents.len(), m);
        let times = scenario.ttm.time(&z, &y);
        let mut t = Table::new("edge_flows", &["edge", "z", "travel_time"]);
        for e in 0..m {
            t.push(vec![(e + 1).to_string(), fmt_f64(z[e]), fmt_f64(times[e])]);
        }
        report.tables.push(t);
        report.diag(
            "total_travel_time",
            routing::total_travel_time(scenario.ttm.as_ref(), &z, &y),
        );
    }
    Ok(())
}

fn certificate_table(c: &MonotonicityCertificate) -> Table {
    let mut t = Table::new("certificate", &["quantity", "value"]);
    let mode = if c.heuristic() { "sampled" } else { "analytic" };
    for (k, v) in [
        ("kappa1", fmt_f64(c.kappa1)),
        ("kappa2", fmt_f64(c.kappa2)),
        ("w_p", fmt_f64(c.w_p)),
        ("branch", c.branch.as_str().to_string()),
        ("alpha", fmt_f64(c.alpha)),
        ("certified", c.certified.to_string()),
        ("evaluation_mode", mode.to_string()),
        ("points", c.points.to_string()),
        ("jacobian_min_eig", fmt_f64(c.jacobian_min_eig)),
        ("consistent", c.consistent.to_string()),
    ] {
        t.push(vec![k.to_string(), v]);
    }
    t
}

fn certify(doc: &ConfigDocument, seed: u64, report: &mut RunReport) -> Result<()> {
    let (spec, y) = game_and_params(doc)?;
    let mode = doc.evaluation_mode(seed);
    let cert = match doc.forced_branch() {
        Some(b) => monotonicity::certify_with_branch(&spec, &y, mode, b)?,
        None => monotonicity::certify(&spec, &y, mode)?,
    };
    report.diag("certified", cert.certified);
    report.diag("heuristic", cert.heuristic());
    report.tables.push(certificate_table(&cert));
    Ok(())
}

fn active_set_table(spec: &GameSpec, s: &SensitivityResult, eq: &EquilibriumResult) -> Table {
    let mut t = Table::new("active_set", &["kind", "player", "row", "multiplier"]);
    for row in &s.cq.rows {
        let (kind, owner, value) = match *row {
            ConstraintRow::Inequality(k) => ("inequality", spec.inequality_owner(k), eq.lambda[k]),
            ConstraintRow::Equality(k) => ("equality", spec.equality_owner(k), eq.mu[k]),
        };
        let (player, local) = owner.expect("row in range");
        t.push(vec![
            kind.into(),
            (player + 1).to_string(),
            (local + 1).to_string(),
            fmt_f64(value),
        ]);
    }
    t
}

fn sensitivity_tables(spec: &GameSpec, eq: &EquilibriumResult, s: &SensitivityResult, report: &mut RunReport) {
    let component = if spec.cost_model().name() == "routing" {
        "e"
    } else {
        "c"
    };
    report.tables.push(Table::from_matrix(
        "dx_dy",
        "state",
        &state_labels(spec, component),
        &param_labels(s.dx_dy.ncols()),
        &s.dx_dy,
    ));
    report.tables.push(Table::from_vector(
        "m_spectrum",
        "index",
        "eigenvalue",
        &Vector::from_vec(s.m_spectrum.clone()),
    ));
    report.tables.push(active_set_table(spec, s, eq));
    report.diag("m_min_eig", s.m_min_eig());
    report.diag("tangency_residual", s.tangency_residual());
    report.diag("cq_rank", s.cq.rank);
    report.diag("cq_rows", s.cq.a.nrows());
    report.diag("residual", eq.residual);
    report.diag("iterations", eq.iterations);
}

fn sens(doc: &ConfigDocument, cfg: &SolverConfig, report: &mut RunReport) -> Result<()> {
    if doc.game == GameKind::Routing {
        let r = doc.routing.as_ref().expect("validated");
        let scenario = r.scenario(None)?;
        let rr = routing::analyze(&scenario, &r.params_vector(), cfg)?;
        let spec = scenario.game()?;
        sensitivity_tables(&spec, &rr.equilibrium, &rr.sensitivity, report);
        routing_sensitivity_tables(&rr, report);
        return Ok(());
    }
    let (spec, y) = game_and_params(doc)?;
    let eq = solver::solve_nash(&spec, &y, cfg)?;
    let s = sensitivity::sensitivity_matrix(&spec, &eq, &y)?;
    sensitivity_tables(&spec, &eq, &s, report);
    Ok(())
}

fn routing_sensitivity_tables(rr: &RoutingReport, report: &mut RunReport) {
    let mut t = Table::new("travel_time_gradient", &["edge", "z", "ds_dy", "braess"]);
    for e in 0..rr.ds_dy.len() {
        t.push(vec![
            (e + 1).to_string(),
            fmt_f64(rr.z_star[e]),
            fmt_f64(rr.ds_dy[e]),
            rr.braess_edges.contains(&e).to_string(),
        ]);
    }
    report.tables.push(t);
    report.diag("total_travel_time", rr.s);
    report.diag("best_edge", rr.best_edge + 1);
    report.diag(
        "braess_edges",
        rr.braess_edges.iter().map(|e| e + 1).collect::<Vec<_>>(),
    );
    report.diag("perturbed", rr.perturbed);
}

fn centrality(doc: &ConfigDocument, report: &mut RunReport) -> Result<()> {
    let spec = match doc.game {
        GameKind::Quadratic => doc.quadratic.as_ref().expect("validated").to_spec()?,
        GameKind::FriedkinJohnsen => {
            let fj = doc.friedkin_johnsen.as_ref().expect("validated");
            quadratic::fj_quadratic_spec(&fj.p.to_mat(), fj.theta)?
        }
        other => return Err(unsupported("centrality", other)),
    };
    let c = quadratic::centrality_report(&spec)?;
    let n = spec.players();
    let labels: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut t = Table::new("centrality", &["player", "bonacich", "keyplayer", "leontief_diag"]);
    for (i, label) in labels.iter().enumerate() {
        t.push(vec![
            label.clone(),
            fmt_f64(c.v[i]),
            fmt_f64(c.w[i]),
            fmt_f64(c.l[(i, i)]),
        ]);
    }
    report.tables.push(t);
    report
        .tables
        .push(Table::from_matrix("leontief", "row", &labels, &labels, &c.l));
    report
        .tables
        .push(Table::from_matrix("blocked", "player", &labels, &labels, &c.v_blocked));
    if let Some(q) = &doc.quadratic {
        if !q.pinned.is_empty() {
            let a = quadratic::pinning_matrix(n, &q.pinned_players())?;
            let s = quadratic::constrained_shock_sensitivity(&c.l, spec.gamma0(), &a)?;
            report.tables.push(Table::from_matrix(
                "pinned_sensitivity",
                "player",
                &labels,
                &param_labels(n),
                &s,
            ));
        }
    }
    report.diag("gamma0", spec.gamma0());
    report.diag("network_norm", linalg::spectral_norm(spec.weights()));
    Ok(())
}

fn target(doc: &ConfigDocument, report: &mut RunReport) -> Result<()> {
    let GameKind::Quadratic = doc.game else {
        return Err(unsupported("target", doc.game));
    };
    let q = doc.quadratic.as_ref().expect("validated");
    let spec = q.to_spec()?;
    let c = quadratic::centrality_report(&spec)?;
    let ante = quadratic::select_target(&spec, &c, &TargetMode::ExAnte)?;
    let post = match &q.shock {
        Some(s) => Some(quadratic::select_target(
            &spec,
            &c,
            &TargetMode::ExPost(Vector::from_vec(s.clone())),
        )?),
        None => None,
    };
    let mut t = Table::new("target", &["mode", "player", "tie", "score"]);
    t.push(vec![
        "ex_ante".into(),
        (ante.player + 1).to_string(),
        ante.tie.to_string(),
        fmt_f64(ante.scores[ante.player]),
    ]);
    if let Some(p) = &post {
        t.push(vec![
            "ex_post".into(),
            (p.player + 1).to_string(),
            p.tie.to_string(),
            fmt_f64(p.scores[p.player]),
        ]);
    }
    report.tables.push(t);
    let mut s = Table::new("scores", &["player", "ex_ante", "ex_post"]);
    for k in 0..spec.players() {
        let post_score = post.as_ref().map_or_else(String::new, |p| fmt_f64(p.scores[k]));
        s.push(vec![(k + 1).to_string(), fmt_f64(ante.scores[k]), post_score]);
    }
    report.tables.push(s);
    Ok(())
}

fn fj_sim(doc: &ConfigDocument, cfg: &SolverConfig, report: &mut RunReport) -> Result<()> {
    let GameKind::FriedkinJohnsen = doc.game else {
        return Err(unsupported("fj-sim", doc.game));
    };
    let fj = doc.friedkin_johnsen.as_ref().expect("validated");
    let p = fj.p.to_mat();
    let y = Vector::from_vec(fj.opinions.clone());
    let n = y.len();
    let run = quadratic::fj_simulate(&p, fj.theta, &y, fj.iterations, fj.tol, true)?;

    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.push("s".into());
    let mut t = Table {
        name: "trajectory".into(),
        header,
        rows: Vec::new(),
    };
    for (step, x) in run.trajectory.iter().enumerate() {
        let mut row = vec![step.to_string()];
        row.extend(x.iter().map(|&v| fmt_f64(v)));
        row.push(fmt_f64(quadratic::rumor_output(x)));
        t.rows.push(row);
    }
    report.tables.push(t);

    let free_game = crate::game::GameSpec::unconstrained(
        crate::game::Network::new(p.clone())?,
        std::sync::Arc::new(crate::game::FriedkinJohnsenCost::new(n, fj.theta)),
    )?;
    let eq = solver::solve_nash(&free_game, &fj.game_params(), cfg)?;
    let mut f = Table::new("fixed_point", &["player", "simulated", "nash", "difference"]);
    for i in 0..n {
        f.push(vec![
            (i + 1).to_string(),
            fmt_f64(run.x[i]),
            fmt_f64(eq.x_star[i]),
            fmt_f64(run.x[i] - eq.x_star[i]),
        ]);
    }
    report.tables.push(f);
    report.diag("iterations", run.iterations);
    report.diag("converged", run.converged);
    report.diag("s", quadratic::rumor_output(&run.x));
    report.diag("max_difference", (&run.x - &eq.x_star).amax());

    if let Some(k) = fj.pinned {
        let spec = quadratic::fj_quadratic_spec(&p, fj.theta)?;
        let r = quadratic::rumor_pipeline(&spec, &fj.game_params(), k - 1, cfg)?;
        let mut t = Table::new(
            "rumor",
            &["pinned", "s_free", "s_pinned_exact", "s_pinned_approx", "approx_gap"],
        );
        t.push(vec![
            k.to_string(),
            fmt_f64(r.s_free),
            fmt_f64(r.s_pinned_exact),
            fmt_f64(r.s_pinned_approx),
            fmt_f64(r.approx_gap),
        ]);
        report.tables.push(t);
    }
    Ok(())
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub informed_fraction: f64,
    pub value: f64,
    pub s: f64,
    pub ds_dy: f64,
    pub z_edge: f64,
    pub braess: bool,
    pub perturbed: bool,
    pub iterations: usize,
}

/// Total travel time and its derivative along the swept edge over the grid
/// `informed_fractions × values`, in that order.
pub fn sweep_points(doc: &ConfigDocument, cfg: &SolverConfig) -> Result<Vec<SweepPoint>> {
    let GameKind::Routing = doc.game else {
        return Err(unsupported("routing-sweep", doc.game));
    };
    let r = doc.routing.as_ref().expect("validated");
    let sweep = r
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Configuration("routing-sweep needs a routing.sweep block".into()))?;
    let edge = sweep.edge - 1;
    let grid: Vec<(f64, f64)> = sweep
        .informed_fractions
        .iter()
        .flat_map(|&q| sweep.values.iter().map(move |&v| (q, v)))
        .collect();
    grid.par_iter()
        .map(|&(q, v)| {
            let scenario = r.scenario(Some(q))?;
            let mut y = r.params_vector();
            y[edge] = v;
            let rr = routing::analyze(&scenario, &y, cfg)?;
            Ok(SweepPoint {
                informed_fraction: q,
                value: v,
                s: rr.s,
                ds_dy: rr.ds_dy[edge],
                z_edge: rr.z_star[edge],
                braess: rr.braess_edges.contains(&edge),
                perturbed: rr.perturbed,
                iterations: rr.equilibrium.iterations,
            })
        })
        .collect()
}

fn routing_sweep(doc: &ConfigDocument, cfg: &SolverConfig, report: &mut RunReport) -> Result<()> {
    let points = sweep_points(doc, cfg)?;
    let mut t = Table::new(
        "sweep",
        &["informed_fraction", "y", "s", "ds_dy", "z_edge", "braess", "perturbed"],
    );
    for p in &points {
        t.push(vec![
            fmt_f64(p.informed_fraction),
            fmt_f64(p.value),
            fmt_f64(p.s),
            fmt_f64(p.ds_dy),
            fmt_f64(p.z_edge),
            p.braess.to_string(),
            p.perturbed.to_string(),
        ]);
    }
    report.tables.push(t);
    report.diag("points", points.len());
    report.diag("total_iterations", points.iter().map(|p| p.iterations).sum::<usize>());
    Ok(())
}
