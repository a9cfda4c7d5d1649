//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::process::Command as Process;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{Mat, Vector};
use nagsens::cli::{game_and_params, sweep_points};
use nagsens::game::{self, FriedkinJohnsenCost, GameSpec, Network};
use nagsens::monotonicity::{self, Branch, EvaluationMode};
use nagsens::quadratic::{self, QuadraticGameSpec};
use nagsens::routing;
use nagsens::sensitivity;
use nagsens::solver::{self, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, budget_s: f64) -> bool {
    elapsed.as_secs_f64() < budget_s
}

fn tight() -> SolverConfig {
    SolverConfig::default().with_tol(1e-11)
}

fn structural_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_eig = f64::INFINITY;
    let mut worst_tangency: f64 = 0.0;
    let mut pinned_games = 0;
    for _ in 0..50 {
        let players = rng.random_range(2..=10);
        let dim = rng.random_range(1..=3);
        let (spec, y) = common::random_lq_game(&mut rng, players, dim);
        if spec.num_equalities() > 0 {
            pinned_games += 1;
        }
        let eq = solver::solve_nash(&spec, &y, &tight()).expect("solve");
        let s = sensitivity::sensitivity_matrix(&spec, &eq, &y).expect("sensitivity");
        worst_eig = worst_eig.min(s.m_min_eig());
        worst_tangency = worst_tangency.max(s.tangency_residual());
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst_eig >= -1e-8 && worst_tangency <= 1e-8 && within(elapsed, 30.0),
        format!("min λ(M) = {worst_eig:.3e}, max ‖A ∇x‖∞ = {worst_tangency:.3e}, {pinned_games}/50 with pins"),
    )
}

fn fd_matrix(spec: &GameSpec, y: &Vector, h: f64, cfg: &SolverConfig) -> Mat {
    let mut out = Mat::zeros(spec.total_dim(), y.len());
    for j in 0..y.len() {
        let mut d = Vector::zeros(y.len());
        d[j] = 1.0;
        let col = sensitivity::finite_difference_oracle(spec, y, &d, h, cfg).expect("fd");
        out.set_column(j, &col);
    }
    out
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for name in ["fj_two_agents.json", "chain_quadratic.json"] {
        let doc = common::load(name);
        let (spec, y) = game_and_params(&doc).unwrap();
        let eq = solver::solve_nash(&spec, &y, &tight()).unwrap();
        let s = sensitivity::sensitivity_matrix(&spec, &eq, &y).unwrap();
        let fd = fd_matrix(&spec, &y, 1e-4, &tight());
        worst = worst.max(common::rel_err(&s.dx_dy, &fd));
        cases += 1;
    }
    let doc = common::load("wheatstone.json");
    let r = doc.routing.as_ref().unwrap();
    let fractions = r.sweep.as_ref().unwrap().informed_fractions.clone();
    let cfg = doc.solver_config().with_tol(1e-11);
    let mut ttt_worst: f64 = 0.0;
    for &q in &fractions {
        let scenario = r.scenario(Some(q)).unwrap();
        let spec = scenario.game().unwrap();
        for y5 in [1.0, 2.0, 3.0] {
            let y_bar = routing::wheatstone_params(y5);
            let rep = routing::analyze(&scenario, &y_bar, &cfg).unwrap();
            let mut dir = Vector::zeros(5);
            dir[4] = 1.0;
            let fd = sensitivity::finite_difference_oracle(&spec, &rep.y_eval, &dir, 1e-3, &cfg).unwrap();
            let analytic = rep.sensitivity.dx_dy.column(4);
            worst = worst.max((analytic - &fd).amax() / fd.amax().max(1.0));
            let ttt = routing::ttt_finite_difference(&scenario, &rep.y_eval, &dir, 1e-3, &cfg).unwrap();
            ttt_worst = ttt_worst.max((rep.ds_dy[4] - ttt).abs() / ttt.abs().max(1.0));
            cases += 1;
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 1e-4 && ttt_worst <= 1e-4 && within(elapsed, 60.0),
        format!("{cases} cases, max rel err ∇x {worst:.3e}, ∂s/∂y {ttt_worst:.3e}"),
    )
}

fn fj_spec(p: &Mat, theta: f64) -> GameSpec {
    GameSpec::unconstrained(
        Network::new(p.clone()).unwrap(),
        Arc::new(FriedkinJohnsenCost::new(p.nrows(), theta)),
    )
    .unwrap()
}

fn monotonicity_certificate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let theta = 1.0;
    let mut networks = vec![common::load("fj_two_agents.json").friedkin_johnsen.unwrap().p.to_mat()];
    for n in [3, 5, 8] {
        networks.push(common::random_doubly_stochastic(&mut rng, n, 3));
    }
    let mut ok = true;
    let mut min_alpha = f64::INFINITY;
    let mut worst_undercut = f64::NEG_INFINITY;
    for p in &networks {
        let spec = fj_spec(p, theta);
        let y = Vector::from_fn(p.nrows(), |_, _| rng.random_range(0.0..1.0) * theta);
        let cert = monotonicity::certify(&spec, &y, EvaluationMode::Analytic).unwrap();
        let expected = 1.0 - common::spectral_norm(p) / (1.0 + theta);
        ok &= cert.certified && (cert.alpha - expected).abs() <= 1e-12 && cert.alpha >= 0.5 - 1e-12;
        min_alpha = min_alpha.min(cert.alpha);
        let mode = EvaluationMode::Sampled {
            samples: 200,
            bounds: Some((-1.0, 1.0)),
            seed: 5,
        };
        let sampled = monotonicity::certify(&spec, &y, mode).unwrap();
        ok &= sampled.consistent;
        for x in monotonicity::evaluation_points(&spec, mode).unwrap() {
            let j = common::fd_jacobian(|x| game::game_operator(&spec, x, &y).unwrap(), &x, 1e-4);
            worst_undercut = worst_undercut.max(cert.alpha - common::sym_min_eig(&j));
        }
    }
    ok &= worst_undercut <= 1e-8;

    let k3 = common::load("k3_generic.json");
    let (spec, y) = game_and_params(&k3).unwrap();
    let p = spec.network().weights().clone();
    let eig = p.clone().symmetric_eigen().eigenvalues;
    let (cross, own) = (0.6, 1.0);
    let branch_one = own - cross * eig.min().abs();
    let branch_two = own - cross * common::spectral_norm(&p);
    let best = monotonicity::certify(&spec, &y, EvaluationMode::Analytic).unwrap();
    let forced = monotonicity::certify_with_branch(&spec, &y, EvaluationMode::Analytic, Branch::NormBound).unwrap();
    let k3_ok = best.branch == Branch::SymmetricScaledIdentity
        && best.certified
        && (best.alpha - branch_one).abs() <= 1e-12
        && !forced.certified
        && (forced.alpha - branch_two).abs() <= 1e-12;
    Outcome::new(
        ok && k3_ok,
        format!(
            "FJ min α = {min_alpha:.6}, max undercut {worst_undercut:.2e}; K3 branch 1 α = {:.6} certified={}, branch 2 α = {:.6} certified={}",
            best.alpha, best.certified, forced.alpha, forced.certified
        ),
    )
}

fn admissible_network(rng: &mut ChaCha8Rng) -> (Mat, f64) {
    let n = rng.random_range(2..=12);
    let p = common::random_weights(rng, n, 0.4);
    let norm = common::spectral_norm(&p);
    let gamma = if norm > 0.0 {
        rng.random_range(0.05..0.95) / norm
    } else {
        0.5
    };
    (p, gamma)
}

fn centrality_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut ok = true;
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..100 {
        let (p, gamma) = admissible_network(&mut rng);
        let spec = QuadraticGameSpec::linear(p.clone(), gamma).unwrap();
        let r = quadratic::centrality_report(&spec).unwrap();
        let n = p.nrows();
        ok &= r.l.iter().all(|&v| v >= -1e-12);
        ok &= (0..n).all(|i| r.l[(i, i)] >= 1.0 - 1e-12);
        ok &= (0..n).all(|i| (0..n).all(|k| r.v[i] >= r.v_blocked[(i, k)] - 1e-12));
        let oracle = common::neumann_leontief(&p, gamma);
        worst_oracle = worst_oracle.max((&r.l - &oracle).amax() / oracle.amax());
    }
    ok &= worst_oracle <= 1e-9;

    let mut worst_identity: f64 = 0.0;
    for n in 1..=5 {
        let r = quadratic::centrality_report(&QuadraticGameSpec::linear(Mat::zeros(n, n), 0.5).unwrap()).unwrap();
        for k in 0..n {
            worst_identity = worst_identity.max((r.w[k] - r.v[k] * r.v[k]).abs());
        }
    }
    for _ in 0..20 {
        let (p, gamma) = admissible_network(&mut rng);
        let sym = (&p + p.transpose()) * 0.5;
        let spec = QuadraticGameSpec::linear(sym, gamma * 0.5).unwrap();
        let r = quadratic::centrality_report(&spec).unwrap();
        for k in 0..r.v.len() {
            worst_identity = worst_identity.max((r.w[k] - r.v[k] * r.v[k] / r.l[(k, k)]).abs());
        }
    }
    ok &= worst_identity <= 1e-10;

    let doc = common::load("p2_quadratic.json");
    let q = doc.quadratic.as_ref().unwrap();
    let p2 = q.p.to_mat();
    let gamma = 0.5;
    let v_oracle = common::brute_bonacich(&p2, gamma);
    let w_oracle = common::brute_keyplayer(&p2, gamma);
    let free = p2.view((0, 0), (1, 1)).into_owned();
    let pinned_oracle = common::neumann_leontief(&free, gamma)[(0, 0)] * gamma;
    let frozen = (v_oracle - Vector::from_vec(vec![2.0, 2.0])).amax() <= 1e-10
        && (&w_oracle - Vector::from_vec(vec![3.0, 3.0])).amax() <= 1e-10
        && (pinned_oracle - 0.5).abs() <= 1e-10;
    let spec = q.to_spec().unwrap();
    let r = quadratic::centrality_report(&spec).unwrap();
    let a = quadratic::pinning_matrix(2, &q.pinned_players()).unwrap();
    let pinned = quadratic::constrained_shock_sensitivity(&r.l, spec.gamma0(), &a).unwrap();
    let (game, y) = game_and_params(&doc).unwrap();
    let eq = solver::solve_nash(&game, &y, &tight()).unwrap();
    let via_game = sensitivity::sensitivity_matrix(&game, &eq, &y).unwrap();
    let p2_ok = frozen
        && (&r.v - Vector::from_vec(vec![2.0, 2.0])).amax() <= 1e-10
        && (&r.w - &w_oracle).amax() <= 1e-10
        && (pinned[(0, 0)] - pinned_oracle).abs() <= 1e-10
        && (via_game.dx_dy[(0, 0)] - pinned_oracle).abs() <= 1e-8;
    Outcome::new(
        ok && p2_ok,
        format!(
            "100 random P, Leontief oracle gap {worst_oracle:.2e}, identity gap {worst_identity:.2e}; P2 v = ({:.4}, {:.4}), w = ({:.4}, {:.4}), pinned {:.4}",
            r.v[0], r.v[1], r.w[0], r.w[1], pinned[(0, 0)]
        ),
    )
}

fn fj_cross_validation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut converged = true;
    for _ in 0..20 {
        let n = rng.random_range(2..=20);
        let p = common::random_row_stochastic(&mut rng, n);
        let theta = rng.random_range(0.2..3.0);
        let y = Vector::from_fn(n, |_, _| rng.random_range(0.0..1.0));
        let run = quadratic::fj_simulate(&p, theta, &y, 1_000_000, 1e-14, false).unwrap();
        converged &= run.converged;
        let eq = solver::solve_nash(&fj_spec(&p, theta), &(&y * theta), &tight()).unwrap();
        worst = worst.max((&run.x - &eq.x_star).amax());
    }
    let elapsed = start.elapsed();
    Outcome::new(
        converged && worst <= 1e-6 && within(elapsed, 20.0),
        format!("max |x_FJ − x*| = {worst:.3e}"),
    )
}

fn wheatstone_reproduction() -> Outcome {
    let doc = common::load("wheatstone.json");
    let r = doc.routing.as_ref().unwrap();
    let cfg = doc.solver_config();
    let y_bar = routing::wheatstone_params(1.0);
    let full = routing::analyze(&r.scenario(Some(1.0)).unwrap(), &y_bar, &cfg).unwrap();
    let blind = routing::analyze(&r.scenario(Some(0.0)).unwrap(), &y_bar, &cfg).unwrap();
    let braess = full.ds_dy[4] < 0.0;
    let blind_zero = blind.ds_dy[4].abs() <= 1e-9;

    let mut ordered = true;
    let fractions = [1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0];
    for y5 in [1.0, 2.0, 3.0] {
        let s: Vec<f64> = fractions
            .iter()
            .map(|&q| {
                routing::equilibrium_travel_time(&r.scenario(Some(q)).unwrap(), &routing::wheatstone_params(y5), &cfg)
                    .unwrap()
            })
            .collect();
        ordered &= s.windows(2).all(|w| w[0] >= w[1] - 1e-9 * w[0].abs());
    }

    let start = Instant::now();
    let points = sweep_points(&doc, &cfg).unwrap();
    let sweep_time = start.elapsed();
    let braess_later = points
        .iter()
        .filter(|pt| pt.informed_fraction == 1.0 && pt.braess)
        .map(|pt| pt.value)
        .collect::<Vec<_>>();
    Outcome::new(
        braess && blind_zero && ordered && within(sweep_time, 120.0),
        format!(
            "∂s/∂y5 at q=1, y=1: {:.4} (needs < 0); at q=0: {:.2e}; ordering {}; sweep {:.2}s over {} points; q=1 Braess flagged at y5 ∈ {:?}",
            full.ds_dy[4],
            blind.ds_dy[4],
            if ordered { "holds" } else { "violated" },
            sweep_time.as_secs_f64(),
            points.len(),
            braess_later
        ),
    )
}

fn equilibrium_quality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = f64::NEG_INFINITY;
    let mut cases = Vec::new();
    for name in [
        "fj_two_agents.json",
        "chain_quadratic.json",
        "p2_quadratic.json",
        "k3_generic.json",
        "degenerate_bound.json",
    ] {
        let doc = common::load(name);
        let (spec, y) = game_and_params(&doc).unwrap();
        cases.push((name.to_string(), spec, y, doc.solver_config()));
    }
    let doc = common::load("wheatstone.json");
    let r = doc.routing.as_ref().unwrap();
    for &q in &r.sweep.as_ref().unwrap().informed_fractions {
        let spec = r.scenario(Some(q)).unwrap().game().unwrap();
        cases.push((
            format!("wheatstone q={q:.3}"),
            spec,
            r.params_vector(),
            doc.solver_config(),
        ));
    }
    let mut worst_case = String::new();
    for (name, spec, y, cfg) in &cases {
        let eq = solver::solve_nash(spec, y, cfg).unwrap();
        let gain = common::best_deviation_gain(spec, &eq.x_star, y, 100, &mut rng);
        if gain > worst {
            worst = gain;
            worst_case = name.clone();
        }
    }
    Outcome::new(
        worst <= 1e-6,
        format!(
            "{} fixtures, best deviation gain {worst:.3e} ({worst_case})",
            cases.len()
        ),
    )
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = common::fixture("wheatstone.json");
    let run = |out: &std::path::Path| {
        let status = Process::new(env!("CARGO_BIN_EXE_nagsens"))
            .args(["routing-sweep", "--format", "csv", "--seed", "17", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("routing_sweep_sweep.csv")).unwrap()
    };
    let first = run(&dir.path().join("a"));
    let second = run(&dir.path().join("b"));
    Outcome::new(
        !first.is_empty() && first == second,
        format!("{} bytes, identical = {}", first.len(), first == second),
    )
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("structural suite", structural_suite),
        ("oracle equivalence", oracle_equivalence),
        ("monotonicity certificate", monotonicity_certificate),
        ("centrality suite", centrality_suite),
        ("FJ cross-validation", fj_cross_validation),
        ("Wheatstone reproduction", wheatstone_reproduction),
        ("equilibrium quality", equilibrium_quality),
        ("CLI determinism", cli_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (id, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {} {name}: {} [{:.2}s] {}",
            id + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
