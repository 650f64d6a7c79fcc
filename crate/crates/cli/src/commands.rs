//! Subcommand implementations: simulate, check, legendre-compare, hj-check.

use crate::config::{
    core_error, CheckConfig, CmdError, HjEquationConfig, IntegratorConfig, Scenario, SideSystem,
};
use crate::output::{fmt_full, write_csv};
use contact_algebroids::algebroid::State;
use contact_algebroids::error::CoreError;
use contact_algebroids::expr::{parse, ExprContext};
use contact_algebroids::field::{fd_crosscheck, Arity, ScalarField, FD_STEP};
use contact_algebroids::hj::{jet_hj_residuals, projected_dynamics_check, JetEquation};
use contact_algebroids::integrate::{adaptive_integrate, integrate, Diagnostic, Trajectory};
use contact_algebroids::legendre::equivalence_check;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::Path;

pub struct CommandOutcome {
    pub all_passed: bool,
}

fn numerics(e: CoreError) -> CmdError {
    core_error(e)
}

// ---------------------------------------------------------------------------
// Seeded sampling
// ---------------------------------------------------------------------------

fn sample_state(rng: &mut ChaCha8Rng, base: &State) -> State {
    let jitter = |rng: &mut ChaCha8Rng, x: &f64| x + rng.gen_range(-1.0..1.0);
    State::new(
        base.q.iter().map(|x| jitter(rng, x)).collect(),
        base.w.iter().map(|x| jitter(rng, x)).collect(),
        jitter(rng, &base.s),
        base.side,
    )
}

// ---------------------------------------------------------------------------
// Named checks
// ---------------------------------------------------------------------------

pub struct CheckOutcome {
    pub name: String,
    pub samples: usize,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn run_check(
    scenario: &Scenario,
    check: &CheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<CheckOutcome, CmdError> {
    let system = &scenario.system;
    let model = system.model();
    let base = &scenario.initial;
    let mut worst: f64 = 0.0;

    match check.name.as_str() {
        "structure_equations" => {
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                let (jac, anc) = model.structure_residuals(&st.q).map_err(numerics)?;
                worst = worst.max(jac.max_abs()).max(anc.max_abs());
            }
        }
        "antisymmetry" => {
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                let c = model.structure_tensor(&st.q).map_err(numerics)?;
                let m = model.m();
                for g in 0..m {
                    for a in 0..m {
                        for b in 0..m {
                            worst = worst.max((c[(g, a, b)] + c[(g, b, a)]).abs());
                        }
                    }
                }
            }
        }
        "fd_crosscheck" => {
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                worst = worst.max(fd_crosscheck(system.field(), &st, FD_STEP).map_err(numerics)?);
            }
        }
        "section_residuals" => {
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                let r = match system {
                    SideSystem::Lagrangian(sys) => sys.verify_section(&st).map_err(numerics)?,
                    SideSystem::Hamiltonian(sys) => sys.verify_section(&st).map_err(numerics)?,
                };
                worst = worst.max(r.max_abs());
            }
        }
        "ds_identity" => {
            let sys = expect_lagrangian(system)?;
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                let f = sys.herglotz_field(&st).map_err(numerics)?;
                let l = sys.lagrangian.value_at(&st).map_err(numerics)?;
                worst = worst.max((f.ds - l).abs());
            }
        }
        "energy_dissipation" => {
            let sys = expect_lagrangian(system)?;
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                worst = worst.max(
                    sys.energy_dissipation_residual(&st)
                        .map_err(numerics)?
                        .abs(),
                );
            }
        }
        "reeb_contraction" => {
            let sys = expect_lagrangian(system)?;
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                let r = sys.reeb_coeffs(&st).map_err(numerics)?;
                worst = worst
                    .max((r.eta_contraction - 1.0).abs())
                    .max(r.deta_contraction_max);
            }
        }
        "dissipation_identity" => {
            let sys = expect_hamiltonian(system)?;
            for _ in 0..check.samples {
                let st = sample_state(rng, base);
                let h = sys.hamiltonian.value_at(&st).map_err(numerics)?;
                let r = sys.dissipation_residual(&st).map_err(numerics)?;
                worst = worst.max(r.abs() / (1.0 + h.abs()));
            }
        }
        "energy_drift" => {
            let sys = expect_hamiltonian(system)?;
            let field = |st: &State| sys.hamilton_field(st);
            let traj = run_integrator(&scenario.integrator, &field, base)?;
            fail_on_truncation(&traj)?;
            let h0 = sys
                .hamiltonian
                .value_at(&traj.states[0])
                .map_err(numerics)?;
            for st in &traj.states {
                let h = sys.hamiltonian.value_at(st).map_err(numerics)?;
                worst = worst.max((h - h0).abs());
            }
        }
        other => {
            return Err(CmdError::Config(format!("unknown check `{}`", other)));
        }
    }

    Ok(CheckOutcome {
        name: check.name.clone(),
        samples: check.samples,
        max_residual: worst,
        tolerance: check.tolerance,
        pass: worst <= check.tolerance,
    })
}

fn expect_lagrangian(
    system: &SideSystem,
) -> Result<&contact_algebroids::ContactLagrangianSystem, CmdError> {
    match system {
        SideSystem::Lagrangian(sys) => Ok(sys),
        SideSystem::Hamiltonian(_) => Err(CmdError::Config(
            "check needs a lagrangian-side system".into(),
        )),
    }
}

fn expect_hamiltonian(
    system: &SideSystem,
) -> Result<&contact_algebroids::ContactHamiltonianSystem, CmdError> {
    match system {
        SideSystem::Hamiltonian(sys) => Ok(sys),
        SideSystem::Lagrangian(_) => Err(CmdError::Config(
            "check needs a hamiltonian-side system".into(),
        )),
    }
}

fn run_checks(scenario: &Scenario) -> Result<Vec<CheckOutcome>, CmdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    scenario
        .checks
        .iter()
        .map(|c| run_check(scenario, c, &mut rng))
        .collect()
}

fn print_check_table(outcomes: &[CheckOutcome], quiet: bool) {
    if quiet {
        return;
    }
    for o in outcomes {
        println!(
            "check {:<22} samples {:>4}  max residual {:>24}  tolerance {:>10.1e}  {}",
            o.name,
            o.samples,
            fmt_full(o.max_residual),
            o.tolerance,
            if o.pass { "pass" } else { "FAIL" }
        );
    }
}

fn checks_csv(outcomes: &[CheckOutcome], path: &Path) -> Result<(), CmdError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CmdError::Config(e.to_string()))?;
    }
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| CmdError::Config(e.to_string()))?,
    );
    writeln!(out, "check,samples,max_residual,tolerance,pass")
        .map_err(|e| CmdError::Config(e.to_string()))?;
    for o in outcomes {
        writeln!(
            out,
            "{},{},{},{},{}",
            o.name,
            o.samples,
            fmt_full(o.max_residual),
            fmt_full(o.tolerance),
            o.pass
        )
        .map_err(|e| CmdError::Config(e.to_string()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

fn run_integrator(
    cfg: &IntegratorConfig,
    field: &dyn Fn(&State) -> contact_algebroids::Result<contact_algebroids::StateDerivative>,
    start: &State,
) -> Result<Trajectory, CmdError> {
    match cfg {
        IntegratorConfig::Rk4 {
            h,
            t_end,
            sample_every,
        } => integrate(&field, start, *t_end, *h, *sample_every, &[]).map_err(numerics),
        IntegratorConfig::Adaptive {
            tol,
            t_end,
            sample_every,
        } => adaptive_integrate(&field, start, *t_end, *tol, *sample_every, &[]).map_err(numerics),
    }
}

fn fail_on_truncation(traj: &Trajectory) -> Result<(), CmdError> {
    if let Some(f) = &traj.failure {
        return Err(CmdError::Numerics(format!(
            "integration stopped at t = {}: {}",
            f.time, f.reason
        )));
    }
    Ok(())
}

pub fn simulate(
    scenario: &Scenario,
    out_dir: &Path,
    quiet: bool,
) -> Result<CommandOutcome, CmdError> {
    match &scenario.system {
        SideSystem::Lagrangian(sys) => {
            let field = |st: &State| sys.herglotz_field(st);
            let diagnostics = vec![
                Diagnostic::new("E_L", |st: &State| sys.energy(st)),
                Diagnostic::new("ds_residual", |st: &State| {
                    let f = sys.herglotz_field(st)?;
                    Ok(f.ds - sys.lagrangian.value_at(st)?)
                }),
            ];
            simulate_with(scenario, &field, &diagnostics, out_dir, quiet)
        }
        SideSystem::Hamiltonian(sys) => {
            let field = |st: &State| sys.hamilton_field(st);
            let diagnostics = vec![
                Diagnostic::new("H", |st: &State| sys.hamiltonian.value_at(st)),
                Diagnostic::new("dissipation_residual", |st: &State| {
                    sys.dissipation_residual(st)
                }),
            ];
            simulate_with(scenario, &field, &diagnostics, out_dir, quiet)
        }
    }
}

fn simulate_with(
    scenario: &Scenario,
    field: &dyn Fn(&State) -> contact_algebroids::Result<contact_algebroids::StateDerivative>,
    diagnostics: &[Diagnostic],
    out_dir: &Path,
    quiet: bool,
) -> Result<CommandOutcome, CmdError> {
    let model = scenario.system.model();
    let traj = match &scenario.integrator {
        IntegratorConfig::Rk4 {
            h,
            t_end,
            sample_every,
        } => integrate(
            field,
            &scenario.initial,
            *t_end,
            *h,
            *sample_every,
            diagnostics,
        )
        .map_err(numerics)?,
        IntegratorConfig::Adaptive {
            tol,
            t_end,
            sample_every,
        } => adaptive_integrate(
            field,
            &scenario.initial,
            *t_end,
            *tol,
            *sample_every,
            diagnostics,
        )
        .map_err(numerics)?,
    };
    fail_on_truncation(&traj)?;

    // t, q1.., y1../p1.., s, then the diagnostic columns.
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((1..=model.n()).map(|i| format!("q{}", i)));
    let prefix = scenario.system.side().fiber_prefix();
    header.extend((1..=model.m()).map(|a| format!("{}{}", prefix, a)));
    header.push("s".into());
    header.extend(traj.diagnostics.iter().map(|(n, _)| n.clone()));

    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let st = &traj.states[k];
            let mut row = Vec::with_capacity(header.len());
            row.push(t);
            row.extend(st.q.iter().copied());
            row.extend(st.w.iter().copied());
            row.push(st.s);
            row.extend(traj.diagnostics.iter().map(|(_, col)| col[k]));
            row
        })
        .collect();
    write_csv(&out_dir.join("trajectory.csv"), &header, &rows)
        .map_err(|e| CmdError::Config(e.to_string()))?;

    if !quiet {
        println!(
            "scenario `{}`: {} samples to t = {}",
            scenario.label,
            traj.times.len(),
            traj.times.last().unwrap()
        );
        for (name, col) in &traj.diagnostics {
            let max = col.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
            println!("diagnostic {:<22} max |value| {}", name, fmt_full(max));
        }
    }

    let outcomes = run_checks(scenario)?;
    print_check_table(&outcomes, quiet);
    Ok(CommandOutcome {
        all_passed: outcomes.iter().all(|o| o.pass),
    })
}

// ---------------------------------------------------------------------------
// check
// ---------------------------------------------------------------------------

pub fn check(scenario: &Scenario, out_dir: &Path, quiet: bool) -> Result<CommandOutcome, CmdError> {
    let outcomes = run_checks(scenario)?;
    checks_csv(&outcomes, &out_dir.join("checks.csv"))?;
    print_check_table(&outcomes, quiet);
    Ok(CommandOutcome {
        all_passed: outcomes.iter().all(|o| o.pass),
    })
}

// ---------------------------------------------------------------------------
// legendre-compare
// ---------------------------------------------------------------------------

pub fn legendre_compare(
    scenario: &Scenario,
    out_dir: &Path,
    quiet: bool,
) -> Result<CommandOutcome, CmdError> {
    let sys = expect_lagrangian(&scenario.system)?;
    let (h, t_end, sample_every) = match &scenario.integrator {
        IntegratorConfig::Rk4 {
            h,
            t_end,
            sample_every,
        } => (*h, *t_end, *sample_every),
        IntegratorConfig::Adaptive { .. } => {
            return Err(CmdError::Config(
                "legendre-compare uses matched fixed steps; configure the rk4 integrator".into(),
            ));
        }
    };
    let tolerance = scenario
        .legendre_compare
        .as_ref()
        .map(|c| c.tolerance)
        .unwrap_or(1e-6);

    let report =
        equivalence_check(sys, &scenario.initial, t_end, h, sample_every).map_err(numerics)?;
    let rows: Vec<Vec<f64>> = report.gaps.iter().map(|&(t, g)| vec![t, g]).collect();
    write_csv(
        &out_dir.join("legendre_gap.csv"),
        &["t".into(), "gap".into()],
        &rows,
    )
    .map_err(|e| CmdError::Config(e.to_string()))?;

    let pass = report.sup_gap <= tolerance;
    if !quiet {
        println!(
            "legendre equivalence sup gap {} (tolerance {:.1e}) {}",
            fmt_full(report.sup_gap),
            tolerance,
            if pass { "pass" } else { "FAIL" }
        );
    }
    Ok(CommandOutcome { all_passed: pass })
}

// ---------------------------------------------------------------------------
// hj-check
// ---------------------------------------------------------------------------

fn grid_points(min: &[f64], max: &[f64], points: usize) -> Vec<Vec<f64>> {
    let n = min.len();
    if n == 0 {
        return vec![vec![]];
    }
    let axis = |i: usize| -> Vec<f64> {
        if points == 1 {
            return vec![min[i]];
        }
        (0..points)
            .map(|k| min[i] + (max[i] - min[i]) * (k as f64) / ((points - 1) as f64))
            .collect()
    };
    let mut pts: Vec<Vec<f64>> = vec![vec![]];
    for i in 0..n {
        let mut next = Vec::new();
        for p in &pts {
            for &x in &axis(i) {
                let mut q = p.clone();
                q.push(x);
                next.push(q);
            }
        }
        pts = next;
    }
    pts
}

pub fn hj_check(
    scenario: &Scenario,
    out_dir: &Path,
    quiet: bool,
) -> Result<CommandOutcome, CmdError> {
    let sys = expect_hamiltonian(&scenario.system)?;
    let hj = scenario.hamilton_jacobi.as_ref().ok_or_else(|| {
        CmdError::Config("hj-check needs a `hamilton_jacobi` section in the config".into())
    })?;

    let params: Vec<(String, f64)> = hj.parameters.iter().map(|(k, v)| (k.clone(), *v)).collect();
    let names: Vec<&str> = params.iter().map(|(k, _)| k.as_str()).collect();
    let ctx = ExprContext::base_only(sys.model.n(), &names);
    let expr =
        parse(&hj.f, &ctx).map_err(|e| CmdError::Config(format!("hamilton_jacobi.f: {}", e)))?;
    let bound = expr
        .bind_parameters(&params)
        .map_err(|p| CmdError::Config(format!("hamilton_jacobi.parameters: unbound `{}`", p)))?;
    let f = ScalarField::from_expr(bound, Arity::base_only(sys.model.n()));

    let equation = match hj.equation {
        HjEquationConfig::Hamiltonian => JetEquation::Hamiltonian,
        HjEquationConfig::Evolution => JetEquation::Evolution,
    };

    let mut header: Vec<String> = (1..=sys.model.n()).map(|i| format!("q{}", i)).collect();
    header.push("h_along_gamma".into());
    header.extend((1..=sys.model.m()).map(|a| format!("de{}", a)));

    let mut rows = Vec::new();
    let mut grid_max: f64 = 0.0;
    for q in grid_points(&hj.grid.min, &hj.grid.max, hj.grid.points) {
        let res = jet_hj_residuals(sys, &f, &q, JetEquation::Hamiltonian).map_err(numerics)?;
        let value = res.value.unwrap_or(0.0);
        let relevant = match equation {
            JetEquation::Hamiltonian => res.max_abs(),
            JetEquation::Evolution => res.d_e.iter().fold(0.0_f64, |a, x| a.max(x.abs())),
        };
        grid_max = grid_max.max(relevant);
        let mut row = q.clone();
        row.push(value);
        row.extend(res.d_e.iter().copied());
        rows.push(row);
    }
    write_csv(&out_dir.join("hj_residuals.csv"), &header, &rows)
        .map_err(|e| CmdError::Config(e.to_string()))?;

    let mut pass = grid_max <= hj.tolerance;
    if !quiet {
        println!(
            "hj residual grid max {} (tolerance {:.1e}) {}",
            fmt_full(grid_max),
            hj.tolerance,
            if pass { "pass" } else { "FAIL" }
        );
    }

    if let Some(p) = &hj.projected {
        let report = projected_dynamics_check(sys, &f, &p.q0, p.t_end, p.h, p.sample_every)
            .map_err(numerics)?;
        let rows: Vec<Vec<f64>> = report.gaps.iter().map(|&(t, g)| vec![t, g]).collect();
        write_csv(
            &out_dir.join("hj_gap.csv"),
            &["t".into(), "gap".into()],
            &rows,
        )
        .map_err(|e| CmdError::Config(e.to_string()))?;
        let projected_pass = report.sup_gap <= p.gap_tolerance;
        if !quiet {
            if report.precondition_violated {
                println!(
                    "warning: jet residual along the base curve reaches {}; gamma is not a solution there",
                    fmt_full(report.hj_residual_max)
                );
            }
            println!(
                "projected dynamics sup gap {} (tolerance {:.1e}) {}",
                fmt_full(report.sup_gap),
                p.gap_tolerance,
                if projected_pass { "pass" } else { "FAIL" }
            );
        }
        pass = pass && projected_pass;
    }

    Ok(CommandOutcome { all_passed: pass })
}
