//! Measured RK4 convergence order on the bundled scenario flows: halving
//! the step must shrink the global error by a factor close to 16.

use contact_algebroids::algebroid::State;
use contact_algebroids::integrate::integrate;
use contact_algebroids::scenarios::{dissipative_oscillator, rich_tq_hamiltonian, so3_herglotz};

fn state_distance(a: &State, b: &State) -> f64 {
    let mut d = (a.s - b.s).abs();
    for (x, y) in a.q.iter().zip(&b.q).chain(a.w.iter().zip(&b.w)) {
        d = d.max((x - y).abs());
    }
    d
}

fn measured_ratio(
    field: &dyn Fn(&State) -> contact_algebroids::Result<contact_algebroids::StateDerivative>,
    start: &State,
    t_end: f64,
    h: f64,
) -> f64 {
    let reference = integrate(field, start, t_end, h / 32.0, usize::MAX, &[]).unwrap();
    let err = |step: f64| {
        let traj = integrate(field, start, t_end, step, usize::MAX, &[]).unwrap();
        state_distance(traj.last_state(), reference.last_state())
    };
    err(h) / err(h / 2.0)
}

#[test]
fn herglotz_so3_flow_is_fourth_order() {
    let sys = so3_herglotz([1.0, 2.0, 3.0], -0.4);
    let field = |st: &State| sys.herglotz_field(st);
    let start = State::lagrangian(vec![], vec![0.3, -1.2, 0.8], 0.0);
    let ratio = measured_ratio(&field, &start, 2.0, 4e-2);
    assert!((12.0..20.0).contains(&ratio), "ratio {}", ratio);
}

#[test]
fn contact_hamilton_tq_flow_is_fourth_order() {
    let sys = rich_tq_hamiltonian();
    let field = |st: &State| sys.hamilton_field(st);
    let start = State::hamiltonian(vec![0.4, -0.3], vec![0.5, 0.2], 0.1);
    let ratio = measured_ratio(&field, &start, 2.0, 4e-2);
    assert!((12.0..20.0).contains(&ratio), "ratio {}", ratio);
}

#[test]
fn damped_oscillator_flow_is_fourth_order() {
    let sys = dissipative_oscillator();
    let field = |st: &State| sys.herglotz_field(st);
    let start = State::lagrangian(vec![1.0], vec![0.0], 0.0);
    let ratio = measured_ratio(&field, &start, 2.0, 4e-2);
    assert!((12.0..20.0).contains(&ratio), "ratio {}", ratio);
}
