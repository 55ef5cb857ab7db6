use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::sequence::{cycle_point, CycleSequence};
use super::CycleError;
use crate::graph::ControlLaw;
use crate::model::{check_tie, LocalDynamics, ModelError, Network};

/// Largest dimension handled by a dense eigenvalue solve.
pub const DENSE_EIGEN_MAX_DIM: usize = 8;
pub const POWER_ITERATIONS: usize = 1000;
const POWER_SEED: u64 = 0x5eed;

/// Result of one lap around the cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct Lap {
    pub point: Vec<f64>,
    pub time: f64,
    /// Differential on the free wall coordinates, when requested.
    pub jacobian: Option<DMatrix<f64>>,
}

/// First return map `T: W → W`, `W` the wall between `boxes[0]` and `boxes[1]`.
pub fn return_map(net: &Network, law: &ControlLaw, cyc: &CycleSequence, x: &[f64]) -> Result<Vec<f64>, CycleError> {
    Ok(lap(net, law, cyc, x, false)?.point)
}

/// `T(x)` together with the time spent going around.
pub fn return_map_timed(
    net: &Network,
    law: &ControlLaw,
    cyc: &CycleSequence,
    x: &[f64],
) -> Result<(Vec<f64>, f64), CycleError> {
    let l = lap(net, law, cyc, x, false)?;
    Ok((l.point, l.time))
}

/// `DT(x)` restricted to the free coordinates of `W`, ordered as
/// [`CycleSequence::wall_coordinates`]. At `θ^C` this is the limit of the
/// differential along the prescribed switching sequence.
pub fn return_map_jacobian(
    net: &Network,
    law: &ControlLaw,
    cyc: &CycleSequence,
    x: &[f64],
) -> Result<DMatrix<f64>, CycleError> {
    Ok(lap(net, law, cyc, x, true)?.jacobian.expect("requested"))
}

/// Go once around the cycle from `x`, optionally accumulating the Jacobian.
pub fn lap(
    net: &Network,
    law: &ControlLaw,
    cyc: &CycleSequence,
    x: &[f64],
    with_jacobian: bool,
) -> Result<Lap, CycleError> {
    cyc.check_dims(net)?;
    cyc.check_on_wall(net, x)?;
    let n = net.n();
    let l = cyc.len();
    let theta_c = if cyc.all_variables_switch(n) { cycle_point(net, cyc)? } else { None };
    let forced = theta_c.as_deref() == Some(x);

    let w0 = cyc.wall(net, 0);
    let mut y = x.to_vec();
    y[w0.direction] = w0.value;
    let mut time = 0.0;
    let mut jac = with_jacobian.then(|| DMatrix::<f64>::identity(n - 1, n - 1));

    for k in 0..l {
        let b = &cyc.boxes()[(k + 1) % l];
        let (s, sign) = cyc.switching()[(k + 1) % l];
        let e = cyc.switching()[k].0;
        let local = LocalDynamics::new(net, b, law.get(b))?;
        if forced {
            if let Some(j) = jac.as_mut() {
                *j = step_jacobian(&local, &y, e, s, 0.0, k)? * &*j;
            }
            continue;
        }
        let events = local.race(net, &y)?;
        let expected = cyc.boxes()[(k + 2) % l].clone();
        let Some(ev) = events.first().copied() else {
            return Err(CycleError::Deviation { step: k, expected, reached: None });
        };
        if (ev.direction, ev.sign) != (s, sign) {
            let reached = b.step(ev.direction, ev.sign, net.dims());
            return Err(CycleError::Deviation { step: k, expected, reached });
        }
        check_tie(b, &events)?;
        if !(ev.tau > 0.0) {
            return Err(ModelError::OnExitWall { box_index: b.clone(), var: s }.into());
        }
        if let Some(j) = jac.as_mut() {
            *j = step_jacobian(&local, &y, e, s, ev.tau, k)? * &*j;
        }
        let (next, _) = local.land(net, &y, ev)?;
        y = next;
        time += ev.tau;
    }
    Ok(Lap { point: y, time, jacobian: jac })
}

/// Differential of one local transition map from the free coordinates of
/// the entry wall (all but `e`) to those of the exit wall (all but `s`).
///
/// With `x' = φ + α (x - φ)`, `α_j = e^{-γ_j τ}` and `τ` the hitting time of
/// coordinate `s`:
/// `∂x'_j/∂x_k = α_j δ_jk - γ_j α_j (x_j - φ_j) ∂τ/∂x_k`,
/// `∂τ/∂x_s = -1 / (γ_s (φ_s - x_s))`, zero for every other `k`.
fn step_jacobian(
    local: &LocalDynamics,
    x: &[f64],
    e: usize,
    s: usize,
    tau: f64,
    step: usize,
) -> Result<DMatrix<f64>, CycleError> {
    let n = x.len();
    let inputs: Vec<usize> = (0..n).filter(|&k| k != e).collect();
    let outputs: Vec<usize> = (0..n).filter(|&j| j != s).collect();
    let dtau_ds = if s != e {
        let gap = local.focal[s] - x[s];
        if gap == 0.0 {
            return Err(CycleError::Singular { step, var: s });
        }
        -1.0 / (local.gamma[s] * gap)
    } else {
        0.0
    };
    let mut m = DMatrix::zeros(n - 1, n - 1);
    for (r, &j) in outputs.iter().enumerate() {
        let alpha = (-local.gamma[j] * tau).exp();
        for (c, &k) in inputs.iter().enumerate() {
            let mut v = if j == k { alpha } else { 0.0 };
            if k == s {
                v -= local.gamma[j] * alpha * (x[j] - local.focal[j]) * dtau_ds;
            }
            m[(r, c)] = v;
        }
    }
    Ok(m)
}

/// Spectral radius: dense eigenvalues up to [`DENSE_EIGEN_MAX_DIM`],
/// seeded power iteration beyond.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    assert!(m.is_square(), "spectral radius of a non-square matrix");
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        d if d <= DENSE_EIGEN_MAX_DIM => m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max),
        _ => power_iteration_radius(m, POWER_ITERATIONS, POWER_SEED),
    }
}

/// Geometric-mean growth of `‖A^k v‖` over the second half of the run.
pub fn power_iteration_radius(m: &DMatrix<f64>, iterations: usize, seed: u64) -> f64 {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = m.nrows();
    let mut v = DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0));
    v /= v.norm();
    let burn = iterations / 2;
    let mut log_growth = 0.0;
    for it in 0..iterations {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        if it >= burn {
            log_growth += norm.ln();
        }
        v = w / norm;
    }
    (log_growth / (iterations - burn) as f64).exp()
}

/// Outcome of iterating `T` to a fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointSearch {
    pub point: Vec<f64>,
    pub iterations: usize,
    /// `|T q - q|` at the returned point.
    pub residual: f64,
    /// Time of one lap from the returned point.
    pub period: f64,
}

pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const FIXED_POINT_MAX_ITER: usize = 100_000;

/// Plain iteration `x ← T x` until the step is below `tol`.
pub fn find_periodic_point(
    net: &Network,
    law: &ControlLaw,
    cyc: &CycleSequence,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointSearch, CycleError> {
    let mut x = start.to_vec();
    let mut last_step = f64::INFINITY;
    for it in 1..=max_iter {
        let (y, period) = return_map_timed(net, law, cyc, &x)?;
        last_step = distance(&x, &y);
        x = y;
        if last_step < tol {
            let (tx, _) = return_map_timed(net, law, cyc, &x)?;
            return Ok(FixedPointSearch { residual: distance(&tx, &x), point: x, iterations: it, period });
        }
    }
    Err(CycleError::NoConvergence { iterations: max_iter, last_step })
}

pub fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}
