use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::return_map::{
    distance, find_periodic_point, return_map_jacobian, spectral_radius, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL,
};
use super::sequence::{check_alignment, cycle_point, CycleSequence};
use super::CycleError;
use crate::graph::{build_transition_graph, is_invariant, ControlLaw};
use crate::model::{BoxIndex, Network};

/// `|λ - 1|` below this is reported as a boundary case.
pub const LAMBDA_BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CycleCase {
    /// Single threshold per direction, `λ ≤ 1`: iterates converge to `θ^C`.
    #[serde(rename = "A-i")]
    ConvergesToCenter,
    /// Single threshold per direction, `λ > 1`: unique stable limit cycle.
    #[serde(rename = "A-ii")]
    RepellingCenter,
    /// Two thresholds crossed in some direction: unique stable limit cycle.
    #[serde(rename = "B")]
    TwoThresholds,
    #[serde(rename = "inapplicable")]
    Inapplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleVerdict {
    pub boxes: Vec<BoxIndex>,
    pub case: CycleCase,
    pub aligned: bool,
    pub all_variables_switch: bool,
    pub single_threshold_per_direction: bool,
    pub theta_c: Option<Vec<f64>>,
    /// Spectral radius of `DT(θ^C)`.
    pub lambda: Option<f64>,
    /// `λ` within [`LAMBDA_BOUNDARY_EPS`] of 1: grouped with `λ ≤ 1`, but
    /// rounding alone could move it to the other side.
    pub lambda_boundary: bool,
    pub periodic_point: Option<Vec<f64>>,
    pub period: Option<f64>,
    pub residual: Option<f64>,
    pub iterations: Option<usize>,
    /// Spectral radius of `DT(q)` at the periodic point.
    pub orbit_multiplier: Option<f64>,
    pub reason: Option<String>,
}

impl CycleVerdict {
    fn inapplicable(cyc: &CycleSequence, reason: impl Into<String>) -> Self {
        Self {
            boxes: cyc.boxes().to_vec(),
            case: CycleCase::Inapplicable,
            aligned: false,
            all_variables_switch: false,
            single_threshold_per_direction: false,
            theta_c: None,
            lambda: None,
            lambda_boundary: false,
            periodic_point: None,
            period: None,
            residual: None,
            iterations: None,
            orbit_multiplier: None,
            reason: Some(reason.into()),
        }
    }
}

/// Decide between convergence to `θ^C` and a unique limit cycle.
///
/// Requirements not met (cycle absent from `TG(law)`, not invariant, not
/// aligned, some variable never switching) give an `Inapplicable` verdict
/// with a reason; evaluation failures are errors.
pub fn classify_cycle(net: &Network, law: &ControlLaw, cyc: &CycleSequence) -> Result<CycleVerdict, CycleError> {
    cyc.check_dims(net)?;
    let tg = build_transition_graph(net, law)?;
    let l = cyc.len();
    for k in 0..l {
        let (a, b) = (&cyc.boxes()[k], &cyc.boxes()[(k + 1) % l]);
        if !tg.has_edge(a, b) {
            return Ok(CycleVerdict::inapplicable(cyc, format!("{a} -> {b} is not an edge of the transition graph")));
        }
    }
    if !is_invariant(&tg, cyc.boxes()) {
        return Ok(CycleVerdict::inapplicable(cyc, "an edge leaves the cycle"));
    }
    let alignment = check_alignment(net, law, cyc)?;
    if !alignment.aligned {
        let mut v = CycleVerdict::inapplicable(cyc, "focal points are not aligned");
        v.all_variables_switch = alignment.all_variables_switch;
        return Ok(v);
    }
    if !alignment.all_variables_switch {
        let mut v = CycleVerdict::inapplicable(cyc, "some variable never switches along the cycle");
        v.aligned = true;
        return Ok(v);
    }

    let theta_c = cycle_point(net, cyc)?;
    let mut v = CycleVerdict::inapplicable(cyc, "");
    v.reason = None;
    v.aligned = true;
    v.all_variables_switch = true;
    v.single_threshold_per_direction = theta_c.is_some();
    v.theta_c = theta_c.clone();

    match &theta_c {
        Some(tc) => {
            let lambda = spectral_radius(&return_map_jacobian(net, law, cyc, tc)?);
            v.lambda = Some(lambda);
            v.lambda_boundary = (lambda - 1.0).abs() < LAMBDA_BOUNDARY_EPS;
            if lambda <= 1.0 || v.lambda_boundary {
                v.case = CycleCase::ConvergesToCenter;
                return Ok(v);
            }
            v.case = CycleCase::RepellingCenter;
        }
        None => v.case = CycleCase::TwoThresholds,
    }

    let start = cyc.wall_center(net);
    let fp = find_periodic_point(net, law, cyc, &start, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER)?;
    v.orbit_multiplier = Some(spectral_radius(&return_map_jacobian(net, law, cyc, &fp.point)?));
    v.periodic_point = Some(fp.point);
    v.period = Some(fp.period);
    v.residual = Some(fp.residual);
    v.iterations = Some(fp.iterations);
    Ok(v)
}

/// Periodic points reached from seeded random starts on the return wall.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartSpread {
    pub seed: u64,
    pub starts: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
    /// Largest distance between two of the reached points.
    pub max_pairwise: f64,
}

pub fn start_spread(
    net: &Network,
    law: &ControlLaw,
    cyc: &CycleSequence,
    count: usize,
    seed: u64,
) -> Result<StartSpread, CycleError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let starts: Vec<Vec<f64>> = (0..count).map(|_| cyc.random_wall_point(net, &mut rng)).collect();
    let points = starts
        .iter()
        .map(|x| find_periodic_point(net, law, cyc, x, FIXED_POINT_TOL, FIXED_POINT_MAX_ITER).map(|f| f.point))
        .collect::<Result<Vec<_>, _>>()?;
    let mut max_pairwise: f64 = 0.0;
    for (k, p) in points.iter().enumerate() {
        for q in &points[k + 1..] {
            max_pairwise = max_pairwise.max(distance(p, q));
        }
    }
    Ok(StartSpread { seed, starts, points, max_pairwise })
}
