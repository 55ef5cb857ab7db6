//! Qualitative control: admissible input intervals that realize a target
//! transition graph, and the dynamic controller realizing a constant law.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::graph::{build_transition_graph, graph_diff, ControlLaw, GraphDiff, GraphError, TransitionGraph};
use crate::model::{BoxIndex, ModelError, Network, ProductionTerm, Sign, StepFactor, StepPolynomial, Variable};

/// Minimum width of a usable input interval.
pub const INTERVAL_EPS: f64 = 1e-9;

/// Desired closed-loop graph. Only unit-step edges are representable.
pub type TargetGraph = TransitionGraph;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("box {box_index} is asked to leave through both walls of direction {var}")]
    Contradiction { box_index: BoxIndex, var: usize },
    #[error("target edge {from} -> {to} is not a unit step")]
    NotUnitStep { from: BoxIndex, to: BoxIndex },
    #[error("controller needs 0 < θy·γy < 1, got θy = {theta_y}, γy = {gamma_y}")]
    ControllerThreshold { theta_y: f64, gamma_y: f64 },
    #[error("controller input {0} is outside [0, U]")]
    ControllerInput(f64),
}

/// Allowed range of one focal coordinate; `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocalRange {
    pub var: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

/// How far a focal coordinate may go past an escaping wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    /// Into the adjacent box only: `θ⁺ < φ_i < θ^{a_i+2}` for an upward
    /// edge, `θ^{a_i-1} < φ_i < θ⁻` for a downward one.
    #[default]
    Adjacent,
    /// Anywhere past the wall: `φ_i > θ⁺` or `φ_i < θ⁻`.
    HalfLine,
}

/// Focal ranges that make the out-edges of `a` exactly `targets`, with the
/// focal point placed in the adjacent box along each escaping direction.
pub fn focal_region_for_box(
    net: &Network,
    a: &BoxIndex,
    targets: &[BoxIndex],
) -> Result<Vec<FocalRange>, ControlError> {
    focal_region(net, a, targets, RegionMode::Adjacent)
}

/// Focal ranges that make the out-edges of `a` exactly `targets`.
///
/// An edge `a → a+e_i` needs `φ_i > θ_i⁺(a)`, an edge `a → a-e_i` needs
/// `φ_i < θ_i⁻(a)`, and no edge in direction `i` needs `φ_i` between the two
/// walls. Range ends (`0` and the cap) never bound the focal point.
pub fn focal_region(
    net: &Network,
    a: &BoxIndex,
    targets: &[BoxIndex],
    mode: RegionMode,
) -> Result<Vec<FocalRange>, ControlError> {
    net.check_box(a)?;
    let mut up = BTreeSet::new();
    let mut down = BTreeSet::new();
    for b in targets {
        match a.unit_step_to(b) {
            Some((i, Sign::Plus)) if b.get(i) < net.dims()[i] => up.insert(i),
            Some((i, Sign::Minus)) => down.insert(i),
            _ => return Err(ControlError::NotUnitStep { from: a.clone(), to: b.clone() }),
        };
    }
    let adjacent = mode == RegionMode::Adjacent;
    let mut out = Vec::with_capacity(net.n());
    for i in 0..net.n() {
        let (k, q) = (a.get(i), net.dims()[i]);
        let interior = |j: usize| (j >= 1 && j < q).then(|| net.threshold(i, j));
        let range = match (up.contains(&i), down.contains(&i)) {
            (true, true) => return Err(ControlError::Contradiction { box_index: a.clone(), var: i }),
            (true, false) => FocalRange {
                var: i,
                lower: Some(net.upper(a, i)),
                upper: if adjacent { interior(k + 2) } else { None },
            },
            (false, true) => FocalRange {
                var: i,
                lower: if adjacent { k.checked_sub(1).and_then(interior) } else { None },
                upper: Some(net.lower(a, i)),
            },
            (false, false) => FocalRange { var: i, lower: interior(k), upper: interior(k + 1) },
        };
        out.push(range);
    }
    Ok(out)
}

/// Which side of a threshold the focal coordinate must lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FocalSide {
    Above,
    Below,
}

/// Input values for which `φ_var(a, u)` lies on the required side of `threshold`:
/// the open set `(lo, hi)` of the extended real line, before intersecting with `[0, U]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InputConstraint {
    pub var: usize,
    pub side: FocalSide,
    pub threshold: f64,
    pub lo: f64,
    pub hi: f64,
}

impl InputConstraint {
    /// Solve `θ (γ¹u + γ⁰) < κ` (above) or `κ < θ (γ¹u + γ⁰)` (below) for `u`.
    fn solve(var: usize, side: FocalSide, threshold: f64, kappa: f64, g0: f64, g1: f64) -> Self {
        const INF: f64 = f64::INFINITY;
        const NEG: f64 = f64::NEG_INFINITY;
        let (lo, hi) = if g1 == 0.0 {
            let holds = match side {
                FocalSide::Above => kappa > threshold * g0,
                FocalSide::Below => kappa < threshold * g0,
            };
            if holds {
                (NEG, INF)
            } else {
                (INF, NEG)
            }
        } else {
            let root = (kappa - g0 * threshold) / (g1 * threshold);
            // above: g1·u < root·g1 ; below: g1·u > root·g1
            match (side, g1 > 0.0) {
                (FocalSide::Above, true) | (FocalSide::Below, false) => (NEG, root),
                (FocalSide::Above, false) | (FocalSide::Below, true) => (root, INF),
            }
        };
        Self { var, side, threshold, lo, hi }
    }

    pub fn is_unconditional(&self) -> bool {
        self.lo == f64::NEG_INFINITY && self.hi == f64::INFINITY
    }

    pub fn is_void(&self) -> bool {
        self.lo >= self.hi
    }
}

/// Input interval of one box: the intersection of its constraints with `[0, U]`.
/// Endpoints coming from constraints are open; `0` and `U` are closed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputInterval {
    #[serde(rename = "box")]
    pub box_index: BoxIndex,
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
    pub feasible: bool,
    pub region: RegionMode,
    pub constraints: Vec<InputConstraint>,
}

impl InputInterval {
    pub fn contains(&self, u: f64) -> bool {
        let above = if self.lo_closed { u >= self.lo } else { u > self.lo };
        let below = if self.hi_closed { u <= self.hi } else { u < self.hi };
        above && below
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

fn feasible_span(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> bool {
    hi - lo > INTERVAL_EPS || (lo_closed && hi_closed && lo == hi)
}

/// Intersect the per-direction input constraints of box `a` with `[0, U]`.
pub fn u_interval(net: &Network, a: &BoxIndex, ranges: &[FocalRange]) -> Result<InputInterval, ControlError> {
    net.check_box(a)?;
    let mut constraints = Vec::new();
    for r in ranges {
        let i = r.var;
        let kappa = net.kappa(a, i);
        let g0 = net.decay0()[i].eval(a);
        let g1 = net.decay1()[i].eval(a);
        if let Some(th) = r.lower {
            constraints.push(InputConstraint::solve(i, FocalSide::Above, th, kappa, g0, g1));
        }
        if let Some(th) = r.upper {
            constraints.push(InputConstraint::solve(i, FocalSide::Below, th, kappa, g0, g1));
        }
    }
    let u_max = net.input_bound();
    let (mut lo, mut lo_closed) = (0.0, true);
    let (mut hi, mut hi_closed) = (u_max, true);
    for c in &constraints {
        if c.lo >= lo {
            lo = c.lo;
            lo_closed = false;
        }
        if c.hi <= hi {
            hi = c.hi;
            hi_closed = false;
        }
    }
    let feasible = !constraints.iter().any(InputConstraint::is_void) && feasible_span(lo, hi, lo_closed, hi_closed);
    Ok(InputInterval {
        box_index: a.clone(),
        lo,
        hi,
        lo_closed,
        hi_closed,
        feasible,
        region: RegionMode::Adjacent,
        constraints,
    })
}

/// Bound on the input that makes a box infeasible.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Limit {
    /// A focal constraint; `value` is the input endpoint it imposes.
    Focal { var: usize, side: FocalSide, threshold: f64, value: f64 },
    /// The focal constraint fails for every input (no input dependence).
    Unconditional { var: usize, side: FocalSide, threshold: f64 },
    /// `0` or `U`.
    InputRange { value: f64 },
}

/// Why a box has no admissible input: the binding lower and upper limits cross.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    #[serde(rename = "box")]
    pub box_index: BoxIndex,
    pub lower: Limit,
    pub upper: Limit,
}

fn certificate(iv: &InputInterval, u_max: f64) -> Certificate {
    if let Some(c) = iv.constraints.iter().find(|c| c.is_void() && c.lo == f64::INFINITY) {
        let l = Limit::Unconditional { var: c.var, side: c.side, threshold: c.threshold };
        return Certificate { box_index: iv.box_index.clone(), lower: l.clone(), upper: l };
    }
    let focal =
        |c: &InputConstraint, value: f64| Limit::Focal { var: c.var, side: c.side, threshold: c.threshold, value };
    let lower = iv
        .constraints
        .iter()
        .max_by(|p, q| p.lo.total_cmp(&q.lo))
        .filter(|c| c.lo >= 0.0)
        .map_or(Limit::InputRange { value: 0.0 }, |c| focal(c, c.lo));
    let upper = iv
        .constraints
        .iter()
        .min_by(|p, q| p.hi.total_cmp(&q.hi))
        .filter(|c| c.hi <= u_max)
        .map_or(Limit::InputRange { value: u_max }, |c| focal(c, c.hi));
    Certificate { box_index: iv.box_index.clone(), lower, upper }
}

/// One distinct bound term over all controlled boxes: the tightest value of
/// the constraint `(var, threshold, side)` across boxes, clipped to `[0, U]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTerm {
    pub var: usize,
    pub side: FocalSide,
    pub threshold: f64,
    pub value: f64,
}

/// The common interval `max lower < u < min upper` over all controlled
/// boxes, kept term by term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectiveBounds {
    pub lower: Vec<BoundTerm>,
    pub upper: Vec<BoundTerm>,
    pub lo: f64,
    pub hi: f64,
    pub nonempty: bool,
}

/// Collect the non-vacuous bound terms of the given intervals. Terms that
/// `[0, U]` makes irrelevant (a lower limit below 0 or an upper limit above
/// `U` is clipped to the range end, and a clipped lower limit is dropped
/// because `u ≥ 0` holds anyway) are merged per constraint key.
pub fn effective_bounds(net: &Network, intervals: &[InputInterval]) -> EffectiveBounds {
    let u_max = net.input_bound();
    let mut lower: BTreeMap<(usize, u64, FocalSide), f64> = BTreeMap::new();
    let mut upper: BTreeMap<(usize, u64, FocalSide), f64> = BTreeMap::new();
    for iv in intervals {
        for c in &iv.constraints {
            let key = (c.var, c.threshold.to_bits(), c.side);
            if c.lo > 0.0 && c.lo < f64::INFINITY {
                let e = lower.entry(key).or_insert(c.lo);
                *e = e.max(c.lo);
            }
            if c.hi < f64::INFINITY && c.hi > f64::NEG_INFINITY {
                let e = upper.entry(key).or_insert(c.hi);
                *e = e.min(c.hi);
            }
        }
    }
    let term = |((var, bits, side), value): ((usize, u64, FocalSide), f64)| BoundTerm {
        var,
        side,
        threshold: f64::from_bits(bits),
        value,
    };
    let lower: Vec<BoundTerm> = lower.into_iter().map(term).collect();
    let upper: Vec<BoundTerm> = upper.into_iter().map(|(k, v)| term((k, v.min(u_max)))).collect();
    let lo = lower.iter().map(|t| t.value).fold(0.0, f64::max);
    let hi = upper.iter().map(|t| t.value).fold(u_max, f64::min);
    let all_feasible = intervals.iter().all(|iv| iv.feasible);
    let nonempty = all_feasible && feasible_span(lo, hi, lower.is_empty(), upper.iter().all(|t| t.value >= u_max));
    EffectiveBounds { lower, upper, lo, hi, nonempty }
}

/// How to pick the input on the controlled boxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "policy", content = "value", rename_all = "snake_case")]
pub enum LawPolicy {
    /// Midpoint of the common interval on every controlled box; falls back
    /// to per-box midpoints when the common interval is empty.
    CommonMidpoint,
    PerBoxMidpoint,
    /// A fixed value on every controlled box.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthesisResult {
    /// Boxes whose out-edges differ between `TG(0)` and the target.
    pub a_star: Vec<BoxIndex>,
    pub intervals: Vec<InputInterval>,
    pub feasible: bool,
    pub certificates: Vec<Certificate>,
    pub effective: EffectiveBounds,
    pub policy: LawPolicy,
    /// Suggested law: chosen values on `A*`, `0` elsewhere.
    pub law: Option<ControlLaw>,
    /// Closed-loop graph under the suggested law equals the target.
    pub verified: Option<bool>,
    /// Remaining difference when verification fails.
    pub residual: Option<GraphDiff>,
}

pub fn synthesize(net: &Network, tg_star: &TargetGraph) -> Result<SynthesisResult, ControlError> {
    synthesize_with(net, tg_star, LawPolicy::CommonMidpoint)
}

/// Per-box intervals on `A*`, a suggested law, and a closed-loop check.
///
/// Each box first gets the interval that puts its focal point in the
/// adjacent box of every escaping direction; when that is empty the exact
/// half-line condition is used instead.
pub fn synthesize_with(
    net: &Network,
    tg_star: &TargetGraph,
    policy: LawPolicy,
) -> Result<SynthesisResult, ControlError> {
    let tg0 = build_transition_graph(net, &ControlLaw::zero())?;
    let diff = graph_diff(&tg0, tg_star)?;
    let a_star = diff.changed;

    let mut intervals = Vec::with_capacity(a_star.len());
    for a in &a_star {
        let targets: Vec<BoxIndex> = tg_star.successors(a).into_iter().cloned().collect();
        let mut iv = u_interval(net, a, &focal_region(net, a, &targets, RegionMode::Adjacent)?)?;
        if !iv.feasible {
            iv = u_interval(net, a, &focal_region(net, a, &targets, RegionMode::HalfLine)?)?;
            iv.region = RegionMode::HalfLine;
        }
        intervals.push(iv);
    }
    let certificates: Vec<Certificate> =
        intervals.iter().filter(|iv| !iv.feasible).map(|iv| certificate(iv, net.input_bound())).collect();
    let feasible = certificates.is_empty();
    let effective = effective_bounds(net, &intervals);

    let mut result = SynthesisResult {
        a_star,
        intervals,
        feasible,
        certificates,
        effective,
        policy,
        law: None,
        verified: None,
        residual: None,
    };
    if !feasible {
        return Ok(result);
    }
    let mut law = ControlLaw::zero();
    for iv in &result.intervals {
        let u = match policy {
            LawPolicy::CommonMidpoint if result.effective.nonempty => 0.5 * (result.effective.lo + result.effective.hi),
            LawPolicy::CommonMidpoint | LawPolicy::PerBoxMidpoint => iv.midpoint(),
            LawPolicy::Constant(u) => u,
        };
        law.set(iv.box_index.clone(), u);
    }
    let (verified, residual) = verify_law(net, &law, tg_star)?;
    result.verified = Some(verified);
    result.residual = (!verified).then_some(residual);
    result.law = Some(law);
    Ok(result)
}

/// Rebuild the closed-loop graph and compare it with the target.
pub fn verify_law(net: &Network, law: &ControlLaw, tg_star: &TargetGraph) -> Result<(bool, GraphDiff), ControlError> {
    let tg = match build_transition_graph(net, law) {
        Ok(tg) => tg,
        // a focal point on a threshold under this law: not a realization
        Err(GraphError::Model(ModelError::FocalOnThreshold { .. })) => {
            return Ok((false, GraphDiff { missing: tg_star.edges().to_vec(), extra: vec![], changed: vec![] }))
        }
        Err(e) => return Err(e.into()),
    };
    let d = graph_diff(&tg, tg_star)?;
    Ok((d.is_empty(), d))
}

/// Axis-aligned block of boxes: `ranges[i] = (first, last)` box index along `i`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Cube {
    ranges: Vec<(usize, usize)>,
}

/// Merge boxes into disjoint blocks by joining pairs that agree in all but
/// one coordinate, where their ranges are adjacent.
fn merge_into_cubes(boxes: &[BoxIndex]) -> Vec<Cube> {
    let mut cubes: BTreeSet<Cube> =
        boxes.iter().map(|a| Cube { ranges: a.0.iter().map(|&v| (v, v)).collect() }).collect();
    loop {
        let list: Vec<Cube> = cubes.iter().cloned().collect();
        let mut merged = None;
        'outer: for (x, p) in list.iter().enumerate() {
            for q in &list[x + 1..] {
                let differ: Vec<usize> = (0..p.ranges.len()).filter(|&i| p.ranges[i] != q.ranges[i]).collect();
                if let [i] = differ[..] {
                    let (a, b) = (p.ranges[i], q.ranges[i]);
                    if a.1 + 1 == b.0 || b.1 + 1 == a.0 {
                        let mut ranges = p.ranges.clone();
                        ranges[i] = (a.0.min(b.0), a.1.max(b.1));
                        merged = Some((p.clone(), q.clone(), Cube { ranges }));
                        break 'outer;
                    }
                }
            }
        }
        match merged {
            Some((p, q, r)) => {
                cubes.remove(&p);
                cubes.remove(&q);
                cubes.insert(r);
            }
            None => return cubes.into_iter().collect(),
        }
    }
}

fn cube_factors(cube: &Cube, dims: &[usize]) -> Vec<StepFactor> {
    let mut f = Vec::new();
    for (i, &(lo, hi)) in cube.ranges.iter().enumerate() {
        if lo > 0 {
            f.push(StepFactor::new(i, lo, Sign::Plus));
        }
        if hi + 1 < dims[i] {
            f.push(StepFactor::new(i, hi + 1, Sign::Minus));
        }
    }
    f
}

/// Replace the input by a controller variable `y`:
/// `dy/dt = Σ_{blocks of A*} Π s^± − γy y`, `y ∈ [0, 1/γy]`, and on each
/// controlled variable every input-dependent decay term `γ¹ u` becomes
/// `γ¹ υ s⁺(y, θy)`. The result has no external input.
pub fn extend_with_controller(
    net: &Network,
    a_star: &[BoxIndex],
    upsilon: f64,
    theta_y: f64,
    gamma_y: f64,
    controlled: &[usize],
) -> Result<Network, ControlError> {
    let product = theta_y * gamma_y;
    if !(theta_y > 0.0 && gamma_y > 0.0 && product < 1.0) {
        return Err(ControlError::ControllerThreshold { theta_y, gamma_y });
    }
    if !(0.0..=net.input_bound()).contains(&upsilon) {
        return Err(ControlError::ControllerInput(upsilon));
    }
    for a in a_star {
        net.check_box(a)?;
    }
    for &i in controlled {
        if i >= net.n() {
            return Err(ModelError::UnknownVariable(format!("#{i}")).into());
        }
    }
    let n = net.n();
    let y = n;
    let mut name = String::from("y");
    while net.variable_index(&name).is_some() {
        name.push('\'');
    }

    let mut variables: Vec<Variable> = net.variables().to_vec();
    variables.push(Variable::new(name, vec![0.0, theta_y, 1.0 / gamma_y]));

    let mut production: Vec<StepPolynomial> = net.production().to_vec();
    let terms =
        merge_into_cubes(a_star).iter().map(|c| ProductionTerm::new(1.0, cube_factors(c, net.dims()))).collect();
    production.push(StepPolynomial::new(terms));

    let mut decay0: Vec<StepPolynomial> = net.decay0().to_vec();
    for &i in controlled {
        for t in &net.decay1()[i].terms {
            let mut factors = t.factors.clone();
            factors.push(StepFactor::new(y, 1, Sign::Plus));
            decay0[i].push(ProductionTerm::new(t.coefficient * upsilon, factors));
        }
    }
    decay0.push(StepPolynomial::constant(gamma_y));
    let decay1 = vec![StepPolynomial::zero(); n + 1];
    Ok(Network::new(variables, production, decay0, decay1, 0.0)?)
}

/// Variables whose decay depends on the input somewhere.
pub fn input_dependent_variables(net: &Network) -> Vec<usize> {
    (0..net.n()).filter(|&i| !net.decay1()[i].is_zero()).collect()
}
