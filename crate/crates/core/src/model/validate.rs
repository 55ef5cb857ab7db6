use std::collections::BTreeSet;

use serde::Serialize;

use super::dynamics::LocalDynamics;
use super::network::{BoxIndex, Network, Sign, THRESHOLD_EPS};

/// A variable whose own rates switch across one of its thresholds, at a given box.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct SelfDependence {
    pub var: usize,
    #[serde(rename = "box")]
    pub box_index: BoxIndex,
}

/// A focal coordinate lying on an interior threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FocalOnThreshold {
    #[serde(rename = "box")]
    pub box_index: BoxIndex,
    pub var: usize,
    pub threshold: usize,
    pub input: f64,
}

/// A wall between `lower` and `lower + e_direction` that repels on both sides.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnstableWall {
    pub lower: BoxIndex,
    pub upper: BoxIndex,
    pub direction: usize,
    pub inputs: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidityReport {
    pub h1_violations: Vec<SelfDependence>,
    pub h2_violations: Vec<FocalOnThreshold>,
    pub unstable_walls: Vec<UnstableWall>,
}

impl ValidityReport {
    pub fn is_clean(&self) -> bool {
        self.h1_violations.is_empty() && self.h2_violations.is_empty() && self.unstable_walls.is_empty()
    }
}

/// The inputs checked when the caller gives none: `{0, U}`.
pub fn default_inputs(net: &Network) -> Vec<f64> {
    if net.input_bound() > 0.0 {
        vec![0.0, net.input_bound()]
    } else {
        vec![0.0]
    }
}

/// Check the self-regulation and focal-placement hypotheses. Violations are
/// reported, not fatal. Structural problems are rejected earlier, when the
/// [`Network`] is built.
pub fn validate_network(net: &Network, inputs: &[f64]) -> ValidityReport {
    let mut report = ValidityReport::default();
    let inputs: Vec<f64> = if inputs.is_empty() { default_inputs(net) } else { inputs.to_vec() };

    let mut h1 = BTreeSet::new();
    for i in 0..net.n() {
        let syntactic = net.production()[i].mentions(i) || net.decay0()[i].mentions(i) || net.decay1()[i].mentions(i);
        if !syntactic {
            continue;
        }
        for a in net.boxes() {
            let Some(b) = a.step(i, Sign::Plus, net.dims()) else { continue };
            let differs = net.production()[i].eval(&a) != net.production()[i].eval(&b)
                || net.decay0()[i].eval(&a) != net.decay0()[i].eval(&b)
                || net.decay1()[i].eval(&a) != net.decay1()[i].eval(&b);
            if differs {
                h1.insert(SelfDependence { var: i, box_index: a });
                h1.insert(SelfDependence { var: i, box_index: b });
            }
        }
    }
    report.h1_violations = h1.into_iter().collect();

    for &u in &inputs {
        for a in net.boxes() {
            let Ok(local) = LocalDynamics::new(net, &a, u) else { continue };
            for (i, v) in net.variables().iter().enumerate() {
                for (k, th) in v.interior() {
                    if (local.focal[i] - th).abs() <= THRESHOLD_EPS {
                        report.h2_violations.push(FocalOnThreshold {
                            box_index: a.clone(),
                            var: i,
                            threshold: k,
                            input: u,
                        });
                    }
                }
            }
        }
        for (lower, upper, direction) in unstable_walls_under(net, |_| u) {
            match report.unstable_walls.iter_mut().find(|w| w.lower == lower && w.direction == direction) {
                Some(w) => w.inputs.push(u),
                None => report.unstable_walls.push(UnstableWall { lower, upper, direction, inputs: vec![u] }),
            }
        }
    }
    report
}

/// Walls whose normal field component points away from the wall on both
/// sides, for a per-box input assignment. Boxes with an input out of range are skipped.
pub fn unstable_walls_under(net: &Network, law: impl Fn(&BoxIndex) -> f64) -> Vec<(BoxIndex, BoxIndex, usize)> {
    let mut out = Vec::new();
    for a in net.boxes() {
        for i in 0..net.n() {
            let Some(b) = a.step(i, Sign::Plus, net.dims()) else { continue };
            let (Ok(la), Ok(lb)) = (LocalDynamics::new(net, &a, law(&a)), LocalDynamics::new(net, &b, law(&b))) else {
                continue;
            };
            let th = net.upper(&a, i);
            if la.focal[i] < th - THRESHOLD_EPS && lb.focal[i] > th + THRESHOLD_EPS {
                out.push((a.clone(), b, i));
            }
        }
    }
    out
}
