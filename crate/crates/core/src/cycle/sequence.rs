use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use super::CycleError;
use crate::graph::ControlLaw;
use crate::model::{focal_point, BoxIndex, Network, Sign, THRESHOLD_EPS};

/// A closed walk `a⁰ → a¹ → … → a^{ℓ-1} → a⁰` of pairwise distinct, adjacent boxes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CycleSequence {
    boxes: Vec<BoxIndex>,
    /// `switching[k]` is the step from `boxes[k]` to `boxes[k+1]`.
    switching: Vec<(usize, Sign)>,
}

/// Shared face of two adjacent boxes, lying in `x_direction = value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wall {
    pub direction: usize,
    pub threshold_index: usize,
    pub value: f64,
}

impl CycleSequence {
    pub fn new(boxes: Vec<BoxIndex>) -> Result<Self, CycleError> {
        if boxes.len() < 2 {
            return Err(CycleError::TooShort);
        }
        let mut seen = BTreeSet::new();
        for a in &boxes {
            if !seen.insert(a) {
                return Err(CycleError::Repeated(a.clone()));
            }
        }
        let l = boxes.len();
        let mut switching = Vec::with_capacity(l);
        for k in 0..l {
            let (a, b) = (&boxes[k], &boxes[(k + 1) % l]);
            match a.unit_step_to(b) {
                Some(step) => switching.push(step),
                None => return Err(CycleError::NotAdjacent(a.clone(), b.clone())),
            }
        }
        Ok(Self { boxes, switching })
    }

    /// Parse box labels such as `["001", "000", "010"]`.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self, CycleError> {
        let boxes = labels.iter().map(|s| s.as_ref().parse::<BoxIndex>()).collect::<Result<Vec<_>, _>>()?;
        Self::new(boxes)
    }

    pub fn boxes(&self) -> &[BoxIndex] {
        &self.boxes
    }

    pub fn switching(&self) -> &[(usize, Sign)] {
        &self.switching
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn check_dims(&self, net: &Network) -> Result<(), CycleError> {
        for a in &self.boxes {
            net.check_box(a)?;
        }
        Ok(())
    }

    /// Wall crossed when going from `boxes[k]` to `boxes[k+1]`.
    pub fn wall(&self, net: &Network, k: usize) -> Wall {
        let (direction, _) = self.switching[k];
        let a = &self.boxes[k];
        let b = &self.boxes[(k + 1) % self.len()];
        let threshold_index = a.get(direction).max(b.get(direction));
        Wall { direction, threshold_index, value: net.threshold(direction, threshold_index) }
    }

    /// Threshold indices crossed along the cycle, per direction.
    pub fn crossed_thresholds(&self, net: &Network) -> Vec<BTreeSet<usize>> {
        let mut out = vec![BTreeSet::new(); net.n()];
        for k in 0..self.len() {
            let w = self.wall(net, k);
            out[w.direction].insert(w.threshold_index);
        }
        out
    }

    pub fn all_variables_switch(&self, n: usize) -> bool {
        let dirs: BTreeSet<usize> = self.switching.iter().map(|s| s.0).collect();
        dirs.len() == n
    }

    /// Coordinates that stay free on the return wall `W` (all but its normal).
    pub fn wall_coordinates(&self, n: usize) -> Vec<usize> {
        let s0 = self.switching[0].0;
        (0..n).filter(|&i| i != s0).collect()
    }

    /// Same cycle started at `start`.
    pub fn rotated_to(&self, start: &BoxIndex) -> Option<Self> {
        let k = self.boxes.iter().position(|a| a == start)?;
        let mut boxes = self.boxes.clone();
        boxes.rotate_left(k);
        let mut switching = self.switching.clone();
        switching.rotate_left(k);
        Some(Self { boxes, switching })
    }

    /// Midpoint of the return wall in its free coordinates.
    pub fn wall_center(&self, net: &Network) -> Vec<f64> {
        let a = &self.boxes[0];
        let w = self.wall(net, 0);
        (0..net.n())
            .map(|i| if i == w.direction { w.value } else { 0.5 * (net.lower(a, i) + net.upper(a, i)) })
            .collect()
    }

    /// Uniform point in the relative interior of the return wall.
    pub fn random_wall_point(&self, net: &Network, rng: &mut impl Rng) -> Vec<f64> {
        let a = &self.boxes[0];
        let w = self.wall(net, 0);
        (0..net.n())
            .map(|i| {
                if i == w.direction {
                    w.value
                } else {
                    let (lo, hi) = (net.lower(a, i), net.upper(a, i));
                    lo + (hi - lo) * rng.gen_range(0.001..0.999)
                }
            })
            .collect()
    }

    /// Check that `x` lies on the return wall (closure).
    pub fn check_on_wall(&self, net: &Network, x: &[f64]) -> Result<(), CycleError> {
        if x.len() != net.n() {
            return Err(CycleError::Model(crate::ModelError::DimensionMismatch { expected: net.n(), got: x.len() }));
        }
        let a = &self.boxes[0];
        let w = self.wall(net, 0);
        let off = (0..net.n()).any(|i| {
            if i == w.direction {
                (x[i] - w.value).abs() > THRESHOLD_EPS
            } else {
                !(x[i] >= net.lower(a, i) - THRESHOLD_EPS && x[i] <= net.upper(a, i) + THRESHOLD_EPS)
            }
        });
        if off {
            return Err(CycleError::NotOnWall(x.to_vec()));
        }
        Ok(())
    }
}

/// Consecutive boxes whose focal points differ in more than one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Misalignment {
    pub from: BoxIndex,
    pub to: BoxIndex,
    pub differing: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Alignment {
    pub aligned: bool,
    pub all_variables_switch: bool,
    pub witness: Vec<Misalignment>,
}

/// Compare focal points of consecutive boxes under `law`.
///
/// A pair passes when its focal points differ in at most one coordinate:
/// equal focal points on consecutive boxes do occur (Example 1 has two such
/// pairs) and do not break the monotonicity argument.
pub fn check_alignment(net: &Network, law: &ControlLaw, cyc: &CycleSequence) -> Result<Alignment, CycleError> {
    cyc.check_dims(net)?;
    let l = cyc.len();
    let focal: Vec<Vec<f64>> = cyc.boxes().iter().map(|a| focal_point(net, a, law.get(a))).collect::<Result<_, _>>()?;
    let mut witness = Vec::new();
    for k in 0..l {
        let (p, q) = (&focal[k], &focal[(k + 1) % l]);
        let differing: Vec<usize> = (0..net.n()).filter(|&j| (p[j] - q[j]).abs() > THRESHOLD_EPS).collect();
        if differing.len() > 1 {
            witness.push(Misalignment {
                from: cyc.boxes()[k].clone(),
                to: cyc.boxes()[(k + 1) % l].clone(),
                differing,
            });
        }
    }
    Ok(Alignment { aligned: witness.is_empty(), all_variables_switch: cyc.all_variables_switch(net.n()), witness })
}

/// `θ^C`: the common point of all crossed walls, defined when every
/// variable switches and each direction crosses a single threshold.
pub fn cycle_point(net: &Network, cyc: &CycleSequence) -> Result<Option<Vec<f64>>, CycleError> {
    cyc.check_dims(net)?;
    if !cyc.all_variables_switch(net.n()) {
        return Err(CycleError::NotAllSwitching);
    }
    let crossed = cyc.crossed_thresholds(net);
    if crossed.iter().any(|c| c.len() != 1) {
        return Ok(None);
    }
    Ok(Some(crossed.iter().enumerate().map(|(i, c)| net.threshold(i, *c.iter().next().expect("one"))).collect()))
}
