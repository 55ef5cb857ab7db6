use super::network::{BoxIndex, Network, Sign, THRESHOLD_EPS};
use super::ModelError;

/// Relative tolerance under which two exit times are considered a tie.
pub const TIE_REL_EPS: f64 = 1e-12;

/// Affine dynamics of one box under a fixed input: focal point and decay rates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDynamics {
    pub box_index: BoxIndex,
    pub focal: Vec<f64>,
    pub gamma: Vec<f64>,
}

/// Escaping directions of a box, split by the side of the crossed wall.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExitDirections {
    pub up: Vec<usize>,
    pub down: Vec<usize>,
}

impl ExitDirections {
    pub fn is_empty(&self) -> bool {
        self.up.is_empty() && self.down.is_empty()
    }

    pub fn len(&self) -> usize {
        self.up.len() + self.down.len()
    }

    /// All `(direction, sign)` pairs, ordered by direction.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Sign)> + '_ {
        let mut all: Vec<(usize, Sign)> =
            self.up.iter().map(|&i| (i, Sign::Plus)).chain(self.down.iter().map(|&i| (i, Sign::Minus))).collect();
        all.sort();
        all.into_iter()
    }

    pub fn contains(&self, i: usize, sign: Sign) -> bool {
        match sign {
            Sign::Plus => self.up.contains(&i),
            Sign::Minus => self.down.contains(&i),
        }
    }
}

/// First wall hit from a point: time, direction and side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitEvent {
    pub tau: f64,
    pub direction: usize,
    pub sign: Sign,
    /// Value of the crossed threshold.
    pub threshold: f64,
}

impl LocalDynamics {
    pub fn new(net: &Network, a: &BoxIndex, u: f64) -> Result<Self, ModelError> {
        net.check_box(a)?;
        net.check_input(u)?;
        let n = net.n();
        let mut focal = Vec::with_capacity(n);
        let mut gamma = Vec::with_capacity(n);
        for i in 0..n {
            let g = net.gamma(a, i, u);
            gamma.push(g);
            focal.push(net.kappa(a, i) / g);
        }
        Ok(Self { box_index: a.clone(), focal, gamma })
    }

    /// Exact solution `φ + e^{-γ t}(x - φ)`, written with `expm1` so that
    /// short times keep full relative precision.
    pub fn flow(&self, x: &[f64], t: f64) -> Vec<f64> {
        x.iter()
            .zip(self.focal.iter().zip(&self.gamma))
            .map(|(&xi, (&phi, &g))| xi - (-g * t).exp_m1() * (phi - xi))
            .collect()
    }

    pub fn exit_directions(&self, net: &Network) -> Result<ExitDirections, ModelError> {
        let a = &self.box_index;
        let mut dirs = ExitDirections::default();
        for (i, v) in net.variables().iter().enumerate() {
            let phi = self.focal[i];
            if v.interior().any(|(_, th)| (phi - th).abs() <= THRESHOLD_EPS) {
                return Err(ModelError::FocalOnThreshold { box_index: a.clone(), var: i, value: phi });
            }
            let q = v.boxes();
            if a.0[i] + 1 < q && phi > net.upper(a, i) {
                dirs.up.push(i);
            }
            if a.0[i] > 0 && phi < net.lower(a, i) {
                dirs.down.push(i);
            }
        }
        Ok(dirs)
    }

    /// Time needed by coordinate `i` to reach `threshold` from `xi`.
    /// Assumes the threshold lies between `xi` and the focal coordinate.
    #[inline]
    pub fn hitting_time(&self, i: usize, xi: f64, threshold: f64) -> f64 {
        let phi = self.focal[i];
        ((threshold - xi) / (phi - threshold)).ln_1p() / self.gamma[i]
    }

    /// Exit events of every escaping direction from `x`, earliest first.
    /// No closure or wall-proximity checks.
    pub(crate) fn race(&self, net: &Network, x: &[f64]) -> Result<Vec<ExitEvent>, ModelError> {
        let a = &self.box_index;
        let dirs = self.exit_directions(net)?;
        let mut events: Vec<ExitEvent> = Vec::with_capacity(dirs.len());
        for (i, sign) in dirs.iter() {
            let threshold = match sign {
                Sign::Plus => net.upper(a, i),
                Sign::Minus => net.lower(a, i),
            };
            events.push(ExitEvent { tau: self.hitting_time(i, x[i], threshold), direction: i, sign, threshold });
        }
        events.sort_by(|p, q| p.tau.total_cmp(&q.tau));
        Ok(events)
    }

    pub fn exit_event(&self, net: &Network, x: &[f64]) -> Result<ExitEvent, ModelError> {
        let a = &self.box_index;
        check_in_closure(net, a, x)?;
        let events = self.race(net, x)?;
        if events.is_empty() {
            return Err(ModelError::NoEscape(a.clone()));
        }
        if let Some(ev) = events.iter().find(|ev| (x[ev.direction] - ev.threshold).abs() <= THRESHOLD_EPS) {
            return Err(ModelError::OnExitWall { box_index: a.clone(), var: ev.direction });
        }
        check_tie(a, &events)?;
        Ok(events[0])
    }

    /// Point where the trajectory from `x` first meets a wall, and the box it enters.
    pub fn transition(&self, net: &Network, x: &[f64]) -> Result<(Vec<f64>, BoxIndex, ExitEvent), ModelError> {
        let ev = self.exit_event(net, x)?;
        let (y, next) = self.land(net, x, ev)?;
        Ok((y, next, ev))
    }

    /// Flow to the wall of a known exit event and snap the crossed coordinate onto it.
    pub(crate) fn land(&self, net: &Network, x: &[f64], ev: ExitEvent) -> Result<(Vec<f64>, BoxIndex), ModelError> {
        let a = &self.box_index;
        let mut y = self.flow(x, ev.tau);
        y[ev.direction] = ev.threshold;
        for (j, v) in net.variables().iter().enumerate() {
            if j == ev.direction {
                continue;
            }
            if v.interior().any(|(_, th)| y[j] == th) {
                return Err(ModelError::Tie { box_index: a.clone(), directions: (ev.direction, j), tau: ev.tau });
            }
        }
        let next = a.step(ev.direction, ev.sign, net.dims()).expect("escaping directions never leave the lattice");
        Ok((y, next))
    }
}

pub(crate) fn check_tie(a: &BoxIndex, events: &[ExitEvent]) -> Result<(), ModelError> {
    if let [first, second, ..] = events {
        if second.tau - first.tau <= TIE_REL_EPS * first.tau.abs() {
            return Err(ModelError::Tie {
                box_index: a.clone(),
                directions: (first.direction, second.direction),
                tau: first.tau,
            });
        }
    }
    Ok(())
}

fn check_in_closure(net: &Network, a: &BoxIndex, x: &[f64]) -> Result<(), ModelError> {
    if x.len() != net.n() {
        return Err(ModelError::DimensionMismatch { expected: net.n(), got: x.len() });
    }
    for i in 0..net.n() {
        if !(x[i] >= net.lower(a, i) - THRESHOLD_EPS && x[i] <= net.upper(a, i) + THRESHOLD_EPS) {
            return Err(ModelError::OutsideBox { box_index: a.clone(), var: i, value: x[i] });
        }
    }
    Ok(())
}

/// `φ_i = κ_i(a) / (γ_i^1(a) u + γ_i^0(a))`.
pub fn focal_point(net: &Network, a: &BoxIndex, u: f64) -> Result<Vec<f64>, ModelError> {
    Ok(LocalDynamics::new(net, a, u)?.focal)
}

/// Closed-form in-box flow. `x` is expected in the closure of box `a`.
pub fn flow_at(net: &Network, a: &BoxIndex, x: &[f64], t: f64, u: f64) -> Result<Vec<f64>, ModelError> {
    if x.len() != net.n() {
        return Err(ModelError::DimensionMismatch { expected: net.n(), got: x.len() });
    }
    if !(t >= 0.0) {
        return Err(ModelError::NegativeTime(t));
    }
    Ok(LocalDynamics::new(net, a, u)?.flow(x, t))
}

pub fn exit_directions(net: &Network, a: &BoxIndex, u: f64) -> Result<ExitDirections, ModelError> {
    LocalDynamics::new(net, a, u)?.exit_directions(net)
}

pub fn exit_event(net: &Network, a: &BoxIndex, x: &[f64], u: f64) -> Result<ExitEvent, ModelError> {
    LocalDynamics::new(net, a, u)?.exit_event(net, x)
}

/// Local transition map `T^a x = φ + α(x)(x - φ)`, `α = exp(-τ(x) Γ)`.
pub fn transition_map(net: &Network, a: &BoxIndex, x: &[f64], u: f64) -> Result<(Vec<f64>, BoxIndex), ModelError> {
    let (y, next, _) = LocalDynamics::new(net, a, u)?.transition(net, x)?;
    Ok((y, next))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn b(s: &str) -> BoxIndex {
        s.parse().unwrap()
    }

    #[test]
    fn focal_points_of_example_one() {
        let net = models::example1();
        let phi = focal_point(&net, &b("10"), 0.0).unwrap();
        assert_eq!(phi, vec![0.9, 0.0]);
        let phi = focal_point(&net, &b("11"), 0.0).unwrap();
        assert_eq!(phi[0], 0.0);
        assert!((phi[1] - 0.2 / 0.3).abs() < 1e-15);
        let phi = focal_point(&net, &b("10"), 0.5).unwrap();
        assert!((phi[0] - 0.6).abs() < 1e-15);
        assert_eq!(phi[1], 0.0);
    }

    #[test]
    fn zero_production_gives_origin() {
        let net = models::example1();
        // Box 01: x2 high silences x1, x1 low silences x2.
        for u in [0.0, 0.3, 1.0] {
            assert_eq!(focal_point(&net, &b("01"), u).unwrap(), vec![0.0, 0.0]);
        }
    }

    #[test]
    fn input_outside_bound_is_rejected() {
        let net = models::example1();
        assert!(matches!(focal_point(&net, &b("10"), 1.5), Err(ModelError::InputOutOfRange { .. })));
    }

    #[test]
    fn flow_identity_and_limit() {
        let net = models::example1();
        let x = [0.1, 0.1];
        assert_eq!(flow_at(&net, &b("00"), &x, 0.0, 0.0).unwrap(), x.to_vec());
        // min γ = 0.3 in this box
        let far = flow_at(&net, &b("00"), &x, 1e3 / 0.3, 0.0).unwrap();
        assert!((far[0] - 0.9).abs() < 1e-9 && far[1].abs() < 1e-9);
        let one = flow_at(&net, &b("00"), &x, 1.0, 0.0).unwrap();
        let e1 = (-1.0f64).exp();
        let e2 = (-0.3f64).exp();
        assert!((one[0] - (0.9 + e1 * (0.1 - 0.9))).abs() < 1e-15);
        assert!((one[1] - e2 * 0.1).abs() < 1e-15);
    }

    #[test]
    fn exit_directions_follow_focal_points() {
        let net = models::example1();
        let d = exit_directions(&net, &b("10"), 0.0).unwrap();
        assert_eq!(d.up, vec![0]);
        assert!(d.down.is_empty());
        assert!(exit_directions(&net, &b("10"), 0.5).unwrap().is_empty());
    }

    #[test]
    fn exit_event_example_one_box_00() {
        let net = models::example1();
        let ev = exit_event(&net, &b("00"), &[0.1, 0.1], 0.0).unwrap();
        assert_eq!((ev.direction, ev.sign), (0, Sign::Plus));
        assert!((ev.tau - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn exit_event_rejects_points_on_the_exit_wall() {
        let net = models::example1();
        let r = exit_event(&net, &b("00"), &[0.5, 0.1], 0.0);
        assert!(matches!(r, Err(ModelError::OnExitWall { var: 0, .. })));
    }

    #[test]
    fn symmetric_race_is_a_tie() {
        let net = models::symmetric_race();
        let r = exit_event(&net, &b("00"), &[0.25, 0.25], 0.0);
        assert!(matches!(r, Err(ModelError::Tie { .. })), "{r:?}");
    }

    #[test]
    fn transition_map_example_one_box_00() {
        let net = models::example1();
        let (y, next) = transition_map(&net, &b("00"), &[0.1, 0.1], 0.0).unwrap();
        assert_eq!(next, b("10"));
        assert_eq!(y[0], 0.5);
        assert!((y[1] - 0.1 * 2f64.powf(-0.3)).abs() < 1e-15);
    }

    #[test]
    fn fixed_box_has_no_transition() {
        let net = models::example1();
        assert!(matches!(transition_map(&net, &b("10"), &[0.6, 0.2], 0.5), Err(ModelError::NoEscape(_))));
    }

    #[test]
    fn focal_on_threshold_is_an_error() {
        let net = models::focal_on_threshold();
        let r = exit_directions(&net, &b("0"), 0.0);
        assert!(matches!(r, Err(ModelError::FocalOnThreshold { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn example1_box() -> impl Strategy<Value = (BoxIndex, f64, f64, f64)> {
            (0usize..3, 0usize..2, 0.0..=1.0f64, 0.01..0.99f64, 0.01..0.99f64).prop_map(|(i, j, u, a, b)| {
                let net = models::example1();
                let bx = BoxIndex::new(vec![i, j]);
                let x0 = net.lower(&bx, 0) + a * (net.upper(&bx, 0) - net.lower(&bx, 0));
                let x1 = net.lower(&bx, 1) + b * (net.upper(&bx, 1) - net.lower(&bx, 1));
                (bx, u, x0, x1)
            })
        }

        proptest! {
            #[test]
            fn flow_composes((bx, u, x0, x1) in example1_box(), s in 0.0..3.0f64, t in 0.0..3.0f64) {
                let net = models::example1();
                let local = LocalDynamics::new(&net, &bx, u).unwrap();
                let x = [x0, x1];
                let once = local.flow(&x, s + t);
                let twice = local.flow(&local.flow(&x, s), t);
                for (a, b) in once.iter().zip(&twice) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }

            #[test]
            fn hitting_time_lands_on_threshold((bx, u, x0, x1) in example1_box()) {
                let net = models::example1();
                let local = LocalDynamics::new(&net, &bx, u).unwrap();
                let x = [x0, x1];
                if let Ok(ev) = local.exit_event(&net, &x) {
                    let y = local.flow(&x, ev.tau);
                    prop_assert!((y[ev.direction] - ev.threshold).abs() < 1e-12);
                }
            }
        }
    }
}
