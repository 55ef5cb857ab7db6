//! Event-driven simulation: trajectories are composed exactly from wall to
//! wall, then optionally sampled on a time grid from the closed-form flow.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::graph::{ControlLaw, GraphError};
use crate::model::{check_tie, BoxIndex, LocalDynamics, ModelError, Network};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("initial point lies on a threshold of variable {var}")]
    InitialOnWall { var: usize },
    #[error("trajectory does not match the network and law at event {event}")]
    Mismatch { event: usize },
    #[error("sampling step must be positive, got {0}")]
    BadStep(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimBudget {
    pub max_events: usize,
    pub max_time: f64,
    /// Inter-event time below which a crossing counts toward Zeno detection.
    pub zeno_eps: f64,
    /// Consecutive short crossings that trigger the Zeno verdict.
    pub zeno_count: usize,
    /// Distance under which two entries into the same box are the same point.
    pub recurrence_tol: f64,
}

impl Default for SimBudget {
    fn default() -> Self {
        Self { max_events: 100_000, max_time: 1e6, zeno_eps: 1e-8, zeno_count: 10, recurrence_tol: 1e-9 }
    }
}

/// Entry into a box: the initial point, or a point on the wall just crossed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Event {
    pub t: f64,
    /// Time spent in the previous box (0 for the initial event).
    pub dt: f64,
    pub point: Vec<f64>,
    #[serde(rename = "box")]
    pub box_index: BoxIndex,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// No escaping direction: the state converges to the focal point `point`.
    Equilibrium {
        #[serde(rename = "box")]
        box_index: BoxIndex,
        point: Vec<f64>,
        /// Distance from the last event point to the focal point.
        residual: f64,
    },
    /// The same wall point was reached again in the same box.
    Periodic {
        boxes: Vec<BoxIndex>,
        period: f64,
        point: Vec<f64>,
    },
    /// Crossings within shorter and shorter times.
    Zeno {
        accumulation_time: f64,
        point: Vec<f64>,
    },
    BudgetExhausted {
        events: usize,
        time: f64,
    },
    /// The trajectory reached an intersection of walls.
    TieAbort {
        #[serde(rename = "box")]
        box_index: BoxIndex,
        directions: (usize, usize),
        point: Vec<f64>,
    },
    /// The box just entered pushes straight back through the entry wall.
    SlidingWall {
        #[serde(rename = "box")]
        box_index: BoxIndex,
        var: usize,
        point: Vec<f64>,
    },
}

impl Verdict {
    pub fn class(&self) -> &'static str {
        match self {
            Verdict::Equilibrium { .. } => "equilibrium",
            Verdict::Periodic { .. } => "periodic",
            Verdict::Zeno { .. } => "zeno",
            Verdict::BudgetExhausted { .. } => "budget_exhausted",
            Verdict::TieAbort { .. } => "tie_abort",
            Verdict::SlidingWall { .. } => "sliding_wall",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub events: Vec<Event>,
    pub verdict: Verdict,
}

/// How many earlier entries into a box are compared for recurrence.
const RECURRENCE_DEPTH: usize = 8;

pub fn simulate(net: &Network, law: &ControlLaw, x0: &[f64], budget: &SimBudget) -> Result<Trajectory, SimError> {
    law.check(net)?;
    let (mut a, on_wall) = net.locate(x0)?;
    if let Some(&var) = on_wall.first() {
        return Err(SimError::InitialOnWall { var });
    }
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut events = vec![Event { t, dt: 0.0, point: x.clone(), box_index: a.clone() }];
    let mut visits: HashMap<BoxIndex, Vec<usize>> = HashMap::new();
    let mut short_run = 0usize;
    let mut entry_dir: Option<usize> = None;

    let verdict = loop {
        let local = LocalDynamics::new(net, &a, law.get(&a))?;
        let race = local.race(net, &x)?;
        let Some(ev) = race.first().copied() else {
            let residual = crate::cycle::distance(&x, &local.focal);
            break Verdict::Equilibrium { box_index: a, point: local.focal, residual };
        };
        if !(ev.tau > 0.0) {
            if Some(ev.direction) == entry_dir {
                break Verdict::SlidingWall { box_index: a, var: ev.direction, point: x };
            }
            let other = entry_dir.unwrap_or(ev.direction);
            break Verdict::TieAbort { box_index: a, directions: (other, ev.direction), point: x };
        }
        if let Err(ModelError::Tie { directions, .. }) = check_tie(&a, &race) {
            break Verdict::TieAbort { box_index: a, directions, point: x };
        }
        if events.len() > budget.max_events || t + ev.tau > budget.max_time {
            break Verdict::BudgetExhausted { events: events.len() - 1, time: t };
        }
        let (y, next) = match local.land(net, &x, ev) {
            Ok(r) => r,
            Err(ModelError::Tie { directions, .. }) => {
                break Verdict::TieAbort { box_index: a, directions, point: local.flow(&x, ev.tau) }
            }
            Err(e) => return Err(e.into()),
        };
        t += ev.tau;
        x = y;
        a = next;
        entry_dir = Some(ev.direction);
        events.push(Event { t, dt: ev.tau, point: x.clone(), box_index: a.clone() });
        let k = events.len() - 1;

        short_run = if ev.tau < budget.zeno_eps { short_run + 1 } else { 0 };
        if short_run >= budget.zeno_count {
            break Verdict::Zeno { accumulation_time: accumulation_estimate(&events, t, budget.zeno_count), point: x };
        }

        let seen = visits.entry(a.clone()).or_default();
        let hit = seen
            .iter()
            .rev()
            .take(RECURRENCE_DEPTH)
            .copied()
            .find(|&j| crate::cycle::distance(&events[j].point, &x) < budget.recurrence_tol);
        if let Some(j) = hit {
            let boxes = events[j..k].iter().map(|e| e.box_index.clone()).collect();
            break Verdict::Periodic { boxes, period: t - events[j].t, point: x };
        }
        seen.push(k);
    };
    Ok(Trajectory { events, verdict })
}

/// Geometric extrapolation of the remaining time from the last two windows
/// of `w` crossings.
fn accumulation_estimate(events: &[Event], t: f64, w: usize) -> f64 {
    let n = events.len();
    if w == 0 || n < 2 * w + 1 {
        return t;
    }
    let window = |r: std::ops::Range<usize>| events[r].iter().map(|e| e.dt).sum::<f64>();
    let (prev, last) = (window(n - 2 * w..n - w), window(n - w..n));
    let r = last / prev;
    if r > 0.0 && r < 1.0 {
        t + last * r / (1.0 - r)
    } else {
        t
    }
}

/// Independent trajectories, one thread each.
pub fn simulate_batch(
    net: &Network,
    law: &ControlLaw,
    starts: &[Vec<f64>],
    budget: &SimBudget,
) -> Vec<Result<Trajectory, SimError>> {
    std::thread::scope(|s| {
        let handles: Vec<_> = starts.iter().map(|x0| s.spawn(move || simulate(net, law, x0, budget))).collect();
        handles.into_iter().map(|h| h.join().expect("simulation thread panicked")).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub point: Vec<f64>,
    #[serde(rename = "box")]
    pub box_index: BoxIndex,
}

/// Closed-form samples on `0, dt, 2dt, …` over `[0, last event time]`,
/// always including both endpoints.
pub fn sample(net: &Network, law: &ControlLaw, traj: &Trajectory, dt: f64) -> Result<Vec<Sample>, SimError> {
    let end = traj.events.last().map_or(0.0, |e| e.t);
    sample_until(net, law, traj, dt, end)
}

/// Like [`sample`], but continues past the last event inside the last box
/// up to `t_end` when the trajectory ended at an equilibrium.
pub fn sample_until(
    net: &Network,
    law: &ControlLaw,
    traj: &Trajectory,
    dt: f64,
    t_end: f64,
) -> Result<Vec<Sample>, SimError> {
    if !(dt > 0.0) {
        return Err(SimError::BadStep(dt));
    }
    check_consistency(net, law, traj)?;
    let last_t = traj.events.last().map_or(0.0, |e| e.t);
    let end = match traj.verdict {
        Verdict::Equilibrium { .. } => t_end.max(last_t),
        _ => last_t,
    };
    let mut out = Vec::new();
    let mut k = 0;
    let mut step = 0u64;
    loop {
        let t = (step as f64 * dt).min(end);
        while k + 1 < traj.events.len() && traj.events[k + 1].t <= t {
            k += 1;
        }
        let e = &traj.events[k];
        let local = LocalDynamics::new(net, &e.box_index, law.get(&e.box_index))?;
        let point = if t == e.t { e.point.clone() } else { local.flow(&e.point, t - e.t) };
        out.push(Sample { t, point, box_index: e.box_index.clone() });
        if t >= end {
            break;
        }
        step += 1;
    }
    Ok(out)
}

/// Re-flow every event to the next one; the trajectory must come from this network and law.
fn check_consistency(net: &Network, law: &ControlLaw, traj: &Trajectory) -> Result<(), SimError> {
    for (k, pair) in traj.events.windows(2).enumerate() {
        let (e, f) = (&pair[0], &pair[1]);
        if e.point.len() != net.n() || e.box_index.unit_step_to(&f.box_index).is_none() {
            return Err(SimError::Mismatch { event: k + 1 });
        }
        let local = LocalDynamics::new(net, &e.box_index, law.get(&e.box_index))
            .map_err(|_| SimError::Mismatch { event: k })?;
        let y = local.flow(&e.point, f.dt);
        if crate::cycle::distance(&y, &f.point) > 1e-9 {
            return Err(SimError::Mismatch { event: k + 1 });
        }
    }
    Ok(())
}

/// `t,<variable names>,box` rows.
pub fn samples_to_csv(net: &Network, samples: &[Sample]) -> String {
    let mut s = String::from("t");
    for v in net.variables() {
        s.push(',');
        s.push_str(&v.name);
    }
    s.push_str(",box\n");
    for p in samples {
        let _ = write!(s, "{}", p.t);
        for x in &p.point {
            let _ = write!(s, ",{x}");
        }
        let _ = writeln!(s, ",{}", p.box_index);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn b(s: &str) -> BoxIndex {
        s.parse().unwrap()
    }

    fn ex1_law() -> ControlLaw {
        ControlLaw::with_values([(b("10"), 0.5), (b("20"), 0.5)], 0.0)
    }

    #[test]
    fn example_one_oscillates() {
        let net = models::example1();
        let tr = simulate(&net, &ControlLaw::zero(), &[0.85, 0.15], &SimBudget::default()).unwrap();
        match &tr.verdict {
            Verdict::Periodic { boxes, period, .. } => {
                assert_eq!(boxes.len(), 6);
                assert!(*period > 0.0);
            }
            v => panic!("{v:?}"),
        }
        assert_eq!(tr.events[1].box_index, b("21"));
    }

    #[test]
    fn controlled_example_one_settles() {
        let net = models::example1();
        let tr = simulate(&net, &ex1_law(), &[0.85, 0.15], &SimBudget::default()).unwrap();
        match &tr.verdict {
            Verdict::Equilibrium { box_index, point, .. } => {
                assert_eq!(box_index, &b("10"));
                assert!((point[0] - 0.6).abs() < 1e-9 && point[1].abs() < 1e-9);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn events_are_exact_and_ordered() {
        let net = models::example1();
        let tr = simulate(&net, &ControlLaw::zero(), &[0.85, 0.15], &SimBudget::default()).unwrap();
        for w in tr.events.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[0].box_index.unit_step_to(&w[1].box_index).is_some());
            let local = LocalDynamics::new(&net, &w[0].box_index, 0.0).unwrap();
            let y = local.flow(&w[0].point, w[1].dt);
            assert!(crate::cycle::distance(&y, &w[1].point) < 1e-12);
        }
    }

    #[test]
    fn initial_point_on_wall_is_rejected() {
        let net = models::example1();
        let r = simulate(&net, &ControlLaw::zero(), &[0.5, 0.2], &SimBudget::default());
        assert_eq!(r.unwrap_err(), SimError::InitialOnWall { var: 0 });
    }

    #[test]
    fn symmetric_race_aborts_on_tie() {
        let net = models::symmetric_race();
        let tr = simulate(&net, &ControlLaw::zero(), &[0.25, 0.25], &SimBudget::default()).unwrap();
        assert_eq!(tr.verdict.class(), "tie_abort");
    }

    #[test]
    fn sampling_endpoints_and_events() {
        let net = models::example1();
        let law = ex1_law();
        let tr = simulate(&net, &law, &[0.85, 0.15], &SimBudget::default()).unwrap();
        let end = tr.events.last().unwrap().t;
        let coarse = sample(&net, &law, &tr, 10.0 * end + 1.0).unwrap();
        assert_eq!(coarse.len(), 2);
        assert_eq!(coarse[0].point, tr.events[0].point);
        assert!(crate::cycle::distance(&coarse[1].point, &tr.events.last().unwrap().point) < 1e-12);

        let fine = sample_until(&net, &law, &tr, 0.01, 20.0).unwrap();
        let inside: Vec<&Sample> = fine.iter().filter(|s| s.box_index == b("10")).collect();
        for w in inside.windows(2) {
            assert!((w[1].point[0] - 0.6).abs() <= (w[0].point[0] - 0.6).abs());
            assert!(w[1].point[1].abs() <= w[0].point[1].abs());
        }
        assert!((inside.last().unwrap().point[0] - 0.6).abs() < 1e-6);
    }

    #[test]
    fn sampling_rejects_foreign_trajectory() {
        let net = models::example1();
        let tr = simulate(&net, &ControlLaw::zero(), &[0.85, 0.15], &SimBudget::default()).unwrap();
        assert!(matches!(sample(&net, &ex1_law(), &tr, 0.1), Err(SimError::Mismatch { .. })));
        assert!(matches!(sample(&net, &ControlLaw::zero(), &tr, 0.0), Err(SimError::BadStep(_))));
    }

    #[test]
    fn csv_header_and_rows() {
        let net = models::example1();
        let law = ex1_law();
        let tr = simulate(&net, &law, &[0.85, 0.15], &SimBudget::default()).unwrap();
        let csv = samples_to_csv(&net, &sample(&net, &law, &tr, 0.1).unwrap());
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,x1,x2,box"));
        assert!(lines.next().unwrap().ends_with(",20"));
    }

    #[test]
    fn batch_matches_sequential() {
        let net = models::example1();
        let starts = vec![vec![0.85, 0.15], vec![0.2, 0.7], vec![0.6, 0.3]];
        let batch = simulate_batch(&net, &ControlLaw::zero(), &starts, &SimBudget::default());
        for (x0, r) in starts.iter().zip(batch) {
            assert_eq!(r.unwrap(), simulate(&net, &ControlLaw::zero(), x0, &SimBudget::default()).unwrap());
        }
    }

    #[test]
    fn example_two_spirals_with_shrinking_crossing_times() {
        // Without input the x1/x2 subsystem is a two-gene negative loop around
        // (θ1², θ2¹) while x3 relaxes to 1. Crossing times shrink like 1/k, so
        // the default budget runs out before they drop under 1e-8.
        let net = models::example2();
        let budget = SimBudget { max_events: 20_000, ..SimBudget::default() };
        let tr = simulate(&net, &ControlLaw::zero(), &[0.95, 0.95, 0.1], &budget).unwrap();
        assert_eq!(tr.verdict.class(), "budget_exhausted");
        let last = tr.events.last().unwrap();
        assert!(crate::cycle::distance(&last.point[..2], &[0.75, 0.5]) < 1e-3, "{:?}", last.point);
        let lap = |k: usize| tr.events[k - 3..=k].iter().map(|e| e.dt).sum::<f64>();
        let n = tr.events.len() - 1;
        assert!(lap(n) < lap(n - 4) && lap(n - 4) < lap(n - 8));
        assert!(lap(n) < 1e-3 * lap(8));
    }

    #[test]
    fn zeno_detector_fires_on_short_crossings() {
        let net = models::example2();
        let budget = SimBudget { zeno_eps: 1e-3, ..SimBudget::default() };
        let tr = simulate(&net, &ControlLaw::zero(), &[0.95, 0.95, 0.1], &budget).unwrap();
        let Verdict::Zeno { accumulation_time, point } = &tr.verdict else { panic!("{:?}", tr.verdict) };
        assert!(*accumulation_time >= tr.events.last().unwrap().t);
        assert!((point[0] - 0.75).abs() < 1e-2 && (point[1] - 0.5).abs() < 1e-2);
        assert!(tr.events[tr.events.len() - 10..].iter().all(|e| e.dt < 1e-3));
    }

    #[test]
    fn extended_example_one_settles_in_101() {
        let net = models::example1_with_controller(0.5, 0.5, 0.1);
        for x0 in [[0.95, 0.95, 0.1], [0.95, 0.95, 0.95]] {
            let tr = simulate(&net, &ControlLaw::zero(), &x0, &SimBudget::default()).unwrap();
            match &tr.verdict {
                Verdict::Equilibrium { box_index, .. } => assert_eq!(box_index, &b("101")),
                v => panic!("{x0:?}: {v:?}"),
            }
        }
    }

    #[test]
    fn verdicts_survive_small_perturbations() {
        let ex1 = models::example1();
        let ext = models::example1_with_controller(0.5, 0.5, 0.1);
        let ex2 = models::example2();
        let cases: Vec<(&Network, ControlLaw, Vec<f64>)> = vec![
            (&ex1, ControlLaw::zero(), vec![0.85, 0.15]),
            (&ex1, ex1_law(), vec![0.85, 0.15]),
            (&ex2, ControlLaw::zero(), vec![0.95, 0.95, 0.1]),
            (&ext, ControlLaw::zero(), vec![0.95, 0.95, 0.1]),
        ];
        let budget = SimBudget { max_events: 20_000, ..SimBudget::default() };
        for (net, law, x0) in cases {
            let base = simulate(net, &law, &x0, &budget).unwrap().verdict.class();
            for i in 0..x0.len() {
                for d in [-1e-6, 1e-6] {
                    let mut y = x0.clone();
                    y[i] += d;
                    assert_eq!(simulate(net, &law, &y, &budget).unwrap().verdict.class(), base);
                }
            }
        }
    }
}
