use serde::Serialize;

use super::CycleError;
use crate::graph::ControlLaw;
use crate::model::{BoxIndex, LocalDynamics, Network, Sign};

/// Time for coordinate `i` to cross box `a` from the wall opposite its exit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Traverse {
    pub direction: usize,
    pub sign: Sign,
    pub time: f64,
}

/// Full traverse times of every escaping direction of `a`, shortest first.
pub fn traverse_times(net: &Network, law: &ControlLaw, a: &BoxIndex) -> Result<Vec<Traverse>, CycleError> {
    let local = LocalDynamics::new(net, a, law.get(a))?;
    let dirs = local.exit_directions(net)?;
    let mut out: Vec<Traverse> = dirs
        .iter()
        .map(|(i, sign)| {
            let (from, to) = match sign {
                Sign::Plus => (net.lower(a, i), net.upper(a, i)),
                Sign::Minus => (net.upper(a, i), net.lower(a, i)),
            };
            Traverse { direction: i, sign, time: local.hitting_time(i, from, to) }
        })
        .collect();
    out.sort_by(|p, q| p.time.total_cmp(&q.time));
    Ok(out)
}

/// The escaping direction whose full traverse is strictly faster than all
/// others: a trajectory entering through the far wall of that direction
/// leaves through its opposite wall. `None` with fewer than two escaping
/// directions or when the fastest two tie exactly.
pub fn crossing_direction(net: &Network, law: &ControlLaw, a: &BoxIndex) -> Result<Option<usize>, CycleError> {
    let times = traverse_times(net, law, a)?;
    let [first, second, ..] = times.as_slice() else { return Ok(None) };
    if first.time < second.time {
        Ok(Some(first.direction))
    } else {
        Ok(None)
    }
}

/// The controller fires before the controlled variable crosses `box_index`.
/// `net_ext` is autonomous: the input of the original network has been
/// replaced by the controller variable.
pub fn check_fast_controller(net_ext: &Network, box_index: &BoxIndex, dir: usize) -> Result<bool, CycleError> {
    net_ext.check_box(box_index)?;
    if dir >= net_ext.n() {
        return Err(CycleError::Precondition(format!("direction {dir} out of range")));
    }
    let law = ControlLaw::zero();
    if traverse_times(net_ext, &law, box_index)?.len() < 2 {
        return Err(CycleError::Precondition(format!("box {box_index} has fewer than two escaping directions")));
    }
    Ok(crossing_direction(net_ext, &law, box_index)? == Some(dir))
}
