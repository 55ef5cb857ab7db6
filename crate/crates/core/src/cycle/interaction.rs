use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{Network, Sign};

/// Signed regulation `from → to` read off the production terms of `to`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Interaction {
    pub from: usize,
    pub to: usize,
    pub sign: Sign,
    pub thresholds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InteractionGraph {
    pub n: usize,
    pub edges: Vec<Interaction>,
}

pub fn interaction_graph(net: &Network) -> InteractionGraph {
    let mut map: BTreeMap<(usize, usize, Sign), Vec<usize>> = BTreeMap::new();
    for (to, poly) in net.production().iter().enumerate() {
        for term in &poly.terms {
            for f in &term.factors {
                let ks = map.entry((to, f.var, f.sign)).or_default();
                if !ks.contains(&f.threshold) {
                    ks.push(f.threshold);
                }
            }
        }
    }
    let edges = map
        .into_iter()
        .map(|((to, from, sign), mut thresholds)| {
            thresholds.sort_unstable();
            Interaction { from, to, sign, thresholds }
        })
        .collect();
    InteractionGraph { n: net.n(), edges }
}

/// A single loop through every variable, each regulated by exactly one
/// other, with an odd number of inhibitions.
pub fn is_negative_feedback_loop(ig: &InteractionGraph) -> bool {
    let n = ig.n;
    let mut next = vec![None; n];
    let mut indeg = vec![0usize; n];
    for e in &ig.edges {
        if e.from == e.to || next[e.from].is_some() {
            return false;
        }
        next[e.from] = Some((e.to, e.sign));
        indeg[e.to] += 1;
    }
    if indeg.iter().any(|&d| d != 1) {
        return false;
    }
    let mut v = 0;
    let mut negatives = 0;
    for step in 0..n {
        let Some((w, sign)) = next[v] else { return false };
        if sign == Sign::Minus {
            negatives += 1;
        }
        v = w;
        if v == 0 && step + 1 < n {
            return false;
        }
    }
    v == 0 && negatives % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    #[test]
    fn canonical_loops() {
        assert!(is_negative_feedback_loop(&interaction_graph(&models::negative_loop_2())));
        assert!(is_negative_feedback_loop(&interaction_graph(&models::negative_loop_3())));
        let positive = models::feedback_loop(&[1.0, 1.0], &[0.0, 0.0], &[0.5, 0.5], &[true, true]);
        assert!(!is_negative_feedback_loop(&interaction_graph(&positive)));
    }

    #[test]
    fn example_one_is_not_a_loop() {
        let ig = interaction_graph(&models::example1());
        assert!(ig.edges.iter().any(|e| e.from == 1 && e.to == 1));
        assert!(!is_negative_feedback_loop(&ig));
    }

    #[test]
    fn example_two_restricted_is_a_three_loop() {
        let net = models::example2();
        assert!(!is_negative_feedback_loop(&interaction_graph(&net)));
        let low = net.restricted(0, 2, Sign::Minus).unwrap();
        let ig = interaction_graph(&low);
        assert!(is_negative_feedback_loop(&ig), "{ig:?}");
        let signs: Vec<(usize, usize, Sign)> = ig.edges.iter().map(|e| (e.from, e.to, e.sign)).collect();
        assert_eq!(signs, [(1, 0, Sign::Plus), (2, 1, Sign::Minus), (0, 2, Sign::Plus)]);
    }

    #[test]
    fn disconnected_cycles_are_rejected() {
        let a = models::feedback_loop(&[1.0, 1.0], &[0.0, 0.0], &[0.5, 0.5], &[true, false]);
        let mut ig = interaction_graph(&a);
        // two disjoint 2-loops on four variables
        ig.n = 4;
        ig.edges.push(Interaction { from: 2, to: 3, sign: Sign::Minus, thresholds: vec![1] });
        ig.edges.push(Interaction { from: 3, to: 2, sign: Sign::Plus, thresholds: vec![1] });
        assert!(!is_negative_feedback_loop(&ig));
    }
}
