use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Absolute tolerance used when comparing a concentration with a threshold.
pub const THRESHOLD_EPS: f64 = 1e-9;

/// Activation (`+`) or inhibition (`-`) step function, also used for the
/// side of a wall crossing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// One step factor `s±(x_var, θ_var^threshold)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepFactor {
    pub var: usize,
    pub threshold: usize,
    pub sign: Sign,
}

impl StepFactor {
    pub fn new(var: usize, threshold: usize, sign: Sign) -> Self {
        Self { var, threshold, sign }
    }

    /// Value of the factor on a box. Boxes are open, so the value is never
    /// ambiguous: coordinate `var` of box `a` lies above `θ^k` iff `a[var] >= k`.
    #[inline]
    pub fn eval(&self, a: &BoxIndex) -> bool {
        let above = a.0[self.var] >= self.threshold;
        match self.sign {
            Sign::Plus => above,
            Sign::Minus => !above,
        }
    }
}

/// `coefficient * Π factors`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductionTerm {
    pub coefficient: f64,
    pub factors: Vec<StepFactor>,
}

impl ProductionTerm {
    pub fn new(coefficient: f64, factors: Vec<StepFactor>) -> Self {
        Self { coefficient, factors }
    }

    pub fn constant(coefficient: f64) -> Self {
        Self { coefficient, factors: Vec::new() }
    }

    #[inline]
    pub fn eval(&self, a: &BoxIndex) -> f64 {
        if self.factors.iter().all(|f| f.eval(a)) {
            self.coefficient
        } else {
            0.0
        }
    }
}

/// A sum of [`ProductionTerm`]s. Piecewise constant: it is evaluated on box
/// indices only, never on coordinates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepPolynomial {
    pub terms: Vec<ProductionTerm>,
}

impl StepPolynomial {
    pub fn new(terms: Vec<ProductionTerm>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { terms: vec![ProductionTerm::constant(c)] }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.coefficient == 0.0)
    }

    #[inline]
    pub fn eval(&self, a: &BoxIndex) -> f64 {
        self.terms.iter().map(|t| t.eval(a)).sum()
    }

    /// Whether some term carries a factor on `var`.
    pub fn mentions(&self, var: usize) -> bool {
        self.terms.iter().any(|t| t.factors.iter().any(|f| f.var == var))
    }

    pub fn push(&mut self, term: ProductionTerm) {
        self.terms.push(term);
    }
}

/// Lower-corner index of a regular domain: coordinate `i` lies in
/// `(θ_i^{a_i}, θ_i^{a_i+1})`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BoxIndex(pub Vec<usize>);

impl BoxIndex {
    pub fn new(a: Vec<usize>) -> Self {
        Self(a)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i]
    }

    /// `a ± e_i`, or `None` when the step leaves `[0, dims)`.
    pub fn step(&self, i: usize, sign: Sign, dims: &[usize]) -> Option<BoxIndex> {
        let mut b = self.0.clone();
        match sign {
            Sign::Plus if b[i] + 1 < dims[i] => b[i] += 1,
            Sign::Minus if b[i] > 0 => b[i] -= 1,
            _ => return None,
        }
        Some(BoxIndex(b))
    }

    /// The unique coordinate and sign with `other = self ± e_i`.
    pub fn unit_step_to(&self, other: &BoxIndex) -> Option<(usize, Sign)> {
        if self.len() != other.len() {
            return None;
        }
        let mut found = None;
        for (i, (&x, &y)) in self.0.iter().zip(&other.0).enumerate() {
            if x == y {
                continue;
            }
            if found.is_some() {
                return None;
            }
            found = if y == x + 1 {
                Some((i, Sign::Plus))
            } else if x == y + 1 {
                Some((i, Sign::Minus))
            } else {
                return None;
            };
        }
        found
    }
}

impl fmt::Display for BoxIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.iter().all(|&v| v < 10) {
            for v in &self.0 {
                write!(f, "{v}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
            write!(f, "{}", parts.join(","))
        }
    }
}

impl FromStr for BoxIndex {
    type Err = ModelError;

    /// Accepts digit strings (`"101"`) or comma-separated indices (`"1,0,12"`).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || ModelError::BadBoxLabel(s.to_string());
        if s.contains(',') {
            s.split(',')
                .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
                .collect::<Result<Vec<_>, _>>()
                .map(BoxIndex)
        } else if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) {
            Ok(BoxIndex(s.chars().map(|c| c as usize - '0' as usize).collect()))
        } else {
            Err(bad())
        }
    }
}

/// A named variable and its ordered threshold list `0 = θ^0 < … < θ^q`.
/// The last entry is the range cap, not a switching threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub thresholds: Vec<f64>,
}

impl Variable {
    pub fn new(name: impl Into<String>, thresholds: Vec<f64>) -> Self {
        Self { name: name.into(), thresholds }
    }

    /// Number of boxes along this variable (`q_i`).
    pub fn boxes(&self) -> usize {
        self.thresholds.len() - 1
    }

    pub fn cap(&self) -> f64 {
        *self.thresholds.last().expect("validated")
    }

    /// Interior switching thresholds `θ^1 … θ^{q-1}` with their indices.
    pub fn interior(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let q = self.boxes();
        self.thresholds.iter().copied().enumerate().filter(move |&(k, _)| k >= 1 && k < q)
    }
}

/// A controlled piecewise-affine network
/// `dx_i/dt = κ_i(x) - (γ_i^1(x) u + γ_i^0(x)) x_i`, `u ∈ [0, U]`.
///
/// Immutable after construction; all invariants are checked by [`Network::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    variables: Vec<Variable>,
    production: Vec<StepPolynomial>,
    decay0: Vec<StepPolynomial>,
    decay1: Vec<StepPolynomial>,
    input_bound: f64,
    dims: Vec<usize>,
}

impl Network {
    pub fn new(
        variables: Vec<Variable>,
        production: Vec<StepPolynomial>,
        decay0: Vec<StepPolynomial>,
        decay1: Vec<StepPolynomial>,
        input_bound: f64,
    ) -> Result<Self, ModelError> {
        let n = variables.len();
        if n == 0 {
            return Err(ModelError::Malformed("network has no variables".into()));
        }
        for (what, polys) in [("production", &production), ("decay0", &decay0), ("decay1", &decay1)] {
            if polys.len() != n {
                return Err(ModelError::Malformed(format!("{what} has {} entries for {n} variables", polys.len())));
            }
        }
        if !(input_bound >= 0.0 && input_bound.is_finite()) {
            return Err(ModelError::Malformed(format!("input bound {input_bound} must be finite and >= 0")));
        }
        for v in &variables {
            if v.thresholds.len() < 2 {
                return Err(ModelError::Malformed(format!("variable {} needs at least [0, cap]", v.name)));
            }
            if v.thresholds[0] != 0.0 {
                return Err(ModelError::Malformed(format!("variable {}: first threshold must be 0", v.name)));
            }
            if v.thresholds.windows(2).any(|w| !(w[0] < w[1]) || !w[1].is_finite()) {
                return Err(ModelError::Malformed(format!(
                    "variable {}: thresholds must be finite and strictly increasing",
                    v.name
                )));
            }
        }
        for (i, v) in variables.iter().enumerate() {
            if variables[..i].iter().any(|w| w.name == v.name) {
                return Err(ModelError::Malformed(format!("duplicate variable name {}", v.name)));
            }
        }
        let dims: Vec<usize> = variables.iter().map(Variable::boxes).collect();
        for (what, polys) in [("production", &production), ("decay0", &decay0), ("decay1", &decay1)] {
            for (i, p) in polys.iter().enumerate() {
                for t in &p.terms {
                    if !t.coefficient.is_finite() {
                        return Err(ModelError::Malformed(format!(
                            "{what}[{}]: non-finite coefficient",
                            variables[i].name
                        )));
                    }
                    if what != "decay1" && t.coefficient < 0.0 {
                        return Err(ModelError::Malformed(format!(
                            "{what}[{}]: negative coefficient",
                            variables[i].name
                        )));
                    }
                    for (k, f) in t.factors.iter().enumerate() {
                        if f.var >= n {
                            return Err(ModelError::Malformed(format!(
                                "{what}[{}]: factor on unknown variable {}",
                                variables[i].name, f.var
                            )));
                        }
                        if f.threshold == 0 || f.threshold >= dims[f.var] {
                            return Err(ModelError::Malformed(format!(
                                "{what}[{}]: threshold index {} is not an interior threshold of {}",
                                variables[i].name, f.threshold, variables[f.var].name
                            )));
                        }
                        if t.factors[..k].iter().any(|g| g.var == f.var && g.threshold == f.threshold) {
                            return Err(ModelError::Malformed(format!(
                                "{what}[{}]: two factors on ({}, {}) in one term",
                                variables[i].name, variables[f.var].name, f.threshold
                            )));
                        }
                    }
                }
            }
        }
        let net = Self { variables, production, decay0, decay1, input_bound, dims };
        for a in net.boxes() {
            for i in 0..n {
                let g0 = net.decay0[i].eval(&a);
                let g1 = net.decay1[i].eval(&a);
                if !(g0 > 0.0) || !(g0 + g1 * net.input_bound > 0.0) {
                    return Err(ModelError::Malformed(format!(
                        "decay of {} is not positive on box {a} for all u in [0, U]",
                        net.variables[i].name
                    )));
                }
            }
        }
        Ok(net)
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable_index(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn production(&self) -> &[StepPolynomial] {
        &self.production
    }

    pub fn decay0(&self) -> &[StepPolynomial] {
        &self.decay0
    }

    pub fn decay1(&self) -> &[StepPolynomial] {
        &self.decay1
    }

    pub fn input_bound(&self) -> f64 {
        self.input_bound
    }

    /// Boxes per variable, `q_i`.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn threshold(&self, var: usize, k: usize) -> f64 {
        self.variables[var].thresholds[k]
    }

    /// `θ_i^-(a)`.
    pub fn lower(&self, a: &BoxIndex, i: usize) -> f64 {
        self.variables[i].thresholds[a.0[i]]
    }

    /// `θ_i^+(a)`.
    pub fn upper(&self, a: &BoxIndex, i: usize) -> f64 {
        self.variables[i].thresholds[a.0[i] + 1]
    }

    pub fn box_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// All boxes in lexicographic order (first coordinate most significant).
    pub fn boxes(&self) -> BoxIter {
        BoxIter::new(self.dims.clone())
    }

    pub fn check_box(&self, a: &BoxIndex) -> Result<(), ModelError> {
        if a.len() != self.n() || a.0.iter().zip(&self.dims).any(|(&v, &q)| v >= q) {
            return Err(ModelError::BoxOutOfRange(a.clone()));
        }
        Ok(())
    }

    pub fn check_input(&self, u: f64) -> Result<(), ModelError> {
        if !(u >= -THRESHOLD_EPS && u <= self.input_bound + THRESHOLD_EPS) {
            return Err(ModelError::InputOutOfRange { u, bound: self.input_bound });
        }
        Ok(())
    }

    /// Production rate `κ_i(a)`.
    pub fn kappa(&self, a: &BoxIndex, i: usize) -> f64 {
        self.production[i].eval(a)
    }

    /// Total decay rate `γ_i^1(a) u + γ_i^0(a)`.
    pub fn gamma(&self, a: &BoxIndex, i: usize, u: f64) -> f64 {
        self.decay1[i].eval(a) * u + self.decay0[i].eval(a)
    }

    /// Box whose closure contains `x`, together with the coordinates lying on
    /// an interior threshold (within [`THRESHOLD_EPS`]). On a threshold the
    /// lower box index is returned.
    pub fn locate(&self, x: &[f64]) -> Result<(BoxIndex, Vec<usize>), ModelError> {
        if x.len() != self.n() {
            return Err(ModelError::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        let mut a = Vec::with_capacity(self.n());
        let mut on_wall = Vec::new();
        for (i, v) in self.variables.iter().enumerate() {
            let xi = x[i];
            if !(xi >= -THRESHOLD_EPS && xi <= v.cap() + THRESHOLD_EPS) {
                return Err(ModelError::OutOfRange { var: i, value: xi });
            }
            let q = v.boxes();
            let mut k = 0;
            while k + 1 < q && xi > v.thresholds[k + 1] + THRESHOLD_EPS {
                k += 1;
            }
            if k + 1 < q && (xi - v.thresholds[k + 1]).abs() <= THRESHOLD_EPS {
                on_wall.push(i);
            }
            a.push(k);
        }
        Ok((BoxIndex(a), on_wall))
    }

    /// Substitute the step factors on `(var, threshold)` by their value on the
    /// half-space `x_var > θ` (`Sign::Plus`) or `x_var < θ` (`Sign::Minus`).
    pub fn restricted(&self, var: usize, threshold: usize, side: Sign) -> Result<Network, ModelError> {
        let fix = |p: &StepPolynomial| -> StepPolynomial {
            let mut terms = Vec::new();
            for t in &p.terms {
                let mut keep = true;
                let mut factors = Vec::new();
                for f in &t.factors {
                    if f.var == var && f.threshold == threshold {
                        keep &= f.sign == side;
                    } else {
                        factors.push(*f);
                    }
                }
                if keep {
                    terms.push(ProductionTerm::new(t.coefficient, factors));
                }
            }
            StepPolynomial::new(terms)
        };
        Network::new(
            self.variables.clone(),
            self.production.iter().map(fix).collect(),
            self.decay0.iter().map(fix).collect(),
            self.decay1.iter().map(fix).collect(),
            self.input_bound,
        )
    }

    /// Same network with a different input bound.
    pub fn with_input_bound(&self, input_bound: f64) -> Result<Network, ModelError> {
        Network::new(
            self.variables.clone(),
            self.production.clone(),
            self.decay0.clone(),
            self.decay1.clone(),
            input_bound,
        )
    }

    pub fn into_parts(self) -> (Vec<Variable>, Vec<StepPolynomial>, Vec<StepPolynomial>, Vec<StepPolynomial>, f64) {
        (self.variables, self.production, self.decay0, self.decay1, self.input_bound)
    }
}

/// Odometer over `∏ {0..q_i-1}`, last coordinate fastest.
pub struct BoxIter {
    dims: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl BoxIter {
    fn new(dims: Vec<usize>) -> Self {
        let next = if dims.iter().all(|&q| q > 0) { Some(vec![0; dims.len()]) } else { None };
        Self { dims, next }
    }
}

impl Iterator for BoxIter {
    type Item = BoxIndex;

    fn next(&mut self) -> Option<BoxIndex> {
        let cur = self.next.take()?;
        let mut nxt = cur.clone();
        let mut i = self.dims.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            nxt[i] += 1;
            if nxt[i] < self.dims[i] {
                self.next = Some(nxt);
                break;
            }
            nxt[i] = 0;
        }
        Some(BoxIndex(cur))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_var() -> Network {
        Network::new(
            vec![Variable::new("x", vec![0.0, 0.5, 1.0]), Variable::new("y", vec![0.0, 0.5, 0.75, 1.0])],
            vec![
                StepPolynomial::new(vec![ProductionTerm::new(1.0, vec![StepFactor::new(1, 2, Sign::Minus)])]),
                StepPolynomial::new(vec![ProductionTerm::new(0.8, vec![StepFactor::new(0, 1, Sign::Plus)])]),
            ],
            vec![StepPolynomial::constant(1.0), StepPolynomial::constant(1.0)],
            vec![StepPolynomial::zero(), StepPolynomial::zero()],
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn box_enumeration_is_lexicographic() {
        let net = two_var();
        let labels: Vec<String> = net.boxes().map(|b| b.to_string()).collect();
        assert_eq!(labels, ["00", "01", "02", "10", "11", "12"]);
        assert_eq!(net.box_count(), 6);
    }

    #[test]
    fn step_factor_reads_only_the_box_index() {
        let f = StepFactor::new(1, 2, Sign::Minus);
        assert!(f.eval(&BoxIndex(vec![0, 1])));
        assert!(!f.eval(&BoxIndex(vec![0, 2])));
        let net = two_var();
        assert_eq!(net.kappa(&BoxIndex(vec![1, 0]), 1), 0.8);
        assert_eq!(net.kappa(&BoxIndex(vec![0, 0]), 1), 0.0);
    }

    #[test]
    fn labels_round_trip() {
        let b: BoxIndex = "201".parse().unwrap();
        assert_eq!(b, BoxIndex(vec![2, 0, 1]));
        let c: BoxIndex = "1,12".parse().unwrap();
        assert_eq!(c.to_string(), "1,12");
        assert!("x1".parse::<BoxIndex>().is_err());
    }

    #[test]
    fn unit_steps() {
        let a = BoxIndex(vec![1, 0]);
        assert_eq!(a.unit_step_to(&BoxIndex(vec![2, 0])), Some((0, Sign::Plus)));
        assert_eq!(a.unit_step_to(&BoxIndex(vec![1, 1])), Some((1, Sign::Plus)));
        assert_eq!(a.unit_step_to(&BoxIndex(vec![0, 1])), None);
        assert_eq!(a.step(0, Sign::Plus, &[2, 3]), None);
        assert_eq!(a.step(0, Sign::Minus, &[2, 3]), Some(BoxIndex(vec![0, 0])));
    }

    #[test]
    fn rejects_malformed_thresholds() {
        let bad = Network::new(
            vec![Variable::new("x", vec![0.0, 0.7, 0.5])],
            vec![StepPolynomial::zero()],
            vec![StepPolynomial::constant(1.0)],
            vec![StepPolynomial::zero()],
            0.0,
        );
        assert!(matches!(bad, Err(ModelError::Malformed(_))));
        let not_zero = Network::new(
            vec![Variable::new("x", vec![0.1, 0.7])],
            vec![StepPolynomial::zero()],
            vec![StepPolynomial::constant(1.0)],
            vec![StepPolynomial::zero()],
            0.0,
        );
        assert!(not_zero.is_err());
    }

    #[test]
    fn rejects_cap_and_duplicate_factor_indices() {
        let cap_factor = Network::new(
            vec![Variable::new("x", vec![0.0, 0.5, 1.0])],
            vec![StepPolynomial::new(vec![ProductionTerm::new(1.0, vec![StepFactor::new(0, 2, Sign::Plus)])])],
            vec![StepPolynomial::constant(1.0)],
            vec![StepPolynomial::zero()],
            0.0,
        );
        assert!(cap_factor.is_err());
        let dup = Network::new(
            vec![Variable::new("x", vec![0.0, 0.5, 1.0])],
            vec![StepPolynomial::new(vec![ProductionTerm::new(
                1.0,
                vec![StepFactor::new(0, 1, Sign::Plus), StepFactor::new(0, 1, Sign::Minus)],
            )])],
            vec![StepPolynomial::constant(1.0)],
            vec![StepPolynomial::zero()],
            0.0,
        );
        assert!(dup.is_err());
    }

    #[test]
    fn rejects_decay_that_can_vanish() {
        // γ0 = 1, γ1 = -0.5, U = 2: decay hits zero at u = U.
        let r = Network::new(
            vec![Variable::new("x", vec![0.0, 0.5, 1.0])],
            vec![StepPolynomial::zero()],
            vec![StepPolynomial::constant(1.0)],
            vec![StepPolynomial::constant(-0.5)],
            2.0,
        );
        assert!(r.is_err());
        let ok = Network::new(
            vec![Variable::new("x", vec![0.0, 0.5, 1.0])],
            vec![StepPolynomial::zero()],
            vec![StepPolynomial::constant(1.0)],
            vec![StepPolynomial::constant(-0.5)],
            1.5,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn locate_reports_walls() {
        let net = two_var();
        let (a, walls) = net.locate(&[0.2, 0.6]).unwrap();
        assert_eq!(a, BoxIndex(vec![0, 1]));
        assert!(walls.is_empty());
        let (_, walls) = net.locate(&[0.5, 0.6]).unwrap();
        assert_eq!(walls, vec![0]);
        assert!(net.locate(&[1.5, 0.1]).is_err());
    }

    #[test]
    fn restriction_substitutes_factors() {
        let net = two_var();
        let r = net.restricted(1, 2, Sign::Minus).unwrap();
        assert!(r.production()[0].terms[0].factors.is_empty());
        let r = net.restricted(1, 2, Sign::Plus).unwrap();
        assert!(r.production()[0].terms.is_empty());
    }
}
