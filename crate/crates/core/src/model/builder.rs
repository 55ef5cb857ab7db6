use super::network::{Network, ProductionTerm, Sign, StepFactor, StepPolynomial, Variable};
use super::ModelError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Production,
    Decay0,
    Decay1,
}

#[derive(Debug, Clone)]
struct PendingTerm {
    slot: Slot,
    target: String,
    coefficient: f64,
    factors: Vec<(String, usize, Sign)>,
}

/// Name-based construction of a [`Network`]. Variable names are resolved
/// when [`NetworkBuilder::build`] runs, so terms may be added in any order.
#[derive(Debug, Clone, Default)]
pub struct NetworkBuilder {
    variables: Vec<Variable>,
    terms: Vec<PendingTerm>,
    input_bound: f64,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(mut self, name: &str, thresholds: impl Into<Vec<f64>>) -> Self {
        self.variables.push(Variable::new(name, thresholds.into()));
        self
    }

    pub fn production(self, target: &str, coefficient: f64, factors: &[(&str, usize, Sign)]) -> Self {
        self.term(Slot::Production, target, coefficient, factors)
    }

    pub fn decay0(self, target: &str, coefficient: f64, factors: &[(&str, usize, Sign)]) -> Self {
        self.term(Slot::Decay0, target, coefficient, factors)
    }

    pub fn decay1(self, target: &str, coefficient: f64, factors: &[(&str, usize, Sign)]) -> Self {
        self.term(Slot::Decay1, target, coefficient, factors)
    }

    pub fn input_bound(mut self, u: f64) -> Self {
        self.input_bound = u;
        self
    }

    fn term(mut self, slot: Slot, target: &str, coefficient: f64, factors: &[(&str, usize, Sign)]) -> Self {
        self.terms.push(PendingTerm {
            slot,
            target: target.to_string(),
            coefficient,
            factors: factors.iter().map(|&(v, k, s)| (v.to_string(), k, s)).collect(),
        });
        self
    }

    pub fn build(self) -> Result<Network, ModelError> {
        let n = self.variables.len();
        let index = |name: &str| {
            self.variables
                .iter()
                .position(|v| v.name == name)
                .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
        };
        let mut production = vec![StepPolynomial::zero(); n];
        let mut decay0 = vec![StepPolynomial::zero(); n];
        let mut decay1 = vec![StepPolynomial::zero(); n];
        for t in &self.terms {
            let target = index(&t.target)?;
            let factors = t
                .factors
                .iter()
                .map(|(v, k, s)| Ok(StepFactor::new(index(v)?, *k, *s)))
                .collect::<Result<Vec<_>, ModelError>>()?;
            let poly = match t.slot {
                Slot::Production => &mut production[target],
                Slot::Decay0 => &mut decay0[target],
                Slot::Decay1 => &mut decay1[target],
            };
            poly.push(ProductionTerm::new(t.coefficient, factors));
        }
        Network::new(self.variables, production, decay0, decay1, self.input_bound)
    }
}
