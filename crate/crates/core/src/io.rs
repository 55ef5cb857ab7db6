//! File formats: network, target graph and graph export JSON, plus a
//! deterministic JSON writer.
//!
//! Network files name variables and refer to them by name:
//!
//! ```json
//! {
//!   "variables": [{"name": "x1", "thresholds": [0, 0.5, 1]}],
//!   "production": [{"target": "x1", "coefficient": 0.9,
//!                   "factors": [{"var": "x1", "threshold_index": 1, "sign": "-"}]}],
//!   "decay0": [{"target": "x1", "coefficient": 1}],
//!   "decay1": [],
//!   "input_bound": 0
//! }
//! ```
//!
//! A term with no factors is a constant. Unknown keys are rejected.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use thiserror::Error;

use crate::graph::{fixed_boxes, Edge, GraphError, TransitionGraph, UnstableWallMark};
use crate::model::{BoxIndex, ModelError, Network, NetworkBuilder, Sign, StepPolynomial};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub thresholds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSpec {
    pub var: String,
    pub threshold_index: usize,
    pub sign: Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub target: String,
    pub coefficient: f64,
    #[serde(default)]
    pub factors: Vec<FactorSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub production: Vec<TermSpec>,
    #[serde(default)]
    pub decay0: Vec<TermSpec>,
    #[serde(default)]
    pub decay1: Vec<TermSpec>,
    #[serde(default)]
    pub input_bound: f64,
}

impl NetworkFile {
    pub fn from_network(net: &Network) -> Self {
        let names: Vec<&str> = net.variables().iter().map(|v| v.name.as_str()).collect();
        let names = &names;
        let terms = |polys: &[StepPolynomial]| -> Vec<TermSpec> {
            polys
                .iter()
                .enumerate()
                .flat_map(|(i, p)| {
                    p.terms.iter().map(move |t| TermSpec {
                        target: names[i].to_string(),
                        coefficient: t.coefficient,
                        factors: t
                            .factors
                            .iter()
                            .map(|f| FactorSpec {
                                var: names[f.var].to_string(),
                                threshold_index: f.threshold,
                                sign: f.sign,
                            })
                            .collect(),
                    })
                })
                .collect()
        };
        Self {
            variables: net
                .variables()
                .iter()
                .map(|v| VariableSpec { name: v.name.clone(), thresholds: v.thresholds.clone() })
                .collect(),
            production: terms(net.production()),
            decay0: terms(net.decay0()),
            decay1: terms(net.decay1()),
            input_bound: net.input_bound(),
        }
    }

    pub fn build(&self) -> Result<Network, ModelError> {
        let mut b = NetworkBuilder::new();
        for v in &self.variables {
            b = b.variable(&v.name, v.thresholds.clone());
        }
        let factors = |t: &TermSpec| -> Vec<(String, usize, Sign)> {
            t.factors.iter().map(|f| (f.var.clone(), f.threshold_index, f.sign)).collect()
        };
        for t in &self.production {
            let f = factors(t);
            b = b.production(&t.target, t.coefficient, &borrow(&f));
        }
        for t in &self.decay0 {
            let f = factors(t);
            b = b.decay0(&t.target, t.coefficient, &borrow(&f));
        }
        for t in &self.decay1 {
            let f = factors(t);
            b = b.decay1(&t.target, t.coefficient, &borrow(&f));
        }
        b.input_bound(self.input_bound).build()
    }
}

fn borrow(f: &[(String, usize, Sign)]) -> Vec<(&str, usize, Sign)> {
    f.iter().map(|(v, k, s)| (v.as_str(), *k, *s)).collect()
}

pub fn parse_network(json: &str) -> Result<Network, IoError> {
    let file: NetworkFile = serde_json::from_str(json)?;
    Ok(file.build()?)
}

pub fn network_to_json(net: &Network) -> String {
    to_json(&NetworkFile::from_network(net))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub from: BoxIndex,
    pub to: BoxIndex,
}

/// Target graph file: `{"edges": [{"from": [1, 0], "to": [0, 0]}, …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFile {
    pub edges: Vec<EdgeSpec>,
}

pub fn parse_target(dims: &[usize], json: &str) -> Result<TransitionGraph, IoError> {
    let file: TargetFile = serde_json::from_str(json)?;
    Ok(TransitionGraph::from_edges(dims, file.edges.into_iter().map(|e| (e.from, e.to)))?)
}

pub fn target_to_json(tg: &TransitionGraph) -> String {
    to_json(&TargetFile {
        edges: tg.edges().iter().map(|e| EdgeSpec { from: e.from.clone(), to: e.to.clone() }).collect(),
    })
}

/// Edge-list export of a transition graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphExport {
    pub dims: Vec<usize>,
    pub nodes: Vec<BoxIndex>,
    pub edges: Vec<Edge>,
    pub fixed: Vec<BoxIndex>,
    pub unstable_walls: Vec<UnstableWallMark>,
}

impl GraphExport {
    pub fn new(tg: &TransitionGraph) -> Self {
        Self {
            dims: tg.dims().to_vec(),
            nodes: tg.nodes().to_vec(),
            edges: tg.edges().to_vec(),
            fixed: fixed_boxes(tg),
            unstable_walls: tg.unstable_walls().to_vec(),
        }
    }
}

/// Pretty JSON with every float written with 17 significant digits and
/// non-finite floats written as `null`, so reruns are byte-identical.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloat::default());
    value.serialize(&mut ser).expect("in-memory serialization of plain data");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

/// Float text used by [`to_json`].
pub fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".to_string()
    }
}

#[derive(Default)]
struct FixedFloat {
    inner: PrettyFormatter<'static>,
}

impl Formatter for FixedFloat {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(format_float(v).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}
