//! Model documents: the on-disk JSON form of an imprecise Markov chain.
//!
//! A document carries a format version, the ordered state list, one
//! serialized uncertainty model for the initial credal set, and either a
//! single state-to-model map (stationary chain) or a list of such maps
//! (one per step). Unknown fields are rejected; `serde_json` reports the
//! offending line and column. The canonical writer emits two-space pretty
//! JSON with fields in declaration order and state-keyed maps in state
//! order, so `serialize(parse(doc))` is byte-identical for canonical
//! documents.

use std::collections::BTreeMap;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use imc::models::{BeliefModel, IntervalModel, UncertaintyModel};
use imc::operators::{TimeIndexedOperators, UpperTransitionOperator};
use imc::polytope::{CredalPolytope, Halfspace};
use imc::space::{Gamble, MassFunction, StateSpace};
use imc::tree::ImpreciseMarkovChainModel;
use imc::Tolerances;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format_version: u64,
    pub states: Vec<String>,
    pub initial: ModelSpec,
    pub transition: TransitionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransitionSpec {
    /// One row model per state, reused at every step.
    Stationary(BTreeMap<String, ModelSpec>),
    /// One map per step for a finite-horizon chain.
    PerStep(Vec<BTreeMap<String, ModelSpec>>),
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Precise { mass: BTreeMap<String, f64> },
    Vacuous,
    Contamination { epsilon: f64, base: BTreeMap<String, f64> },
    Belief { focal: Vec<FocalSpec> },
    Interval { lower: BTreeMap<String, f64>, upper: BTreeMap<String, f64> },
    Polytope { constraints: Vec<ConstraintSpec> },
}

// `deny_unknown_fields` silently does nothing on internally tagged enums,
// so a hand-written deserializer checks every key while the parser still
// knows its position in the input; unknown fields therefore fail with the
// offending line and column.
impl<'de> Deserialize<'de> for ModelSpec {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        const FIELDS: &[&str] =
            &["kind", "mass", "epsilon", "base", "focal", "lower", "upper", "constraints"];

        struct SpecVisitor;

        impl<'de> serde::de::Visitor<'de> for SpecVisitor {
            type Value = ModelSpec;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("an uncertainty model object tagged by \"kind\"")
            }

            fn visit_map<A>(self, mut map: A) -> Result<ModelSpec, A::Error>
            where
                A: serde::de::MapAccess<'de>,
            {
                use serde::de::Error;
                let mut kind: Option<String> = None;
                let mut fields: BTreeMap<String, Value> = BTreeMap::new();
                while let Some(key) = map.next_key::<String>()? {
                    if !FIELDS.contains(&key.as_str()) {
                        return Err(A::Error::unknown_field(&key, FIELDS));
                    }
                    if key == "kind" {
                        if kind.is_some() {
                            return Err(A::Error::duplicate_field("kind"));
                        }
                        kind = Some(map.next_value()?);
                    } else {
                        if fields.contains_key(&key) {
                            return Err(A::Error::custom(format!("duplicate field `{key}`")));
                        }
                        fields.insert(key, map.next_value()?);
                    }
                }
                let kind = kind.ok_or_else(|| A::Error::missing_field("kind"))?;
                build_spec(&kind, fields).map_err(A::Error::custom)
            }
        }

        deserializer.deserialize_map(SpecVisitor)
    }
}

fn build_spec(kind: &str, mut fields: BTreeMap<String, Value>) -> Result<ModelSpec, String> {
    fn take<T: serde::de::DeserializeOwned>(
        fields: &mut BTreeMap<String, Value>,
        kind: &str,
        name: &str,
    ) -> Result<T, String> {
        let value = fields
            .remove(name)
            .ok_or_else(|| format!("model of kind \"{kind}\" is missing field `{name}`"))?;
        serde_json::from_value(value).map_err(|e| format!("in field `{name}`: {e}"))
    }

    let spec = match kind {
        "precise" => ModelSpec::Precise { mass: take(&mut fields, kind, "mass")? },
        "vacuous" => ModelSpec::Vacuous,
        "contamination" => ModelSpec::Contamination {
            epsilon: take(&mut fields, kind, "epsilon")?,
            base: take(&mut fields, kind, "base")?,
        },
        "belief" => ModelSpec::Belief { focal: take(&mut fields, kind, "focal")? },
        "interval" => ModelSpec::Interval {
            lower: take(&mut fields, kind, "lower")?,
            upper: take(&mut fields, kind, "upper")?,
        },
        "polytope" => ModelSpec::Polytope { constraints: take(&mut fields, kind, "constraints")? },
        other => {
            return Err(format!(
                "unknown model kind {other:?}; expected one of precise, vacuous, \
                 contamination, belief, interval, polytope"
            ))
        }
    };
    if let Some(stray) = fields.keys().next() {
        return Err(format!("field `{stray}` is not allowed for kind \"{kind}\""));
    }
    Ok(spec)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FocalSpec {
    pub states: Vec<String>,
    pub mass: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSpec {
    pub coeffs: BTreeMap<String, f64>,
    pub bound: f64,
}

impl ModelDocument {
    pub fn parse(text: &str) -> Result<ModelDocument> {
        let doc: ModelDocument =
            serde_json::from_str(text).context("model document does not parse")?;
        if doc.format_version != FORMAT_VERSION {
            bail!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                doc.format_version
            );
        }
        Ok(doc)
    }

    pub fn state_space(&self) -> Result<Arc<StateSpace>> {
        Ok(StateSpace::new(self.states.iter().cloned())?)
    }

    /// Builds the library model with the given horizon.
    pub fn to_chain(&self, horizon: usize, tol: &Tolerances) -> Result<ImpreciseMarkovChainModel> {
        let space = self.state_space()?;
        let initial = self.initial.to_model(&space, tol)?;
        let transitions = match &self.transition {
            TransitionSpec::Stationary(rows) => {
                TimeIndexedOperators::stationary(rows_to_operator(&space, rows, tol)?)
            }
            TransitionSpec::PerStep(steps) => {
                let ops = steps
                    .iter()
                    .map(|rows| rows_to_operator(&space, rows, tol))
                    .collect::<Result<Vec<_>>>()?;
                TimeIndexedOperators::per_step(ops)?
            }
        };
        Ok(ImpreciseMarkovChainModel::new(initial, transitions, horizon)?)
    }

    /// The single transition operator of a stationary document.
    pub fn stationary_operator(&self, tol: &Tolerances) -> Result<UpperTransitionOperator> {
        let space = self.state_space()?;
        match &self.transition {
            TransitionSpec::Stationary(rows) => rows_to_operator(&space, rows, tol),
            TransitionSpec::PerStep(steps) => {
                let ops = steps
                    .iter()
                    .map(|rows| rows_to_operator(&space, rows, tol))
                    .collect::<Result<Vec<_>>>()?;
                let all = TimeIndexedOperators::per_step(ops)?;
                if !all.is_stationary() {
                    bail!("this command needs a stationary chain, but the per-step operators differ");
                }
                Ok(all.steps()[0].clone())
            }
        }
    }

    /// Canonical textual form, ending in a newline.
    pub fn canonical(&self) -> String {
        let mut root = Map::new();
        root.insert("format_version".into(), json!(self.format_version));
        root.insert("states".into(), json!(self.states));
        root.insert("initial".into(), self.initial.canonical_value(&self.states));
        let transition = match &self.transition {
            TransitionSpec::Stationary(rows) => rows_value(rows, &self.states),
            TransitionSpec::PerStep(steps) => Value::Array(
                steps.iter().map(|rows| rows_value(rows, &self.states)).collect(),
            ),
        };
        root.insert("transition".into(), transition);
        if let Some(meta) = &self.metadata {
            root.insert("metadata".into(), meta.clone());
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(root))
            .expect("document values are always serializable");
        text.push('\n');
        text
    }
}

fn rows_to_operator(
    space: &Arc<StateSpace>,
    rows: &BTreeMap<String, ModelSpec>,
    tol: &Tolerances,
) -> Result<UpperTransitionOperator> {
    for key in rows.keys() {
        if space.index_of(key).is_none() {
            bail!("transition row for unknown state {key:?}");
        }
    }
    let models = space
        .labels()
        .iter()
        .map(|label| {
            let spec = rows
                .get(label)
                .with_context(|| format!("missing transition row for state {label:?}"))?;
            spec.to_model(space, tol)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UpperTransitionOperator::new(Arc::clone(space), models)?)
}

/// Reads a complete state-indexed map of numbers in space order.
fn full_state_map(
    space: &StateSpace,
    map: &BTreeMap<String, f64>,
    what: &str,
) -> Result<Vec<f64>> {
    for key in map.keys() {
        if space.index_of(key).is_none() {
            bail!("{what} mentions unknown state {key:?}");
        }
    }
    space
        .labels()
        .iter()
        .map(|label| {
            map.get(label)
                .copied()
                .with_context(|| format!("{what} is missing state {label:?}"))
        })
        .collect()
}

impl ModelSpec {
    pub fn to_model(&self, space: &Arc<StateSpace>, tol: &Tolerances) -> Result<UncertaintyModel> {
        Ok(match self {
            ModelSpec::Precise { mass } => UncertaintyModel::Precise(MassFunction::new_with(
                Arc::clone(space),
                full_state_map(space, mass, "precise mass")?,
                tol,
            )?),
            ModelSpec::Vacuous => UncertaintyModel::Vacuous(Arc::clone(space)),
            ModelSpec::Contamination { epsilon, base } => UncertaintyModel::contamination(
                *epsilon,
                MassFunction::new_with(
                    Arc::clone(space),
                    full_state_map(space, base, "contamination base")?,
                    tol,
                )?,
            )?,
            ModelSpec::Belief { focal } => {
                let sets = focal
                    .iter()
                    .map(|f| {
                        let indices = f
                            .states
                            .iter()
                            .map(|label| Ok(space.require(label)?))
                            .collect::<Result<Vec<_>>>()?;
                        Ok((indices, f.mass))
                    })
                    .collect::<Result<Vec<_>>>()?;
                UncertaintyModel::Belief(BeliefModel::new_with(Arc::clone(space), sets, tol)?)
            }
            ModelSpec::Interval { lower, upper } => UncertaintyModel::Interval(IntervalModel::new(
                Arc::clone(space),
                full_state_map(space, lower, "interval lower bounds")?,
                full_state_map(space, upper, "interval upper bounds")?,
            )?),
            ModelSpec::Polytope { constraints } => {
                let halfspaces = constraints
                    .iter()
                    .map(|c| {
                        Ok(Halfspace::new(
                            Gamble::new(
                                Arc::clone(space),
                                full_state_map(space, &c.coeffs, "constraint coefficients")?,
                            )?,
                            c.bound,
                        ))
                    })
                    .collect::<Result<Vec<_>>>()?;
                UncertaintyModel::Polytope(CredalPolytope::from_halfspaces_with(
                    Arc::clone(space),
                    halfspaces,
                    tol,
                )?)
            }
        })
    }

    fn canonical_value(&self, states: &[String]) -> Value {
        let mut m = Map::new();
        match self {
            ModelSpec::Precise { mass } => {
                m.insert("kind".into(), json!("precise"));
                m.insert("mass".into(), state_map_value(mass, states));
            }
            ModelSpec::Vacuous => {
                m.insert("kind".into(), json!("vacuous"));
            }
            ModelSpec::Contamination { epsilon, base } => {
                m.insert("kind".into(), json!("contamination"));
                m.insert("epsilon".into(), json!(epsilon));
                m.insert("base".into(), state_map_value(base, states));
            }
            ModelSpec::Belief { focal } => {
                m.insert("kind".into(), json!("belief"));
                m.insert(
                    "focal".into(),
                    Value::Array(
                        focal
                            .iter()
                            .map(|f| {
                                let mut fm = Map::new();
                                fm.insert("states".into(), json!(f.states));
                                fm.insert("mass".into(), json!(f.mass));
                                Value::Object(fm)
                            })
                            .collect(),
                    ),
                );
            }
            ModelSpec::Interval { lower, upper } => {
                m.insert("kind".into(), json!("interval"));
                m.insert("lower".into(), state_map_value(lower, states));
                m.insert("upper".into(), state_map_value(upper, states));
            }
            ModelSpec::Polytope { constraints } => {
                m.insert("kind".into(), json!("polytope"));
                m.insert(
                    "constraints".into(),
                    Value::Array(
                        constraints
                            .iter()
                            .map(|c| {
                                let mut cm = Map::new();
                                cm.insert("coeffs".into(), state_map_value(&c.coeffs, states));
                                cm.insert("bound".into(), json!(c.bound));
                                Value::Object(cm)
                            })
                            .collect(),
                    ),
                );
            }
        }
        Value::Object(m)
    }
}

fn state_map_value(map: &BTreeMap<String, f64>, states: &[String]) -> Value {
    let mut out = Map::new();
    for label in states {
        if let Some(v) = map.get(label) {
            out.insert(label.clone(), json!(v));
        }
    }
    // Keys outside the state list are preserved (they will be rejected at
    // model construction, not silently dropped from the document).
    for (key, v) in map {
        if !states.contains(key) {
            out.insert(key.clone(), json!(v));
        }
    }
    Value::Object(out)
}

fn rows_value(rows: &BTreeMap<String, ModelSpec>, states: &[String]) -> Value {
    let mut out = Map::new();
    for label in states {
        if let Some(spec) = rows.get(label) {
            out.insert(label.clone(), spec.canonical_value(states));
        }
    }
    for (key, spec) in rows {
        if !states.contains(key) {
            out.insert(key.clone(), spec.canonical_value(states));
        }
    }
    Value::Object(out)
}

/// Parses a gamble file: a JSON map from state label to value, covering
/// every state.
pub fn parse_gamble(text: &str, space: &Arc<StateSpace>) -> Result<Gamble> {
    let map: BTreeMap<String, f64> =
        serde_json::from_str(text).context("gamble file does not parse")?;
    Ok(Gamble::new(
        Arc::clone(space),
        full_state_map(space, &map, "gamble")?,
    )?)
}

/// Parses an `--event a,b` list into the indicator gamble of those states.
pub fn parse_event(list: &str, space: &Arc<StateSpace>) -> Result<Gamble> {
    let mut indices = Vec::new();
    for label in list.split(',') {
        let label = label.trim();
        if label.is_empty() {
            bail!("empty state label in event list {list:?}");
        }
        indices.push(space.require(label)?);
    }
    Ok(Gamble::indicator(Arc::clone(space), &indices))
}
