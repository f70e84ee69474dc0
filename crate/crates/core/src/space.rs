//! Declarative search spaces and the assignments that live in them.
//!
//! A [`SearchSpace`] is an ordered list of typed variables. Blocks never
//! mutate a space: they fix some variables through a [`Subgoal`], optimize
//! over the remaining free ones, and re-attach the fixed values when an
//! evaluation leaves the block. Variable order is canonical everywhere
//! (sampling, encoding, reporting), which is what makes runs reproducible.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single bound value.
///
/// Integers and reals are kept distinct so that integer variables survive
/// serialization without turning into floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Cat(String),
}

impl Value {
    /// Numeric view of the value; categorical values have none.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
            Value::Cat(_) => None,
        }
    }

    pub fn as_label(&self) -> Option<&str> {
        match self {
            Value::Cat(s) => Some(s),
            _ => None,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Real(_) => "real",
            Value::Cat(_) => "categorical",
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Cat(s) => write!(f, "{s}"),
        }
    }
}

/// The set of values a variable may take.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    /// Closed real interval. When `log_scale` is set, sampling and feature
    /// encoding work in log10 space; bounds must then be positive.
    Continuous { lo: f64, hi: f64, log_scale: bool },
    /// Closed integer interval.
    Integer { lo: i64, hi: i64 },
    /// Finite unordered label set. Declaration order is canonical.
    Categorical { labels: Vec<String> },
}

impl Domain {
    fn validate(&self, variable: &str) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::InvalidDomain {
                variable: variable.to_string(),
                reason: reason.to_string(),
            })
        };
        match self {
            Domain::Continuous { lo, hi, log_scale } => {
                if !lo.is_finite() || !hi.is_finite() {
                    return fail("bounds must be finite");
                }
                if lo > hi {
                    return fail("bounds must be ordered lo <= hi");
                }
                if *log_scale && *lo <= 0.0 {
                    return fail("log-scaled bounds must be positive");
                }
                Ok(())
            }
            Domain::Integer { lo, hi } => {
                if lo > hi {
                    return fail("bounds must be ordered lo <= hi");
                }
                Ok(())
            }
            Domain::Categorical { labels } => {
                if labels.is_empty() {
                    return fail("label set must be non-empty");
                }
                let unique: BTreeSet<&String> = labels.iter().collect();
                if unique.len() != labels.len() {
                    return fail("labels must be unique");
                }
                Ok(())
            }
        }
    }

    pub fn contains(&self, value: &Value) -> bool {
        match (self, value) {
            (Domain::Continuous { lo, hi, .. }, Value::Real(x)) => {
                x.is_finite() && *lo <= *x && *x <= *hi
            }
            (Domain::Integer { lo, hi }, Value::Int(i)) => lo <= i && i <= hi,
            (Domain::Categorical { labels }, Value::Cat(s)) => labels.iter().any(|l| l == s),
            _ => false,
        }
    }

    /// Draws one value uniformly; log-scaled domains are uniform in log10
    /// space. Consumes exactly one RNG draw per call.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Value {
        match self {
            Domain::Continuous { lo, hi, log_scale } => {
                let u: f64 = rng.random();
                let x = if *log_scale {
                    let (llo, lhi) = (lo.log10(), hi.log10());
                    10f64.powf(llo + u * (lhi - llo))
                } else {
                    lo + u * (hi - lo)
                };
                Value::Real(x.clamp(*lo, *hi))
            }
            Domain::Integer { lo, hi } => Value::Int(rng.random_range(*lo..=*hi)),
            Domain::Categorical { labels } => {
                Value::Cat(labels[rng.random_range(0..labels.len())].clone())
            }
        }
    }

    /// Center of the domain: arithmetic (or log-space) midpoint for numeric
    /// domains, first label for categorical ones.
    pub fn midpoint(&self) -> Value {
        match self {
            Domain::Continuous { lo, hi, log_scale } => {
                let x = if *log_scale {
                    10f64.powf((lo.log10() + hi.log10()) / 2.0)
                } else {
                    (lo + hi) / 2.0
                };
                Value::Real(x.clamp(*lo, *hi))
            }
            Domain::Integer { lo, hi } => Value::Int(lo + (hi - lo) / 2),
            Domain::Categorical { labels } => Value::Cat(labels[0].clone()),
        }
    }

    /// Evenly spaced probe points used by exhaustive grid evaluation.
    ///
    /// Numeric domains get `resolution` points (log-spaced when log-scaled,
    /// capped at the domain cardinality for integers); categorical domains
    /// always contribute every label.
    pub fn lattice(&self, resolution: usize) -> Result<Vec<Value>> {
        if resolution == 0 {
            return Err(Error::InvalidArgument(
                "grid resolution must be at least 1".to_string(),
            ));
        }
        match self {
            Domain::Continuous { lo, hi, log_scale } => {
                if resolution == 1 {
                    return Ok(vec![self.midpoint()]);
                }
                let pts = (0..resolution)
                    .map(|i| {
                        let t = i as f64 / (resolution - 1) as f64;
                        let x = if *log_scale {
                            let (llo, lhi) = (lo.log10(), hi.log10());
                            10f64.powf(llo + t * (lhi - llo))
                        } else {
                            lo + t * (hi - lo)
                        };
                        Value::Real(x.clamp(*lo, *hi))
                    })
                    .collect();
                Ok(pts)
            }
            Domain::Integer { lo, hi } => {
                let count = (hi - lo + 1) as usize;
                if count <= resolution {
                    return Ok((*lo..=*hi).map(Value::Int).collect());
                }
                let mut pts = Vec::with_capacity(resolution);
                for i in 0..resolution {
                    let t = i as f64 / (resolution - 1) as f64;
                    let v = (*lo as f64 + t * (hi - lo) as f64).round() as i64;
                    if pts.last() != Some(&Value::Int(v)) {
                        pts.push(Value::Int(v));
                    }
                }
                Ok(pts)
            }
            Domain::Categorical { labels } => {
                Ok(labels.iter().cloned().map(Value::Cat).collect())
            }
        }
    }

    /// Number of lattice points [`Self::lattice`] would produce.
    pub fn lattice_size(&self, resolution: usize) -> usize {
        match self {
            Domain::Continuous { .. } => resolution.max(1),
            Domain::Integer { lo, hi } => ((hi - lo + 1) as usize).min(resolution.max(1)),
            Domain::Categorical { labels } => labels.len(),
        }
    }
}

/// Serialized form of a variable declaration.
#[derive(Serialize, Deserialize, Clone)]
struct VarDecl {
    name: String,
    #[serde(rename = "type")]
    kind: VarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bounds: Option<(serde_json::Number, serde_json::Number)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    log: Option<bool>,
}

#[derive(Serialize, Deserialize, Clone, Copy, PartialEq)]
#[serde(rename_all = "lowercase")]
enum VarKind {
    Continuous,
    Integer,
    Categorical,
}

/// A named, typed dimension of a search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VarDecl", into = "VarDecl")]
pub struct Variable {
    name: String,
    domain: Domain,
}

impl Variable {
    pub fn new(name: impl Into<String>, domain: Domain) -> Result<Self> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::InvalidSpace("variable name is empty".to_string()));
        }
        domain.validate(&name)?;
        Ok(Variable { name, domain })
    }

    pub fn continuous(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        Variable::new(
            name,
            Domain::Continuous {
                lo,
                hi,
                log_scale: false,
            },
        )
    }

    pub fn log_continuous(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self> {
        Variable::new(
            name,
            Domain::Continuous {
                lo,
                hi,
                log_scale: true,
            },
        )
    }

    pub fn integer(name: impl Into<String>, lo: i64, hi: i64) -> Result<Self> {
        Variable::new(name, Domain::Integer { lo, hi })
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        Variable::new(
            name,
            Domain::Categorical {
                labels: labels.into_iter().map(Into::into).collect(),
            },
        )
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }
}

impl TryFrom<VarDecl> for Variable {
    type Error = Error;

    fn try_from(decl: VarDecl) -> Result<Self> {
        let invalid = |reason: &str| Error::InvalidDomain {
            variable: decl.name.clone(),
            reason: reason.to_string(),
        };
        let domain = match decl.kind {
            VarKind::Continuous => {
                let (lo, hi) = decl
                    .bounds
                    .as_ref()
                    .ok_or_else(|| invalid("continuous variable needs bounds"))?;
                let lo = lo.as_f64().ok_or_else(|| invalid("non-numeric bound"))?;
                let hi = hi.as_f64().ok_or_else(|| invalid("non-numeric bound"))?;
                Domain::Continuous {
                    lo,
                    hi,
                    log_scale: decl.log.unwrap_or(false),
                }
            }
            VarKind::Integer => {
                let (lo, hi) = decl
                    .bounds
                    .as_ref()
                    .ok_or_else(|| invalid("integer variable needs bounds"))?;
                let lo = lo.as_i64().ok_or_else(|| invalid("non-integer bound"))?;
                let hi = hi.as_i64().ok_or_else(|| invalid("non-integer bound"))?;
                Domain::Integer { lo, hi }
            }
            VarKind::Categorical => Domain::Categorical {
                labels: decl
                    .labels
                    .clone()
                    .ok_or_else(|| invalid("categorical variable needs labels"))?,
            },
        };
        Variable::new(decl.name, domain)
    }
}

impl From<Variable> for VarDecl {
    fn from(v: Variable) -> VarDecl {
        match v.domain {
            Domain::Continuous { lo, hi, log_scale } => VarDecl {
                name: v.name,
                kind: VarKind::Continuous,
                bounds: Some((
                    serde_json::Number::from_f64(lo).expect("finite bound"),
                    serde_json::Number::from_f64(hi).expect("finite bound"),
                )),
                labels: None,
                log: Some(log_scale),
            },
            Domain::Integer { lo, hi } => VarDecl {
                name: v.name,
                kind: VarKind::Integer,
                bounds: Some((lo.into(), hi.into())),
                labels: None,
                log: None,
            },
            Domain::Categorical { labels } => VarDecl {
                name: v.name,
                kind: VarKind::Categorical,
                bounds: None,
                labels: Some(labels),
                log: None,
            },
        }
    }
}

/// An ordered collection of uniquely named variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Variable>", into = "Vec<Variable>")]
pub struct SearchSpace {
    variables: Vec<Variable>,
}

impl SearchSpace {
    pub fn new(variables: Vec<Variable>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for v in &variables {
            if !seen.insert(v.name.clone()) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate variable `{}`",
                    v.name
                )));
            }
        }
        Ok(SearchSpace { variables })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&Variable> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.variables.iter().map(|v| v.name.as_str())
    }

    /// Keeps only the named variables, preserving this space's order.
    /// Every requested name must exist.
    pub fn restricted_to<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Result<Self> {
        let wanted: BTreeSet<&str> = names.into_iter().collect();
        for &n in &wanted {
            if self.get(n).is_none() {
                return Err(Error::UnknownVariable(n.to_string()));
            }
        }
        let variables = self
            .variables
            .iter()
            .filter(|v| wanted.contains(v.name.as_str()))
            .cloned()
            .collect();
        SearchSpace::new(variables)
    }

    /// Returns a copy with one variable's domain replaced. Used to narrow a
    /// numeric variable to one piece of a range split.
    pub fn with_domain(&self, name: &str, domain: Domain) -> Result<Self> {
        domain.validate(name)?;
        let mut variables = self.variables.clone();
        let var = variables
            .iter_mut()
            .find(|v| v.name == name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        var.domain = domain;
        SearchSpace::new(variables)
    }
}

impl TryFrom<Vec<Variable>> for SearchSpace {
    type Error = Error;

    fn try_from(variables: Vec<Variable>) -> Result<Self> {
        SearchSpace::new(variables)
    }
}

impl From<SearchSpace> for Vec<Variable> {
    fn from(s: SearchSpace) -> Vec<Variable> {
        s.variables
    }
}

/// A (possibly partial) binding of variables to values.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment {
    bindings: BTreeMap<String, Value>,
}

impl Assignment {
    pub fn new() -> Self {
        Assignment::default()
    }

    pub fn of(pairs: impl IntoIterator<Item = (impl Into<String>, Value)>) -> Self {
        Assignment {
            bindings: pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v))
                .collect(),
        }
    }

    /// Binds or replaces one variable.
    pub fn bind(&mut self, name: impl Into<String>, value: Value) {
        self.bindings.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.bindings.get(name)
    }

    /// Numeric value of a binding; errors if absent or categorical.
    pub fn f64(&self, name: &str) -> Result<f64> {
        self.get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?
            .as_f64()
            .ok_or_else(|| Error::InvalidArgument(format!("`{name}` is not numeric")))
    }

    pub fn label(&self, name: &str) -> Result<&str> {
        self.get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?
            .as_label()
            .ok_or_else(|| Error::InvalidArgument(format!("`{name}` is not categorical")))
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.bindings.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bindings.keys().map(|k| k.as_str())
    }

    /// Keeps only the named bindings (names not present are skipped).
    pub fn restricted_to<'a>(&self, names: impl IntoIterator<Item = &'a str>) -> Assignment {
        let mut out = Assignment::new();
        for n in names {
            if let Some(v) = self.bindings.get(n) {
                out.bind(n, v.clone());
            }
        }
        out
    }

    /// Checks that this assignment binds exactly the variables of `space`
    /// and that every value lies in its domain.
    pub fn validate_full(&self, space: &SearchSpace) -> Result<()> {
        for name in self.names() {
            if space.get(name).is_none() {
                return Err(Error::UnknownVariable(name.to_string()));
            }
        }
        for var in space.variables() {
            let value = self
                .get(var.name())
                .ok_or_else(|| Error::InvalidArgument(format!("`{}` is unbound", var.name())))?;
            check_in_domain(var, value)?;
        }
        Ok(())
    }
}

fn check_in_domain(var: &Variable, value: &Value) -> Result<()> {
    if var.domain().contains(value) {
        return Ok(());
    }
    Err(Error::DomainMismatch {
        variable: var.name().to_string(),
        value: value.to_string(),
        reason: format!(
            "{} value does not fit the declared domain",
            value.type_name()
        ),
    })
}

/// Combines two assignments over disjoint variable sets.
pub fn merge(a: &Assignment, b: &Assignment) -> Result<Assignment> {
    let mut out = a.clone();
    for (name, value) in b.iter() {
        if out.get(name).is_some() {
            return Err(Error::OverlappingBinding(name.to_string()));
        }
        out.bind(name, value.clone());
    }
    Ok(out)
}

/// A set of variables held fixed at concrete values while the remaining
/// variables are optimized.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Subgoal {
    fixed: Assignment,
}

impl Subgoal {
    pub fn empty() -> Self {
        Subgoal::default()
    }

    /// Validates every binding against `space` before accepting it.
    pub fn new(space: &SearchSpace, fixed: Assignment) -> Result<Self> {
        for (name, value) in fixed.iter() {
            let var = space
                .get(name)
                .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
            check_in_domain(var, value)?;
        }
        Ok(Subgoal { fixed })
    }

    pub fn fixed(&self) -> &Assignment {
        &self.fixed
    }

    pub fn is_fixed(&self, name: &str) -> bool {
        self.fixed.get(name).is_some()
    }

    /// Moves an already-fixed variable to a new value. Fixing a variable
    /// that is not part of the subgoal is a caller bug.
    pub fn reset(&mut self, name: &str, value: Value) -> Result<()> {
        if !self.is_fixed(name) {
            return Err(Error::UnknownVariable(name.to_string()));
        }
        self.fixed.bind(name, value);
        Ok(())
    }
}

/// Projects a space down to the variables a subgoal leaves free.
///
/// The result preserves the parent's variable order. Fixing every variable
/// yields an empty space, which is valid here; blocks that need at least one
/// free dimension check for that themselves.
pub fn substitute(space: &SearchSpace, subgoal: &Subgoal) -> Result<SearchSpace> {
    for (name, value) in subgoal.fixed().iter() {
        let var = space
            .get(name)
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))?;
        check_in_domain(var, value)?;
    }
    let free = space
        .variables()
        .iter()
        .filter(|v| !subgoal.is_fixed(v.name()))
        .cloned()
        .collect();
    SearchSpace::new(free)
}

/// Draws `n` full assignments uniformly at random.
///
/// Draw order is fixed: samples in index order, variables in declaration
/// order within each sample. Given equal seeds the output is identical
/// across runs.
pub fn sample_uniform<R: Rng + ?Sized>(
    space: &SearchSpace,
    rng: &mut R,
    n: usize,
) -> Result<Vec<Assignment>> {
    if space.is_empty() {
        return Err(Error::EmptySpace);
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut a = Assignment::new();
        for var in space.variables() {
            a.bind(var.name(), var.domain().sample(rng));
        }
        out.push(a);
    }
    Ok(out)
}

/// Splits a numeric domain at the given cutpoints into consecutive pieces.
///
/// Cutpoints must be strictly increasing and strictly inside the bounds.
/// Conceptually the pieces join half-open, `[lo, c1), [c1, c2), ..., [ck, hi]`:
/// a cutpoint belongs to the piece on its right. Continuous pieces are
/// represented by their closed bounds (the shared boundary is measure zero
/// for sampling); integer pieces are exact.
pub fn split_numeric(var: &Variable, cutpoints: &[f64]) -> Result<Vec<Domain>> {
    let fail = |reason: String| {
        Err(Error::InvalidCutpoints {
            variable: var.name().to_string(),
            reason,
        })
    };
    if cutpoints.is_empty() {
        return fail("at least one cutpoint is required".to_string());
    }
    if cutpoints.windows(2).any(|w| w[0] >= w[1]) {
        return fail("cutpoints must be strictly increasing".to_string());
    }
    match *var.domain() {
        Domain::Continuous { lo, hi, log_scale } => {
            if cutpoints.iter().any(|c| *c <= lo || *c >= hi) {
                return fail(format!("cutpoints must lie strictly inside ({lo}, {hi})"));
            }
            let mut edges = vec![lo];
            edges.extend_from_slice(cutpoints);
            edges.push(hi);
            Ok(edges
                .windows(2)
                .map(|w| Domain::Continuous {
                    lo: w[0],
                    hi: w[1],
                    log_scale,
                })
                .collect())
        }
        Domain::Integer { lo, hi } => {
            let mut pieces = Vec::with_capacity(cutpoints.len() + 1);
            let mut start = lo;
            for &c in cutpoints {
                // The piece right of cutpoint c starts at the smallest
                // integer >= c (a cutpoint belongs to its right piece).
                let right_lo = c.ceil() as i64;
                if right_lo <= start || right_lo > hi {
                    return fail(format!("cutpoint {c} produces an empty integer piece"));
                }
                pieces.push(Domain::Integer {
                    lo: start,
                    hi: right_lo - 1,
                });
                start = right_lo;
            }
            pieces.push(Domain::Integer { lo: start, hi });
            Ok(pieces)
        }
        Domain::Categorical { .. } => fail("categorical domains cannot be range-split".to_string()),
    }
}
