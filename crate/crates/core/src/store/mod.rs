//! Temporal tuple store.
//!
//! Every fact is a `(subject, predicate, object, t)` tuple with an assigned
//! transaction time. Tuples are only ever appended; "changing" a property
//! appends a newer tuple and readers look at the most recent one. Clearing a
//! property appends a tombstone ([`Value::Retracted`]).
//!
//! The schema (classes, subclass edges, property specs) is read from the same
//! tuples as the instance data and is fixed after loading.

pub mod format;
mod schema;
pub mod vocab;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use format::{Document, Prefixes};
pub use schema::{Lookup, OntologySchema, PropertySpec, Range, XsdType};

/// A namespaced identifier for a class, property or individual.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Resource(String);

impl Resource {
    pub fn new(iri: impl Into<String>) -> Self {
        Resource(iri.into())
    }

    pub(crate) fn min() -> Self {
        Resource(String::new())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Part after the last `#`, `/` or `:`.
    pub fn local_name(&self) -> &str {
        local_name(&self.0)
    }

    /// Everything up to and including the last `#`, `/` or `:`.
    pub fn namespace(&self) -> &str {
        &self.0[..self.0.len() - self.local_name().len()]
    }
}

pub fn local_name(iri: &str) -> &str {
    match iri.rfind(['#', '/', ':']) {
        Some(i) => &iri[i + 1..],
        None => iri,
    }
}

impl fmt::Debug for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}>", self.0)
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Object position of a tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Resource(Resource),
    Str(String),
    Int(i64),
    Decimal(f64),
    Bool(bool),
    /// Milliseconds.
    Timestamp(i64),
    /// Tombstone: the property was cleared at this tuple's time.
    Retracted,
}

impl Value {
    pub fn as_resource(&self) -> Option<&Resource> {
        match self {
            Value::Resource(r) => Some(r),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Resource(r) => write!(f, "<{r}>"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Decimal(d) => write!(f, "{d}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Timestamp(t) => write!(f, "{t}ms"),
            Value::Retracted => f.write_str("<retracted>"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tuple {
    pub subject: Resource,
    pub predicate: Resource,
    pub object: Value,
    pub t: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StoreError {
    #[error("{line}:{col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("line {line}: {error}")]
    AtLine { line: usize, error: Box<StoreError> },
    #[error("cyclic subclass declaration involving {0}")]
    CyclicSubclass(Resource),
    #[error("property {0} has no rdfs:domain")]
    MissingDomain(Resource),
    #[error("property {0} has no rdfs:range")]
    MissingRange(Resource),
    #[error("unsupported range {range} for property {property}")]
    BadRange { property: Resource, range: Resource },
    #[error("undeclared class {0}")]
    UndeclaredClass(Resource),
    #[error("undeclared predicate {0}")]
    UndeclaredPredicate(Resource),
    #[error("value {value} violates range {range} of {property}")]
    RangeViolation {
        property: Resource,
        range: String,
        value: String,
    },
    #[error("transaction time {t} precedes {previous}")]
    TimeOrder { t: u64, previous: u64 },
}

impl StoreError {
    fn at_line(self, line: usize) -> StoreError {
        StoreError::AtLine {
            line,
            error: Box::new(self),
        }
    }
}

/// One side of a [`TriplePattern`].
#[derive(Clone, Debug, PartialEq)]
pub enum PatternTerm {
    Var(String),
    Const(Value),
}

impl PatternTerm {
    pub fn var(name: &str) -> Self {
        PatternTerm::Var(name.to_string())
    }

    pub fn res(r: &Resource) -> Self {
        PatternTerm::Const(Value::Resource(r.clone()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

/// One query answer: variable bindings plus the time of the matching tuple.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding {
    pub values: BTreeMap<String, Value>,
    pub t: u64,
}

/// Properties maintained by the runtime itself (dialogue history).
fn system_range(p: &str) -> Option<Range> {
    match p {
        vocab::RUDI_DIRECTION | vocab::RUDI_DA => Some(Range::Xsd(XsdType::String)),
        vocab::RUDI_SESSION => Some(Range::Xsd(XsdType::Int)),
        vocab::RUDI_FRAME => Some(Range::Class(Resource::new(vocab::DIAL_FRAME))),
        _ => None,
    }
}

fn is_tbox_predicate(p: &str) -> bool {
    matches!(
        p,
        vocab::RDFS_SUBCLASS_OF | vocab::RDFS_DOMAIN | vocab::RDFS_RANGE | vocab::RUDI_FUNCTIONAL
    )
}

#[derive(Clone, Debug, Default)]
pub struct Store {
    schema: OntologySchema,
    prefixes: Prefixes,
    log: Vec<Tuple>,
    by_sp: HashMap<(Resource, Resource), Vec<usize>>,
    by_subject: HashMap<Resource, Vec<usize>>,
    clock: u64,
}

/// Builds a schema from the TBox tuples of a parsed document.
pub fn load_ontology(source: &str) -> Result<OntologySchema, StoreError> {
    Ok(Store::load(source)?.schema)
}

impl Store {
    pub fn new(schema: OntologySchema) -> Self {
        Store {
            schema,
            ..Default::default()
        }
    }

    pub fn load(source: &str) -> Result<Store, StoreError> {
        Store::from_documents(vec![format::parse(source)?])
    }

    /// Builds a store from several documents, e.g. a shared dialogue act
    /// hierarchy followed by an application ontology.
    pub fn from_documents(docs: Vec<Document>) -> Result<Store, StoreError> {
        let mut prefixes = Prefixes::new();
        for doc in &docs {
            for (name, ns) in &doc.prefixes {
                prefixes.declare(name, ns);
            }
        }
        let tuples: Vec<_> = docs.into_iter().flat_map(|d| d.tuples).collect();
        let schema = build_schema(&tuples)?;
        let mut store = Store {
            schema,
            prefixes,
            ..Default::default()
        };
        let mut last = 0;
        for pt in tuples {
            let t = pt.time.unwrap_or(0);
            if t < last {
                return Err(StoreError::TimeOrder { t, previous: last }.at_line(pt.line));
            }
            last = t;
            let object = if store.is_schema_tuple(&pt.predicate, &pt.object) {
                pt.object
            } else {
                store
                    .check(&pt.predicate, pt.object)
                    .map_err(|e| e.at_line(pt.line))?
            };
            store.push(Tuple {
                subject: pt.subject,
                predicate: pt.predicate,
                object,
                t,
            });
        }
        Ok(store)
    }

    fn is_schema_tuple(&self, p: &Resource, o: &Value) -> bool {
        if is_tbox_predicate(p.as_str()) {
            return true;
        }
        p.as_str() == vocab::RDF_TYPE
            && matches!(o, Value::Resource(c) if is_meta_class(c.as_str()))
    }

    pub fn schema(&self) -> &OntologySchema {
        &self.schema
    }

    pub fn prefixes(&self) -> &Prefixes {
        &self.prefixes
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.log
    }

    pub fn len(&self) -> usize {
        self.log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log.is_empty()
    }

    /// Sets the clock that new transaction times are derived from.
    pub fn set_time(&mut self, now: u64) {
        self.clock = now;
    }

    pub fn last_time(&self) -> u64 {
        self.log.last().map_or(0, |t| t.t)
    }

    fn next_time(&self) -> u64 {
        self.clock.max(self.last_time() + 1)
    }

    fn push(&mut self, tuple: Tuple) -> Tuple {
        let idx = self.log.len();
        self.by_sp
            .entry((tuple.subject.clone(), tuple.predicate.clone()))
            .or_default()
            .push(idx);
        self.by_subject
            .entry(tuple.subject.clone())
            .or_default()
            .push(idx);
        self.log.push(tuple.clone());
        tuple
    }

    /// Range of a predicate usable in instance data.
    pub fn range_of(&self, p: &Resource) -> Option<Range> {
        if let Some(spec) = self.schema.property(p) {
            return Some(spec.range.clone());
        }
        system_range(p.as_str())
    }

    /// Validates `o` against the range of `p` and applies numeric widening.
    fn check(&self, p: &Resource, o: Value) -> Result<Value, StoreError> {
        if o == Value::Retracted {
            return if p.as_str() == vocab::RDF_TYPE || self.range_of(p).is_some() {
                Ok(o)
            } else {
                Err(StoreError::UndeclaredPredicate(p.clone()))
            };
        }
        if p.as_str() == vocab::RDF_TYPE {
            return match &o {
                Value::Resource(c) if self.schema.is_class(c) => Ok(o),
                Value::Resource(c) => Err(StoreError::UndeclaredClass(c.clone())),
                _ => Err(self.violation(p, "class", &o)),
            };
        }
        let range = self
            .range_of(p)
            .ok_or_else(|| StoreError::UndeclaredPredicate(p.clone()))?;
        self.coerce(p, &range, o)
    }

    fn violation(&self, p: &Resource, range: impl ToString, o: &Value) -> StoreError {
        StoreError::RangeViolation {
            property: p.clone(),
            range: range.to_string(),
            value: o.to_string(),
        }
    }

    fn coerce(&self, p: &Resource, range: &Range, o: Value) -> Result<Value, StoreError> {
        let ok = match (range, &o) {
            (Range::Xsd(XsdType::Int), Value::Int(_))
            | (Range::Xsd(XsdType::Decimal), Value::Decimal(_))
            | (Range::Xsd(XsdType::String), Value::Str(_))
            | (Range::Xsd(XsdType::Boolean), Value::Bool(_))
            | (Range::Xsd(XsdType::DateTime), Value::Timestamp(_)) => true,
            (Range::Xsd(XsdType::Decimal), Value::Int(i)) => return Ok(Value::Decimal(*i as f64)),
            (Range::Xsd(XsdType::DateTime), Value::Int(i)) => return Ok(Value::Timestamp(*i)),
            (Range::Class(c), Value::Resource(r)) => {
                let types = self.types_of(r);
                types.is_empty() || types.iter().any(|t| self.schema.subsumed_by(t, c))
            }
            _ => false,
        };
        if ok {
            Ok(o)
        } else {
            Err(self.violation(p, range, &o))
        }
    }

    /// Appends `(s, p, o)` at a fresh transaction time.
    pub fn insert(&mut self, s: Resource, p: Resource, o: Value) -> Result<Tuple, StoreError> {
        let o = self.check(&p, o)?;
        let t = self.next_time();
        Ok(self.push(Tuple {
            subject: s,
            predicate: p,
            object: o,
            t,
        }))
    }

    /// Inserts only if the current view of `(s, p)` would change: for
    /// functional properties when the latest value differs, otherwise when
    /// `o` is not among the current values.
    pub fn assert_value(
        &mut self,
        s: Resource,
        p: Resource,
        o: Value,
    ) -> Result<Option<Tuple>, StoreError> {
        let o = self.check(&p, o)?;
        let unchanged = if self.is_functional(&p) {
            self.latest_value(&s, &p) == Some(&o)
        } else {
            self.current_values(&s, &p).contains(&&o)
        };
        if unchanged {
            return Ok(None);
        }
        self.insert(s, p, o).map(Some)
    }

    /// Appends a tombstone unless `(s, p)` is already empty.
    pub fn clear(&mut self, s: Resource, p: Resource) -> Result<Option<Tuple>, StoreError> {
        if self.current_values(&s, &p).is_empty() {
            self.check(&p, Value::Retracted)?;
            return Ok(None);
        }
        self.insert(s, p, Value::Retracted).map(Some)
    }

    pub fn is_functional(&self, p: &Resource) -> bool {
        match self.schema.property(p) {
            Some(spec) => spec.functional,
            None => p.as_str() != vocab::RDF_TYPE,
        }
    }

    fn matching(&self, s: &Resource, p: &Resource) -> impl Iterator<Item = &Tuple> + '_ {
        self.by_sp
            .get(&(s.clone(), p.clone()))
            .into_iter()
            .flatten()
            .map(|&i| &self.log[i])
    }

    /// Object of the most recent `(s, p, *)` tuple; `None` if there is none
    /// or it is a tombstone.
    pub fn latest_value(&self, s: &Resource, p: &Resource) -> Option<&Value> {
        match self.matching(s, p).last() {
            Some(Tuple {
                object: Value::Retracted,
                ..
            })
            | None => None,
            Some(t) => Some(&t.object),
        }
    }

    /// Distinct objects asserted since the last tombstone, oldest first.
    /// This is the read view for non-functional properties.
    pub fn current_values(&self, s: &Resource, p: &Resource) -> Vec<&Value> {
        let mut out: Vec<&Value> = Vec::new();
        for t in self.matching(s, p) {
            if t.object == Value::Retracted {
                out.clear();
            } else if !out.contains(&&t.object) {
                out.push(&t.object);
            }
        }
        out
    }

    /// All `(object, t)` pairs for `(s, p)`, ascending by time.
    pub fn history(&self, s: &Resource, p: &Resource) -> Vec<(Value, u64)> {
        self.matching(s, p).map(|t| (t.object.clone(), t.t)).collect()
    }

    pub fn types_of(&self, r: &Resource) -> Vec<Resource> {
        self.current_values(r, &Resource::new(vocab::RDF_TYPE))
            .into_iter()
            .filter_map(|v| v.as_resource().cloned())
            .collect()
    }

    pub fn is_subclass_of(&self, c1: &Resource, c2: &Resource) -> Result<bool, StoreError> {
        self.schema.is_subclass_of(c1, c2)
    }

    pub fn instance_of(&self, r: &Resource, c: &Resource) -> Result<bool, StoreError> {
        if !self.schema.is_class(c) {
            return Err(StoreError::UndeclaredClass(c.clone()));
        }
        Ok(self
            .types_of(r)
            .iter()
            .any(|t| self.schema.subsumed_by(t, c)))
    }

    /// Creates a fresh individual of class `c`.
    pub fn create_instance(&mut self, c: &Resource) -> Result<Resource, StoreError> {
        if !self.schema.is_class(c) {
            return Err(StoreError::UndeclaredClass(c.clone()));
        }
        let mut n = self.log.len();
        let fresh = loop {
            let candidate = Resource::new(format!("{}{}_{n}", c.namespace(), c.local_name()));
            if !self.by_subject.contains_key(&candidate) {
                break candidate;
            }
            n += 1;
        };
        self.insert(
            fresh.clone(),
            Resource::new(vocab::RDF_TYPE),
            Value::Resource(c.clone()),
        )?;
        Ok(fresh)
    }

    /// Matches `pattern` against the full history, or only against tuples
    /// with `lo <= t <= hi` when a window is given.
    pub fn query(&self, pattern: &TriplePattern, window: Option<(u64, u64)>) -> Vec<Binding> {
        let subject = match &pattern.subject {
            PatternTerm::Const(Value::Resource(r)) => Some(r),
            PatternTerm::Const(_) => return Vec::new(),
            PatternTerm::Var(_) => None,
        };
        let predicate = match &pattern.predicate {
            PatternTerm::Const(Value::Resource(r)) => Some(r),
            PatternTerm::Const(_) => return Vec::new(),
            PatternTerm::Var(_) => None,
        };
        let candidates: Box<dyn Iterator<Item = &Tuple>> = match (subject, predicate) {
            (Some(s), Some(p)) => Box::new(self.matching(s, p)),
            (Some(s), None) => Box::new(
                self.by_subject
                    .get(s)
                    .into_iter()
                    .flatten()
                    .map(|&i| &self.log[i]),
            ),
            _ => Box::new(self.log.iter()),
        };
        candidates
            .filter(|t| window.is_none_or(|(lo, hi)| lo <= t.t && t.t <= hi))
            .filter_map(|t| {
                let mut values = BTreeMap::new();
                let s = Value::Resource(t.subject.clone());
                let p = Value::Resource(t.predicate.clone());
                for (term, v) in [
                    (&pattern.subject, &s),
                    (&pattern.predicate, &p),
                    (&pattern.object, &t.object),
                ] {
                    if !bind(term, v, &mut values) {
                        return None;
                    }
                }
                Some(Binding { values, t: t.t })
            })
            .collect()
    }

    /// Full snapshot in the tuple format, including transaction times.
    pub fn dump(&self) -> String {
        format::dump(&self.prefixes, &self.log)
    }

    /// Write a value the way [`dump`](Self::dump) would.
    pub fn render(&self, v: &Value) -> String {
        let mut s = String::new();
        format::write_value(v, &self.prefixes, &mut s);
        s
    }
}

fn bind(term: &PatternTerm, v: &Value, values: &mut BTreeMap<String, Value>) -> bool {
    match term {
        PatternTerm::Const(c) => c == v,
        PatternTerm::Var(name) => match values.get(name) {
            Some(bound) => bound == v,
            None => {
                values.insert(name.clone(), v.clone());
                true
            }
        },
    }
}

fn is_meta_class(iri: &str) -> bool {
    matches!(
        iri,
        vocab::RDFS_CLASS
            | vocab::OWL_CLASS
            | vocab::RDF_PROPERTY
            | vocab::OWL_DATATYPE_PROPERTY
            | vocab::OWL_OBJECT_PROPERTY
            | vocab::OWL_FUNCTIONAL_PROPERTY
    )
}

#[derive(Default)]
struct PendingProperty {
    domain: Option<Resource>,
    range: Option<Resource>,
    functional: bool,
}

fn build_schema(tuples: &[format::ParsedTuple]) -> Result<OntologySchema, StoreError> {
    let mut schema = OntologySchema::new();
    let mut props: BTreeMap<Resource, PendingProperty> = BTreeMap::new();
    let object_resource = |t: &format::ParsedTuple| -> Result<Resource, StoreError> {
        t.object.as_resource().cloned().ok_or_else(|| {
            StoreError::Parse {
                line: t.line,
                col: 1,
                message: "schema statement needs an IRI object".into(),
            }
        })
    };
    for t in tuples {
        match t.predicate.as_str() {
            vocab::RDFS_SUBCLASS_OF => {
                let sup = object_resource(t)?;
                schema
                    .add_subclass(t.subject.clone(), sup)
                    .map_err(|e| e.at_line(t.line))?;
            }
            vocab::RDFS_DOMAIN => {
                props.entry(t.subject.clone()).or_default().domain = Some(object_resource(t)?);
            }
            vocab::RDFS_RANGE => {
                props.entry(t.subject.clone()).or_default().range = Some(object_resource(t)?);
            }
            vocab::RUDI_FUNCTIONAL => {
                props.entry(t.subject.clone()).or_default().functional =
                    t.object == Value::Bool(true);
            }
            vocab::RDF_TYPE => match t.object.as_resource().map(Resource::as_str) {
                Some(vocab::RDFS_CLASS | vocab::OWL_CLASS) => schema.add_class(t.subject.clone()),
                Some(vocab::RDF_PROPERTY | vocab::OWL_DATATYPE_PROPERTY | vocab::OWL_OBJECT_PROPERTY) => {
                    props.entry(t.subject.clone()).or_default();
                }
                Some(vocab::OWL_FUNCTIONAL_PROPERTY) => {
                    props.entry(t.subject.clone()).or_default().functional = true;
                }
                _ => {}
            },
            _ => {}
        }
    }
    for (property, p) in props {
        let domain = p
            .domain
            .ok_or_else(|| StoreError::MissingDomain(property.clone()))?;
        let range_iri = p
            .range
            .ok_or_else(|| StoreError::MissingRange(property.clone()))?;
        let range = if range_iri.as_str().starts_with(vocab::XSD) {
            Range::Xsd(XsdType::from_iri(range_iri.as_str()).ok_or_else(|| {
                StoreError::BadRange {
                    property: property.clone(),
                    range: range_iri.clone(),
                }
            })?)
        } else {
            Range::Class(range_iri)
        };
        schema.add_property(PropertySpec {
            property,
            domain,
            range,
            functional: p.functional,
        })?;
    }
    Ok(schema)
}

#[cfg(test)]
mod tests {
    use super::*;

    const AGE_MODEL: &str = "\
@prefix ex: <http://rudi.dev/ns/example#> .
ex:Agent rdf:type rdfs:Class .
ex:Animate rdfs:subClassOf ex:Agent .
ex:Inanimate rdfs:subClassOf ex:Agent .
ex:name rdfs:domain ex:Agent .
ex:name rdfs:range xsd:string .
ex:name rudi:functional \"true\"^^xsd:boolean .
ex:age rdfs:domain ex:Animate .
ex:age rdfs:range xsd:int .
ex:age rudi:functional \"true\"^^xsd:boolean .
";

    fn ex(s: &str) -> Resource {
        Resource::new(format!("http://rudi.dev/ns/example#{s}"))
    }

    fn user_store() -> (Store, Resource) {
        let mut store = Store::load(AGE_MODEL).unwrap();
        let user = store.create_instance(&ex("Animate")).unwrap();
        (store, user)
    }

    #[test]
    fn age_schema() {
        let schema = load_ontology(AGE_MODEL).unwrap();
        assert_eq!(schema.classes().len(), 3);
        assert_eq!(schema.properties().count(), 2);
        let age = schema.property(&ex("age")).unwrap();
        assert_eq!(age.range, Range::Xsd(XsdType::Int));
        assert_eq!(age.domain, ex("Animate"));
        assert!(schema.is_subclass_of(&ex("Animate"), &ex("Agent")).unwrap());
    }

    #[test]
    fn empty_source() {
        let store = Store::load("").unwrap();
        assert!(store.schema().classes().is_empty());
        assert!(store.is_empty());
    }

    #[test]
    fn cyclic_subclass() {
        let err = load_ontology("<http://x#C> rdfs:subClassOf <http://x#D> .\n<http://x#D> rdfs:subClassOf <http://x#C> .\n")
            .unwrap_err();
        assert!(matches!(
            err,
            StoreError::AtLine { line: 2, ref error } if matches!(**error, StoreError::CyclicSubclass(_))
        ));
    }

    #[test]
    fn property_without_range() {
        let err = load_ontology("<http://x#C> rdf:type rdfs:Class .\n<http://x#p> rdfs:domain <http://x#C> .\n")
            .unwrap_err();
        assert_eq!(err, StoreError::MissingRange(Resource::new("http://x#p")));
        let err = load_ontology("<http://x#p> rdfs:range xsd:int .\n").unwrap_err();
        assert_eq!(err, StoreError::MissingDomain(Resource::new("http://x#p")));
    }

    #[test]
    fn insert_and_latest() {
        let (mut store, user) = user_store();
        store.set_time(1000);
        let t = store
            .insert(user.clone(), ex("name"), Value::Str("Joe".into()))
            .unwrap();
        assert_eq!(t.t, 1000);
        assert_eq!(t.object, Value::Str("Joe".into()));
        assert_eq!(store.latest_value(&user, &ex("age")), None);
        let t1 = store.insert(user.clone(), ex("age"), Value::Int(15)).unwrap();
        let t2 = store.insert(user.clone(), ex("age"), Value::Int(16)).unwrap();
        assert!(t2.t > t1.t);
        assert_eq!(store.latest_value(&user, &ex("age")), Some(&Value::Int(16)));
        assert_eq!(
            store.history(&user, &ex("age")),
            vec![(Value::Int(15), t1.t), (Value::Int(16), t2.t)]
        );
    }

    #[test]
    fn range_and_predicate_errors() {
        let (mut store, user) = user_store();
        assert!(matches!(
            store.insert(user.clone(), ex("age"), Value::Str("abc".into())),
            Err(StoreError::RangeViolation { .. })
        ));
        assert_eq!(
            store.insert(user.clone(), ex("height"), Value::Int(1)),
            Err(StoreError::UndeclaredPredicate(ex("height")))
        );
        assert!(store
            .insert(user, Resource::new(vocab::RDFS_SUBCLASS_OF), Value::Int(1))
            .is_err());
    }

    #[test]
    fn tombstone_masks_value() {
        let (mut store, user) = user_store();
        store.insert(user.clone(), ex("age"), Value::Int(3)).unwrap();
        assert!(store.clear(user.clone(), ex("age")).unwrap().is_some());
        assert_eq!(store.latest_value(&user, &ex("age")), None);
        assert!(store.clear(user.clone(), ex("age")).unwrap().is_none());
        assert_eq!(store.history(&user, &ex("age")).len(), 2);
    }

    #[test]
    fn assert_value_skips_unchanged() {
        let (mut store, user) = user_store();
        let n = store.len();
        assert!(store
            .assert_value(user.clone(), ex("age"), Value::Int(4))
            .unwrap()
            .is_some());
        assert!(store
            .assert_value(user.clone(), ex("age"), Value::Int(4))
            .unwrap()
            .is_none());
        assert_eq!(store.len(), n + 1);
    }

    #[test]
    fn non_functional_accumulates() {
        let src = "<http://x#C> rdf:type rdfs:Class .\n<http://x#tag> rdfs:domain <http://x#C> .\n<http://x#tag> rdfs:range xsd:string .\n";
        let mut store = Store::load(src).unwrap();
        let c = store.create_instance(&Resource::new("http://x#C")).unwrap();
        let tag = Resource::new("http://x#tag");
        for s in ["a", "b", "a"] {
            store
                .assert_value(c.clone(), tag.clone(), Value::Str(s.into()))
                .unwrap();
        }
        assert_eq!(
            store.current_values(&c, &tag),
            vec![&Value::Str("a".into()), &Value::Str("b".into())]
        );
    }

    #[test]
    fn instances() {
        let (mut store, user) = user_store();
        assert!(store.instance_of(&user, &ex("Agent")).unwrap());
        assert!(!store.instance_of(&user, &ex("Inanimate")).unwrap());
        let other = store.create_instance(&ex("Animate")).unwrap();
        assert_ne!(user, other);
        assert!(!store.instance_of(&ex("nobody"), &ex("Agent")).unwrap());
        assert_eq!(
            store.create_instance(&ex("Robot")),
            Err(StoreError::UndeclaredClass(ex("Robot")))
        );
    }

    #[test]
    fn query_patterns() {
        let (mut store, user) = user_store();
        store
            .insert(user.clone(), ex("name"), Value::Str("Joe".into()))
            .unwrap();
        let rows = store.query(
            &TriplePattern {
                subject: PatternTerm::var("x"),
                predicate: PatternTerm::res(&ex("name")),
                object: PatternTerm::Const(Value::Str("Joe".into())),
            },
            None,
        );
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].values["x"], Value::Resource(user));
        let all = store.query(
            &TriplePattern {
                subject: PatternTerm::var("s"),
                predicate: PatternTerm::var("p"),
                object: PatternTerm::var("o"),
            },
            None,
        );
        assert_eq!(all.len(), store.len());
    }

    #[test]
    fn load_validates_instance_data() {
        let src = format!("{AGE_MODEL}ex:joe rdf:type ex:Animate .\nex:joe ex:age \"old\" .\n");
        let err = Store::load(&src).unwrap_err();
        assert!(matches!(err, StoreError::AtLine { line: 12, .. }), "{err:?}");
    }

    #[test]
    fn dump_round_trip() {
        let (mut store, user) = user_store();
        store.set_time(50);
        store
            .insert(user.clone(), ex("name"), Value::Str("Jo \"J\"".into()))
            .unwrap();
        store.insert(user.clone(), ex("age"), Value::Int(7)).unwrap();
        store.clear(user, ex("age")).unwrap();
        let text = store.dump();
        let again = Store::load(&text).unwrap();
        assert_eq!(again.tuples(), store.tuples());
        assert_eq!(again.schema(), store.schema());
        assert_eq!(again.dump(), text);
    }
}
