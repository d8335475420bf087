use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::vocab;
use super::{Resource, StoreError};

/// Scalar datatypes understood by the store.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum XsdType {
    Int,
    Decimal,
    String,
    Boolean,
    DateTime,
}

impl XsdType {
    pub fn from_iri(iri: &str) -> Option<XsdType> {
        let local = iri.strip_prefix(vocab::XSD)?;
        Some(match local {
            "int" | "integer" | "long" | "short" | "byte" | "nonNegativeInteger"
            | "positiveInteger" | "unsignedInt" | "unsignedLong" => XsdType::Int,
            "decimal" | "double" | "float" => XsdType::Decimal,
            "string" | "normalizedString" | "token" => XsdType::String,
            "boolean" => XsdType::Boolean,
            "dateTime" => XsdType::DateTime,
            _ => return None,
        })
    }

    /// Canonical datatype IRI used when writing literals.
    pub fn iri(self) -> &'static str {
        match self {
            XsdType::Int => "http://www.w3.org/2001/XMLSchema#int",
            XsdType::Decimal => "http://www.w3.org/2001/XMLSchema#decimal",
            XsdType::String => "http://www.w3.org/2001/XMLSchema#string",
            XsdType::Boolean => "http://www.w3.org/2001/XMLSchema#boolean",
            XsdType::DateTime => "http://www.w3.org/2001/XMLSchema#dateTime",
        }
    }
}

impl fmt::Display for XsdType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            XsdType::Int => "xsd:int",
            XsdType::Decimal => "xsd:decimal",
            XsdType::String => "xsd:string",
            XsdType::Boolean => "xsd:boolean",
            XsdType::DateTime => "xsd:dateTime",
        };
        f.write_str(name)
    }
}

/// Semantic type of a property's values.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Range {
    Xsd(XsdType),
    Class(Resource),
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Xsd(x) => x.fmt(f),
            Range::Class(c) => f.write_str(c.local_name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropertySpec {
    pub property: Resource,
    pub domain: Resource,
    pub range: Range,
    pub functional: bool,
}

/// Result of resolving a short (local) name against the schema.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Lookup<'a> {
    Missing,
    Found(&'a Resource),
    Ambiguous(&'a [Resource]),
}

#[derive(Debug, Default)]
struct Closure {
    /// Reflexive-transitive superclasses of every declared class.
    ancestors: HashMap<Resource, BTreeSet<Resource>>,
    class_names: HashMap<String, Vec<Resource>>,
    property_names: HashMap<String, Vec<Resource>>,
}

/// Class hierarchy and property declarations (the TBox).
///
/// Derived data (subclass closure, name indexes) is computed on first use and
/// dropped whenever the schema is modified.
#[derive(Clone, Debug, Default)]
pub struct OntologySchema {
    classes: BTreeSet<Resource>,
    subclass_edges: BTreeSet<(Resource, Resource)>,
    properties: BTreeMap<Resource, PropertySpec>,
    closure: OnceLock<std::sync::Arc<Closure>>,
}

impl PartialEq for OntologySchema {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.subclass_edges == other.subclass_edges
            && self.properties == other.properties
    }
}

impl OntologySchema {
    pub fn new() -> Self {
        Self::default()
    }

    fn invalidate(&mut self) {
        self.closure = OnceLock::new();
    }

    pub fn add_class(&mut self, class: Resource) {
        if self.classes.insert(class) {
            self.invalidate();
        }
    }

    /// Declares `sub ⊑ sup`, declaring both classes if needed.
    pub fn add_subclass(&mut self, sub: Resource, sup: Resource) -> Result<(), StoreError> {
        if sub == sup || self.reaches(&sup, &sub) {
            return Err(StoreError::CyclicSubclass(sub));
        }
        self.classes.insert(sub.clone());
        self.classes.insert(sup.clone());
        self.subclass_edges.insert((sub, sup));
        self.invalidate();
        Ok(())
    }

    /// Depth-first search over raw edges, used for cycle checks before the
    /// closure exists.
    fn reaches(&self, from: &Resource, to: &Resource) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == to {
                return true;
            }
            if !seen.insert(c) {
                continue;
            }
            for (_, sup) in self.edges_from(c) {
                stack.push(sup);
            }
        }
        false
    }

    fn edges_from<'a>(
        &'a self,
        class: &'a Resource,
    ) -> impl Iterator<Item = &'a (Resource, Resource)> + 'a {
        self.subclass_edges
            .range((class.clone(), Resource::min())..)
            .take_while(move |(sub, _)| sub == class)
    }

    pub fn add_property(&mut self, spec: PropertySpec) -> Result<(), StoreError> {
        if !self.classes.contains(&spec.domain) {
            return Err(StoreError::UndeclaredClass(spec.domain));
        }
        if let Range::Class(c) = &spec.range {
            if !self.classes.contains(c) {
                return Err(StoreError::UndeclaredClass(c.clone()));
            }
        }
        self.properties.insert(spec.property.clone(), spec);
        self.invalidate();
        Ok(())
    }

    pub fn classes(&self) -> &BTreeSet<Resource> {
        &self.classes
    }

    pub fn subclass_edges(&self) -> &BTreeSet<(Resource, Resource)> {
        &self.subclass_edges
    }

    pub fn properties(&self) -> impl Iterator<Item = &PropertySpec> {
        self.properties.values()
    }

    pub fn property(&self, p: &Resource) -> Option<&PropertySpec> {
        self.properties.get(p)
    }

    pub fn is_class(&self, c: &Resource) -> bool {
        self.classes.contains(c)
    }

    fn closure(&self) -> &Closure {
        self.closure.get_or_init(|| std::sync::Arc::new(self.compute_closure()))
    }

    fn compute_closure(&self) -> Closure {
        let mut ancestors: HashMap<Resource, BTreeSet<Resource>> = HashMap::new();
        for class in &self.classes {
            let mut seen = BTreeSet::new();
            let mut stack = vec![class];
            while let Some(c) = stack.pop() {
                if !seen.insert(c.clone()) {
                    continue;
                }
                for (_, sup) in self.edges_from(c) {
                    stack.push(sup);
                }
            }
            ancestors.insert(class.clone(), seen);
        }
        let mut class_names: HashMap<String, Vec<Resource>> = HashMap::new();
        for class in &self.classes {
            class_names
                .entry(class.local_name().to_string())
                .or_default()
                .push(class.clone());
        }
        let mut property_names: HashMap<String, Vec<Resource>> = HashMap::new();
        for p in self.properties.keys() {
            property_names
                .entry(p.local_name().to_string())
                .or_default()
                .push(p.clone());
        }
        Closure {
            ancestors,
            class_names,
            property_names,
        }
    }

    /// Reflexive-transitive superclasses of `class`, or `None` if undeclared.
    pub fn ancestors(&self, class: &Resource) -> Option<&BTreeSet<Resource>> {
        self.closure().ancestors.get(class)
    }

    pub fn is_subclass_of(&self, sub: &Resource, sup: &Resource) -> Result<bool, StoreError> {
        if !self.classes.contains(sup) {
            return Err(StoreError::UndeclaredClass(sup.clone()));
        }
        match self.ancestors(sub) {
            Some(a) => Ok(a.contains(sup)),
            None => Err(StoreError::UndeclaredClass(sub.clone())),
        }
    }

    /// Like [`is_subclass_of`](Self::is_subclass_of), but undeclared classes
    /// are simply not related.
    pub fn subsumed_by(&self, sub: &Resource, sup: &Resource) -> bool {
        self.ancestors(sub).is_some_and(|a| a.contains(sup))
    }

    pub fn da_tokens(&self) -> BTreeSet<Resource> {
        self.descendants_of(vocab::DIAL_DIALOGUE_ACT)
    }

    pub fn frames(&self) -> BTreeSet<Resource> {
        self.descendants_of(vocab::DIAL_FRAME)
    }

    pub fn is_da_token(&self, c: &Resource) -> bool {
        self.subsumed_by(c, &Resource::new(vocab::DIAL_DIALOGUE_ACT))
    }

    pub fn is_frame(&self, c: &Resource) -> bool {
        self.subsumed_by(c, &Resource::new(vocab::DIAL_FRAME))
    }

    fn descendants_of(&self, root: &str) -> BTreeSet<Resource> {
        let root = Resource::new(root);
        self.classes
            .iter()
            .filter(|c| self.subsumed_by(c, &root))
            .cloned()
            .collect()
    }

    pub fn lookup_class(&self, local: &str) -> Lookup<'_> {
        lookup(&self.closure().class_names, local)
    }

    /// All properties whose local name is `local`.
    pub fn lookup_properties(&self, local: &str) -> &[Resource] {
        self.closure()
            .property_names
            .get(local)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }
}

fn lookup<'a>(index: &'a HashMap<String, Vec<Resource>>, local: &str) -> Lookup<'a> {
    match index.get(local).map(Vec::as_slice) {
        None | Some([]) => Lookup::Missing,
        Some([one]) => Lookup::Found(one),
        Some(many) => Lookup::Ambiguous(many),
    }
}
