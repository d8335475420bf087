//! Well-known namespaces and IRIs.

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
/// System vocabulary: annotations, history reification, tombstones.
pub const RUDI: &str = "http://rudi.dev/ns/rudi#";
/// Dialogue act and frame hierarchy roots.
pub const DIAL: &str = "http://rudi.dev/ns/dial#";

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
pub const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
pub const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
pub const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
pub const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
pub const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
pub const OWL_FUNCTIONAL_PROPERTY: &str = "http://www.w3.org/2002/07/owl#FunctionalProperty";

pub const RUDI_FUNCTIONAL: &str = "http://rudi.dev/ns/rudi#functional";
pub const RUDI_RETRACTED: &str = "http://rudi.dev/ns/rudi#retracted";
pub const RUDI_FRAME: &str = "http://rudi.dev/ns/rudi#frame";
pub const RUDI_DIRECTION: &str = "http://rudi.dev/ns/rudi#direction";
pub const RUDI_SESSION: &str = "http://rudi.dev/ns/rudi#session";
pub const RUDI_DA: &str = "http://rudi.dev/ns/rudi#da";

pub const DIAL_DIALOGUE_ACT: &str = "http://rudi.dev/ns/dial#DialogueAct";
pub const DIAL_FRAME: &str = "http://rudi.dev/ns/dial#Frame";

/// Prefixes that resolve without an `@prefix` directive.
pub const BUILTIN_PREFIXES: &[(&str, &str)] = &[
    ("rdf", RDF),
    ("rdfs", RDFS),
    ("xsd", XSD),
    ("owl", OWL),
    ("rudi", RUDI),
    ("dial", DIAL),
];
