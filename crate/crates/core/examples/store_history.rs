//! The store keeps every value ever asserted; reads see the latest one.

use rudi::store::{Resource, Store, Value};

const ONTOLOGY: &str = r#"@prefix ex: <http://rudi.dev/ns/example#> .
ex:Person rdf:type rdfs:Class .
ex:mood rdfs:domain ex:Person .
ex:mood rdfs:range xsd:string .
ex:mood rudi:functional "true"^^xsd:boolean .
ex:likes rdfs:domain ex:Person .
ex:likes rdfs:range xsd:string .
"#;

fn ex(local: &str) -> Resource {
    Resource::new(format!("http://rudi.dev/ns/example#{local}"))
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut store = Store::load(&format!("{}\n{ONTOLOGY}", rudi::dacts::DEFAULT_ONTOLOGY))?;
    let anna = store.create_instance(&ex("Person"))?;

    for (t, mood) in [(100, "calm"), (250, "curious"), (900, "tired")] {
        store.set_time(t);
        store.assert_value(anna.clone(), ex("mood"), Value::Str(mood.into()))?;
    }
    // same value again: nothing is appended
    assert!(store.assert_value(anna.clone(), ex("mood"), Value::Str("tired".into()))?.is_none());

    store.set_time(1000);
    store.insert(anna.clone(), ex("likes"), Value::Str("tea".into()))?;
    store.insert(anna.clone(), ex("likes"), Value::Str("maps".into()))?;
    store.clear(anna.clone(), ex("likes"))?;
    store.insert(anna.clone(), ex("likes"), Value::Str("rain".into()))?;

    println!("mood now: {:?}", store.latest_value(&anna, &ex("mood")));
    for (v, t) in store.history(&anna, &ex("mood")) {
        println!("  mood {v} since {t}");
    }
    println!("likes now: {:?}", store.current_values(&anna, &ex("likes")));
    for (v, t) in store.history(&anna, &ex("likes")) {
        println!("  likes {v} at {t}");
    }
    println!("{} tuples, last at {}", store.len(), store.last_time());
    Ok(())
}
