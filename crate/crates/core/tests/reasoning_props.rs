mod common;

use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rudi::dacts::{subsumes, DialogueAct};
use rudi::store::{load_ontology, Resource, Store};

use common::{
    dag_ontology, default_subclass_edges, descendants, random_act, random_dag, reach_set, render_da, specialize,
    subsumes_oracle, EX,
};

fn class(i: usize) -> Resource {
    Resource::new(format!("{EX}C{i}"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subclass_and_instance_match_reachability(seed in any::<u64>(), n in 1usize..=50) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_dag(&mut rng, n, 200);
        let instances: Vec<(usize, usize)> = (0..10).map(|x| (x, rng.random_range(0..n))).collect();
        let store = Store::load(&dag_ontology(n, &edges, &instances)).unwrap();
        let reach: Vec<_> = (0..n).map(|a| reach_set(&edges, &a)).collect();
        for a in 0..n {
            for b in 0..n {
                prop_assert_eq!(store.is_subclass_of(&class(a), &class(b)).unwrap(), reach[a].contains(&b));
            }
        }
        for (x, c) in &instances {
            let r = Resource::new(format!("{EX}x{x}"));
            for b in 0..n {
                prop_assert_eq!(store.instance_of(&r, &class(b)).unwrap(), reach[*c].contains(&b));
            }
        }
    }

    #[test]
    fn subclass_is_a_preorder(seed in any::<u64>(), n in 1usize..=30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = random_dag(&mut rng, n, 100);
        let store = Store::load(&dag_ontology(n, &edges, &[])).unwrap();
        let sub = |a, b| store.is_subclass_of(&class(a), &class(b)).unwrap();
        for a in 0..n {
            prop_assert!(sub(a, a));
            for b in 0..n {
                for c in 0..n {
                    if sub(a, b) && sub(b, c) {
                        prop_assert!(sub(a, c));
                    }
                }
            }
        }
    }

    #[test]
    fn act_subsumption_matches_definition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let edges = default_subclass_edges();
        let tokens = descendants(&edges, "DialogueAct");
        let frames = descendants(&edges, "Frame");
        let schema = load_ontology(rudi::dacts::DEFAULT_ONTOLOGY).unwrap();
        for i in 0..50 {
            let g = random_act(&mut rng, &tokens, &frames);
            let s = if i % 2 == 0 { random_act(&mut rng, &tokens, &frames) } else { specialize(&mut rng, &edges, &g) };
            let gd = DialogueAct::parse(&render_da(&g), &schema).unwrap();
            let sd = DialogueAct::parse(&render_da(&s), &schema).unwrap();
            prop_assert_eq!(subsumes(&gd, &sd, &schema), subsumes_oracle(&edges, &g, &s), "{} / {}", render_da(&g), render_da(&s));
        }
    }
}

#[test]
fn cyclic_hierarchy_is_rejected() {
    let src = "@prefix ex: <http://rudi.dev/ns/example#> .\nex:C rdfs:subClassOf ex:D .\nex:D rdfs:subClassOf ex:C .\n";
    assert!(Store::load(src).is_err());
}
