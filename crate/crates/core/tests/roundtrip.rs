mod common;

use common::roundtrip_corpus;
use grasploop_core::{parse, pretty_print};

#[test]
fn parse_print_parse_is_structural_identity() {
    let corpus = roundtrip_corpus(50);
    assert_eq!(corpus.len(), 50);
    for (i, src) in corpus.iter().enumerate() {
        let first = parse(src).unwrap_or_else(|e| panic!("program {i} does not parse: {e}\n{src}"));
        let printed = pretty_print(&first);
        let second = parse(&printed)
            .unwrap_or_else(|e| panic!("program {i} reprint does not parse: {e}\n{printed}"));
        assert!(
            first.structurally_eq(&second),
            "program {i} changed shape:\n{src}\n---\n{printed}"
        );
        assert_eq!(
            pretty_print(&second),
            printed,
            "program {i}: printing is not a fixed point"
        );
    }
}

#[test]
fn random_programs_are_varied() {
    let corpus = roundtrip_corpus(50);
    let distinct: std::collections::BTreeSet<&String> = corpus.iter().collect();
    assert_eq!(distinct.len(), 50);
    for construct in ["if ", "for ", "else", "not ", "\\\"", "return"] {
        assert!(
            corpus.iter().any(|p| p.contains(construct)),
            "no {construct:?} in corpus"
        );
    }
}
