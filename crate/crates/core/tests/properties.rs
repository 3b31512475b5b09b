//! Randomized invariants for the serialization and corpus layers.

use nalgebra::DMatrix;
use proptest::prelude::*;

use eigenwords::corpus::{build_vocabulary, decode, encode, tokenize};
use eigenwords::dictionary::{
    export_tsv, import_tsv, DictionaryMetadata, EigenwordDictionary,
};

fn word() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["ash", "birch", "cedar", "dune", "elm", "fir", "gorse", "hazel"])
        .prop_map(str::to_string)
}

fn sentences() -> impl Strategy<Value = Vec<Vec<String>>> {
    prop::collection::vec(prop::collection::vec(word(), 1..12), 1..20)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn encode_decode_roundtrip(sents in sentences()) {
        let vocab = build_vocabulary(&sents, 1, 10_000).unwrap();
        let stream = encode(&sents, &vocab);
        prop_assert_eq!(stream.n, sents.iter().map(Vec::len).sum::<usize>());
        let back = decode(&stream, &vocab);
        prop_assert_eq!(back, sents);
    }

    #[test]
    fn tokenize_is_whitespace_normal(sents in sentences()) {
        // rendering with arbitrary runs of spaces re-tokenizes to the same
        // sentences
        let text: String = sents
            .iter()
            .map(|s| s.join("  "))
            .collect::<Vec<_>>()
            .join("\n");
        prop_assert_eq!(tokenize(&text), sents);
    }

    #[test]
    fn dictionary_tsv_roundtrip(
        v in 1usize..12,
        k in 1usize..5,
        seed in any::<u64>(),
        values in prop::collection::vec(-1e6f64..1e6, 60),
    ) {
        let words: Vec<String> = (0..v).map(|i| format!("w{i}")).collect();
        let dict = EigenwordDictionary {
            matrix: DMatrix::from_fn(v, k, |i, j| values[(i * k + j) % values.len()]),
            words,
            meta: DictionaryMetadata {
                method: "oscca".into(),
                h: 1,
                k1: None,
                ridge: 1e-3,
                scaling: "sqrt".into(),
                seed,
                n: 100,
                normalized: false,
                rho: vec![0.0; k],
                rho_step1: None,
            },
        };
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("d.tsv");
        export_tsv(&dict, &path).unwrap();
        let back = import_tsv(&path).unwrap();
        prop_assert_eq!(&back.words, &dict.words);
        prop_assert_eq!(&back.matrix, &dict.matrix);
        prop_assert_eq!(back.meta.seed, seed);
        // re-export is byte-identical: the float formatting is stable
        let path2 = tmp.path().join("d2.tsv");
        export_tsv(&back, &path2).unwrap();
        prop_assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }
}
