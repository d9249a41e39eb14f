use proptest::prelude::*;

use povsent::Sentiment;
use povsent_modelio::{parse_label, ParseFailure};

const FILLER: &str = "[a-mo-z ,.!:]{0,15}";

proptest! {
    #[test]
    fn single_label_word_parses(pre in FILLER, post in FILLER, idx in 0usize..3, upper in any::<bool>()) {
        let s = Sentiment::from_index(idx).unwrap();
        let word = if upper { s.as_str().to_uppercase() } else { s.as_str().to_string() };
        let raw = format!("{pre} {word} {post}");
        prop_assert_eq!(parse_label(&raw), Ok(s));
    }

    #[test]
    fn two_distinct_labels_fail(a in 0usize..3, b in 0usize..3, mid in FILLER) {
        prop_assume!(a != b);
        let raw = format!("{} {mid} {}", Sentiment::from_index(a).unwrap(), Sentiment::from_index(b).unwrap());
        prop_assert!(matches!(parse_label(&raw), Err(ParseFailure::Ambiguous(_))));
    }
}
