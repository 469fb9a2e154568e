use efrb_core::policy::{matches, parse_policy, AttributeSet, Policy};
use proptest::prelude::*;

const ALPHABET: [&str; 6] = ["Teacher", "Student", "Salesman", "and", "pk:ab", "x y"];

/// Reference formula, evaluated directly and printed fully parenthesized.
#[derive(Debug, Clone)]
enum F {
    Atom(usize),
    And(Vec<F>),
    Or(Vec<F>),
}

impl F {
    fn eval(&self, set: &[bool; 6]) -> bool {
        match self {
            F::Atom(i) => set[*i],
            F::And(c) => c.iter().all(|f| f.eval(set)),
            F::Or(c) => c.iter().any(|f| f.eval(set)),
        }
    }

    fn text(&self) -> String {
        let join = |c: &[F], op: &str| {
            let parts: Vec<_> = c.iter().map(|f| format!("({})", f.text())).collect();
            parts.join(op)
        };
        match self {
            F::Atom(i) => format!("\"{}\"", ALPHABET[*i]),
            F::And(c) => join(c, " AND "),
            F::Or(c) => join(c, " or "),
        }
    }
}

fn formula() -> impl Strategy<Value = F> {
    (0usize..6).prop_map(F::Atom).prop_recursive(4, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(F::And),
            prop::collection::vec(inner, 1..4).prop_map(F::Or),
        ]
    })
}

fn to_set(bits: &[bool; 6]) -> AttributeSet {
    AttributeSet::new(ALPHABET.iter().zip(bits).filter(|(_, b)| **b).map(|(a, _)| *a)).unwrap()
}

fn all_sets() -> impl Iterator<Item = [bool; 6]> {
    (0u32..64).map(|m| std::array::from_fn(|i| m >> i & 1 == 1))
}

proptest! {
    #[test]
    fn truth_table_matches_reference(f in formula()) {
        let p = parse_policy(&f.text()).unwrap();
        for bits in all_sets() {
            prop_assert_eq!(matches(&p, &to_set(&bits)), f.eval(&bits), "{}", f.text());
        }
    }

    #[test]
    fn canonical_text_round_trips(f in formula()) {
        let p = parse_policy(&f.text()).unwrap();
        let again = parse_policy(p.canonical_text()).unwrap();
        prop_assert_eq!(again.canonical_text(), p.canonical_text());
        prop_assert_eq!(&again, &p);
        let json = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<Policy>(&json).unwrap(), p);
    }

    #[test]
    fn monotone(f in formula(), a in 0u32..64, b in 0u32..64) {
        let p = parse_policy(&f.text()).unwrap();
        let small: [bool; 6] = std::array::from_fn(|i| a >> i & 1 == 1);
        let big: [bool; 6] = std::array::from_fn(|i| (a | b) >> i & 1 == 1);
        if matches(&p, &to_set(&small)) {
            prop_assert!(matches(&p, &to_set(&big)));
        }
    }
}
