//! Property tests for the numeric and parsing building blocks.

mod common;

use num_traits::Signed;
use pbtk::metrics::gini;
use pbtk::pbformat::{parse_pb, serialize};
use pbtk::rational::{parse_decimal, rat, ratio, to_f64, to_fixed, Rat};
use proptest::prelude::*;

proptest! {
    /// `to_fixed` agrees with float formatting away from rounding boundaries.
    #[test]
    fn fixed_formatting_tracks_floats(n in -10_000i64..10_000, d in 1i64..1000) {
        let r = ratio(n, d);
        let s = to_fixed(&r, 6);
        let parsed: f64 = s.parse().unwrap();
        // half-away-from-zero ties sit exactly 5e-7 away; allow float slack
        prop_assert!((parsed - to_f64(&r)).abs() <= 5.001e-7, "{s} vs {}", to_f64(&r));
    }

    /// Decimal literals parse to the exact rational they denote.
    #[test]
    fn decimal_parse_round_trip(int in 0u64..1_000_000, frac in 0u32..1_000_000) {
        let text = format!("{int}.{frac:06}");
        let r = parse_decimal(&text).unwrap();
        let expected = rat(int as i64) + ratio(frac as i64, 1_000_000);
        prop_assert_eq!(r, expected);
    }

    /// Gini is within [0, 1 - 1/n], scale-invariant, and zero on constants.
    #[test]
    fn gini_bounds_and_invariance(values in prop::collection::vec(0u32..1000, 1..40), scale in 1i64..50) {
        let u: Vec<Rat> = values.iter().map(|&v| rat(v as i64)).collect();
        let g = gini(&u);
        let n = u.len() as i64;
        prop_assert!(!g.is_negative());
        prop_assert!(g <= rat(1) - ratio(1, n));
        let scaled: Vec<Rat> = u.iter().map(|x| x * rat(scale)).collect();
        prop_assert_eq!(gini(&scaled), g);
    }

    #[test]
    fn gini_constant_vector_is_zero(v in 0u32..1000, n in 1usize..30) {
        let u = vec![rat(v as i64); n];
        prop_assert_eq!(gini(&u), rat(0));
    }

    /// Serialization round-trips files with arbitrary budgets and ballot
    /// permutations of the toy instance.
    #[test]
    fn toy_round_trips_under_budget_changes(budget in 1u64..1_000_000) {
        let text = common::TOY.replace("budget; 2500", &format!("budget; {budget}"));
        let parsed = parse_pb(&text, "toy").unwrap();
        let reparsed = parse_pb(&serialize(&parsed), "toy").unwrap();
        prop_assert_eq!(parsed, reparsed);
    }
}
