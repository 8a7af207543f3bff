use induction_core::corpus::{generate_taxonomic_bank, jaccard_similarity, BeliefBank, Taxonomy, TaxonomySpec};
use proptest::prelude::*;

fn spec() -> impl Strategy<Value = TaxonomySpec> {
    (2usize..4, 1usize..4, 1usize..4, any::<u64>()).prop_filter_map("too large", |(branching, depth, props, seed)| {
        let spec = TaxonomySpec {
            branching,
            depth,
            props_per_node: props,
            cross_cutting_props: 0,
            seed,
            ..TaxonomySpec::default()
        };
        (spec.leaf_count()? <= 27).then_some(spec)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn jaccard_strictly_decreases_with_tree_distance(spec in spec()) {
        let generated = generate_taxonomic_bank(&spec);
        // small worlds may have too few unlinked pairs for the negatives
        prop_assume!(generated.is_ok());
        let (bank, tax) = generated.unwrap();
        let mut seen: Vec<(usize, f64)> = Vec::new();
        for a in bank.concept_ids() {
            for b in bank.concept_ids() {
                seen.push((tax.tree_distance(a, b).unwrap(), jaccard_similarity(&bank, a, b).unwrap()));
            }
        }
        for &(d1, s1) in &seen {
            for &(d2, s2) in &seen {
                if d1 < d2 {
                    prop_assert!(s1 > s2, "distance {d1} -> {s1}, distance {d2} -> {s2}");
                } else if d1 == d2 {
                    prop_assert_eq!(s1, s2);
                }
            }
        }
    }

    #[test]
    fn regeneration_and_round_trip(spec in spec(), coverage in 0.3f64..0.7) {
        let spec = TaxonomySpec { cross_cutting_props: 2, cross_cutting_coverage: coverage, ..spec };
        let generated = generate_taxonomic_bank(&spec);
        prop_assume!(generated.is_ok());
        let (bank, tax) = generated.unwrap();
        let (again, tax_again) = generate_taxonomic_bank(&spec).unwrap();
        prop_assert_eq!(bank.to_text(), again.to_text());
        prop_assert_eq!(tax.to_text(), tax_again.to_text());

        let parsed = BeliefBank::parse(&bank.to_text()).unwrap();
        prop_assert_eq!(&parsed, &bank);
        let parsed_tax = Taxonomy::parse(&tax.to_text(), bank.num_concepts()).unwrap();
        prop_assert_eq!(parsed_tax.to_text(), tax.to_text());
    }
}
