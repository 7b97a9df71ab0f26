use context_select::{
    select_adaptive, select_fixed_k, select_single, ContextCatalog, ContextRecord,
};
use proptest::prelude::*;

fn catalog_strategy() -> impl Strategy<Value = (ContextRecord, ContextCatalog)> {
    let dim = 3usize;
    let vector = prop::collection::vec(-5.0..5.0f64, dim..=dim)
        .prop_filter("avoid zero vectors", |v| v.iter().any(|x| x.abs() > 1e-3));
    (vector.clone(), prop::collection::vec(vector, 1..8)).prop_map(|(test, others)| {
        let test = ContextRecord::new("te", test).unwrap();
        let records = others
            .into_iter()
            .enumerate()
            .map(|(i, v)| ContextRecord::new(format!("c{i}"), v).unwrap());
        (test, ContextCatalog::new(records).unwrap())
    })
}

proptest! {
    #[test]
    fn fixed_k_of_one_equals_single((test, cat) in catalog_strategy()) {
        prop_assert_eq!(
            select_fixed_k(&test, &cat, 1).unwrap(),
            vec![select_single(&test, &cat).unwrap()]
        );
    }

    #[test]
    fn adaptive_is_monotone_in_epsilon((test, cat) in catalog_strategy(),
                                       e1 in 0.0..2.0f64, e2 in 0.0..2.0f64) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let small = select_adaptive(&test, &cat, lo).unwrap();
        let large = select_adaptive(&test, &cat, hi).unwrap();
        // The fallback result is a singleton, which any larger threshold covers.
        prop_assert!(small.ids.len() <= large.ids.len().max(1));
        if !small.fell_back {
            for id in &small.ids {
                prop_assert!(large.ids.contains(id));
            }
        }
    }

    #[test]
    fn selection_is_insensitive_to_insertion_order((test, cat) in catalog_strategy()) {
        // Rebuild the catalog from reversed records; output must not change.
        let mut records: Vec<ContextRecord> = cat.records().cloned().collect();
        records.reverse();
        let reversed = ContextCatalog::new(records).unwrap();
        prop_assert_eq!(
            select_single(&test, &cat).unwrap(),
            select_single(&test, &reversed).unwrap()
        );
        let k = cat.len();
        prop_assert_eq!(
            select_fixed_k(&test, &cat, k).unwrap(),
            select_fixed_k(&test, &reversed, k).unwrap()
        );
    }
}
