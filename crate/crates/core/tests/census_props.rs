use std::collections::BTreeSet;
use std::sync::Arc;

use proptest::prelude::*;
use torclass_core::census::{class_keys, enumerate, CensusSpec, Dedup};
use torclass_core::classify::{canonical_form, Mode};
use torclass_core::faceposet::{shapes, FacePoset};

fn poset() -> impl Strategy<Value = (FacePoset, usize)> {
    prop_oneof![
        Just((shapes::simplex(2), 2)),
        Just((shapes::cube(2), 2)),
        Just((shapes::polygon(5), 2)),
        Just((shapes::simplex(3), 3)),
        Just((shapes::half_plane(), 2)),
    ]
}

fn dedup() -> impl Strategy<Value = (Dedup, Mode)> {
    prop_oneof![Just((Dedup::Strong, Mode::Strong)), Just((Dedup::Weak, Mode::Weak))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn deduplication_is_idempotent((p, k) in poset(), bound in 1i64..=2, (d, mode) in dedup()) {
        prop_assume!(bound == 1 || p.len() <= 9);
        prop_assume!(k == 2 || mode == Mode::Strong);
        let spec = CensusSpec::new(Arc::new(p), k, bound, d);
        let r = enumerate(&spec).unwrap();
        let all = enumerate(&CensusSpec { dedup: Dedup::None, ..spec.clone() }).unwrap();
        prop_assert_eq!(r.classes.iter().map(|c| c.size).sum::<usize>(), all.total_valid);
        // representatives are already pairwise inequivalent
        let reps: BTreeSet<String> =
            r.classes.iter().map(|c| canonical_form(&c.representative, mode).unwrap()).collect();
        prop_assert_eq!(reps.len(), r.classes.len());
        prop_assert_eq!(&reps, &class_keys(&r, mode).unwrap());
        // grouping every labeling again lands in the same classes
        let regrouped: BTreeSet<String> =
            all.classes.iter().map(|c| canonical_form(&c.representative, mode).unwrap()).collect();
        prop_assert_eq!(regrouped, reps);
    }

    #[test]
    fn results_do_not_depend_on_thread_count((p, k) in poset(), threads in 1usize..=4) {
        let spec = CensusSpec::new(Arc::new(p), k, 1, if k == 2 { Dedup::Weak } else { Dedup::Strong });
        let serial = enumerate(&CensusSpec { threads: Some(1), ..spec.clone() }).unwrap();
        let parallel = enumerate(&CensusSpec { threads: Some(threads), ..spec }).unwrap();
        prop_assert_eq!(serial, parallel);
    }
}
