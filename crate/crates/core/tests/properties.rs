use std::collections::BTreeMap;

use gasperlab_core::analytics::{self, BoundForm};
use gasperlab_core::committees::Committees;
use gasperlab_core::fork_choice;
use gasperlab_core::fuzz::random_view;
use gasperlab_core::slashing::{self, ValidatorSetDiff};
use gasperlab_core::{ffg, snapshot, *};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn view_from_seed(seed: u64) -> View {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_view(&mut rng, 20, 60)
}

fn messages(v: &View) -> Vec<Message> {
    v.acceptance_order().iter().map(|id| v.message(*id).unwrap()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delivery_order_does_not_matter(seed in any::<u64>(), shuffle in any::<u64>()) {
        let v = view_from_seed(seed);
        let mut msgs = messages(&v);
        msgs.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let mut w = View::empty(v.slots_per_epoch(), v.validators().clone());
        w.deliver_all(msgs);
        prop_assert_eq!(w.pending_count(), 0);
        prop_assert!(w.blocks().map(|b| b.id).eq(v.blocks().map(|b| b.id)));
        prop_assert!(w.attestations().map(|a| a.id).eq(v.attestations().map(|a| a.id)));
        prop_assert_eq!(ffg::justified(&w), ffg::justified(&v));
        prop_assert_eq!(ffg::finalized(&w), ffg::finalized(&v));
        prop_assert_eq!(fork_choice::hlmd(&w), fork_choice::hlmd(&v));
    }

    #[test]
    fn accepted_messages_have_accepted_dependencies(seed in any::<u64>(), keep in 0.0f64..1.0) {
        let v = view_from_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x55);
        let mut msgs: Vec<Message> = messages(&v).into_iter().filter(|_| rand::Rng::random_bool(&mut rng, keep)).collect();
        msgs.shuffle(&mut rng);
        let mut w = View::empty(v.slots_per_epoch(), v.validators().clone());
        w.deliver_all(msgs);
        for id in w.acceptance_order() {
            for d in w.message(*id).unwrap().dependencies() {
                prop_assert!(w.is_accepted(d));
            }
        }
        for m in w.pending() {
            prop_assert!(m.dependencies().iter().any(|d| !w.is_accepted(*d)));
        }
    }

    #[test]
    fn boundary_blocks_move_forward(seed in any::<u64>()) {
        let v = view_from_seed(seed);
        for b in v.blocks() {
            let mut last = 0;
            for j in 0..12 {
                let p = v.ebb(b.id, j).unwrap();
                let s = v.block(p.block).unwrap().slot;
                prop_assert!(s >= last && s <= j * v.slots_per_epoch());
                prop_assert!(v.is_ancestor(p.block, b.id).unwrap());
                last = s;
            }
        }
    }

    #[test]
    fn justified_and_finalized_only_grow(seed in any::<u64>()) {
        let v = view_from_seed(seed);
        let msgs = messages(&v);
        let mut w = View::empty(v.slots_per_epoch(), v.validators().clone());
        let (mut j, mut f) = (ffg::justified(&w), ffg::finalized(&w));
        for m in msgs {
            w.deliver(m).unwrap();
            let (j2, f2) = (ffg::justified(&w), ffg::finalized(&w));
            prop_assert!(j.is_subset(&j2));
            prop_assert!(f.is_subset(&f2));
            prop_assert!(f2.is_subset(&j2));
            j = j2;
            f = f2;
        }
    }

    #[test]
    fn slashing_check_is_symmetric(
        s1 in 0u64..6, d1 in 1u64..6, s2 in 0u64..6, d2 in 1u64..6, off1 in 0u64..4, off2 in 0u64..4,
    ) {
        let c = 4;
        let mk = |s: u64, t: u64, off: u64| Attestation::new(
            ValidatorId(0),
            t * c + off,
            BlockId(100 + t * c + off),
            CheckpointPair::new(BlockId(s + 1), s),
            CheckpointPair::new(BlockId(t + 1), t),
        );
        let a = mk(s1, s1 + d1, off1);
        let b = mk(s2, s2 + d2, off2);
        let ab = slashing::check_pair(&a, &b, c).unwrap();
        prop_assert_eq!(ab, slashing::check_pair(&b, &a, c).unwrap());
        let surround = (s1 < s2 && s2 + d2 < s1 + d1) || (s2 < s1 && s1 + d1 < s2 + d2);
        let expect = if a.id == b.id {
            None
        } else if s1 + d1 == s2 + d2 {
            Some(slashing::ViolationKind::S1)
        } else if surround {
            Some(slashing::ViolationKind::S2)
        } else {
            None
        };
        prop_assert_eq!(ab, expect);
    }

    #[test]
    fn tight_bound_dominates_weak(log_c in 1u32..8, s in 50.0f64..2000.0, eps in 1.0f64..60.0) {
        let c = 1u64 << log_c;
        let t = analytics::justification_event_bound(c, s, eps, BoundForm::Tight).unwrap();
        let w = analytics::justification_event_bound(c, s, eps, BoundForm::Weak).unwrap();
        prop_assert!(t >= w - 1e-15);
    }

    #[test]
    fn no_finalization_shrinks_with_more_epochs(n in 1u32..200, p in 0.0f64..=1.0) {
        let a = analytics::no_finalization_prob(n, p).unwrap();
        let b = analytics::no_finalization_prob(n + 1, p).unwrap();
        prop_assert!(b <= a + 1e-12);
        let dp = analytics::no_finalization_prob_dp(n, p).unwrap();
        prop_assert!((a - dp).abs() <= 1e-12 * a.max(1e-300) + 1e-15);
    }

    #[test]
    fn dynamic_bound_dominates_linear_combination(
        base in prop::collection::btree_map(0u32..40, 0.1f64..5.0, 1..30),
        adds_l in prop::collection::btree_map(40u32..60, 0.1f64..5.0, 0..8),
        adds_r in prop::collection::btree_map(60u32..80, 0.1f64..5.0, 0..8),
        drop_l in prop::collection::vec(0u32..40, 0..8),
        drop_r in prop::collection::vec(0u32..40, 0..8),
    ) {
        let base: BTreeMap<ValidatorId, f64> = base.into_iter().map(|(k, v)| (ValidatorId(k), v)).collect();
        let side = |adds: &BTreeMap<u32, f64>, drops: &[u32]| {
            let mut s = base.clone();
            for d in drops { s.remove(&ValidatorId(*d)); }
            for (k, v) in adds { s.insert(ValidatorId(*k), *v); }
            s
        };
        let d = ValidatorSetDiff::from_sets(&base, &side(&adds_l, &drop_l), &side(&adds_r, &drop_r));
        prop_assert!(slashing::dynamic_safety_bound(&d) >= slashing::linear_combination_bound(&d) - 1e-9);
    }

    #[test]
    fn committees_partition(n_per in 1usize..12, log_c in 0u32..4, seed in any::<u64>(), epoch in 0u64..1000) {
        let c = 1u64 << log_c;
        let n = n_per * c as usize;
        let com = Committees::seeded(n, c, seed).unwrap();
        let mut seen = vec![false; n];
        for k in 0..c {
            for v in com.committee(epoch, k).unwrap() {
                prop_assert!(!seen[v.0 as usize]);
                seen[v.0 as usize] = true;
            }
        }
        prop_assert!(seen.iter().all(|x| *x));
    }

    #[test]
    fn snapshot_round_trips(seed in any::<u64>(), keep in 0.2f64..1.0, clock in prop::option::of(0.0f64..30.0)) {
        let v = view_from_seed(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = View::empty(v.slots_per_epoch(), v.validators().clone());
        if let Some(t) = clock { w = w.with_clock(t); }
        let mut msgs: Vec<Message> = messages(&v).into_iter().filter(|_| rand::Rng::random_bool(&mut rng, keep)).collect();
        msgs.shuffle(&mut rng);
        w.deliver_all(msgs);
        let text = snapshot::export(&w);
        let back = snapshot::import(&text).unwrap();
        prop_assert_eq!(snapshot::export(&back), text);
    }

    #[test]
    fn memoized_weights_match_direct_sums(seed in any::<u64>()) {
        let v = view_from_seed(seed);
        let m = fork_choice::latest_messages(&v);
        let all = fork_choice::subtree_weights(&v, &m);
        for b in v.blocks() {
            prop_assert_eq!(all[&b.id].to_bits(), fork_choice::ghost_weight(&v, b.id, &m).unwrap().to_bits());
        }
    }
}
