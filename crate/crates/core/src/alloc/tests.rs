// Copyright (c) 2026 The upbw Authors.
// SPDX-License-Identifier: Apache-2.0

use super::verify::{check_agreement, has_unimodal_shape};
use super::*;
use proptest::prelude::*;

fn inst(s: &[i64], p: &[i64]) -> AllocationInstance {
    AllocationInstance::new(s.to_vec(), p.to_vec()).unwrap()
}

#[test]
fn greedy_examples() {
    let a = inst(&[2, 0, 2], &[2, 2, 0]);
    let r = greedy_algo(&a, 0).unwrap();
    assert_eq!(r.total, 4);
    assert_eq!(r.own, vec![0, 0, 0]);
    assert_eq!(r.next, vec![2, 0, 2]);
    assert_eq!(greedy_algo(&a, 2).unwrap().total, 2);
    let sym = inst(&[5, 5, 5], &[5, 5, 5]);
    for x in 0..=5 {
        let r = greedy_algo(&sym, x).unwrap();
        assert_eq!(r.total, 15);
        assert!(r.is_feasible(&sym));
    }
    assert_eq!(
        greedy_algo(&a, 3),
        Err(AllocError::XOutOfRange { x: 3, xmax: 2 })
    );
    assert!(greedy_algo(&a, -1).is_err());
}

#[test]
fn greedy_explicit_vectors() {
    let r = greedy_algo(&inst(&[2, 0], &[3, 1]), 1).unwrap();
    assert_eq!(r.own, vec![1, 0]);
    assert_eq!(r.next, vec![1, 0]);
    assert_eq!(r.total, 2);
    assert_eq!(r.salloc(0), 2);
    assert_eq!(r.palloc(1), 1);
}

#[test]
fn oracle_examples() {
    assert_eq!(brute_force_oracle(&inst(&[0, 0, 0], &[3, 4, 1]), 0), Ok(0));
    assert_eq!(brute_force_oracle(&inst(&[2, 0], &[3, 1]), 1), Ok(2));
    let big = inst(&[100; 4], &[100; 4]);
    assert!(matches!(
        brute_force_oracle(&big, 0),
        Err(AllocError::TooLarge { .. })
    ));
}

#[test]
fn naive_examples() {
    assert_eq!(rsum_naive(&inst(&[2, 0], &[3, 1])), vec![1, 2, 2]);
    assert_eq!(rsum_naive(&inst(&[2, 0, 2], &[2, 2, 0])), vec![4, 3, 2]);
    assert_eq!(rsum_naive(&inst(&[0, 3], &[4, 4])).len(), 1);
}

#[test]
fn fg_examples() {
    let fg = compute_fg(&inst(&[2, 0], &[3, 1])).unwrap();
    assert_eq!(fg.f[0].runs(), &[(0, 1)]);
    assert_eq!(fg.f[0].values(), vec![0, 1, 2]);
    // g(1, x) = min(2 - x, 1).
    assert_eq!(fg.g[1].values(), vec![1, 1, 0]);
    assert_eq!(fg.g[1].g_shape(), GShape { c: 1, d: 2, v1: 1, v2: 0, tail: None });

    let no_demand = compute_fg(&inst(&[3, 2, 5], &[0, 0, 0])).unwrap();
    for h in no_demand.f.iter().chain(&no_demand.g) {
        assert_eq!(h.values(), vec![0]);
    }
    let fg = compute_fg(&inst(&[4, 1, 3], &[4, 0, 0])).unwrap();
    for h in fg.f.iter().skip(1).chain(&fg.g[1..]) {
        assert!(h.values().iter().all(|&v| v == 0));
    }
    assert_eq!(fg.f[0].values(), vec![0, 1, 2, 3, 4]);
}

#[test]
fn f_shape_parameters() {
    let h = PiecewiseUnitFn::constant(6, 2).min(&PiecewiseUnitFn::linear(6, -1, 1));
    // min(2, x - 1): rises on [0, 3], flat after.
    assert_eq!(h.values(), vec![-1, 0, 1, 2, 2, 2, 2]);
    assert_eq!(h.f_shape(), FShape { a: 0, b: 3, v1: -1, v2: 2 });
    let flat = PiecewiseUnitFn::constant(4, 7);
    assert_eq!(flat.f_shape(), FShape { a: 4, b: 4, v1: 7, v2: 7 });
}

#[test]
fn min_across_half_integer_crossing() {
    let up = PiecewiseUnitFn::linear(3, 0, 1);
    let down = PiecewiseUnitFn::linear(3, 3, -1);
    assert_eq!(up.min(&down).values(), vec![0, 1, 1, 0]);
}

#[test]
fn sweep_examples() {
    assert_eq!(rsum_sweep(&inst(&[2, 0, 2], &[2, 2, 0])).unwrap(), vec![4, 3, 2]);
    let flat = inst(&[0, 3, 1], &[5, 2, 2]);
    assert_eq!(rsum_sweep(&flat).unwrap(), rsum_naive(&flat));
    assert_eq!(rsum_sweep(&flat).unwrap().len(), 1);
}

#[test]
fn closed_form_examples() {
    let p = rsum_closed_form(&inst(&[2, 0], &[3, 1]));
    assert_eq!((p.y1, p.y2, p.xmax), (1, 2, 2));
    assert_eq!((p.x1, p.x2, p.d1, p.d2), (1, 2, 0, 0));
    assert_eq!((p.rise_end, p.plateau_end), (1, 2));
    assert_eq!(p.expand(), vec![1, 2, 2]);

    let p = rsum_closed_form(&inst(&[2, 0, 2], &[2, 2, 0]));
    assert_eq!((p.y1, p.y2, p.xmax), (4, 2, 2));
    assert_eq!((p.x1, p.x2, p.d1, p.d2), (0, 0, 0, 0));
    assert_eq!(p.expand(), vec![4, 3, 2]);

    let p = rsum_closed_form(&inst(&[0, 9], &[7, 7]));
    assert_eq!(p.expand(), vec![p.y1]);
}

#[test]
fn max_examples() {
    assert_eq!(rsum_max(&inst(&[2, 0, 2], &[2, 2, 0])), (0, 4));
    assert_eq!(rsum_max(&inst(&[2, 0], &[3, 1])), (1, 2));
    assert_eq!(rsum_max(&inst(&[0, 0, 0], &[1, 2, 3])), (0, 0));
}

#[test]
fn rejects_bad_instances() {
    assert_eq!(
        AllocationInstance::new(vec![1], vec![1]),
        Err(AllocError::TooFewNodes(1))
    );
    assert!(matches!(
        AllocationInstance::new(vec![1, 2], vec![1]),
        Err(AllocError::LengthMismatch { .. })
    ));
    assert!(matches!(
        AllocationInstance::new(vec![1, -2], vec![1, 1]),
        Err(AllocError::Negative { which: 'S', index: 1, .. })
    ));
}

#[test]
fn parse_text_format() {
    let a: AllocationInstance = "# ring\nS: 2 0 2\nP: [2, 2, 0]\n".parse().unwrap();
    assert_eq!(a, inst(&[2, 0, 2], &[2, 2, 0]));
    assert_eq!(a.to_string().parse::<AllocationInstance>().unwrap(), a);
    assert!("S: 1 2".parse::<AllocationInstance>().is_err());
    assert!("S: 1\nP: 1".parse::<AllocationInstance>().is_err());
    assert!("S: 1 x\nP: 1 2".parse::<AllocationInstance>().is_err());
    assert!("Q: 1 2\nP: 1 2".parse::<AllocationInstance>().is_err());
}

#[test]
fn shape_helper() {
    assert!(has_unimodal_shape(&[1, 2, 2, 1]));
    assert!(has_unimodal_shape(&[5]));
    assert!(!has_unimodal_shape(&[1, 0, 1]));
    assert!(!has_unimodal_shape(&[0, 2]));
}

fn small_instance(max_n: usize, max_entry: i64) -> impl Strategy<Value = AllocationInstance> {
    (2..=max_n).prop_flat_map(move |n| {
        (
            prop::collection::vec(0..=max_entry, n),
            prop::collection::vec(0..=max_entry, n),
        )
            .prop_map(|(s, p)| AllocationInstance::new(s, p).unwrap())
    })
}

proptest! {
    #[test]
    fn greedy_is_feasible(inst in small_instance(12, 40)) {
        for x in 0..=inst.xmax() {
            let r = greedy_algo(&inst, x).unwrap();
            prop_assert!(r.is_feasible(&inst));
            prop_assert_eq!(r.own[0], x);
        }
    }

    #[test]
    fn greedy_matches_oracle(inst in small_instance(4, 4)) {
        for x in 0..=inst.xmax() {
            prop_assert_eq!(greedy_algo(&inst, x).unwrap().total, brute_force_oracle(&inst, x).unwrap());
        }
    }

    #[test]
    fn algorithms_agree(inst in small_instance(30, 30)) {
        prop_assert_eq!(check_agreement(&inst), None);
    }

    #[test]
    fn max_is_the_table_maximum(inst in small_instance(20, 25)) {
        let table = rsum_naive(&inst);
        let (x, v) = rsum_max(&inst);
        let best = *table.iter().max().unwrap();
        prop_assert_eq!(v, best);
        prop_assert_eq!(x as usize, table.iter().position(|&t| t == best).unwrap());
    }
}

#[test]
fn small_sweeps_are_clean_in_both_modes() {
    use crate::exec::Execution;
    use super::verify::{agreement_sweep, exhaustive_oracle_sweep, sampled_oracle_sweep};
    let seq = exhaustive_oracle_sweep(2, 2, Execution::Sequential);
    assert_eq!(seq.instances, 81);
    assert!(seq.clean());
    assert_eq!(seq, exhaustive_oracle_sweep(2, 2, Execution::Parallel));
    let sampled = sampled_oracle_sweep(3, 3, 50, 9, Execution::Parallel);
    assert!(sampled.clean());
    assert_eq!(sampled, sampled_oracle_sweep(3, 3, 50, 9, Execution::Sequential));
    let a = agreement_sweep(200, 20, 15, 4, Execution::Parallel);
    assert!(a.failures.is_empty());
    assert_eq!(a, agreement_sweep(200, 20, 15, 4, Execution::Sequential));
}
