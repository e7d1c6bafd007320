//! Invariants over generated instances.

use proptest::prelude::*;

use copyfair::app::io::{parse_instance, serialize_instance};
use copyfair::app::pipeline::pipeline_allocate;
use copyfair::conditions::{chores_inequality_slack, ef_condition_goods, function_lower_bound_slack, tefx_condition};
use copyfair::fairness::{fractional_gap_report, gap_report};
use copyfair::frobenius::decompose;
use copyfair::greedy::greedy_allocate;
use copyfair::lp::{build_gap_lp, solve, sparsify_to_vertex};
use copyfair::mechanisms::{log_relative_norm, relative_norm};
use copyfair::norms::{normalize_all, Norm};
use copyfair::{Instance, Kind, Rational};

fn instance(kind: Kind, max_groups: usize, max_types: usize) -> impl Strategy<Value = Instance> {
    (1..=max_groups, 1..=max_types).prop_flat_map(move |(d, t)| {
        (
            prop::collection::vec(1u64..=4, d),
            prop::collection::vec(1u64..=30, t),
            prop::collection::vec(prop::collection::vec(1i64..=50, t), d),
        )
            .prop_map(move |(sizes, copies, rows)| Instance::from_integers(sizes, copies, &rows, kind).unwrap())
    })
}

fn scaled(inst: &Instance, factor: i64) -> Instance {
    let values = inst
        .values()
        .iter()
        .map(|row| row.iter().map(|v| v * Rational::from_integer(factor.into())).collect())
        .collect();
    Instance::new(inst.group_sizes().to_vec(), inst.type_copies().to_vec(), values, inst.kind()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_rows_have_unit_norm(inst in instance(Kind::Goods, 4, 6)) {
        let copies: Vec<f64> = inst.type_copies().iter().map(|&k| k as f64).collect();
        for row in normalize_all(&inst, Norm::L2).unwrap() {
            let norm: f64 = row.iter().zip(&copies).map(|(v, k)| k * v * v).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        for row in normalize_all(&inst, Norm::L1).unwrap() {
            let norm: f64 = row.iter().zip(&copies).map(|(v, k)| k * v).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn conditions_ignore_value_scale(inst in instance(Kind::Goods, 3, 4), factor in 2i64..=1000) {
        let a = ef_condition_goods(&inst).unwrap();
        let b = ef_condition_goods(&scaled(&inst, factor)).unwrap();
        prop_assert!((a.lhs - b.lhs).abs() <= 1e-12);
        prop_assert_eq!(a.satisfied, b.satisfied);
    }

    #[test]
    fn mechanisms_are_feasible_and_meet_their_bounds(goods in instance(Kind::Goods, 4, 5), chores in instance(Kind::Chores, 4, 5)) {
        for (inst, out) in [(&goods, relative_norm(&goods).unwrap()), (&chores, log_relative_norm(&chores).unwrap())] {
            prop_assert!(out.allocation.feasibility_residual(inst) < 1e-9);
            let gaps = fractional_gap_report(inst, &out.allocation).unwrap();
            for i in 0..inst.groups() {
                for other in 0..inst.groups() {
                    if i != other {
                        prop_assert!(gaps.pair_gaps[i][other] >= out.analytic_bounds[i][other] - 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn sparse_vertices_are_complete(inst in instance(Kind::Goods, 3, 4)) {
        let gap = build_gap_lp(&inst).unwrap();
        let sol = solve(&gap.lp).unwrap();
        prop_assert!(sol.certified());
        let sparse = sparsify_to_vertex(&gap, &sol, &inst).unwrap();
        prop_assert!(sparse.positive_variables <= inst.types() + inst.groups() * (inst.groups() - 1));
        prop_assert!(sparse.allocation.feasibility_residual(&inst) < 1e-6);
    }

    #[test]
    fn pipeline_allocations_are_complete_and_uniform(inst in instance(Kind::Goods, 3, 3), chores in instance(Kind::Chores, 3, 3)) {
        for base in [inst, chores] {
            // enough copies for every precondition: a multiple of every size
            // past the representation threshold
            let k = 12 * 60;
            let inst = base.with_copies(vec![k; base.types()]).unwrap();
            let out = pipeline_allocate(&inst, false).unwrap();
            out.allocation.check_complete(&inst).unwrap();
            prop_assert!(out.trace.mass_conserved);
            prop_assert!(out.trace.within_adjusted_bound());
            // the stored gaps agree with a fresh exact evaluation
            prop_assert_eq!(gap_report(&inst, &out.allocation).unwrap().min_gap, out.gaps.min_gap.clone());
        }
    }

    #[test]
    fn decompositions_add_up(sizes in prop::collection::vec(1u64..=12, 1..=3), k in 0u64..=300) {
        if let Some(dec) = decompose(&sizes, k) {
            prop_assert_eq!(dec.total(&sizes), k);
        }
    }

    #[test]
    fn greedy_gives_every_item_once(rows in prop::collection::vec(prop::collection::vec(1i64..=100, 8), 2..=4)) {
        let n = rows.len();
        let inst = Instance::from_integers(vec![1; n], vec![1; 8], &rows, Kind::Goods).unwrap();
        let (alloc, trace) = greedy_allocate(&inst).unwrap();
        alloc.check_complete(&inst).unwrap();
        prop_assert_eq!(trace.order.len(), 8);
        let _ = tefx_condition(&inst).unwrap();
    }

    #[test]
    fn instances_round_trip(inst in instance(Kind::Chores, 4, 5)) {
        let text = serialize_instance(&inst);
        let back = parse_instance(&text).unwrap();
        prop_assert_eq!(back.values(), inst.values());
        prop_assert_eq!(back.group_sizes(), inst.group_sizes());
        prop_assert_eq!(back.type_copies(), inst.type_copies());
        prop_assert_eq!(serialize_instance(&back), text);
    }

    #[test]
    fn function_bound_holds_up_to_unit_distance(a in 0.0f64..10.0, b in 0.01f64..=1.0, offset in 1e-3f64..1e3) {
        let x = a * (b + 1.0) / (2.0 * b) + offset;
        prop_assert!(function_lower_bound_slack(x, a, b) >= -1e-9 * (1.0 + x));
    }

    #[test]
    fn chores_inequality_holds(x in 1e-3f64..1e3, a in 0.0f64..10.0, b in 1e-3f64..10.0, c in 0.0f64..10.0) {
        prop_assert!(chores_inequality_slack(x, a, b, c) >= -1e-9);
    }
}
