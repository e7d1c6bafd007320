//! Worked examples checked against hand-computed values.

use copyfair::app::io::parse_instance;
use copyfair::app::pipeline::pipeline_allocate;
use copyfair::cake::{run_protocol, CakeOracle, PiecewiseLinearDensity, ProtocolParams};
use copyfair::conditions::{
    cake_epsilon, ef_condition_goods, mu_bound_chores, mu_bound_goods, prop_condition, tefx_condition,
};
use copyfair::divergence::{divergence, Divergence};
use copyfair::fairness::{gap_report, is_efx, verify, Notion, Witness};
use copyfair::frobenius::{decompose, is_representable};
use copyfair::greedy::greedy_allocate;
use copyfair::lp::{build_gap_lp, solve, solve_prop, sparsify_to_vertex};
use copyfair::mechanisms::trading_post;
use copyfair::norms::{normalize, thresholds, Norm};
use copyfair::rounding::{round_envy, round_proportional};
use copyfair::{FractionalAllocation, Instance, IntegralAllocation, Kind, Rational};

fn int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

fn orthogonal(copies: u64) -> Instance {
    Instance::from_integers(vec![1, 1], vec![copies, copies], &[vec![1, 0], vec![0, 1]], Kind::Goods).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn normalization_by_hand() {
    let inst = Instance::from_integers(vec![1], vec![1, 1], &[vec![3, 4]], Kind::Goods).unwrap();
    let row = normalize(&inst, 0, Norm::L2).unwrap();
    assert!(close(row[0], 0.6, 1e-15) && close(row[1], 0.8, 1e-15));

    // copy-weighted l1 norm is 3*2 + 1*2 = 8
    let inst = Instance::from_integers(vec![1], vec![3, 1], &[vec![2, 2]], Kind::Goods).unwrap();
    assert_eq!(normalize(&inst, 0, Norm::L1).unwrap(), vec![0.25, 0.25]);
}

#[test]
fn divergences_by_formula() {
    assert!(close(divergence(Divergence::ChiSquared, &[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0, 1e-15));
    assert!(close(
        divergence(Divergence::TotalVariation, &[0.5, 0.5], &[0.25, 0.75]).unwrap(),
        0.25,
        1e-15
    ));
}

#[test]
fn representation_thresholds() {
    let t = thresholds(&[5, 7]).unwrap();
    assert_eq!((t.g, t.theta), (1, 24));
    let t = thresholds(&[4, 6]).unwrap();
    assert_eq!((t.g, t.theta), (2, 4));
}

#[test]
fn coin_change_examples() {
    assert_eq!(decompose(&[5, 7], 24).unwrap().coefficients, vec![2, 2]);
    assert!(decompose(&[3], 7).is_none());
    assert_eq!(decompose(&[3], 9).unwrap().coefficients, vec![3]);
    assert!(!is_representable(&[5, 7], 23));
    assert!(is_representable(&[5, 7], 24));
}

#[test]
fn identity_allocation_gap_and_strong_envy_freeness() {
    let inst = orthogonal(1);
    let identity = IntegralAllocation::new(vec![vec![1, 0], vec![0, 1]]);
    assert_eq!(gap_report(&inst, &identity).unwrap().min_gap, Some(int(1)));
    assert!(verify(&inst, &identity, Notion::StrongEf).unwrap().holds);
}

#[test]
fn transfer_witness() {
    let inst = Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![10, 1], vec![1, 1]], Kind::Goods).unwrap();
    let alloc = IntegralAllocation::new(vec![vec![0, 0], vec![1, 1]]);
    // moving the value-1 item leaves 0 + 1 < 10 - 1
    let verdict = verify(&inst, &alloc, Notion::Tefx).unwrap();
    assert!(!verdict.holds);
    assert_eq!(
        verdict.witness,
        Some(Witness::Transfer {
            group: 0,
            envied: 1,
            item_type: 1
        })
    );
}

#[test]
fn trading_post_on_orthogonal_rows_is_identity() {
    let out = trading_post(&orthogonal(1)).unwrap();
    assert_eq!(out.allocation.shares, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
}

#[test]
fn gap_program_examples() {
    let gap = build_gap_lp(&orthogonal(1)).unwrap();
    let sol = solve(&gap.lp).unwrap();
    assert!(close(sol.objective_value, 1.0, 1e-9));
    let sparse = sparsify_to_vertex(&gap, &sol, &orthogonal(1)).unwrap();
    assert_eq!(sparse.positive_variables, 2);
    assert!(sparse.positive_variables <= 2 + 2);

    // identical rows: the two pair constraints cancel
    let same = Instance::from_integers(vec![1, 1], vec![2, 3], &[vec![1, 2], vec![2, 4]], Kind::Goods).unwrap();
    let sol = solve(&build_gap_lp(&same).unwrap().lp).unwrap();
    assert!(close(sol.objective_value, 0.0, 1e-9));
}

#[test]
fn proportional_program_examples() {
    let ortho = Instance::unit(vec![vec![int(1), int(0)], vec![int(0), int(1)]], Kind::Goods).unwrap();
    assert!(close(solve_prop(&ortho).unwrap().alpha, 1.0, 1e-9));
    let identical = Instance::unit(vec![vec![int(1), int(1)], vec![int(1), int(1)]], Kind::Goods).unwrap();
    assert!(close(solve_prop(&identical).unwrap().alpha, 0.5, 1e-9));
}

#[test]
fn rounding_two_singletons() {
    let inst = Instance::from_integers(vec![1, 1], vec![24], &[vec![1], vec![1]], Kind::Goods).unwrap();
    let frac = FractionalAllocation::new(vec![vec![11.5], vec![12.5]], true);
    let (alloc, trace) = round_envy(&inst, &frac).unwrap();
    // one pooled copy; the lexicographically smallest representation of 1
    // over sizes (1, 1) hands it to the second group
    assert_eq!(trace.pooled_total, 1);
    assert_eq!(alloc.counts, vec![vec![11], vec![13]]);
}

#[test]
fn rounding_with_top_up() {
    let inst = Instance::from_integers(vec![5, 7], vec![35], &[vec![1], vec![1]], Kind::Goods).unwrap();
    let frac = FractionalAllocation::new(vec![vec![3.0], vec![20.0 / 7.0]], true);
    let (alloc, trace) = round_envy(&inst, &frac).unwrap();
    assert_eq!(5 * alloc.counts[0][0] + 7 * alloc.counts[1][0], 35);
    assert!(trace.pooled_total >= 24);
    assert!(trace.mass_conserved && trace.within_adjusted_bound());
}

#[test]
fn proportional_rounding_of_halves() {
    let inst = Instance::unit(vec![vec![int(1), int(1)], vec![int(1), int(1)]], Kind::Goods).unwrap();
    let frac = FractionalAllocation::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]], true);
    let out = round_proportional(&inst, &frac).unwrap();
    for agent in 0..2 {
        assert_eq!(out.allocation.counts[agent].iter().sum::<u64>(), 1);
        assert!(out.loss(Kind::Goods, agent) <= out.max_values[agent]);
    }
}

#[test]
fn envy_condition_for_eight_copies() {
    let report = ef_condition_goods(&orthogonal(8)).unwrap();
    assert!(close(report.lhs, 1.0 / 8f64.sqrt(), 1e-12));
    // copy-weighted distance 2 and rounding constant 2 give sqrt(2 / 8)
    assert!(close(report.threshold, 0.5, 1e-12));
    assert!(report.satisfied);
}

#[test]
fn copies_bound_for_orthogonal_goods() {
    assert_eq!(mu_bound_goods(&orthogonal(1)).unwrap().mu_bound, Some(8));
}

#[test]
fn copies_bound_for_mirrored_chores_gives_envy_free_allocation() {
    let base = Instance::from_integers(vec![1, 1], vec![1, 1], &[vec![1, 3], vec![3, 1]], Kind::Chores).unwrap();
    let mu = mu_bound_chores(&base).unwrap().mu_bound.unwrap();
    assert!(mu > 0);
    let out = pipeline_allocate(&base.with_copies(vec![mu, mu]).unwrap(), false).unwrap();
    assert!(out.ef.holds);
}

#[test]
fn orthogonal_goods_with_eight_copies_end_to_end() {
    let out = pipeline_allocate(&orthogonal(8), false).unwrap();
    assert!(out.ef.holds);
    assert!(out.gaps.min_gap.unwrap() > int(0));
}

#[test]
fn proportionality_condition_is_only_sufficient() {
    let ortho = Instance::unit(vec![vec![int(1), int(0)], vec![int(0), int(1)]], Kind::Goods).unwrap();
    assert!(!prop_condition(&ortho).unwrap().satisfied);
}

#[test]
fn transfer_condition_examples() {
    let near = Instance::unit(vec![vec![int(50), int(50)], vec![int(45), int(55)]], Kind::Goods).unwrap();
    let report = tefx_condition(&near).unwrap();
    assert!(report.satisfied);
    let far = Instance::unit(vec![vec![int(9), int(1)], vec![int(1), int(9)]], Kind::Goods).unwrap();
    assert!(!tefx_condition(&far).unwrap().satisfied);
}

#[test]
fn cake_piece_length() {
    let eps = cake_epsilon(2, 1.0, 1.0).unwrap();
    assert!(close(eps.density_bound, 2.0, 1e-15));
    assert!(close(eps.epsilon_raw, (524.25f64.sqrt() - 3.5) / 128.0, 1e-12));
}

#[test]
fn cake_queries_and_tilted_pair() {
    let up = PiecewiseLinearDensity::new(vec![(int(0), int(0)), (int(1), int(2))]).unwrap();
    let half = Rational::new(1.into(), 2.into());
    let quarter = Rational::new(1.into(), 4.into());
    assert_eq!(up.integral(&int(0), &half), quarter);
    assert_eq!(up.cut(&int(0), &quarter).unwrap(), half);

    let down = PiecewiseLinearDensity::new(vec![(int(0), int(2)), (int(1), int(0))]).unwrap();
    let mut oracle = CakeOracle::new(vec![up, down]);
    let out = run_protocol(&mut oracle, ProtocolParams::default()).unwrap();
    assert!(out.strong_ef.holds);
}

#[test]
fn greedy_on_identical_agents() {
    let inst = Instance::from_integers(vec![1, 1], vec![1, 1, 1], &[vec![3, 2, 1], vec![3, 2, 1]], Kind::Goods).unwrap();
    let (alloc, _) = greedy_allocate(&inst).unwrap();
    assert_eq!(alloc.counts, vec![vec![1, 0, 0], vec![0, 1, 1]]);
    assert!(is_efx(&inst, &alloc).unwrap());
    assert!(verify(&inst, &alloc, Notion::Tefx).unwrap().holds);
}

#[test]
fn groups_are_sorted_on_input() {
    let inst = parse_instance(
        r#"{"kind":"goods","groups":[{"size":7},{"size":5}],"types":[{"copies":35,"values":["1","2"]}]}"#,
    )
    .unwrap();
    assert_eq!(inst.group_sizes(), &[5, 7]);
}
