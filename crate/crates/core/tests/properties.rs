mod oracles;

use std::collections::BTreeMap;

use dewat_mca::ahp::{
    aggregate_tns, assemble_score_matrix, consistency, lambda_max, matrix_from_ratings,
    normalize_direct, priority_from_matrix, CellFlag, ImputationPolicy, Judgment, PairwiseMatrix,
    PriorityVector, ScoreColumn, STRICT_COLUMN_TOLERANCE,
};
use dewat_mca::anova::anova_two_factor_no_rep;
use dewat_mca::delphi::{
    DelphiConfig, DelphiSession, ExpertId, Rating, RatingItem, SessionState, Side,
};
use dewat_mca::domain::{
    midrange, parse_performance_table, Criterion, PerformanceTable, QuantVector,
};
use dewat_mca::special::{f_cdf, reg_inc_beta};
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("T{i}")).collect()
}

fn judgments_strategy(n: usize) -> impl Strategy<Value = Vec<Judgment>> {
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let len = pairs.len();
    proptest::collection::vec((1u8..=5, any::<bool>()), len).prop_map(move |choices| {
        pairs
            .iter()
            .zip(choices)
            .map(|(&(i, j), (value, a_worse))| Judgment {
                criterion_id: 1,
                tech_a: format!("T{i}"),
                tech_b: format!("T{j}"),
                worse: format!("T{}", if a_worse { i } else { j }),
                value,
                consensus: true,
            })
            .collect()
    })
}

fn sized_judgments() -> impl Strategy<Value = (usize, Vec<Judgment>)> {
    (2usize..=10).prop_flat_map(|n| judgments_strategy(n).prop_map(move |j| (n, j)))
}

fn grid_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..=8, 2usize..=10).prop_flat_map(|(r, c)| {
        proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, c), r)
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn ratings_produce_reciprocal_matrices((n, js) in sized_judgments()) {
        let m = matrix_from_ratings(&labels(n), &js).unwrap();
        for i in 0..n {
            prop_assert_eq!(m.get(i, i), 1.0);
            for j in 0..n {
                prop_assert!((m.get(i, j) * m.get(j, i) - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn priorities_are_positive_and_sum_to_one((n, js) in sized_judgments()) {
        let m = matrix_from_ratings(&labels(n), &js).unwrap();
        let w = priority_from_matrix(&m);
        prop_assert!((w.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(w.weights().iter().all(|x| *x > 0.0));
    }

    #[test]
    fn lambda_max_at_least_order((n, js) in sized_judgments()) {
        let m = matrix_from_ratings(&labels(n), &js).unwrap();
        let lam = lambda_max(&m, &priority_from_matrix(&m));
        prop_assert!(lam >= n as f64 - 1e-6);
        let oracle = oracles::power_iteration(m.entries());
        let oracle_lam = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j) * oracle[j]).sum::<f64>() / oracle[i])
            .sum::<f64>() / n as f64;
        prop_assert!(oracle_lam >= n as f64 - 1e-6);
    }

    #[test]
    fn consistent_matrices_recover_weights(w in proptest::collection::vec(0.01f64..100.0, 2..=10)) {
        let m = PairwiseMatrix::from_weights(labels(w.len()), &w).unwrap();
        let p = priority_from_matrix(&m);
        let total: f64 = w.iter().sum();
        for (got, want) in p.weights().iter().zip(&w) {
            prop_assert!((got - want / total).abs() <= 1e-9);
        }
        let report = consistency(&m).unwrap();
        prop_assert!(report.ci.abs() <= 1e-9);
        if let Some(cr) = report.cr {
            prop_assert!(cr.abs() <= 1e-9);
        }
    }

    #[test]
    fn direct_normalization_is_scale_invariant(
        values in proptest::collection::vec(0.001f64..1000.0, 2..=12),
        k in 1e-3f64..1e3,
    ) {
        let techs = labels(values.len());
        let base = QuantVector::new(6, techs.clone(), values.iter().map(|v| Some(*v)).collect());
        let scaled = QuantVector::new(6, techs, values.iter().map(|v| Some(v * k)).collect());
        let a = normalize_direct(&base, &ImputationPolicy::ExcludeRenormalize).unwrap();
        let b = normalize_direct(&scaled, &ImputationPolicy::ExcludeRenormalize).unwrap();
        for (x, y) in a.scores.iter().zip(&b.scores) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let oracle = oracles::shares(&values);
        for (x, y) in a.scores.iter().zip(&oracle) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn tns_sums_to_one_and_follows_permutation(
        raw in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 10), 2..=9),
        raw_weights in proptest::collection::vec(0.01f64..1.0, 10),
        rotate in 0usize..9,
    ) {
        let n = raw.len();
        let techs = labels(n);
        let build = |order: &[usize]| {
            let names: Vec<String> = order.iter().map(|&i| techs[i].clone()).collect();
            let columns: Vec<ScoreColumn> = (0..10)
                .map(|c| {
                    let col: Vec<f64> = order.iter().map(|&i| raw[i][c]).collect();
                    let pv = PriorityVector::from_unnormalized(names.clone(), col).unwrap();
                    ScoreColumn::from_priority(c as u8 + 1, &pv, CellFlag::Given)
                })
                .collect();
            assemble_score_matrix(columns, STRICT_COLUMN_TOLERANCE).unwrap()
        };
        let total: f64 = raw_weights.iter().sum();
        let weights: Vec<f64> = raw_weights.iter().map(|w| w / total).collect();

        let identity: Vec<usize> = (0..n).collect();
        let mut permuted = identity.clone();
        permuted.rotate_left(rotate % n);
        permuted.reverse();

        let a = aggregate_tns(&build(&identity), &weights).unwrap();
        let b = aggregate_tns(&build(&permuted), &weights).unwrap();
        prop_assert!((a.tns.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for t in &techs {
            prop_assert!((a.tns_of(t).unwrap() - b.tns_of(t).unwrap()).abs() <= 1e-12);
            prop_assert_eq!(a.rank_of(t), b.rank_of(t));
        }
    }

    #[test]
    fn performance_table_round_trips(
        ranges in proptest::collection::vec(
            proptest::collection::vec(
                prop_oneof![
                    1 => Just(None),
                    6 => (0.0f64..500.0, 0.0f64..500.0).prop_map(|(a, b)| Some((a.min(b), a.max(b)))),
                ],
                6,
            ),
            2..=8,
        ),
    ) {
        let params = ["COD_t", "BOD5", "TSS", "NH4N", "TP", "HRT"];
        let mut src = String::from("technology,parameter,min,max\n");
        for (t, row) in ranges.iter().enumerate() {
            for (p, cell) in params.iter().zip(row) {
                match cell {
                    Some((lo, hi)) => src.push_str(&format!("T{t},{p},{lo},{hi}\n")),
                    None => src.push_str(&format!("T{t},{p},-,-\n")),
                }
            }
        }
        let table = parse_performance_table(&src).unwrap();
        let again = parse_performance_table(&table.to_csv()).unwrap();
        prop_assert_eq!(&table, &again);
        for rec in table.records().filter(|r| r.present()) {
            let m = midrange(rec).unwrap();
            let range = rec.range.unwrap();
            prop_assert!(range.min <= m && m <= range.max);
        }
    }

    #[test]
    fn anova_sums_of_squares_add_up(grid in grid_strategy()) {
        let t = anova_two_factor_no_rep(&grid).unwrap();
        let parts = t.ss_rows + t.ss_cols + t.ss_error;
        prop_assert!((parts - t.ss_total).abs() <= 1e-9 * t.ss_total.max(f64::MIN_POSITIVE));
        let o = oracles::sums_of_squares(&grid);
        prop_assert!(close(t.ss_rows, o.rows, 1e-9));
        prop_assert!(close(t.ss_cols, o.cols, 1e-9));
        prop_assert!(close(t.ss_error, o.error, 1e-9));
        prop_assert!((0.0..=1.0).contains(&t.p_rows) && (0.0..=1.0).contains(&t.p_cols));
    }

    #[test]
    fn anova_transpose_swaps_factors_exactly(grid in grid_strategy()) {
        let t = anova_two_factor_no_rep(&grid).unwrap();
        let transposed: Vec<Vec<f64>> = (0..grid[0].len())
            .map(|j| grid.iter().map(|row| row[j]).collect())
            .collect();
        let u = anova_two_factor_no_rep(&transposed).unwrap();
        prop_assert_eq!(t.ss_rows.to_bits(), u.ss_cols.to_bits());
        prop_assert_eq!(t.ss_cols.to_bits(), u.ss_rows.to_bits());
        prop_assert_eq!(t.df_rows, u.df_cols);
        prop_assert_eq!(t.f_rows.to_bits(), u.f_cols.to_bits());
        prop_assert_eq!(t.p_rows.to_bits(), u.p_cols.to_bits());
        prop_assert_eq!(t.ss_error.to_bits(), u.ss_error.to_bits());
    }

    #[test]
    fn anova_shift_and_scale(grid in grid_strategy(), shift in -100.0f64..100.0, k in prop_oneof![-10.0f64..-0.1, 0.1f64..10.0]) {
        let t = anova_two_factor_no_rep(&grid).unwrap();
        let shifted: Vec<Vec<f64>> = grid.iter().map(|r| r.iter().map(|x| x + shift).collect()).collect();
        let scaled: Vec<Vec<f64>> = grid.iter().map(|r| r.iter().map(|x| x * k).collect()).collect();
        let s = anova_two_factor_no_rep(&shifted).unwrap();
        let c = anova_two_factor_no_rep(&scaled).unwrap();
        for (a, b) in [(t.ss_rows, s.ss_rows), (t.ss_cols, s.ss_cols), (t.ss_error, s.ss_error),
                       (t.f_rows, s.f_rows), (t.f_cols, s.f_cols)] {
            prop_assert!(close(a, b, 1e-9), "shift changed {} to {}", a, b);
        }
        prop_assert!((t.p_rows - s.p_rows).abs() <= 1e-9);
        prop_assert!((t.p_cols - s.p_cols).abs() <= 1e-9);
        let k2 = k * k;
        for (a, b) in [(t.ss_rows, c.ss_rows), (t.ss_cols, c.ss_cols), (t.ss_error, c.ss_error)] {
            prop_assert!(close(a * k2, b, 1e-9));
        }
        prop_assert!(close(t.f_rows, c.f_rows, 1e-9));
        prop_assert!((t.p_rows - c.p_rows).abs() <= 1e-9);
    }

    #[test]
    fn f_cdf_is_monotone(d1 in 1u32..30, d2 in 1u32..80, xs in proptest::collection::vec(0.0f64..20.0, 2..30)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for x in xs {
            let p = f_cdf(x, f64::from(d1), f64::from(d2)).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            prop_assert!(p >= prev - 1e-15);
            prev = p;
        }
    }

    #[test]
    fn incomplete_beta_symmetry(x in 0.0f64..=1.0, a in 0.05f64..50.0, b in 0.05f64..50.0) {
        let lhs = reg_inc_beta(x, a, b).unwrap();
        let rhs = 1.0 - reg_inc_beta(1.0 - x, b, a).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
        prop_assert!((reg_inc_beta(x, 1.0, 1.0).unwrap() - x).abs() <= 1e-12);
    }

    #[test]
    fn delphi_resubmission_is_stable(
        values in proptest::collection::vec(proptest::collection::vec((1u8..=5, any::<bool>()), 4), 1..=4),
    ) {
        let techs = ["CW", "DHS", "MSL"];
        let items: Vec<RatingItem> = (0..values.len())
            .map(|i| RatingItem::new(1 + (i / 3) as u8, techs[i % 3], techs[(i + 1) % 3]))
            .collect();
        let experts: Vec<ExpertId> = (0..4).map(|e| ExpertId(format!("x{e}"))).collect();
        let mut s = DelphiSession::create("p", experts.clone(), items.clone(), DelphiConfig::default()).unwrap();
        let submit = |s: &mut DelphiSession| {
            for (i, item) in items.iter().enumerate() {
                for (e, expert) in experts.iter().enumerate() {
                    let (value, b) = values[i][e];
                    s.submit_rating(Rating {
                        expert: expert.clone(),
                        item: item.clone(),
                        value,
                        worse: if b { Side::B } else { Side::A },
                        justification: None,
                    }).unwrap();
                }
            }
        };
        submit(&mut s);
        let first = s.close_round().unwrap();
        let state = s.advance().unwrap();
        if state == SessionState::Converged {
            prop_assert!(first.items.iter().all(|i| i.unanimous));
            return Ok(());
        }
        prop_assert_eq!(state, SessionState::Collecting);
        submit(&mut s);
        let second = s.close_round().unwrap();
        prop_assert!(second.round > first.round);
        prop_assert_eq!(second.total_changed(), 0);
        for (a, b) in first.items.iter().zip(&second.items) {
            prop_assert!(b.iqr <= a.iqr);
        }
        let within = second.max_iqr() <= DelphiConfig::default().consensus_iqr_max;
        let state = s.advance().unwrap();
        prop_assert_eq!(state == SessionState::Converged, within);
        if within {
            let export = s.export_consensus().unwrap();
            prop_assert!(export.judgments.iter().all(|j| (1..=5).contains(&j.value)));
        }
    }
}

#[test]
fn fixture_missing_sets() {
    let table = PerformanceTable::case_study();
    let expected: BTreeMap<u8, Vec<&str>> = [
        (5, vec!["Septic"]),
        (6, vec![]),
        (7, vec!["RBC"]),
        (8, vec![]),
        (9, vec!["DHS"]),
        (10, vec![]),
    ]
    .into_iter()
    .collect();
    for c in Criterion::all().iter().filter(|c| !c.is_qualitative()) {
        let v = dewat_mca::domain::build_criterion_vector(&table, c).unwrap();
        assert_eq!(v.missing(), expected[&c.id], "criterion {}", c.id);
    }
}
