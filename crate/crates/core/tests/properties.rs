mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::oracle::{compare, evaluate, random_plan, random_table};
use ctf_core::aggregator::window_starts;
use ctf_core::flagforge::{builtin_flag, plant_flag};
use ctf_core::insight::Claimed;
use ctf_core::protocol::{parse_literal, parse_value_pairs};
use ctf_core::queryengine::{execute_plan_traced, Aggregation, AggregationFn, QueryPlan, SortOrder, SortSpec};
use ctf_core::tabular::{export_csv, load_csv, render_window, synth_sales, Value};
use ctf_core::verify::tolerance;

fn table_for(seed: u64) -> ctf_core::tabular::Table {
    random_table(&mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let t = table_for(seed);
        let back = load_csv(export_csv(&t).as_bytes(), Some(t.schema())).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn engine_agrees_with_oracle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_table(&mut rng);
        for _ in 0..4 {
            let plan = random_plan(&mut rng, &t);
            match (evaluate(&plan, &t), execute_plan_traced(&plan, &t)) {
                (None, got) => prop_assert!(got.is_err(), "accepted {}", plan.to_json()),
                (Some(want), got) => {
                    let got = got.unwrap();
                    prop_assert!(compare(&got, &want).is_ok(), "{:?} for {}", compare(&got, &want), plan.to_json());
                }
            }
        }
    }

    #[test]
    fn groups_partition_the_kept_rows(seed in any::<u64>(), col in 0usize..12) {
        let t = table_for(seed);
        let name = t.schema().columns()[col % t.schema().len()].name.clone();
        let plan = QueryPlan {
            group_by: vec![name.clone()],
            aggregations: vec![Aggregation::new(&name, AggregationFn::Count)],
            ..QueryPlan::default()
        };
        let out = execute_plan_traced(&plan, &t).unwrap();
        let mut seen = BTreeSet::new();
        for (g, members) in out.lineage.iter().enumerate() {
            prop_assert!(!members.is_empty());
            prop_assert!(members.windows(2).all(|w| w[0] < w[1]));
            for &r in members {
                prop_assert!(seen.insert(r), "row {} in two groups", r);
                prop_assert_eq!(&t.rows()[r][col % t.schema().len()], &out.table.rows()[g][0]);
            }
        }
        prop_assert_eq!(seen.len(), t.num_rows());
    }

    #[test]
    fn sort_is_stable(seed in any::<u64>(), col in 0usize..12, desc in any::<bool>()) {
        let t = table_for(seed);
        let c = col % t.schema().len();
        let plan = QueryPlan {
            sort: Some(SortSpec {
                column: t.schema().columns()[c].name.clone(),
                order: if desc { SortOrder::Desc } else { SortOrder::Asc },
            }),
            ..QueryPlan::default()
        };
        let out = execute_plan_traced(&plan, &t).unwrap();
        let src: Vec<usize> = out.lineage.iter().map(|l| l[0]).collect();
        for w in src.windows(2) {
            let (a, b) = (&t.rows()[w[0]][c], &t.rows()[w[1]][c]);
            if a == b {
                prop_assert!(w[0] < w[1], "equal keys reordered");
            } else if !a.is_null() && b.is_null() {
                // nulls last
            } else {
                prop_assert!(!a.is_null(), "null before a value");
                let ord = a.total_cmp(b);
                let in_order = if desc { ord.is_gt() } else { ord.is_lt() };
                prop_assert!(in_order, "out of order");
            }
        }
    }

    #[test]
    fn windows_cover_without_overlap(rows in 1usize..3000, window in 1usize..200) {
        let starts = window_starts(rows, window);
        prop_assert_eq!(starts.len(), rows.div_ceil(window));
        let mut next = 0;
        for s in starts {
            prop_assert_eq!(s, next);
            next = (s + window).min(rows);
        }
        prop_assert_eq!(next, rows);
    }

    #[test]
    fn money_literals_parse(cents in -10_000_000_000i64..10_000_000_000) {
        let v = Value::Money(cents);
        let dollars = cents as f64 / 100.0;
        for text in [v.export(), v.render(), format!("${}", v.export())] {
            match parse_literal(&text) {
                Claimed::Number(x) => prop_assert!((x - dollars).abs() <= tolerance(dollars), "{} -> {}", text, x),
                Claimed::Text(t) => prop_assert!(false, "{} read as text {}", text, t),
            }
        }
    }

    #[test]
    fn grouped_thousands_parse(n in 0u64..10_000_000_000) {
        let digits = n.to_string();
        let mut grouped = String::new();
        for (i, ch) in digits.chars().enumerate() {
            if i > 0 && (digits.len() - i) % 3 == 0 {
                grouped.push(',');
            }
            grouped.push(ch);
        }
        prop_assert_eq!(parse_literal(&grouped), Claimed::Number(n as f64));
        let pairs = parse_value_pairs(&format!("(Total Sales (sum), {grouped}), (State, Alaska)"));
        prop_assert_eq!(pairs.len(), 2);
        prop_assert_eq!(&pairs[0].1, &grouped);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn flags_hold_for_any_seed(seed in any::<u64>()) {
        let t = synth_sales(seed, 1000);
        for id in 1..=3 {
            let (planted, truth) = plant_flag(&t, &builtin_flag(id).unwrap()).unwrap();
            prop_assert!(!truth.touched_rows.is_empty());
            for r in 0..t.num_rows() {
                if !truth.touched_rows.contains(&r) {
                    prop_assert_eq!(export_row(&t, r), export_row(&planted, r));
                }
            }
            for c in &truth.changes {
                prop_assert!(truth.touched_rows.contains(&c.row));
                prop_assert_eq!(planted.cell(c.row, &c.column).unwrap().export(), c.after.clone());
            }
        }
    }

    #[test]
    fn rendered_windows_keep_absolute_indices(seed in any::<u64>(), start in 0usize..120, len in 1usize..60) {
        let t = synth_sales(seed, 120);
        let text = render_window(&t, start, len).unwrap();
        let shown = load_csv(text.as_bytes(), None).unwrap();
        prop_assert_eq!(shown.num_rows(), len.min(120 - start));
        prop_assert_eq!(shown.rows()[0][0].clone(), Value::Integer(start as i64));
    }
}

fn export_row(t: &ctf_core::tabular::Table, r: usize) -> Vec<String> {
    t.rows()[r].iter().map(Value::export).collect()
}
