use ats_core::{Error, StreamKey};
use ats_harness::report::{aggregate, paired_t_test, write_rows};
use ats_harness::runner::{run_replications, RunSettings};
use rand::Rng;

fn settings(replications: usize, threads: usize) -> RunSettings {
    RunSettings {
        replications,
        master_seed: 99,
        threads,
    }
}

#[test]
fn bernoulli_half_over_hundred_replicates() {
    let reps = run_replications(&settings(100, 0), |_, key: StreamKey| {
        Ok(if key.rng().random::<f64>() < 0.5 { 1.0 } else { 0.0 })
    })
    .unwrap();
    let values: Vec<_> = reps
        .completed
        .iter()
        .map(|(_, v)| ("coin".to_string(), "heads".to_string(), *v))
        .collect();
    let row = &aggregate(&values, 2)[0];
    assert_eq!(row.n, 100);
    assert!((row.mean - 0.5).abs() < 3.0 * 0.05, "mean {}", row.mean);
    assert!((row.se - 0.05).abs() < 0.005, "se {}", row.se);
}

#[test]
fn single_replicate_aggregate_is_the_value() {
    let reps = run_replications(&settings(1, 1), |_, key| Ok(key.rng().random::<f64>())).unwrap();
    let v = reps.completed[0].1;
    let row = &aggregate(&[("g".into(), "m".into(), v)], 3)[0];
    assert_eq!(row.mean, v);
    assert_eq!(row.se, 0.0);
    assert_eq!(row.display, format!("{v:.3} (0.000)"));
}

#[test]
fn failing_replicate_is_recorded_and_others_finish() {
    let reps = run_replications(&settings(10, 2), |rep, _| {
        if rep == 3 {
            Err(Error::Numeric("boom".into()))
        } else {
            Ok(rep)
        }
    })
    .unwrap();
    assert_eq!(reps.completed.len(), 9);
    assert_eq!(reps.failures.len(), 1);
    assert_eq!(reps.failures[0].replicate, 3);
    assert!(reps.failures[0].message.contains("boom"));
    let order: Vec<_> = reps.completed.iter().map(|(r, _)| *r).collect();
    assert_eq!(order, vec![0, 1, 2, 4, 5, 6, 7, 8, 9]);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let body = |_: usize, key: StreamKey| Ok(key.rng().random::<u64>());
    let one = run_replications(&settings(16, 1), body).unwrap().completed;
    let four = run_replications(&settings(16, 4), body).unwrap().completed;
    assert_eq!(one, four);
}

#[test]
fn zero_replicates_rejected() {
    assert!(run_replications(&settings(0, 1), |_, _| Ok(())).is_err());
}

#[test]
fn aggregate_keeps_first_appearance_order() {
    let v = |g: &str, m: &str, x: f64| (g.to_string(), m.to_string(), x);
    let rows = aggregate(&[v("b", "y", 1.0), v("a", "x", 2.0), v("b", "y", 3.0)], 1);
    assert_eq!(rows.len(), 2);
    assert_eq!((rows[0].group.as_str(), rows[0].n, rows[0].mean), ("b", 2, 2.0));
    assert_eq!((rows[1].group.as_str(), rows[1].n), ("a", 1));
    // sd of {1, 3} is sqrt(2); se = sqrt(2) / sqrt(2).
    assert!((rows[0].se - 1.0).abs() < 1e-12);
    let mut buf = Vec::new();
    write_rows(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("group,metric,n,mean,se,display\n"));
}

#[test]
fn paired_test_matches_closed_form() {
    // Differences -1, -2, -3: mean -2, se 1/sqrt(3), df 2, where the
    // t cdf is 1/2 + t / (2 sqrt(2 + t^2)).
    let a = [0.0, 0.0, 0.0];
    let b = [1.0, 2.0, 3.0];
    let r = paired_t_test(&a, &b).unwrap();
    let t = -2.0 * 3f64.sqrt();
    assert!((r.t - t).abs() < 1e-12);
    let p = 0.5 + t / (2.0 * (2.0 + t * t).sqrt());
    assert!((r.p_less - p).abs() < 1e-9, "{} vs {p}", r.p_less);

    let same = paired_t_test(&b, &b).unwrap();
    assert_eq!(same.t, 0.0);
    assert!((same.p_less - 0.5).abs() < 1e-12);
    let shifted = paired_t_test(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
    assert_eq!(shifted.p_less, 0.0);
    assert!(paired_t_test(&[1.0], &[2.0]).is_err());
}
