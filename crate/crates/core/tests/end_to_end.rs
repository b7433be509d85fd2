use rennala_core::{
    run_method, sample_delays, t_of_b, DelayModel, Hyper, Method, MethodKind, QuadraticProblem,
    RunConfig,
};

fn quadratic() -> QuadraticProblem {
    QuadraticProblem::new(20, 0.05).unwrap()
}

#[test]
fn runs_are_reproducible_and_monotone_in_time() {
    let q = quadratic();
    let profile = sample_delays(&DelayModel::Sqrt { permute: true }, 6, 9).unwrap();
    let m = Method {
        kind: MethodKind::RennalaMvr,
        hyper: Hyper::mvr(0.2, 0.1, 6, 6),
    };
    let a = run_method(
        &q,
        m,
        q.benchmark_start(),
        &profile,
        RunConfig::new(500.0, 4),
    )
    .unwrap();
    let b = run_method(
        &q,
        m,
        q.benchmark_start(),
        &profile,
        RunConfig::new(500.0, 4),
    )
    .unwrap();
    assert_eq!(a.records, b.records);
    assert!(a
        .records
        .windows(2)
        .all(|w| w[0].time <= w[1].time && w[0].oracle_calls < w[1].oracle_calls));
    assert!(a.records.last().unwrap().time <= 500.0);
}

#[test]
fn both_methods_reduce_the_gradient() {
    let q = quadratic();
    let profile = sample_delays(&DelayModel::Uniform { lo: None, hi: None }, 8, 2).unwrap();
    for m in [
        Method {
            kind: MethodKind::RennalaSgd,
            hyper: Hyper::sgd(0.05, 8),
        },
        Method {
            kind: MethodKind::RennalaMvr,
            hyper: Hyper::mvr(0.2, 0.1, 8, 64),
        },
        Method {
            kind: MethodKind::RennalaMvrInexact,
            hyper: Hyper::mvr(0.2, 0.1, 8, 64),
        },
    ] {
        let tr = run_method(
            &q,
            m,
            q.benchmark_start(),
            &profile,
            RunConfig::new(3000.0, 1),
        )
        .unwrap();
        let (first, last) = (
            tr.records[0].grad_sq_norm,
            tr.records.last().unwrap().grad_sq_norm,
        );
        assert!(last < 1e-2 * first, "{:?}: {first} -> {last}", m.kind);
    }
}

#[test]
fn round_time_tracks_collection_bound() {
    let q = quadratic();
    let profile = sample_delays(
        &DelayModel::Mixture {
            peaks: 3,
            stddev: None,
        },
        10,
        5,
    )
    .unwrap();
    let b = 12;
    let m = Method {
        kind: MethodKind::RennalaSgd,
        hyper: Hyper::sgd(0.01, b),
    };
    let tr = run_method(
        &q,
        m,
        q.benchmark_start(),
        &profile,
        RunConfig::new(2000.0, 3),
    )
    .unwrap();
    let bound = t_of_b(&profile, b as f64).value;
    for w in tr.records.windows(2) {
        assert!(w[1].time - w[0].time <= bound * (1.0 + 1e-12));
    }
}
