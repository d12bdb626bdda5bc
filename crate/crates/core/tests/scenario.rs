use vndn::config::Config;
use vndn::metrics::AppFilter;
use vndn::scenario::{run_instance, InstanceId, RunSpec};
use vndn::stats::satisfaction;
use vndn::trace::{generate_trace, generate_trace_with, App};

/// E[172 m / v] over N(31, 8) km/h truncated to [5, 60], plus 0.15 * 10 s of
/// pause, by midpoint quadrature.
fn expected_dwell_s() -> f64 {
    let (lo, hi, steps) = (5.0, 60.0, 100_000);
    let h = (hi - lo) / steps as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..steps {
        let v = lo + (i as f64 + 0.5) * h;
        let w = (-0.5 * ((v - 31.0) / 8.0f64).powi(2)).exp();
        num += w * 172.0 / (v / 3.6);
        den += w;
    }
    num / den + 0.15 * 10.0
}

#[test]
fn mean_concurrency_matches_littles_law() {
    let expected = 125.0 * expected_dwell_s() / 300.0;
    assert!((9.0..10.5).contains(&expected), "{expected}");
    let mut total = 0.0;
    for seed in 1..=31 {
        let t = generate_trace(seed);
        assert!(t.vehicles.iter().all(|v| v.dwell_s() > 0.0));
        // Count presence on a 0.1 s grid.
        let grid = 3000;
        let present: usize = (0..grid)
            .map(|k| {
                let at = (k as f64 + 0.5) * 0.1;
                t.vehicles.iter().filter(|v| v.enter_s <= at && at < v.exit_s).count()
            })
            .sum();
        total += present as f64 / grid as f64;
    }
    let observed = total / 31.0;
    assert!(
        (observed - expected).abs() <= 3.0,
        "observed {observed} expected {expected}"
    );
}

fn short_config() -> Config {
    Config {
        horizon_s: 60,
        ..Config::default()
    }
}

#[test]
fn instances_share_interests_and_bound_satisfaction() {
    let cfg = short_config();
    let trace = generate_trace_with(4, &cfg.trace_params());
    let mut sent = Vec::new();
    for instance in InstanceId::ALL {
        let spec = RunSpec {
            instance,
            replication: 4,
            seed: 2,
        };
        let m = run_instance(spec, &trace, &cfg, false).unwrap().metrics;
        assert!(m.mac.conserved(), "{instance}");
        let all = m.totals(AppFilter::All).unwrap();
        sent.push(all.interests_sent);
        let mut filters = vec![AppFilter::All, AppFilter::Only(App::Cbr)];
        if instance.mixed() {
            filters.push(AppFilter::Only(App::Modified));
        }
        for f in filters {
            let s = satisfaction(&m, f).unwrap();
            assert!((0.0..=1.0).contains(&s), "{instance} {f}: {s}");
        }
        for v in &m.vehicles {
            assert!(
                v.totals.data_received <= v.totals.interests_sent,
                "{instance} vehicle {}",
                v.vehicle_id
            );
        }

        // Shared names reach the producer at most once while the router's
        // PIT entry for them is live.
        assert_eq!(m.router_shared_reforwards, 0, "{instance}");
        if instance.mixed() {
            assert!(m.router_shared_forwards > 0, "{instance}");
        } else {
            assert_eq!(m.router_shared_forwards, 0, "{instance}");
        }
    }
    assert!(sent[0] > 0);
    assert!(sent.iter().all(|&s| s == sent[0]), "{sent:?}");
}

#[test]
fn shared_requests_are_aggregated_in_native_2() {
    let cfg = short_config();
    let trace = generate_trace_with(8, &cfg.trace_params());
    let spec = |instance| RunSpec {
        instance,
        replication: 1,
        seed: 5,
    };
    let m = run_instance(spec(InstanceId::Native2), &trace, &cfg, false)
        .unwrap()
        .metrics;
    let modified = m.totals(AppFilter::Only(App::Modified)).unwrap();
    // Simultaneous requests for the same name collapse at the router.
    assert!(
        m.router_shared_forwards < modified.interests_sent,
        "{} forwards for {} shared interests",
        m.router_shared_forwards,
        modified.interests_sent
    );
    assert!(m.router.aggregated > 0);
}
