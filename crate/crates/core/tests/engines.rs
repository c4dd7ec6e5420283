//! Analytic engine against the simulator and against itself.

use num_complex::Complex64;
use relaycov::mcsim::{self, McConfig};
use relaycov::model::{expected_travel_time, relay_association_probability};
use relaycov::quad::QuadratureSpec;
use relaycov::{
    CoverageEngine, LinkKind, LosState, MobilityState, NetworkParams, Quantity, Threshold,
};

fn cfg(n_drops: usize, seed: u64) -> McConfig {
    McConfig {
        n_drops,
        seed,
        disk_radius: 100_000.0,
    }
}

fn db(x: f64) -> Threshold {
    Threshold::from_db(x).unwrap()
}

#[test]
fn total_cp_decreases_with_threshold() {
    let e = CoverageEngine::new(NetworkParams::default()).unwrap();
    let m = MobilityState::toward_user(40.0, 30.0);
    let cps: Vec<f64> = (0..20)
        .map(|i| e.total_cp(db(-15.0 + 2.0 * i as f64), &m).unwrap())
        .collect();
    for w in cps.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{cps:?}");
    }
    assert!(cps[0] > cps[19]);
}

#[test]
fn vanishing_relays_leave_direct_link() {
    let p = NetworkParams {
        lambda_r: 1e-30,
        ..Default::default()
    };
    let e = CoverageEngine::new(p).unwrap();
    let m = MobilityState::toward_user(40.0, 0.0);
    for b in [-5.0, 0.0, 10.0] {
        let total = e.total_cp(db(b), &m).unwrap();
        let direct = e.direct_cp(db(b)).unwrap();
        assert!((total - direct).abs() < 1e-4, "β={b}: {total} vs {direct}");
    }
}

#[test]
fn first_hop_does_not_move() {
    let e = CoverageEngine::new(NetworkParams::default()).unwrap();
    let q = relaycov::CoverageQuery {
        quantity: Quantity::FirstHop,
        beta: db(0.0),
    };
    let at0 = e
        .evaluate(&q, &MobilityState::toward_user(40.0, 0.0))
        .unwrap();
    let at100 = e
        .evaluate(&q, &MobilityState::toward_user(40.0, 100.0))
        .unwrap();
    assert_eq!(at0, at100);
}

#[test]
fn interference_transform_matches_samples() {
    let p = NetworkParams::default();
    let e = CoverageEngine::new(p.clone()).unwrap();
    let n = 20_000;
    for (link, r, m) in [
        (LinkKind::Sd, 1500.0, MobilityState::hover()),
        (LinkKind::Rd, 1200.0, MobilityState::hover()),
        (LinkKind::Rd, 1600.0, MobilityState::toward_user(40.0, 20.0)),
    ] {
        let samples = mcsim::conditional_interference(&p, link, r, &m, &cfg(n, 7)).unwrap();
        let mean_i = samples.iter().sum::<f64>() / n as f64;
        for scale in [0.3, 1.0, 3.0] {
            let s = scale / mean_i.max(1e-30);
            let lt = e
                .interference_lt(link, &m, r, Complex64::new(s, 0.0))
                .unwrap()
                .re;
            let emp = samples.iter().map(|i| (-s * i).exp()).sum::<f64>() / n as f64;
            // e^{-sI} lies in [0, 1], so 4/(2√n) bounds a 4σ deviation.
            assert!(
                (lt - emp).abs() < 2.0 / (n as f64).sqrt(),
                "{link:?} r={r} s={s}: {lt} vs {emp}"
            );
        }
    }
}

#[test]
fn conditional_cp_matches_simulation() {
    let p = NetworkParams::default();
    let e = CoverageEngine::new(p.clone()).unwrap();
    let m = MobilityState::toward_user(40.0, 15.0);
    for (link, state, r, b) in [
        (LinkKind::Sd, LosState::Nlos, 800.0, 0.0),
        (LinkKind::Sr, LosState::Los, 800.0, 10.0),
        (LinkKind::Sr, LosState::Los, 3000.0, 10.0),
        (LinkKind::Rd, LosState::Los, 800.0, 10.0),
        (LinkKind::Rd, LosState::Los, 3000.0, 0.0),
    ] {
        let model = e.conditional_cp(link, state, r, db(b), &m).unwrap();
        let sim = mcsim::estimate_conditional_cp(&p, link, state, r, db(b), &m, &cfg(20_000, 11))
            .unwrap();
        assert!(
            sim.agrees(model, 4.0),
            "{link:?} {state:?} r={r}: {model} vs {sim:?}"
        );
    }
}

#[test]
fn far_field_truncation_is_negligible() {
    let p = NetworkParams::default();
    let m = MobilityState::toward_user(40.0, 0.0);
    let wide = McConfig {
        disk_radius: 200_000.0,
        ..cfg(2_000, 5)
    };
    let full = mcsim::run_drops(&p, &m, &wide).unwrap();
    let cut = mcsim::run_drops_within(&p, &m, &wide, 100_000.0).unwrap();
    for b in [-5.0, 0.0, 10.0] {
        let a = full.estimate(Quantity::Total, db(b)).value;
        let c = cut.estimate(Quantity::Total, db(b)).value;
        assert!((a - c).abs() <= 1.0 / 2_000.0, "β={b}: {a} vs {c}");
    }
}

#[test]
fn relay_association_matches_simulation() {
    let spec = QuadratureSpec::new(1e-10, 1e-10);
    for h in [100.0, 500.0, 1000.0] {
        let p = NetworkParams {
            h_r: h,
            ..Default::default()
        };
        let tbar = expected_travel_time(&p, 40.0).unwrap();
        for frac in [0.0, 1.0, 2.5] {
            let m = MobilityState::toward_user(40.0, frac * tbar);
            let model = relay_association_probability(&p, &m, &spec).unwrap();
            let sim =
                mcsim::estimate(&p, Quantity::Association, db(0.0), &m, &cfg(2_000, 13)).unwrap();
            assert!(
                sim.agrees(model, 4.0),
                "H={h} t={frac}T̄: {model} vs {sim:?}"
            );
        }
    }
}
