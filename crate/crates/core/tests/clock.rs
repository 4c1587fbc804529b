use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use syncloc::clock::{
    clock_likelihood, sample_initial_clock, simulate_exchange, ClockParams, ClockRanges,
    DelayStats, ExchangeSchedule,
};
use syncloc::{ClockParamsX, TwoFloat};

const VC: f64 = 3e8;

fn draws(
    n: usize,
    delays: &DelayStats,
    distance: f64,
    seed: u64,
) -> (Vec<[f64; 2]>, [[f64; 2]; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mu = ClockParams::new(1.00005, 500e-9);
    let ap = ClockParams::ideal();
    let schedule = ExchangeSchedule::starting_at(0.0, 10e-3, 1e-3);
    let mut out = Vec::with_capacity(n);
    let mut cov = [[0.0; 2]; 2];
    for _ in 0..n {
        let rec = simulate_exchange(&mu, &ap, distance, delays, &schedule, VC, &mut rng);
        let l = clock_likelihood(&rec, delays).unwrap();
        out.push([l.mean.x, l.mean.y]);
        cov = l.cov.m;
    }
    (out, cov)
}

fn mean_and_cov(xs: &[[f64; 2]]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = xs.len() as f64;
    let m = [
        xs.iter().map(|x| x[0]).sum::<f64>() / n,
        xs.iter().map(|x| x[1]).sum::<f64>() / n,
    ];
    let mut c = [[0.0; 2]; 2];
    for x in xs {
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += (x[i] - m[i]) * (x[j] - m[j]) / (n - 1.0);
            }
        }
    }
    (m, c)
}

#[test]
fn sampled_offsets_have_zero_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let c: ClockParams<f64> = sample_initial_clock(&mut rng, &ClockRanges::default()).unwrap();
        sum += c.offset;
    }
    assert!((sum / n as f64).abs() < 5e-9);
}

#[test]
fn least_squares_is_unbiased_with_shared_mean_delay() {
    let delays = DelayStats::new(10e-9, 2e-9, 2e-9).unwrap();
    let (xs, _) = draws(20_000, &delays, 45.0, 3);
    let (m, c) = mean_and_cov(&xs);
    let truth = [1.0 / 1.00005, 500e-9 / 1.00005];
    for i in 0..2 {
        let se = (c[i][i] / xs.len() as f64).sqrt();
        assert!(
            (m[i] - truth[i]).abs() <= 3.0 * se,
            "component {i}: {} vs {} (se {se})",
            m[i],
            truth[i]
        );
    }
}

#[test]
fn skew_variance_matches_the_model() {
    let delays = DelayStats::new(5e-9, 2e-9, 2e-9).unwrap();
    let (xs, model) = draws(10_000, &delays, 30.0, 5);
    let (_, c) = mean_and_cov(&xs);
    let rel = (c[0][0] - model[0][0]).abs() / model[0][0];
    assert!(rel < 0.2, "skew variance off by {rel}");
}

#[test]
fn empirical_covariance_matches_correlated_noise_oracle() {
    // Row noises are T¹ − T⁰ and T¹ − R; the shared T¹ gives them covariance σ_T².
    let (st, sr) = (2e-9f64, 3e-9f64);
    let delays = DelayStats::new(5e-9, st, sr).unwrap();
    let mu = ClockParams::new(1.00005, 500e-9);
    let ap = ClockParams::ideal();
    let schedule = ExchangeSchedule::starting_at(0.0, 10e-3, 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rec = simulate_exchange(
        &mu,
        &ap,
        30.0,
        &DelayStats::noiseless(),
        &schedule,
        VC,
        &mut rng,
    );
    let b = nalgebra::Matrix2::new(rec.c_i_t4 - rec.c_i_t2, 0.0, rec.c_i_t4 + rec.c_i_t5, -2.0);
    let a = b.try_inverse().unwrap();
    let noise = nalgebra::Matrix2::new(2.0 * st * st, st * st, st * st, st * st + sr * sr);
    let oracle = a * noise * a.transpose();
    let (xs, _) = draws(20_000, &delays, 30.0, 13);
    let (_, c) = mean_and_cov(&xs);
    for i in 0..2 {
        for j in 0..2 {
            let rel = (c[i][j] - oracle[(i, j)]).abs() / oracle[(i, j)].abs();
            assert!(
                rel < 0.1,
                "entry ({i},{j}): {} vs {}",
                c[i][j],
                oracle[(i, j)]
            );
        }
    }
}

#[test]
fn noiseless_likelihood_is_distance_invariant() {
    let x = TwoFloat::from;
    let mu = ClockParamsX::new(x(1.00005), x(500e-9));
    let ap = ClockParamsX::ideal();
    let schedule = ExchangeSchedule::new(x(0.0), x(0.01), x(0.02));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let solve = |d: f64, rng: &mut ChaCha8Rng| {
        let rec = simulate_exchange(
            &mu,
            &ap,
            x(d),
            &DelayStats::noiseless(),
            &schedule,
            x(VC),
            rng,
        );
        clock_likelihood(&rec, &DelayStats::noiseless())
            .unwrap()
            .mean
    };
    let base = solve(30.0, &mut rng);
    for d in [0.0, 1.0, 60.0, 250.0, 1000.0] {
        let m = solve(d, &mut rng);
        let ex: f64 = ((m.x - base.x) / base.x).abs().into();
        let ey: f64 = ((m.y - base.y) / base.y).abs().into();
        assert!(ex < 1e-12 && ey < 1e-12, "d = {d}: {ex} {ey}");
    }
    assert!((f64::from(base.x) - 0.99995).abs() < 1e-8);
    assert!((f64::from(base.y) - 499.975e-9).abs() < 1e-13);
}

#[test]
fn extended_precision_recovers_random_clocks() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let ap = ClockParamsX::ideal();
    for k in 0..200 {
        let mu: ClockParamsX = sample_initial_clock(&mut rng, &ClockRanges::default()).unwrap();
        let start = TwoFloat::from(0.1 * k as f64);
        let schedule =
            ExchangeSchedule::starting_at(start, TwoFloat::from(10e-3), TwoFloat::from(1e-3));
        let rec = simulate_exchange(
            &mu,
            &ap,
            TwoFloat::from(57.0),
            &DelayStats::noiseless(),
            &schedule,
            TwoFloat::from(VC),
            &mut rng,
        );
        let l = clock_likelihood(&rec, &DelayStats::noiseless()).unwrap();
        let zeta = [mu.skew.recip(), mu.offset / mu.skew];
        for (est, truth) in [l.mean.x, l.mean.y].into_iter().zip(zeta) {
            let rel: f64 = ((est - truth) / truth).abs().into();
            assert!(rel <= 1e-12, "round {k}: relative error {rel}");
        }
    }
}
