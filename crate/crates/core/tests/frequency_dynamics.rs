use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tgsim_core::auction::DeviceId;
use tgsim_core::frequency::{nerc_ace, swing_step, AceInputs, SwingParams, UflsRelay};

fn response(dp: impl Fn(usize) -> f64, params: &SwingParams, steps: usize) -> Vec<f64> {
    let mut df = 0.0;
    (0..steps)
        .map(|k| {
            df = swing_step(df, dp(k), params, 4.0).unwrap();
            df
        })
        .collect()
}

#[test]
fn swing_response_superposes() {
    let params = SwingParams::new(0.1, -0.2).unwrap();
    let a = |k: usize| if k >= 10 { -0.2 } else { 0.0 };
    let b = |k: usize| 0.05 * (k as f64 * 0.3).sin();
    let ra = response(a, &params, 300);
    let rb = response(b, &params, 300);
    let rab = response(|k| a(k) + b(k), &params, 300);
    for ((x, y), z) in ra.iter().zip(&rb).zip(&rab) {
        assert!((x + y - z).abs() < 1e-12);
    }
    assert!((ra[299] - params.steady_state(-0.2)).abs() < 1e-9);
}

#[test]
fn ace_is_odd_about_schedule() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..500 {
        let (ps, fs, b) = (
            rng.random_range(-100.0..100.0),
            60.0,
            rng.random_range(-50.0..-0.1),
        );
        let (dp, df, em) = (
            rng.random_range(-10.0..10.0),
            rng.random_range(-0.1..0.1),
            rng.random_range(-1.0..1.0),
        );
        let up = nerc_ace(&AceInputs {
            p_a: ps + dp,
            p_s: ps,
            b,
            f_a: fs + df,
            f_s: fs,
            e_m: em,
        });
        let down = nerc_ace(&AceInputs {
            p_a: ps - dp,
            p_s: ps,
            b,
            f_a: fs - df,
            f_s: fs,
            e_m: -em,
        });
        assert!((up + down).abs() < 1e-9, "{up} {down}");
    }
}

/// Generation deficit drives frequency below the relay threshold; shedding
/// the armed load turns the deficit into a surplus and frequency recovers.
#[test]
fn ufls_arrests_a_decline() {
    let params = SwingParams::new(0.1, -0.2).unwrap();
    let armed: Vec<DeviceId> = (1..=250).map(DeviceId).collect();
    let mut relay = UflsRelay::new(59.95, 1.0, 1.0e9, armed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut df, mut f_min) = (0.0_f64, 60.0_f64);
    let deficit = -0.2;
    for _ in 0..2000 {
        let shed_mw = relay.shed().count() as f64 * 0.001;
        df = swing_step(df, deficit + shed_mw, &params, 4.0).unwrap();
        f_min = f_min.min(60.0 + df);
        relay.update(60.0 + df, 4.0, &mut rng).unwrap();
    }
    assert_eq!(relay.events(), 1);
    assert_eq!(relay.shed().count(), 250);
    assert!(f_min > 59.9, "{f_min}");
    assert!(60.0 + df > 59.95);
    assert!((df - params.steady_state(0.05)).abs() < 1e-9);
}
