use spenra::synth::*;
use spenra::{Error, Series};

fn normal_cdf(x: f64) -> f64 {
    // composite Simpson on the density
    let n = 20_000;
    let lo = -12.0f64;
    if x <= lo {
        return 0.0;
    }
    let h = (x - lo) / n as f64;
    let pdf = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = pdf(lo) + pdf(x);
    for i in 1..n {
        s += pdf(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

#[test]
fn markov_quadrant_moments() {
    let p = Markov2Params::default();
    let s = gen_markov2(&p, 100_000, 21, [1.0, 1.0]).unwrap();
    let x = s.values();
    let mut pos = Vec::new();
    let mut mixed = Vec::new();
    for t in 2..x.len() {
        match Markov2State::of(x[t - 2], x[t - 1]) {
            Markov2State::PositiveRun => pos.push(x[t]),
            Markov2State::Crossing => mixed.push(x[t]),
            Markov2State::NegativeRun => {}
        }
    }
    let moments = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var)
    };

    // (+,+): 0.1 N(5, 1) + 0.9 N(-5, 1): mean -4, variance 1 + 25 - 16 = 10
    let (m, var) = moments(&pos);
    assert!((m + 4.0).abs() < 0.05, "mean after (+,+) {m}");
    let se = (10.0 / pos.len() as f64).sqrt();
    assert!((m + 4.0).abs() < 3.0 * se + 1e-12, "{m} vs -4 (se {se})");
    // variance of a sample variance: (mu4 - sigma^4) / n
    let mu4 = {
        // fourth central moment of the mixture around -4
        let c = |mu: f64| {
            let d = mu + 4.0;
            d.powi(4) + 6.0 * d * d + 3.0
        };
        0.1 * c(5.0) + 0.9 * c(-5.0)
    };
    let se_var = ((mu4 - 100.0) / pos.len() as f64).sqrt();
    assert!((var - 10.0).abs() < 3.0 * se_var, "variance {var} (se {se_var})");

    let (m, var) = moments(&mixed);
    assert!(m.abs() < 3.0 * (9.0 / mixed.len() as f64).sqrt(), "mixed mean {m}");
    let se_var = ((3.0 * 81.0 - 81.0) / mixed.len() as f64).sqrt();
    assert!((var - 9.0).abs() < 3.0 * se_var, "mixed variance {var}");
}

#[test]
fn crossing_fraction_matches_sign_chain() {
    let p = Markov2Params::default();
    // sign chain on (older, newer) signs; index 0:(+,+) 1:(+,-) 2:(-,+) 3:(-,-)
    let up_run =
        p.p_plus * (1.0 - normal_cdf(-p.mu / p.sigma_run)) + (1.0 - p.p_plus) * (1.0 - normal_cdf(p.mu / p.sigma_run));
    let down_run = p.p_minus * normal_cdf(-p.mu / p.sigma_run) + (1.0 - p.p_minus) * normal_cdf(p.mu / p.sigma_run);
    let down_stay = 1.0 - down_run;
    let mut trans = [[0.0; 4]; 4];
    trans[0][0] = up_run;
    trans[0][1] = 1.0 - up_run;
    trans[1][2] = 0.5;
    trans[1][3] = 0.5;
    trans[2][0] = 0.5;
    trans[2][1] = 0.5;
    trans[3][2] = 1.0 - down_stay;
    trans[3][3] = down_stay;
    let mut pi = [0.25; 4];
    for _ in 0..10_000 {
        let mut next = [0.0; 4];
        for i in 0..4 {
            for j in 0..4 {
                next[j] += pi[i] * trans[i][j];
            }
        }
        pi = next;
    }
    let expected = pi[1] + pi[2];

    let s = gen_markov2(&p, 100_000, 5, [1.0, 1.0]).unwrap();
    let x = s.values();
    let mixed = x.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count() as f64 / (x.len() - 1) as f64;
    assert!((mixed - expected).abs() < 0.01, "{mixed} vs {expected}");
}

#[test]
fn lorenz_stays_on_attractor() {
    let traj = integrate_ode(&OdeSpec::new(OdeSystem::lorenz()), 200.0).unwrap();
    for s in &traj.states {
        assert!(s[0].abs() <= 25.0 && s[1].abs() <= 35.0 && (0.0..=55.0).contains(&s[2]), "{s:?}");
    }
}

#[test]
fn rossler_maxima_spacing() {
    let traj = integrate_ode(&OdeSpec::new(OdeSystem::rossler()), 600.0).unwrap();
    let x: Vec<f64> = traj.states.iter().map(|s| s[0]).collect();
    let peaks: Vec<f64> =
        (1..x.len() - 1).filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1]).map(|i| traj.times[i]).collect();
    let gaps: Vec<f64> = peaks.windows(2).map(|w| w[1] - w[0]).collect();
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!((mean - 6.0).abs() <= 1.0, "mean spacing {mean}");
}

#[test]
fn dt_halving_changes_intervals_little() {
    for system in [OdeSystem::lorenz(), OdeSystem::rossler()] {
        let fire =
            if matches!(system, OdeSystem::Lorenz { .. }) { FireParams::lorenz(10) } else { FireParams::rossler(10) };
        let mut coarse = OdeSpec::new(system);
        coarse.burn_in = 0.0;
        let fine = OdeSpec { dt: coarse.dt / 2.0, ..coarse };
        let a = iei_series(&coarse, &fire, &Signal::shifted_square(), 100.0).unwrap();
        let b = iei_series(&fine, &fire, &Signal::shifted_square(), 100.0).unwrap();
        assert_eq!(a.len(), 10);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-3, "{}: {x} vs {y}", system.name());
        }
    }
}

#[test]
fn integrate_and_fire_conserves_threshold() {
    let spec = OdeSpec::new(OdeSystem::lorenz());
    let traj = integrate_ode(&spec, 300.0).unwrap();
    let signal = Signal::shifted_square();
    let fire = FireParams::lorenz(250);
    let s = integrate_and_fire(&traj, &fire, &signal).unwrap();
    assert_eq!(s.len(), 250);

    let mut cumulative = vec![0.0];
    for w in traj.states.windows(2) {
        let last = cumulative[cumulative.len() - 1];
        cumulative.push(last + 0.5 * (signal.eval(&w[0]) + signal.eval(&w[1])) * spec.dt);
    }
    let integral_to = |t: f64| {
        let k = ((t / spec.dt).floor() as usize).min(traj.times.len() - 2);
        let frac = (t - traj.times[k]) / spec.dt;
        cumulative[k] + frac * (cumulative[k + 1] - cumulative[k])
    };
    let times = s.timestamps().unwrap();
    let mut prev = 0.0;
    for &t in times {
        let got = integral_to(t) - integral_to(prev);
        assert!((got - fire.theta).abs() <= 1e-6 * fire.theta, "{got}");
        prev = t;
    }
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert!(s.values().iter().all(|v| *v > 0.0));
}

#[test]
fn constant_signal_exact_intervals() {
    let traj = integrate_ode(&OdeSpec::new(OdeSystem::rossler()), 10.0).unwrap();
    let s = integrate_and_fire(&traj, &FireParams { theta: 0.7, max_events: 1000 }, &Signal::Constant(2.0)).unwrap();
    assert_eq!(s.len(), 28);
    assert!(s.values().iter().all(|v| (v - 0.35).abs() < 1e-12));
}

#[test]
fn no_events_when_threshold_unreachable() {
    let traj = integrate_ode(&OdeSpec::new(OdeSystem::lorenz()), 1.0).unwrap();
    let r = integrate_and_fire(&traj, &FireParams { theta: 1e9, max_events: 5 }, &Signal::shifted_square());
    assert_eq!(r.unwrap_err(), Error::NoEvents);
}

#[test]
fn blow_up_is_reported() {
    let spec = OdeSpec { dt: 1.0, ..OdeSpec::new(OdeSystem::lorenz()) };
    assert!(matches!(integrate_ode(&spec, 50.0), Err(Error::NonFiniteState { .. })));
}

#[test]
fn concatenation_examples() {
    let a = Series::new(vec![0.5]).unwrap();
    let b = Series::new(vec![1.25]).unwrap();
    let ab = concatenate(&[a.clone(), b]).unwrap();
    assert_eq!(ab.values(), &[0.5, 1.25]);
    assert_eq!(ab.timestamps().unwrap(), &[0.5, 1.75]);
    assert_eq!(segment_boundaries(&ab), vec![1]);
    assert_eq!(concatenate(std::slice::from_ref(&a)).unwrap().values(), a.values());
    assert!(concatenate(&[]).is_err());

    let c = concatenated_iei(500, 3).unwrap();
    assert_eq!(c.len(), 1500);
    assert_eq!(segment_boundaries(&c), vec![500, 1000]);
}

#[test]
fn generators_are_deterministic() {
    assert_eq!(rossler_iei(100, 9).unwrap(), rossler_iei(100, 9).unwrap());
    assert_ne!(rossler_iei(100, 9).unwrap().values(), rossler_iei(100, 10).unwrap().values());
    let p = Markov2Params::default();
    assert_eq!(gen_markov2(&p, 500, 1, [1.0, 1.0]).unwrap(), gen_markov2(&p, 500, 1, [1.0, 1.0]).unwrap());
}
