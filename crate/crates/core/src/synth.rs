//! Synthetic benchmarks with known structure: a second-order Markov process
//! with state-dependent predictive densities, and interevent intervals from an
//! integrate-and-fire model driven by the Lorenz or Rössler system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::ckde::PredictiveSlice;
use crate::entropy::mixture_entropy;
use crate::error::{Error, Result};
use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Markov2Params {
    pub p_plus: f64,
    pub p_minus: f64,
    pub mu: f64,
    pub sigma_run: f64,
    pub sigma_cross: f64,
}

impl Default for Markov2Params {
    fn default() -> Self {
        Self { p_plus: 0.1, p_minus: 0.1, mu: 5.0, sigma_run: 1.0, sigma_cross: 3.0 }
    }
}

impl Markov2Params {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let pos = |s: f64| s > 0.0 && s.is_finite();
        if !prob(self.p_plus) || !prob(self.p_minus) {
            return Err(Error::InvalidInput("run probabilities must lie in [0, 1]".into()));
        }
        if !pos(self.mu) || !pos(self.sigma_run) || !pos(self.sigma_cross) {
            return Err(Error::InvalidInput("mu and sigmas must be positive".into()));
        }
        Ok(())
    }
}

/// Effective state of the Markov process, set by the signs of the two most
/// recent values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Markov2State {
    PositiveRun,
    NegativeRun,
    Crossing,
}

impl Markov2State {
    /// Classifies a past `(x_{t-2}, x_{t-1})`. A zero is treated as a crossing.
    pub fn of(older: f64, newer: f64) -> Self {
        if older > 0.0 && newer > 0.0 {
            Markov2State::PositiveRun
        } else if older < 0.0 && newer < 0.0 {
            Markov2State::NegativeRun
        } else {
            Markov2State::Crossing
        }
    }
}

/// The transition density at `state` as (weights, means, standard deviation).
fn markov2_mixture(params: &Markov2Params, state: Markov2State) -> (Vec<f64>, Vec<f64>, f64) {
    let mu = params.mu;
    match state {
        Markov2State::PositiveRun => (vec![params.p_plus, 1.0 - params.p_plus], vec![mu, -mu], params.sigma_run),
        Markov2State::NegativeRun => (vec![params.p_minus, 1.0 - params.p_minus], vec![-mu, mu], params.sigma_run),
        Markov2State::Crossing => (vec![1.0], vec![0.0], params.sigma_cross),
    }
}

/// Samples `n` values following the two-value history `init = (x_{-1}, x_0)`.
pub fn gen_markov2(params: &Markov2Params, n: usize, seed: u64, init: [f64; 2]) -> Result<Series> {
    params.validate()?;
    if n == 0 {
        return Err(Error::InvalidInput("length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut older, mut newer) = (init[0], init[1]);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let (w, means, sd) = markov2_mixture(params, Markov2State::of(older, newer));
        let u: f64 = rng.random();
        let mean = if u < w[0] { means[0] } else { means[means.len() - 1] };
        let z: f64 = StandardNormal.sample(&mut rng);
        let x = mean + sd * z;
        out.push(x);
        older = newer;
        newer = x;
    }
    Ok(Series::new(out)?.with_label(format!("markov2 seed={seed}")))
}

/// Exact specific entropy rate of the Markov process at a given past.
pub fn markov2_true_specific_entropy(params: &Markov2Params, past: [f64; 2]) -> Result<f64> {
    params.validate()?;
    if past[0] == 0.0 || past[1] == 0.0 {
        return Err(Error::AmbiguousState);
    }
    let (w, c, sd) = markov2_mixture(params, Markov2State::of(past[0], past[1]));
    mixture_entropy(&PredictiveSlice::new(w, c, sd)?, 1e-9)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "lowercase")]
pub enum OdeSystem {
    Lorenz { sigma: f64, beta: f64, rho: f64 },
    Rossler { a: f64, b: f64, c: f64 },
}

impl OdeSystem {
    pub fn lorenz() -> Self {
        OdeSystem::Lorenz { sigma: 10.0, beta: 8.0 / 3.0, rho: 28.0 }
    }

    pub fn rossler() -> Self {
        OdeSystem::Rossler { a: 0.1, b: 0.1, c: 14.0 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OdeSystem::Lorenz { .. } => "lorenz",
            OdeSystem::Rossler { .. } => "rossler",
        }
    }

    fn derivative(&self, s: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *s;
        match *self {
            OdeSystem::Lorenz { sigma, beta, rho } => [sigma * (y - x), x * (rho - z) - y, x * y - beta * z],
            OdeSystem::Rossler { a, b, c } => [-y - z, x + a * y, b + z * (x - c)],
        }
    }

    fn rk4(&self, s: &[f64; 3], dt: f64) -> [f64; 3] {
        let add = |a: &[f64; 3], k: &[f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
        let k1 = self.derivative(s);
        let k2 = self.derivative(&add(s, &k1, 0.5 * dt));
        let k3 = self.derivative(&add(s, &k2, 0.5 * dt));
        let k4 = self.derivative(&add(s, &k3, dt));
        std::array::from_fn(|i| s[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSpec {
    pub system: OdeSystem,
    pub initial: [f64; 3],
    pub dt: f64,
    pub burn_in: f64,
}

impl OdeSpec {
    /// Canonical parameters, `dt = 0.01`, 100 time units of burn-in, starting
    /// from (1, 1, 1).
    pub fn new(system: OdeSystem) -> Self {
        Self { system, initial: [1.0, 1.0, 1.0], dt: 0.01, burn_in: 100.0 }
    }

    /// As [`OdeSpec::new`], with the initial state offset by a seeded uniform
    /// draw from `[-0.5, 0.5)^3` so different seeds give different orbits.
    pub fn seeded(system: OdeSystem, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = Self::new(system);
        for v in spec.initial.iter_mut() {
            *v += rng.random::<f64>() - 0.5;
        }
        spec
    }

    pub fn validate(&self) -> Result<()> {
        let finite = match self.system {
            OdeSystem::Lorenz { sigma, beta, rho } => [sigma, beta, rho].iter().all(|v| v.is_finite()),
            OdeSystem::Rossler { a, b, c } => [a, b, c].iter().all(|v| v.is_finite()),
        };
        if !finite || self.initial.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("ODE parameters and initial state must be finite".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return Err(Error::InvalidInput("dt must be positive and burn-in nonnegative".into()));
        }
        Ok(())
    }

    /// Fixed-step RK4 stepper positioned at the end of the burn-in; time is
    /// measured from there.
    pub fn stepper(&self) -> Result<OdeStepper> {
        self.validate()?;
        let mut state = self.initial;
        let burn_steps = (self.burn_in / self.dt).round() as usize;
        for i in 0..burn_steps {
            state = self.system.rk4(&state, self.dt);
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteState { time: (i + 1) as f64 * self.dt - self.burn_in });
            }
        }
        Ok(OdeStepper { system: self.system, dt: self.dt, step: 0, state, failed: false })
    }
}

/// Yields `(time, state)` pairs at multiples of `dt`, starting at time 0.
#[derive(Debug, Clone)]
pub struct OdeStepper {
    system: OdeSystem,
    dt: f64,
    step: u64,
    state: [f64; 3],
    failed: bool,
}

impl Iterator for OdeStepper {
    type Item = Result<(f64, [f64; 3])>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let out = (self.step as f64 * self.dt, self.state);
        if out.1.iter().any(|v| !v.is_finite()) {
            self.failed = true;
            return Some(Err(Error::NonFiniteState { time: out.0 }));
        }
        self.state = self.system.rk4(&self.state, self.dt);
        self.step += 1;
        Some(Ok(out))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<[f64; 3]>,
}

/// Integrates for `duration` time units after the burn-in.
pub fn integrate_ode(spec: &OdeSpec, duration: f64) -> Result<Trajectory> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(Error::InvalidInput("duration must be positive".into()));
    }
    let steps = (duration / spec.dt).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    for item in spec.stepper()?.take(steps + 1) {
        let (t, s) = item?;
        times.push(t);
        states.push(s);
    }
    Ok(Trajectory { times, states })
}

/// Nonnegative signal read off the state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Signal {
    /// `(x + shift)^2`.
    ShiftedSquare {
        shift: f64,
    },
    Constant(f64),
}

impl Signal {
    /// `(x + 2)^2`, the drive used by the interval generators.
    pub fn shifted_square() -> Self {
        Signal::ShiftedSquare { shift: 2.0 }
    }

    pub fn eval(&self, state: &[f64; 3]) -> f64 {
        match *self {
            Signal::ShiftedSquare { shift } => (state[0] + shift).powi(2),
            Signal::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FireParams {
    pub theta: f64,
    pub max_events: usize,
}

impl FireParams {
    pub fn lorenz(max_events: usize) -> Self {
        Self { theta: 60.0, max_events }
    }

    pub fn rossler(max_events: usize) -> Self {
        Self { theta: 125.0, max_events }
    }
}

/// Emits event times where the trapezoid-rule integral of the signal
/// accumulates `theta`, interpolating linearly in the integral within a step.
fn fire_events<I>(samples: I, fire: &FireParams, signal: &Signal) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = Result<(f64, [f64; 3])>>,
{
    if !(fire.theta > 0.0 && fire.theta.is_finite()) || fire.max_events == 0 {
        return Err(Error::InvalidInput("theta must be positive and max_events at least 1".into()));
    }
    let mut it = samples.into_iter();
    let Some(first) = it.next() else {
        return Err(Error::InvalidInput("empty trajectory".into()));
    };
    let (mut t0, s0) = first?;
    let mut sig0 = signal.eval(&s0);
    let mut acc = 0.0;
    let mut events = Vec::new();
    for item in it {
        let (t1, s1) = item?;
        let sig1 = signal.eval(&s1);
        if sig0 < 0.0 || sig1 < 0.0 {
            return Err(Error::InvalidInput("signal must be nonnegative".into()));
        }
        let inc = 0.5 * (sig0 + sig1) * (t1 - t0);
        let mut used = 0.0;
        while acc + (inc - used) >= fire.theta {
            used += fire.theta - acc;
            acc = 0.0;
            events.push(t0 + (t1 - t0) * used / inc);
            if events.len() == fire.max_events {
                return Ok(events);
            }
        }
        acc += inc - used;
        t0 = t1;
        sig0 = sig1;
    }
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    Ok(events)
}

fn events_to_series(events: &[f64], label: String) -> Result<Series> {
    let mut prev = 0.0;
    let ieis = events
        .iter()
        .map(|t| {
            let d = t - prev;
            prev = *t;
            d
        })
        .collect();
    Series::build(ieis, Some(events.to_vec()), label)
}

/// Interevent intervals of the integrate-and-fire model along a stored
/// trajectory (at most `fire.max_events`), with event times as timestamps.
pub fn integrate_and_fire(traj: &Trajectory, fire: &FireParams, signal: &Signal) -> Result<Series> {
    let samples = traj.times.iter().zip(&traj.states).map(|(t, s)| Ok((*t, *s)));
    let events = fire_events(samples, fire, signal)?;
    events_to_series(&events, String::from("integrate-and-fire"))
}

/// Streams the ODE until `fire.max_events` events have fired or
/// `max_duration` time units have elapsed.
pub fn iei_series(spec: &OdeSpec, fire: &FireParams, signal: &Signal, max_duration: f64) -> Result<Series> {
    let steps = (max_duration / spec.dt).ceil() as usize;
    let events = fire_events(spec.stepper()?.take(steps + 1), fire, signal)?;
    events_to_series(&events, format!("{} theta={}", spec.system.name(), fire.theta))
}

pub(crate) fn default_max_duration(events: usize) -> f64 {
    (events as f64 * 100.0).max(1e4)
}

/// Lorenz-driven interevent intervals with canonical settings (Θ = 60).
pub fn lorenz_iei(n: usize, seed: u64) -> Result<Series> {
    let spec = OdeSpec::seeded(OdeSystem::lorenz(), seed);
    iei_series(&spec, &FireParams::lorenz(n), &Signal::shifted_square(), default_max_duration(n))
}

/// Rössler-driven interevent intervals with canonical settings (Θ = 125).
pub fn rossler_iei(n: usize, seed: u64) -> Result<Series> {
    let spec = OdeSpec::seeded(OdeSystem::rossler(), seed);
    iei_series(&spec, &FireParams::rossler(n), &Signal::shifted_square(), default_max_duration(n))
}

/// Lorenz, Rössler, Lorenz segments of `n_each` intervals, from independent
/// orbits derived from `seed`.
pub fn concatenated_iei(n_each: usize, seed: u64) -> Result<Series> {
    let parts = [
        lorenz_iei(n_each, seed)?,
        rossler_iei(n_each, seed.wrapping_add(1))?,
        lorenz_iei(n_each, seed.wrapping_add(2))?,
    ];
    concatenate(&parts)
}

/// Joins series end to end. Timestamps are rebuilt as cumulative sums of the
/// values when every value is positive (intervals), and dropped otherwise.
/// The label records the start index of each segment after the first.
pub fn concatenate(parts: &[Series]) -> Result<Series> {
    if parts.is_empty() {
        return Err(Error::InvalidInput("nothing to concatenate".into()));
    }
    let values: Vec<f64> = parts.iter().flat_map(|s| s.values().iter().copied()).collect();
    let mut bounds = Vec::new();
    let mut at = 0;
    for s in &parts[..parts.len() - 1] {
        at += s.len();
        bounds.push(at.to_string());
    }
    let timestamps = values.iter().all(|v| *v > 0.0).then(|| {
        let mut acc = 0.0;
        values
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect()
    });
    Series::build(values, timestamps, format!("concat boundaries={}", bounds.join(";")))
}

/// Segment start indices recorded by [`concatenate`] (0-based).
pub fn segment_boundaries(s: &Series) -> Vec<usize> {
    s.label()
        .split_once("boundaries=")
        .map(|(_, b)| b.split(';').filter_map(|v| v.trim().parse().ok()).collect())
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_run_state() {
        let p = Markov2Params { p_plus: 1.0, sigma_run: 1e-9, ..Default::default() };
        let s = gen_markov2(&p, 50, 3, [1.0, 1.0]).unwrap();
        assert!(s.values().iter().all(|v| (v - 5.0).abs() < 1e-6));
    }

    #[test]
    fn seed_determinism() {
        let p = Markov2Params::default();
        let a = gen_markov2(&p, 300, 11, [1.0, -1.0]).unwrap();
        let b = gen_markov2(&p, 300, 11, [1.0, -1.0]).unwrap();
        assert_eq!(a, b);
        let c = gen_markov2(&p, 300, 12, [1.0, -1.0]).unwrap();
        assert_ne!(a.values(), c.values());
        assert_eq!(lorenz_iei(50, 4).unwrap(), lorenz_iei(50, 4).unwrap());
    }

    #[test]
    fn exact_entropies() {
        let p = Markov2Params::default();
        let same = markov2_true_specific_entropy(&p, [1.0, 2.0]).unwrap();
        assert!((same - 1.744).abs() < 1e-3);
        assert!((same - markov2_true_specific_entropy(&p, [-1.0, -2.0]).unwrap()).abs() < 1e-12);
        let mixed = markov2_true_specific_entropy(&p, [1.0, -2.0]).unwrap();
        assert!((mixed - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 9.0).ln()).abs() < 1e-8);
        let unit = Markov2Params { sigma_cross: 1.0, ..p };
        let h = markov2_true_specific_entropy(&unit, [-3.0, 2.0]).unwrap();
        assert!((h - 1.418_938_533_204_672_7).abs() < 1e-8);
        assert_eq!(markov2_true_specific_entropy(&p, [0.0, 1.0]), Err(Error::AmbiguousState));
    }

    #[test]
    fn zero_is_crossing() {
        assert_eq!(Markov2State::of(0.0, 1.0), Markov2State::Crossing);
        assert_eq!(Markov2State::of(2.0, 1.0), Markov2State::PositiveRun);
        assert_eq!(Markov2State::of(-2.0, -1.0), Markov2State::NegativeRun);
    }

    #[test]
    fn constant_signal_intervals() {
        let spec = OdeSpec { burn_in: 0.0, ..OdeSpec::new(OdeSystem::lorenz()) };
        let traj = integrate_ode(&spec, 20.0).unwrap();
        let s = integrate_and_fire(&traj, &FireParams { theta: 1.3, max_events: 100 }, &Signal::Constant(2.0)).unwrap();
        assert_eq!(s.len(), 30);
        for v in s.values() {
            assert!((v - 0.65).abs() < 1e-12);
        }
    }

    #[test]
    fn no_events() {
        let spec = OdeSpec::new(OdeSystem::lorenz());
        let traj = integrate_ode(&spec, 1.0).unwrap();
        let r = integrate_and_fire(&traj, &FireParams { theta: 10.0, max_events: 5 }, &Signal::Constant(0.0));
        assert_eq!(r, Err(Error::NoEvents));
    }

    #[test]
    fn blow_up_detected() {
        let spec = OdeSpec { dt: 0.5, ..OdeSpec::new(OdeSystem::lorenz()) };
        assert!(matches!(integrate_ode(&spec, 10.0), Err(Error::NonFiniteState { .. })));
    }

    #[test]
    fn concatenation() {
        let a = Series::new(vec![0.5]).unwrap();
        let b = Series::new(vec![0.25]).unwrap();
        let c = concatenate(&[a.clone(), b]).unwrap();
        assert_eq!(c.values(), &[0.5, 0.25]);
        assert_eq!(c.timestamps().unwrap(), &[0.5, 0.75]);
        assert_eq!(segment_boundaries(&c), vec![1]);
        assert_eq!(concatenate(std::slice::from_ref(&a)).unwrap().values(), a.values());
        let neg = concatenate(&[Series::new(vec![-1.0, 2.0]).unwrap()]).unwrap();
        assert!(neg.timestamps().is_none());
    }
}
