//! Executable model of the wind-controller system.
//!
//! A car drives along a straight road of width 6 while a crosswind pushes
//! it sideways. Every step the wind speed shifts, the car drifts by its
//! velocity plus the wind, a noisy sensor reads the new position and the
//! controller corrects the velocity from the last two readings. All
//! arithmetic is exact.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Network, NetworkError};
use crate::rational::{abs, int, ratio, zero, Q};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct State {
    pub wind_speed: Q,
    pub position: Q,
    pub velocity: Q,
    pub sensor: Q,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub wind_shift: Q,
    pub sensor_error: Q,
}

impl Observation {
    pub fn new(wind_shift: Q, sensor_error: Q) -> Self {
        Observation { wind_shift, sensor_error }
    }
}

/// Bounds a valid observation stays within.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub wind_shift: Q,
    pub sensor_error: Q,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { wind_shift: int(1), sensor_error: ratio(1, 4) }
    }
}

impl Bounds {
    pub fn admits(&self, o: &Observation) -> bool {
        abs(&o.wind_shift) <= self.wind_shift && abs(&o.sensor_error) <= self.sensor_error
    }

    /// Largest sensor reading the controller can see while the car is on
    /// the road.
    pub fn sensor_guard(&self) -> Q {
        road_half_width() + &self.sensor_error
    }
}

/// Half the road width: the car is on the road while `|position| <= 3`.
pub fn road_half_width() -> Q {
    int(3)
}

/// The all-zero state.
pub fn initial_state() -> State {
    State { wind_speed: zero(), position: zero(), velocity: zero(), sensor: zero() }
}

/// A controller maps `(new sensor, previous sensor)` to a velocity change.
pub trait Controller {
    fn control(&mut self, current: &Q, previous: &Q) -> Q;
}

impl<F: FnMut(&Q, &Q) -> Q> Controller for F {
    fn control(&mut self, current: &Q, previous: &Q) -> Q {
        self(current, previous)
    }
}

/// Drives a two-input, one-output network through the input embedding
/// `e(v) = (v + 4) / 8` and the identity output embedding.
pub struct NetworkController<'a> {
    net: &'a Network,
}

impl<'a> NetworkController<'a> {
    pub fn new(net: &'a Network) -> Result<Self, NetworkError> {
        if net.input_dim() != 2 || net.output_dim() != 1 {
            return Err(NetworkError::Dimension {
                layer: 0,
                detail: alloc::format!(
                    "a controller network maps 2 inputs to 1 output, not {} to {}",
                    net.input_dim(),
                    net.output_dim()
                ),
            });
        }
        Ok(NetworkController { net })
    }
}

/// `(v + 4) / 8`: maps `[-4, 4]` onto `[0, 1]`.
pub fn embed(v: &Q) -> Q {
    (v + int(4)) / int(8)
}

impl Controller for NetworkController<'_> {
    fn control(&mut self, current: &Q, previous: &Q) -> Q {
        let out = self.net.eval_exact(&[embed(current), embed(previous)]).expect("shape checked on construction");
        out.into_iter().next().expect("one output")
    }
}

pub fn next_state<C: Controller + ?Sized>(o: &Observation, s: &State, c: &mut C) -> State {
    let wind_speed = &s.wind_speed + &o.wind_shift;
    let position = &s.position + &s.velocity + &wind_speed;
    let sensor = &position + &o.sensor_error;
    let velocity = &s.velocity + c.control(&sensor, &s.sensor);
    State { wind_speed, position, velocity, sensor }
}

/// Right fold from the initial state: the last observation in the list is
/// applied first.
pub fn final_state<C: Controller + ?Sized>(obs: &[Observation], c: &mut C) -> State {
    obs.iter().rev().fold(initial_state(), |s, o| next_state(o, &s, c))
}

/// Applies `obs` front to back and returns every state, starting with the
/// initial one. `final_state(obs)` is the last state of
/// `trace(obs reversed)`.
pub fn trace<C: Controller + ?Sized>(obs: &[Observation], c: &mut C) -> Vec<State> {
    let mut states = Vec::with_capacity(obs.len() + 1);
    states.push(initial_state());
    for o in obs {
        let next = next_state(o, states.last().expect("non-empty"), c);
        states.push(next);
    }
    states
}

pub fn on_road(s: &State) -> bool {
    abs(&s.position) <= road_half_width()
}

pub fn check_on_road(trace: &[State]) -> bool {
    trace.iter().all(on_road)
}

/// Distance from the ideal correction: `|c(x, y) + 2x - y|`.
pub fn margin<C: Controller + ?Sized>(c: &mut C, current: &Q, previous: &Q) -> Q {
    abs(&(c.control(current, previous) + int(2) * current - previous))
}

/// The largest margin the controller lemma allows (exclusive).
pub fn margin_bound() -> Q {
    ratio(5, 4)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunOutcome {
    pub run: usize,
    pub on_road: bool,
    pub max_abs_position: Q,
    /// First step whose valid observation produced a reading outside the
    /// sensor guard.
    pub guard_violation: Option<usize>,
}

/// Resolution of the uniform observation sampler.
const GRID: i64 = 1000;

/// A valid observation drawn on a grid of `GRID` steps per bound.
pub fn random_observation(rng: &mut ChaCha8Rng, bounds: &Bounds) -> Observation {
    let mut draw = |b: &Q| b * ratio(rng.gen_range(-GRID..=GRID), GRID);
    let wind_shift = draw(&bounds.wind_shift);
    let sensor_error = draw(&bounds.sensor_error);
    Observation { wind_shift, sensor_error }
}

/// Observations for run `run`; each run has its own ChaCha stream.
pub fn random_observations(seed: u64, run: usize, steps: usize, bounds: &Bounds) -> Vec<Observation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    (0..steps).map(|_| random_observation(&mut rng, bounds)).collect()
}

/// Runs one trace in temporal order. Before each controller call on a
/// valid observation the new reading must lie inside the sensor guard; the
/// first step where it does not is recorded rather than aborting the run.
pub fn run_once<C: Controller + ?Sized>(run: usize, obs: &[Observation], bounds: &Bounds, c: &mut C) -> RunOutcome {
    let guard = bounds.sensor_guard();
    let mut s = initial_state();
    let mut outcome = RunOutcome { run, on_road: true, max_abs_position: zero(), guard_violation: None };
    for (i, o) in obs.iter().enumerate() {
        let sensor = &s.position + &s.velocity + &s.wind_speed + &o.wind_shift + &o.sensor_error;
        if outcome.guard_violation.is_none() && bounds.admits(o) && abs(&sensor) > guard {
            outcome.guard_violation = Some(i);
        }
        s = next_state(o, &s, c);
        let p = abs(&s.position);
        if p > outcome.max_abs_position {
            outcome.max_abs_position = p;
        }
        outcome.on_road &= on_road(&s);
    }
    outcome
}

/// `runs` independent random runs of `steps` valid observations.
pub fn monte_carlo<C: Controller + ?Sized>(runs: usize, steps: usize, seed: u64, bounds: &Bounds, c: &mut C) -> Vec<RunOutcome> {
    (0..runs).map(|r| run_once(r, &random_observations(seed, r, steps, bounds), bounds, c)).collect()
}

/// A valid observation sequence whose trace hands the controller a pair of
/// readings outside the lemma's margin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transfer {
    pub observations: Vec<Observation>,
    pub states: Vec<State>,
    /// Index into `states` of the step whose readings break the margin.
    pub step: usize,
    pub margin: Q,
}

/// Searches for observations that steer the readings `(current,
/// previous)` towards `target` until the margin breaks with both readings
/// inside the guard. Beam search over a grid of valid observations,
/// ranked by distance to `target`.
pub fn steer_to_witness<C: Controller + ?Sized>(
    c: &mut C,
    target: (&Q, &Q),
    bounds: &Bounds,
    max_steps: usize,
    beam: usize,
) -> Option<Transfer> {
    let guard = bounds.sensor_guard();
    let fractions = [ratio(-1, 1), ratio(-1, 2), zero(), ratio(1, 2), ratio(1, 1)];
    let choices: Vec<Observation> = fractions
        .iter()
        .flat_map(|w| fractions.iter().map(move |e| (w, e)))
        .map(|(w, e)| Observation::new(&bounds.wind_shift * w, &bounds.sensor_error * e))
        .collect();
    let distance = |s: &Q, p: &Q| abs(&(s - target.0)) + abs(&(p - target.1));

    let mut frontier: Vec<(Vec<Observation>, Vec<State>)> = alloc::vec![(Vec::new(), alloc::vec![initial_state()])];
    for _ in 0..max_steps {
        let mut next: Vec<(Q, Vec<Observation>, Vec<State>)> = Vec::new();
        for (obs, states) in &frontier {
            let last = states.last().expect("non-empty");
            for o in &choices {
                let s = next_state(o, last, c);
                if !on_road(&s) {
                    continue;
                }
                if abs(&s.sensor) <= guard && abs(&last.sensor) <= guard {
                    let m = margin(c, &s.sensor, &last.sensor);
                    if m >= margin_bound() {
                        let mut observations = obs.clone();
                        observations.push(o.clone());
                        let mut states = states.clone();
                        states.push(s);
                        let step = states.len() - 1;
                        return Some(Transfer { observations, states, step, margin: m });
                    }
                }
                let d = distance(&s.sensor, &last.sensor);
                let mut observations = obs.clone();
                observations.push(o.clone());
                let mut states = states.clone();
                states.push(s);
                next.push((d, observations, states));
            }
        }
        if next.is_empty() {
            return None;
        }
        next.sort_by(|a, b| a.0.cmp(&b.0));
        next.dedup_by(|a, b| a.2.last() == b.2.last());
        next.truncate(beam);
        frontier = next.into_iter().map(|(_, o, s)| (o, s)).collect();
    }
    None
}

/// Whether any step of `states` breaks the margin with both readings
/// inside the guard.
pub fn breaks_margin<C: Controller + ?Sized>(c: &mut C, states: &[State], bounds: &Bounds) -> bool {
    let guard = bounds.sensor_guard();
    states.windows(2).any(|w| {
        abs(&w[0].sensor) <= guard && abs(&w[1].sensor) <= guard && margin(c, &w[1].sensor, &w[0].sensor) >= margin_bound()
    })
}
