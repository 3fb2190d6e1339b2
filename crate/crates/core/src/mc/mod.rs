//! Monte Carlo simulation of load trajectories and populations.
//!
//! Between jumps the continuous state follows an Euler–Maruyama discretization
//! of `dx = f dt + σ dW`. Deterministic jumps fire where the guard changes
//! sign inside a step (located by linear interpolation of the guard), random
//! jumps are thinned per step with probability `1 - exp(-λ h)`, and control
//! events split steps at their exact times.

mod density;
mod population;

use nalgebra::Vector2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ControlSchedule, HybridState, LoadModel};

pub use density::{empirical_density, EmpiricalDensity};
pub use population::{
    load_rng, simulate_population, snapshot_csv, PopulationRun, PopulationState,
    SNAPSHOT_CSV_HEADER,
};

/// Step and bookkeeping settings shared by trajectory and population runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    /// Integration step, hours.
    pub dt: f64,
    /// Two jumps closer than this abort the run, hours.
    pub zeno_epsilon: f64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            zeno_epsilon: 1e-9,
        }
    }
}

impl McSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "must be positive and finite"));
        }
        if !(self.zeno_epsilon >= 0.0) {
            return Err(Error::param("zeno_epsilon", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    Deterministic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub time: f64,
    pub kind: JumpKind,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<(f64, HybridState)>,
    pub jumps: Vec<JumpRecord>,
}

/// One Euler–Maruyama step of the continuous state; the mode is unchanged.
pub fn step_euler_maruyama(
    model: &LoadModel,
    state: &HybridState,
    dt: f64,
    noise: [f64; 2],
) -> Vector2<f64> {
    let drift = model.drift(state.mode, &state.x);
    let diffusion = model.diffusion(state.mode, &state.x);
    let mut next = state.x + drift * dt;
    if !diffusion.is_zero() {
        next += diffusion.sigma * Vector2::new(noise[0], noise[1]) * dt.sqrt();
    }
    next
}

/// Fraction of the step at which the guard reaches zero, by linear
/// interpolation of its end values.
pub fn crossing_fraction(guard_start: f64, guard_end: f64) -> Option<f64> {
    (guard_start > 0.0 && guard_end <= 0.0).then(|| guard_start / (guard_start - guard_end))
}

/// Within-step crossing of the current mode's outflow surface, if any.
pub fn locate_crossing(
    model: &LoadModel,
    prev: &HybridState,
    next: &Vector2<f64>,
    control: f64,
) -> Option<f64> {
    model.successor(prev.mode)?;
    crossing_fraction(
        model.guard(prev.mode, &prev.x, control),
        model.guard(prev.mode, next, control),
    )
}

/// Bernoulli thinning of the hazard over a step of length `dt`.
pub fn sample_random_jump(
    model: &LoadModel,
    state: &HybridState,
    control: f64,
    dt: f64,
    u: f64,
) -> Result<bool> {
    let rate = model.effective_hazard(state.mode, &state.x, control);
    if !(rate >= 0.0) {
        return Err(Error::ModelContract(format!(
            "hazard must be nonnegative, got {rate} in mode {}",
            state.mode
        )));
    }
    Ok(rate > 0.0 && u < -(-rate * dt).exp_m1())
}

/// Single-load integrator shared by trajectory and population drivers.
pub(crate) struct LoadRunner<'a> {
    model: &'a LoadModel,
    schedule: &'a ControlSchedule,
    settings: McSettings,
    load: usize,
    pub state: HybridState,
    pub time: f64,
    control: f64,
    next_event: usize,
    last_jump: Option<f64>,
    pub jump_count: usize,
}

impl<'a> LoadRunner<'a> {
    pub fn new(
        model: &'a LoadModel,
        schedule: &'a ControlSchedule,
        settings: McSettings,
        load: usize,
        init: HybridState,
    ) -> Result<Self> {
        settings.validate()?;
        model.check_mode(init.mode).map_err(|e| e.for_load(load))?;
        let mut runner = Self {
            model,
            schedule,
            settings,
            load,
            state: init,
            time: 0.0,
            control: 0.0,
            next_event: 0,
            last_jump: None,
            jump_count: 0,
        };
        // Events at or before t = 0 are in force from the start.
        while runner.next_event < schedule.events().len()
            && schedule.events()[runner.next_event].time <= 0.0
        {
            runner.control = schedule.events()[runner.next_event].value;
            runner.next_event += 1;
        }
        let g = model.guard(init.mode, &init.x, runner.control);
        let inside = if model.successor(init.mode).is_some() {
            g > 0.0
        } else {
            g >= 0.0
        };
        if !inside {
            return Err(Error::ModelContract(format!(
                "initial state {:?} lies outside its mode domain",
                init
            ))
            .for_load(load));
        }
        Ok(runner)
    }

    fn jump(
        &mut self,
        to: usize,
        kind: JumpKind,
        log: &mut Option<&mut Vec<JumpRecord>>,
    ) -> Result<()> {
        if let Some(prev) = self.last_jump {
            if self.time - prev < self.settings.zeno_epsilon {
                return Err(Error::Zeno {
                    load: self.load,
                    first: prev,
                    second: self.time,
                    epsilon: self.settings.zeno_epsilon,
                });
            }
        }
        if let Some(log) = log.as_deref_mut() {
            log.push(JumpRecord {
                time: self.time,
                kind,
                from: self.state.mode,
                to,
            });
        }
        self.state.mode = to;
        self.last_jump = Some(self.time);
        self.jump_count += 1;
        Ok(())
    }

    /// Applies the forced switch required when a control change leaves the
    /// state outside its (moved) mode domain.
    fn enforce_domain(&mut self, log: &mut Option<&mut Vec<JumpRecord>>) -> Result<()> {
        while let Some(next) = self.model.successor(self.state.mode) {
            if self
                .model
                .guard(self.state.mode, &self.state.x, self.control)
                > 0.0
            {
                break;
            }
            self.jump(next, JumpKind::Deterministic, log)?;
        }
        Ok(())
    }

    /// Integrates up to `t_end`, splitting at control events and jumps.
    pub fn advance_to<R: Rng>(
        &mut self,
        t_end: f64,
        rng: &mut R,
        mut log: Option<&mut Vec<JumpRecord>>,
    ) -> Result<()> {
        let events = self.schedule.events();
        let floor = 1e-12 * self.settings.dt;
        while t_end - self.time > floor {
            let event_time = events.get(self.next_event).map(|e| e.time);
            let seg_end = match event_time {
                Some(te) if te < t_end => te,
                _ => t_end,
            };
            self.integrate_segment(seg_end, rng, &mut log)?;
            if event_time == Some(seg_end) {
                self.control = events[self.next_event].value;
                self.next_event += 1;
                self.enforce_domain(&mut log)?;
            }
        }
        self.time = t_end;
        Ok(())
    }

    fn integrate_segment<R: Rng>(
        &mut self,
        seg_end: f64,
        rng: &mut R,
        log: &mut Option<&mut Vec<JumpRecord>>,
    ) -> Result<()> {
        let floor = 1e-12 * self.settings.dt;
        loop {
            let h = seg_end - self.time;
            if h <= floor {
                self.time = seg_end;
                return Ok(());
            }
            let noise = if self
                .model
                .diffusion(self.state.mode, &self.state.x)
                .is_zero()
            {
                [0.0, 0.0]
            } else {
                [rng.sample(StandardNormal), rng.sample(StandardNormal)]
            };
            let candidate = step_euler_maruyama(self.model, &self.state, h, noise);
            if !candidate.iter().all(|v| v.is_finite()) {
                return Err(Error::NumericalBlowup {
                    load: self.load,
                    time: self.time,
                });
            }
            let deterministic = locate_crossing(self.model, &self.state, &candidate, self.control);
            let rate = self
                .model
                .effective_hazard(self.state.mode, &self.state.x, self.control);
            let random = if rate > 0.0 {
                let u: f64 = rng.random();
                let jumps = sample_random_jump(self.model, &self.state, self.control, h, u)?;
                jumps.then(|| rng.random::<f64>())
            } else {
                None
            };
            let event = match (deterministic, random) {
                (Some(d), Some(r)) if r < d => Some((r, JumpKind::Random)),
                (Some(d), _) => Some((d, JumpKind::Deterministic)),
                (None, Some(r)) => Some((r, JumpKind::Random)),
                (None, None) => None,
            };
            match event {
                Some((frac, kind)) => {
                    self.state.x += (candidate - self.state.x) * frac;
                    self.time += frac * h;
                    let to = self
                        .model
                        .successor(self.state.mode)
                        .ok_or_else(|| Error::ModelContract("jump from terminal mode".into()))?;
                    self.jump(to, kind, log)?;
                }
                None => {
                    self.state.x = candidate;
                    self.time = seg_end;
                    return Ok(());
                }
            }
        }
    }
}

/// Number of integration steps covering `horizon` and the end time of step `n`.
pub(crate) fn step_end(n: usize, dt: f64, horizon: f64) -> f64 {
    (n as f64 * dt).min(horizon)
}

pub(crate) fn step_count(horizon: f64, dt: f64) -> usize {
    ((horizon / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Simulates one load, recording its state at the end of every step.
pub fn simulate_trajectory<R: Rng>(
    model: &LoadModel,
    init: HybridState,
    horizon: f64,
    schedule: &ControlSchedule,
    settings: McSettings,
    rng: &mut R,
) -> Result<Trajectory> {
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    let mut runner = LoadRunner::new(model, schedule, settings, 0, init)?;
    let steps = step_count(horizon, settings.dt);
    let mut samples = Vec::with_capacity(steps + 1);
    let mut jumps = Vec::new();
    samples.push((0.0, init));
    for n in 1..=steps {
        runner.advance_to(step_end(n, settings.dt, horizon), rng, Some(&mut jumps))?;
        samples.push((runner.time, runner.state));
    }
    Ok(Trajectory { samples, jumps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_hvac_etp, make_pev, EtpParameters};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pure_drift_step() {
        let m = make_pev(6.6, 4.0).unwrap();
        let s = HybridState::new(1, 1.0, 0.0);
        let next = step_euler_maruyama(&m, &s, 0.25, [0.3, -0.7]);
        assert_eq!(next, Vector2::new(0.75, 0.0));
    }

    #[test]
    fn hvac_step_matches_formula() {
        let p = EtpParameters {
            noise: 0.4,
            ..EtpParameters::default()
        };
        let m = make_hvac_etp(p).unwrap();
        let s = HybridState::new(1, 72.0, 72.0);
        let dt = 1e-3;
        let z = [0.5, -1.25];
        let next = step_euler_maruyama(&m, &s, dt, z);
        let f0 = p.a[(0, 0)] * 72.0 + p.a[(0, 1)] * 72.0 + p.b_on[0];
        let f1 = p.a[(1, 0)] * 72.0 + p.a[(1, 1)] * 72.0 + p.b_on[1];
        assert!((next[0] - (72.0 + f0 * dt + 0.4 * dt.sqrt() * 0.5)).abs() < 1e-12);
        assert!((next[1] - (72.0 + f1 * dt)).abs() < 1e-12);
    }

    #[test]
    fn crossing_fraction_by_interpolation() {
        assert_eq!(crossing_fraction(0.5, -0.5), Some(0.5));
        assert_eq!(crossing_fraction(0.2, 0.1), None);
        assert_eq!(crossing_fraction(0.3, 0.0), Some(1.0));
    }

    #[test]
    fn zero_hazard_never_jumps() {
        let m = make_pev(6.6, 4.0).unwrap();
        let s = HybridState::new(0, 1.0, 1.0);
        for u in [0.0, 1e-12, 0.5] {
            assert!(!sample_random_jump(&m, &s, 0.0, 0.01, u).unwrap());
        }
    }

    #[test]
    fn pev_trajectory_jump_times() {
        let m = make_pev(6.6, 4.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traj = simulate_trajectory(
            &m,
            HybridState::new(0, 2.0, 1.0),
            5.0,
            &ControlSchedule::constant(),
            McSettings {
                dt: 0.01,
                ..McSettings::default()
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(traj.jumps.len(), 2);
        assert!((traj.jumps[0].time - 1.0).abs() < 1e-9);
        assert_eq!((traj.jumps[0].from, traj.jumps[0].to), (0, 1));
        assert!((traj.jumps[1].time - 3.0).abs() < 1e-9);
        assert_eq!((traj.jumps[1].from, traj.jumps[1].to), (1, 2));
        assert!(traj.samples.windows(2).all(|w| w[1].0 > w[0].0));
        let (t_end, last) = traj.samples.last().unwrap();
        assert!((t_end - 5.0).abs() < 1e-12);
        assert_eq!(last.mode, 2);
        assert!((last.x[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn setpoint_step_forces_switch_at_event_time() {
        let p = EtpParameters::default();
        let m = make_hvac_etp(p).unwrap();
        // ON and 0.5 °F above the lower threshold: after +1 °F it is outside X_1.
        let init = HybridState::new(1, p.setpoint - p.deadband + 0.5, 74.0);
        let schedule = ControlSchedule::from_pairs(&[(0.01, 1.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = simulate_trajectory(&m, init, 0.02, &schedule, McSettings::default(), &mut rng)
            .unwrap();
        assert_eq!(traj.jumps.len(), 1);
        assert_eq!(traj.jumps[0].time, 0.01);
        assert_eq!(traj.jumps[0].kind, JumpKind::Deterministic);
        assert_eq!(traj.jumps[0].to, 0);
    }

    #[test]
    fn initial_state_outside_domain_is_rejected() {
        let m = make_hvac_etp(EtpParameters::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = simulate_trajectory(
            &m,
            HybridState::new(0, 80.0, 74.0),
            1.0,
            &ControlSchedule::constant(),
            McSettings::default(),
            &mut rng,
        );
        assert!(r.is_err());
    }

    #[test]
    fn zeno_guard_trips_on_close_jumps() {
        // Waiting -> charging at t = 0.2 h, charging -> completed at 0.5 h.
        let m = make_pev(6.6, 4.0).unwrap();
        let run = |epsilon: f64| {
            simulate_trajectory(
                &m,
                HybridState::new(0, 0.3, 0.2),
                2.0,
                &ControlSchedule::constant(),
                McSettings {
                    dt: 0.05,
                    zeno_epsilon: epsilon,
                },
                &mut ChaCha8Rng::seed_from_u64(0),
            )
        };
        assert_eq!(run(0.2).unwrap().jumps.len(), 2);
        assert!(matches!(run(0.5), Err(Error::Zeno { .. })));
    }
}
