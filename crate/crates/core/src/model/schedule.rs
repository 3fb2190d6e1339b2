use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One change of the shared external control signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlEvent {
    pub time: f64,
    pub value: f64,
}

/// Piecewise-constant control signal shared by the whole population.
///
/// The signal is 0 before the first event and takes each event's value from
/// its time onward.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    events: Vec<ControlEvent>,
}

impl ControlSchedule {
    pub fn new(events: Vec<ControlEvent>) -> Result<Self> {
        for (i, e) in events.iter().enumerate() {
            if !e.time.is_finite() || !e.value.is_finite() {
                return Err(Error::param("events", format!("event {i} is not finite")));
            }
            if i > 0 && !(e.time > events[i - 1].time) {
                return Err(Error::param(
                    "events",
                    "event times must be strictly increasing",
                ));
            }
        }
        Ok(Self { events })
    }

    pub fn constant() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(time, value)| ControlEvent { time, value })
                .collect(),
        )
    }

    pub fn events(&self) -> &[ControlEvent] {
        &self.events
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.events
            .iter()
            .take_while(|e| e.time <= t)
            .last()
            .map_or(0.0, |e| e.value)
    }

    /// First event strictly after `t`.
    pub fn next_after(&self, t: f64) -> Option<&ControlEvent> {
        self.events.iter().find(|e| e.time > t)
    }

    /// Same schedule with every event time moved by `offset`.
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            events: self
                .events
                .iter()
                .map(|e| ControlEvent {
                    time: e.time + offset,
                    value: e.value,
                })
                .collect(),
        }
    }

    /// Smallest and largest signal values the schedule ever takes (including
    /// the initial 0).
    pub fn value_range(&self) -> (f64, f64) {
        self.events
            .iter()
            .fold((0.0, 0.0), |(lo, hi), e| (lo.min(e.value), hi.max(e.value)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_constant_lookup() {
        let s = ControlSchedule::from_pairs(&[(1.0, 1.0), (4.0, 0.0)]).unwrap();
        assert_eq!(s.value_at(0.0), 0.0);
        assert_eq!(s.value_at(0.999), 0.0);
        assert_eq!(s.value_at(1.0), 1.0);
        assert_eq!(s.value_at(3.9), 1.0);
        assert_eq!(s.value_at(4.0), 0.0);
        assert_eq!(s.next_after(1.0).unwrap().time, 4.0);
        assert!(s.next_after(4.0).is_none());
        assert_eq!(s.value_range(), (0.0, 1.0));
    }

    #[test]
    fn rejects_unordered_events() {
        assert!(ControlSchedule::from_pairs(&[(2.0, 1.0), (1.0, 0.0)]).is_err());
        assert!(ControlSchedule::from_pairs(&[(1.0, 1.0), (1.0, 0.0)]).is_err());
    }
}
