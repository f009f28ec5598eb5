//! Time sources and the per-call-site state behind `interval/2`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Mutex;

use crate::term::{TimePoint, TimeSpan};

pub trait Clock: Send + Sync {
    fn now(&self) -> TimePoint;
}

/// Wall clock, UTC.
#[derive(Debug, Default)]
pub struct RealClock;

impl Clock for RealClock {
    fn now(&self) -> TimePoint {
        TimePoint::from_epoch_seconds(chrono::Utc::now().timestamp())
    }
}

/// Manually driven clock with millisecond resolution.
#[derive(Debug)]
pub struct SimulatedClock {
    millis: AtomicI64,
}

impl SimulatedClock {
    pub fn new(start: TimePoint) -> SimulatedClock {
        SimulatedClock {
            millis: AtomicI64::new(start.epoch_seconds() * 1000),
        }
    }

    pub fn from_epoch_millis(millis: i64) -> SimulatedClock {
        SimulatedClock {
            millis: AtomicI64::new(millis),
        }
    }

    pub fn advance_millis(&self, ms: i64) {
        self.millis.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set(&self, t: TimePoint) {
        self.millis.store(t.epoch_seconds() * 1000, Ordering::SeqCst);
    }

    pub fn epoch_millis(&self) -> i64 {
        self.millis.load(Ordering::SeqCst)
    }
}

impl Clock for SimulatedClock {
    fn now(&self) -> TimePoint {
        TimePoint::from_epoch_seconds(self.epoch_millis().div_euclid(1000))
    }
}

/// Identifies one `interval/2` call: the owning rule plus the literal's position.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TimerKey {
    pub owner: String,
    pub clause: Option<u64>,
    pub index: usize,
}

/// Last-success times of `interval/2` calls.
///
/// With an epoch set (the daemon sets it to its start time) a call site's
/// first success needs a full period since the epoch; without one the first
/// call succeeds immediately.
#[derive(Debug, Default)]
pub struct IntervalTimers {
    inner: Mutex<TimerTable>,
}

#[derive(Debug, Default)]
struct TimerTable {
    epoch: Option<TimePoint>,
    last: HashMap<TimerKey, TimePoint>,
}

impl IntervalTimers {
    pub fn new() -> IntervalTimers {
        IntervalTimers::default()
    }

    pub fn with_epoch(epoch: TimePoint) -> IntervalTimers {
        let timers = IntervalTimers::default();
        timers.set_epoch(epoch);
        timers
    }

    pub fn set_epoch(&self, epoch: TimePoint) {
        self.inner.lock().expect("timer lock").epoch = Some(epoch);
    }

    /// Succeeds when `period` has elapsed since the last success at `key`,
    /// recording `now` as the new last success.
    pub fn check(&self, key: TimerKey, period: TimeSpan, now: TimePoint) -> bool {
        let mut table = self.inner.lock().expect("timer lock");
        let reference = table.last.get(&key).copied().or(table.epoch);
        let due = match reference {
            None => true,
            Some(r) => now.seconds_since(r) >= period.total_seconds(),
        };
        if due {
            table.last.insert(key, now);
        }
        due
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> TimerKey {
        TimerKey {
            owner: "r".into(),
            clause: Some(1),
            index: 1,
        }
    }

    #[test]
    fn first_call_succeeds_without_epoch() {
        let timers = IntervalTimers::new();
        let t0 = TimePoint::from_epoch_seconds(100);
        let ten = TimeSpan::new(0, 0, 0, 10);
        assert!(timers.check(key(), ten, t0));
        assert!(!timers.check(key(), ten, t0.plus_seconds(9)));
        assert!(timers.check(key(), ten, t0.plus_seconds(10)));
    }

    #[test]
    fn epoch_delays_first_success() {
        let t0 = TimePoint::from_epoch_seconds(0);
        let timers = IntervalTimers::with_epoch(t0);
        let ten = TimeSpan::new(0, 0, 0, 10);
        let fired: Vec<i64> = (0..=35)
            .filter(|s| timers.check(key(), ten, t0.plus_seconds(*s)))
            .collect();
        assert_eq!(fired, [10, 20, 30]);
    }

    #[test]
    fn simulated_clock_truncates_to_seconds() {
        let c = SimulatedClock::from_epoch_millis(1_500);
        assert_eq!(c.now().epoch_seconds(), 1);
        c.advance_millis(600);
        assert_eq!(c.now().epoch_seconds(), 2);
    }
}
