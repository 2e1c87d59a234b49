//! Latency decomposition: retrieval-side time vs integration-side time.
//!
//! `l_r` covers embed + retrieve + score + rank, `l_i` covers confidence +
//! decide + generate, and `l_total` is their sum by construction. Two clock
//! implementations back the [`StageTimer`]: a monotonic wall clock for real
//! measurements, and a logical clock that advances a fixed tick per reading
//! so that evaluation reports can be reproduced byte for byte.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// How pipeline stages are timed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TimingMode {
    /// Wall-clock measurement from a monotonic timer.
    #[default]
    Measured,
    /// Deterministic stamps: every clock reading advances by `tick_micros`.
    Logical { tick_micros: u64 },
}

trait Clock {
    fn now_micros(&mut self) -> u64;
}

struct MonotonicClock {
    origin: Instant,
}

impl Clock for MonotonicClock {
    fn now_micros(&mut self) -> u64 {
        self.origin.elapsed().as_micros() as u64
    }
}

struct LogicalClock {
    next: u64,
    tick: u64,
}

impl Clock for LogicalClock {
    fn now_micros(&mut self) -> u64 {
        self.next += self.tick;
        self.next
    }
}

/// Times the two pipeline phases. Each pipeline execution owns its timer, so
/// logical timing stays deterministic under concurrent runs.
pub struct StageTimer {
    clock: Box<dyn Clock>,
    start: u64,
    retrieval_end: Option<u64>,
}

impl StageTimer {
    pub fn start(mode: TimingMode) -> Self {
        let mut clock: Box<dyn Clock> = match mode {
            TimingMode::Measured => Box::new(MonotonicClock {
                origin: Instant::now(),
            }),
            TimingMode::Logical { tick_micros } => Box::new(LogicalClock {
                next: 0,
                tick: tick_micros,
            }),
        };
        let start = clock.now_micros();
        StageTimer {
            clock,
            start,
            retrieval_end: None,
        }
    }

    /// Mark the end of the retrieval phase (embed/retrieve/score/rank).
    pub fn mark_retrieval_done(&mut self) {
        self.retrieval_end = Some(self.clock.now_micros());
    }

    /// Finish the integration phase and produce the breakdown.
    pub fn finish(mut self) -> LatencyBreakdown {
        let end = self.clock.now_micros();
        let mid = self.retrieval_end.unwrap_or(end);
        measure_latency(
            Duration::from_micros(mid.saturating_sub(self.start)),
            Duration::from_micros(end.saturating_sub(mid)),
        )
    }
}

/// Per-query latency decomposition, in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyBreakdown {
    pub l_r_micros: u64,
    pub l_i_micros: u64,
    pub l_total_micros: u64,
}

impl LatencyBreakdown {
    pub fn l_r(&self) -> Duration {
        Duration::from_micros(self.l_r_micros)
    }

    pub fn l_i(&self) -> Duration {
        Duration::from_micros(self.l_i_micros)
    }

    pub fn l_total(&self) -> Duration {
        Duration::from_micros(self.l_total_micros)
    }
}

/// Combine stage timings; `l_total` is exactly `l_r + l_i`.
pub fn measure_latency(l_r: Duration, l_i: Duration) -> LatencyBreakdown {
    let l_r_micros = l_r.as_micros() as u64;
    let l_i_micros = l_i.as_micros() as u64;
    LatencyBreakdown {
        l_r_micros,
        l_i_micros,
        l_total_micros: l_r_micros + l_i_micros,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_are_additive() {
        let b = measure_latency(Duration::from_millis(3), Duration::from_millis(7));
        assert_eq!(b.l_total(), Duration::from_millis(10));
        assert_eq!(b.l_total_micros, b.l_r_micros + b.l_i_micros);
    }

    #[test]
    fn logical_timer_is_deterministic() {
        let run = || {
            let mut t = StageTimer::start(TimingMode::Logical { tick_micros: 250 });
            t.mark_retrieval_done();
            t.finish()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
        assert_eq!(a.l_r_micros, 250);
        assert_eq!(a.l_i_micros, 250);
        assert_eq!(a.l_total_micros, 500);
    }

    #[test]
    fn measured_timer_is_additive() {
        let mut t = StageTimer::start(TimingMode::Measured);
        std::thread::sleep(Duration::from_millis(2));
        t.mark_retrieval_done();
        std::thread::sleep(Duration::from_millis(2));
        let b = t.finish();
        assert_eq!(b.l_total_micros, b.l_r_micros + b.l_i_micros);
        assert!(b.l_r_micros >= 1_000);
        assert!(b.l_i_micros >= 1_000);
    }

    #[test]
    fn missing_retrieval_mark_charges_everything_to_retrieval() {
        let t = StageTimer::start(TimingMode::Logical { tick_micros: 100 });
        let b = t.finish();
        assert_eq!(b.l_i_micros, 0);
        assert_eq!(b.l_total_micros, b.l_r_micros);
    }
}
