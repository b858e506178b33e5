use std::io::{self, Write};

use crate::graph::PerronVector;
use crate::linalg::{dist, weighted_sum};
use crate::Scalar;

pub const TRACE_HEADER: &str = "iter,consensus_residual,feasibility_violation,objective";

/// Metrics of one round, measured after the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iter: usize,
    /// `max_j ||theta_j - theta_bar||` with `theta_bar = sum_i pi_i theta_i`.
    pub consensus_residual: T,
    /// Largest constraint positive part at `theta_bar`.
    pub feasibility_violation: T,
    pub objective: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub iter: usize,
    pub states: Vec<Vec<T>>,
}

/// Per-iteration log of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T> {
    pub rows: Vec<TraceRow<T>>,
    /// Node states every `thinning` iterations (empty when thinning is 0).
    pub snapshots: Vec<Snapshot<T>>,
    pub final_states: Vec<Vec<T>>,
    /// Perron-weighted average of the final states.
    pub final_average: Vec<T>,
    /// True when the stopping rule fired before `max_iter`.
    pub stopped_early: bool,
}

impl<T: Scalar> RunTrace<T> {
    pub fn last(&self) -> Option<&TraceRow<T>> {
        self.rows.last()
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn objectives(&self) -> impl Iterator<Item = T> + '_ {
        self.rows.iter().map(|r| r.objective)
    }

    /// Writes the metric log with the `iter,consensus_residual,...` header.
    /// Values use the shortest representation that round-trips exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{}",
                r.iter, r.consensus_residual, r.feasibility_violation, r.objective
            )?;
        }
        w.flush()
    }

    /// Per-node state dump keyed by `(iter, node)`; nodes are 1-based.
    pub fn write_states_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let d = self.final_states.first().map_or(0, Vec::len);
        write!(w, "iter,node")?;
        for c in 1..=d {
            write!(w, ",theta_{c}")?;
        }
        writeln!(w)?;
        for snap in &self.snapshots {
            for (j, s) in snap.states.iter().enumerate() {
                write!(w, "{},{}", snap.iter, j + 1)?;
                for v in s {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()
    }
}

/// Stop once both metrics stay below their thresholds for `patience`
/// consecutive iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule<T> {
    pub consensus_tol: T,
    pub feasibility_tol: T,
    pub patience: usize,
}

impl<T: Scalar> StopRule<T> {
    pub fn new(consensus_tol: T, feasibility_tol: T) -> Self {
        StopRule {
            consensus_tol,
            feasibility_tol,
            patience: 100,
        }
    }
}

pub(crate) struct Recorder<'a, T> {
    pi: &'a PerronVector<T>,
    thinning: usize,
    stop: Option<StopRule<T>>,
    streak: usize,
    rows: Vec<TraceRow<T>>,
    snapshots: Vec<Snapshot<T>>,
}

impl<'a, T: Scalar> Recorder<'a, T> {
    pub(crate) fn new(pi: &'a PerronVector<T>, thinning: usize, stop: Option<StopRule<T>>, capacity: usize) -> Self {
        Recorder {
            pi,
            thinning,
            stop,
            streak: 0,
            rows: Vec::with_capacity(capacity),
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn average(&self, states: &[Vec<T>]) -> Vec<T> {
        let d = states.first().map_or(0, Vec::len);
        weighted_sum(self.pi.as_slice(), states, d)
    }

    /// Logs round `iter`; returns true when the stopping rule fires.
    pub(crate) fn record(
        &mut self,
        iter: usize,
        states: &[Vec<T>],
        violation: impl Fn(&[T]) -> T,
        objective: impl Fn(&[T]) -> T,
    ) -> bool {
        let avg = self.average(states);
        let consensus_residual = states.iter().map(|s| dist(s, &avg)).fold(T::zero(), T::max);
        let row = TraceRow {
            iter,
            consensus_residual,
            feasibility_violation: violation(&avg),
            objective: objective(&avg),
        };
        self.rows.push(row);
        if self.thinning > 0 && iter.is_multiple_of(self.thinning) {
            self.snapshots.push(Snapshot {
                iter,
                states: states.to_vec(),
            });
        }
        match self.stop {
            Some(rule) => {
                if row.consensus_residual < rule.consensus_tol && row.feasibility_violation < rule.feasibility_tol {
                    self.streak += 1;
                } else {
                    self.streak = 0;
                }
                self.streak >= rule.patience
            }
            None => false,
        }
    }

    pub(crate) fn finish(self, final_states: Vec<Vec<T>>, stopped_early: bool) -> RunTrace<T> {
        let final_average = self.average(&final_states);
        RunTrace {
            rows: self.rows,
            snapshots: self.snapshots,
            final_states,
            final_average,
            stopped_early,
        }
    }
}
