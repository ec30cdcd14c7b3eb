//! Global earliest-deadline-first queue.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tracegen::Query;
use crate::{Micros, SignedMicros};

/// Queries dispatched together. `arrival_us` and `deadline_us` are the
/// earliest arrival and earliest deadline of the members.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Batch {
    pub queries: Vec<Query>,
    pub arrival_us: Micros,
    pub deadline_us: Micros,
}

impl Batch {
    pub fn new(queries: Vec<Query>) -> Result<Self> {
        let arrival_us = queries
            .iter()
            .map(|q| q.arrival_us)
            .min()
            .ok_or(Error::EmptyQueue)?;
        let deadline_us = queries
            .iter()
            .map(|q| q.deadline_us)
            .min()
            .expect("non-empty");
        Ok(Batch {
            queries,
            arrival_us,
            deadline_us,
        })
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// Min-heap on `(deadline, insertion sequence)`, so equal deadlines leave in
/// FIFO order.
#[derive(Debug, Default)]
pub struct EdfQueue {
    heap: BinaryHeap<Reverse<(Micros, u64, Query)>>,
    present: HashSet<u64>,
    seq: u64,
}

impl EdfQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn enqueue(&mut self, q: Query) -> Result<()> {
        if !self.present.insert(q.id) {
            return Err(Error::DuplicateQuery(q.id));
        }
        self.heap.push(Reverse((q.deadline_us, self.seq, q)));
        self.seq += 1;
        Ok(())
    }

    pub fn peek(&self) -> Option<&Query> {
        self.heap.peek().map(|Reverse((_, _, q))| q)
    }

    /// Slack of the most urgent query, `deadline - now`; may be negative.
    pub fn peek_slack(&self, now_us: Micros) -> Option<SignedMicros> {
        self.peek()
            .map(|q| q.deadline_us as SignedMicros - now_us as SignedMicros)
    }

    pub fn pop(&mut self) -> Option<Query> {
        let Reverse((_, _, q)) = self.heap.pop()?;
        self.present.remove(&q.id);
        Some(q)
    }

    /// Removes up to `n` front queries as one batch.
    pub fn take_batch(&mut self, n: usize) -> Result<Batch> {
        if self.is_empty() {
            return Err(Error::EmptyQueue);
        }
        let take = n.max(1).min(self.len());
        let queries = (0..take)
            .map(|_| self.pop().expect("len checked"))
            .collect();
        Batch::new(queries)
    }

    /// Pops front queries whose slack is below `min_feasible_latency_us`.
    /// Deadlines behind the front are later, so the scan stops at the first
    /// query that can still be served.
    pub fn drop_expired(&mut self, now_us: Micros, min_feasible_latency_us: Micros) -> Vec<Query> {
        let mut dropped = Vec::new();
        while let Some(slack) = self.peek_slack(now_us) {
            if slack >= min_feasible_latency_us as SignedMicros {
                break;
            }
            dropped.push(self.pop().expect("peeked"));
        }
        dropped
    }
}
