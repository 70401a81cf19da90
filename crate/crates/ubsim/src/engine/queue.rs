//! Event queue with a total (time, insertion sequence) order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Simulation time in integer ticks of 0.001 ns.
pub type Tick = u64;

pub const TICKS_PER_NS: f64 = 1000.0;

pub fn ns_to_ticks(ns: f64) -> Tick {
    debug_assert!(ns >= 0.0 && ns.is_finite(), "bad duration {ns}");
    (ns * TICKS_PER_NS).round() as Tick
}

pub fn ticks_to_ns(t: Tick) -> f64 {
    t as f64 / TICKS_PER_NS
}

struct Entry<E> {
    at: Tick,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, o: &Self) -> bool {
        (self.at, self.seq) == (o.at, o.seq)
    }
}
impl<E> Eq for Entry<E> {}
impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<E> Ord for Entry<E> {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on (time, seq)
        (o.at, o.seq).cmp(&(self.at, self.seq))
    }
}

pub struct EventQueue<E> {
    heap: BinaryHeap<Entry<E>>,
    seq: u64,
    now: Tick,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue { heap: BinaryHeap::new(), seq: 0, now: 0 }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    /// Schedule at an absolute time. Times in the past are clamped to now.
    pub fn schedule(&mut self, at: Tick, event: E) {
        let at = at.max(self.now);
        self.seq += 1;
        self.heap.push(Entry { at, seq: self.seq, event });
    }

    pub fn schedule_in(&mut self, delay: Tick, event: E) {
        self.schedule(self.now + delay, event);
    }

    pub fn pop(&mut self) -> Option<(Tick, E)> {
        let e = self.heap.pop()?;
        debug_assert!(e.at >= self.now);
        self.now = e.at;
        Some((e.at, e.event))
    }

    pub fn peek_time(&self) -> Option<Tick> {
        self.heap.peek().map(|e| e.at)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_time_then_insertion() {
        let mut q = EventQueue::new();
        q.schedule(5, 'a');
        q.schedule(1, 'b');
        q.schedule(5, 'c');
        q.schedule(1, 'd');
        let order: Vec<char> = std::iter::from_fn(|| q.pop().map(|x| x.1)).collect();
        assert_eq!(order, vec!['b', 'd', 'a', 'c']);
    }

    #[test]
    fn tick_conversion() {
        assert_eq!(ns_to_ticks(3.106), 3106);
        assert_eq!(ticks_to_ns(499_390), 499.39);
    }
}
