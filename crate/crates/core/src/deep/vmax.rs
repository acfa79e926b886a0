use std::collections::VecDeque;

/// FIFO window of recent state values with O(1) amortised maximum.
#[derive(Debug, Clone)]
pub struct VmaxBuffer {
    capacity: usize,
    pushed: u64,
    /// `(insertion index, value)` with strictly decreasing values.
    window: VecDeque<(u64, f64)>,
}

impl VmaxBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity: capacity.max(1),
            pushed: 0,
            window: VecDeque::new(),
        }
    }

    pub fn push(&mut self, v: f64) {
        while self.window.back().is_some_and(|&(_, b)| b <= v) {
            self.window.pop_back();
        }
        self.window.push_back((self.pushed, v));
        self.pushed += 1;
        let oldest_live = self.pushed.saturating_sub(self.capacity as u64);
        while self.window.front().is_some_and(|&(i, _)| i < oldest_live) {
            self.window.pop_front();
        }
    }

    /// Largest value among the last `capacity` pushes.
    pub fn max(&self) -> Option<f64> {
        self.window.front().map(|&(_, v)| v)
    }

    pub fn len(&self) -> usize {
        (self.pushed as usize).min(self.capacity)
    }

    pub fn is_empty(&self) -> bool {
        self.pushed == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sliding_max_matches_brute_force() {
        let mut b = VmaxBuffer::new(5);
        let xs = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0, 5.0, 3.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (i, &x) in xs.iter().enumerate() {
            b.push(x);
            let lo = (i + 1).saturating_sub(5);
            let want = xs[lo..=i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(b.max(), Some(want));
        }
        assert_eq!(b.len(), 5);
    }

    #[test]
    fn empty_has_no_max() {
        assert_eq!(VmaxBuffer::new(3).max(), None);
    }
}
