use std::collections::VecDeque;

use super::SimError;

/// Fixed transport delay of a whole number of samples.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    requested: f64,
    dt: f64,
    buffer: VecDeque<f64>,
}

impl DelayLine {
    /// Delay rounded to the nearest multiple of `dt`; the buffer starts full of `fill`.
    pub fn new(delay: f64, dt: f64, fill: f64) -> Result<Self, SimError> {
        if !(dt > 0.0) || !(delay >= 0.0) || !delay.is_finite() {
            return Err(SimError::InvalidDelay { delay, dt });
        }
        let len = (delay / dt).round() as usize;
        Ok(Self { requested: delay, dt, buffer: std::iter::repeat_n(fill, len).collect() })
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn requested_delay(&self) -> f64 {
        self.requested
    }

    /// Delay actually applied, `len * dt`.
    pub fn realized_delay(&self) -> f64 {
        self.buffer.len() as f64 * self.dt
    }

    /// Enqueues `command` and returns the one pushed `len` calls earlier.
    pub fn push_pop(&mut self, command: f64) -> f64 {
        match self.buffer.pop_front() {
            Some(out) => {
                self.buffer.push_back(command);
                out
            }
            None => command,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_delay_passes_through() {
        let mut d = DelayLine::new(0.0, 0.01, 9.0).unwrap();
        assert!(d.is_empty());
        for x in [1.0, -2.0, 3.5] {
            assert_eq!(d.push_pop(x), x);
        }
    }

    #[test]
    fn fifteen_sample_shift() {
        let mut d = DelayLine::new(0.15, 0.01, -1.0).unwrap();
        assert_eq!(d.len(), 15);
        assert!((d.realized_delay() - 0.15).abs() < 1e-15);
        let out: Vec<f64> = (0..100).map(|i| d.push_pop(i as f64)).collect();
        assert!(out[..15].iter().all(|&v| v == -1.0));
        for (i, v) in out.iter().enumerate().skip(15) {
            assert_eq!(*v, (i - 15) as f64);
        }
    }

    #[test]
    fn rounds_to_nearest_sample() {
        let d = DelayLine::new(0.014, 0.01, 0.0).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.requested_delay(), 0.014);
        assert!(DelayLine::new(-0.1, 0.01, 0.0).is_err());
        assert!(DelayLine::new(0.1, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn warm_up_outputs_equal_fill(delay in 0.0f64..0.5, dt in 0.001f64..0.05, fill in -1.0f64..1.0) {
            let mut d = DelayLine::new(delay, dt, fill).unwrap();
            let n = d.len();
            for i in 0..n {
                prop_assert_eq!(d.push_pop(i as f64 + 10.0), fill);
            }
            let expected = if n == 0 { 0.0 } else { 10.0 };
            prop_assert_eq!(d.push_pop(0.0), expected);
        }
    }
}
