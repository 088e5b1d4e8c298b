use std::collections::VecDeque;

use crate::error::{Error, Result};

/// What the feedback controller sees at a given step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Delayed<T> {
    /// No datum has made it through the loop yet.
    DeadTime,
    /// Datum published at `stamp`, i.e. `delay_steps` steps ago.
    Datum { stamp: usize, value: T },
}

impl<T> Delayed<T> {
    pub fn as_ref(&self) -> Delayed<&T> {
        match self {
            Delayed::DeadTime => Delayed::DeadTime,
            Delayed::Datum { stamp, value } => Delayed::Datum { stamp: *stamp, value },
        }
    }
}

/// FIFO carrying per-step data through a feedback loop of `delay_steps` steps.
///
/// The consumer at step `k` receives the datum published at step `k - d`.
#[derive(Debug, Clone)]
pub struct DelayLine<T> {
    delay_steps: usize,
    buffer: VecDeque<(usize, T)>,
}

impl<T: Clone> DelayLine<T> {
    pub fn new(delay_steps: usize) -> Result<Self> {
        if delay_steps == 0 {
            return Err(Error::InvalidConfig("delay must be at least one step".into()));
        }
        Ok(Self {
            delay_steps,
            buffer: VecDeque::with_capacity(delay_steps + 1),
        })
    }

    pub fn delay_steps(&self) -> usize {
        self.delay_steps
    }

    /// Publish the datum produced at `step`. Steps must be published in order.
    pub fn publish(&mut self, step: usize, value: T) -> Result<()> {
        if let Some(&(last, _)) = self.buffer.back() {
            if step != last + 1 {
                return Err(Error::ProtocolViolation {
                    step,
                    reason: "published out of order",
                });
            }
        }
        self.buffer.push_back((step, value));
        if self.buffer.len() > self.delay_steps {
            self.buffer.pop_front();
        }
        Ok(())
    }

    /// Datum visible to the consumer at `step`.
    pub fn read(&self, step: usize) -> Result<Delayed<T>> {
        if step < self.delay_steps {
            return Ok(Delayed::DeadTime);
        }
        let wanted = step - self.delay_steps;
        let (first, last) = match (self.buffer.front(), self.buffer.back()) {
            (Some(f), Some(l)) => (f.0, l.0),
            _ => {
                return Err(Error::ProtocolViolation {
                    step,
                    reason: "nothing published yet",
                })
            }
        };
        if wanted > last {
            return Err(Error::ProtocolViolation {
                step,
                reason: "datum not yet published",
            });
        }
        if wanted < first {
            return Err(Error::ProtocolViolation {
                step,
                reason: "datum already evicted",
            });
        }
        let (stamp, value) = self.buffer[wanted - first].clone();
        debug_assert_eq!(stamp, wanted);
        Ok(Delayed::Datum { stamp, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_up_to(d: usize, last: usize) -> DelayLine<usize> {
        let mut line = DelayLine::new(d).unwrap();
        for k in 0..=last {
            line.publish(k, 1000 + k).unwrap();
        }
        line
    }

    #[test]
    fn unit_delay_reads_previous_step() {
        let line = line_up_to(1, 4);
        assert_eq!(line.read(5).unwrap(), Delayed::Datum { stamp: 4, value: 1004 });
    }

    #[test]
    fn dead_time_before_first_datum() {
        let line = line_up_to(8, 2);
        assert_eq!(line.read(3).unwrap(), Delayed::DeadTime);
    }

    #[test]
    fn boundary_step_reads_step_zero() {
        let line = line_up_to(8, 7);
        assert_eq!(line.read(8).unwrap(), Delayed::Datum { stamp: 0, value: 1000 });
    }

    #[test]
    fn reading_ahead_is_a_violation() {
        let line = line_up_to(2, 3);
        assert!(matches!(line.read(6), Err(Error::ProtocolViolation { .. })));
    }

    #[test]
    fn out_of_order_publish_is_a_violation() {
        let mut line = line_up_to(2, 3);
        assert!(line.publish(5, 0).is_err());
    }

    #[test]
    fn sentinels_arrive_exactly_d_steps_late() {
        for d in [1usize, 2, 3, 8, 64] {
            let mut line = DelayLine::new(d).unwrap();
            for k in 0..500 {
                match line.read(k).unwrap() {
                    Delayed::DeadTime => assert!(k < d),
                    Delayed::Datum { stamp, value } => {
                        assert_eq!(stamp + d, k);
                        assert_eq!(value, stamp * 31 + 7);
                    }
                }
                line.publish(k, k * 31 + 7).unwrap();
            }
        }
    }

    #[test]
    fn zero_delay_rejected() {
        assert!(DelayLine::<f64>::new(0).is_err());
    }
}
