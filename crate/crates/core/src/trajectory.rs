//! One simulated measurement: photocurrent, record and feedback, step by step.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::estimators::{accumulate_rotor, combine_c, finalize, DyneRecord, EstimateSet};
use crate::feedback::{FeedbackController, FeedbackScheme, Published, SimplifiedClock};
use crate::sim::{DelayLine, NoiseStream, SignalModel, TimeGrid};
use crate::theory::{squeeze_params, squeezed_photon_number, SqueezeParams};

/// Everything that defines a trajectory apart from its noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams {
    pub signal: SignalModel,
    pub grid: TimeGrid,
    pub delay_steps: usize,
    pub scheme: FeedbackScheme,
    pub clock: SimplifiedClock,
    /// Local-oscillator phase at step 0.
    pub initial_lo_phase: f64,
}

impl TrajectoryParams {
    pub fn new(
        signal: SignalModel,
        grid: TimeGrid,
        delay_steps: usize,
        scheme: FeedbackScheme,
    ) -> Result<Self> {
        if delay_steps == 0 || delay_steps > grid.n_steps() {
            return Err(Error::InvalidConfig(format!(
                "delay of {delay_steps} steps does not fit a grid of {}",
                grid.n_steps()
            )));
        }
        Ok(Self {
            signal,
            grid,
            delay_steps,
            scheme,
            clock: SimplifiedClock::Current,
            initial_lo_phase: 0.0,
        })
    }

    pub fn tau(&self) -> f64 {
        self.grid.tau(self.delay_steps)
    }

    pub fn controller(&self) -> FeedbackController {
        FeedbackController::new(self.scheme, self.grid, self.signal.alpha, self.delay_steps)
            .with_clock(self.clock)
    }

    /// Largest `|B(1)|` compatible with the dead time: `1 - tau + 2 dv`.
    pub fn b_ceiling(&self) -> f64 {
        1.0 - self.tau() + 2.0 * self.grid.dv()
    }
}

/// Per-step trace, handed to observers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Time at the end of the step.
    pub v: f64,
    pub lo_phase: f64,
    pub i_dv: f64,
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub eps: f64,
}

/// Outcome of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryResult {
    pub estimates: EstimateSet,
    pub record: DyneRecord,
    pub c: Complex64,
    /// `None` when `|B(1)| >= 1`.
    pub squeeze: Option<SqueezeParams>,
    pub n_p: Option<f64>,
}

/// Simulate with the counter-based noise of `stream`.
pub fn run_trajectory(params: &TrajectoryParams, stream: &NoiseStream) -> Result<TrajectoryResult> {
    let mut noise = stream.increments(params.grid.dv());
    simulate(params, |_| noise.next_increment(), |_| {})
}

/// Simulate with caller-supplied Wiener increments (`dw(step)`), reporting
/// every step to `observer`.
pub fn simulate<W, O>(params: &TrajectoryParams, mut dw: W, mut observer: O) -> Result<TrajectoryResult>
where
    W: FnMut(usize) -> f64,
    O: FnMut(&StepRecord),
{
    let n = params.grid.n_steps();
    let dv = params.grid.dv();
    let controller = params.controller();
    let alpha = params.signal.alpha;
    let (sin_phi, cos_phi) = params.signal.true_phase.sin_cos();

    let mut line: DelayLine<Published> = DelayLine::new(params.delay_steps)?;
    let mut record = DyneRecord::default();
    let mut state = controller.initial_state(params.initial_lo_phase);

    for step in 0..n {
        if step > 0 {
            let delayed = line.read(step)?;
            state = controller.next_phase(&state, delayed.as_ref(), step)?;
        }
        let (s, c) = state.lo_phase.sin_cos();
        let i_dv = 2.0 * alpha * (cos_phi * c + sin_phi * s) * dv + dw(step);
        record = accumulate_rotor(&record, i_dv, Complex64::new(c, s), dv);
        observer(&StepRecord {
            step,
            v: record.v,
            lo_phase: state.lo_phase,
            i_dv,
            a: record.a,
            b: record.b,
            c: combine_c(&record),
            eps: state.eps,
        });
        line.publish(step, Published { i_dv, record })?;
    }

    // The final feedback phase uses whatever reached the controller by v = 1.
    let feedback_final = if params.scheme.has_intermediate_estimate() {
        let delayed = line.read(n)?;
        let last = controller.next_phase(&state, delayed.as_ref(), n)?;
        Some(controller.intermediate_estimate_of(&last)?)
    } else {
        None
    };

    // Fix v to exactly 1 so the final C is not affected by summation drift.
    record.v = 1.0;
    let estimates = finalize(&record, feedback_final);
    let squeeze = squeeze_params(record.a, record.b, record.v).ok();
    Ok(TrajectoryResult {
        estimates,
        record,
        c: combine_c(&record),
        squeeze,
        n_p: squeeze.as_ref().map(squeezed_photon_number),
    })
}
