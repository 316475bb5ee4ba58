use super::config::StepConfig;
use super::step::{StepResult, Stepper};
use crate::swe::{ConservedSet, ShallowWater, State};
use crate::{Error, Result};

/// Conserved quantities and solver statistics after one step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub conserved: ConservedSet,
    pub newton_iters: usize,
    pub residual: f64,
}

/// Result of a multi-step run.
#[derive(Clone, Debug)]
pub struct RunSeries {
    /// Record 0 is the initial state.
    pub records: Vec<StepRecord>,
    pub final_state: State,
}

impl RunSeries {
    pub fn initial(&self) -> &ConservedSet {
        &self.records[0].conserved
    }

    /// Largest `|E(t) − E(0)| / |E(0)|` over the run.
    pub fn max_rel_energy_error(&self) -> f64 {
        let e0 = self.initial().energy;
        self.records
            .iter()
            .map(|r| ((r.conserved.energy - e0) / e0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_rel_enstrophy_error(&self) -> f64 {
        let s0 = self.initial().enstrophy;
        self.records
            .iter()
            .map(|r| ((r.conserved.enstrophy - s0) / s0).abs())
            .fold(0.0, f64::max)
    }
}

/// Advances `initial` by `n_steps`, calling `observer` after every step
/// (with the step index and new state). Failures are wrapped with the index
/// of the failing step.
pub fn run<F>(
    model: &ShallowWater,
    initial: &State,
    cfg: &StepConfig,
    n_steps: usize,
    mut observer: F,
) -> Result<RunSeries>
where
    F: FnMut(usize, &State, &StepResult) -> Result<()>,
{
    let h_ref = initial.d.integral() / model.mesh().area();
    let stepper = Stepper::new(model, *cfg, h_ref)?;
    let mut records = vec![StepRecord {
        step: 0,
        time: initial.t,
        conserved: model.conserved(initial)?,
        newton_iters: 0,
        residual: 0.0,
    }];
    let mut state = initial.clone();
    for n in 1..=n_steps {
        let res = stepper.step(&state).map_err(|e| Error::StepFailed {
            step: n,
            source: Box::new(e),
        })?;
        observer(n, &res.state, &res)?;
        records.push(StepRecord {
            step: n,
            time: res.state.t,
            conserved: model.conserved(&res.state)?,
            newton_iters: res.iterations,
            residual: res.final_residual(),
        });
        state = res.state;
    }
    Ok(RunSeries {
        records,
        final_state: state,
    })
}
