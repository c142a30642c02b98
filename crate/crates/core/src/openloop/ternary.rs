use serde::{Deserialize, Serialize};

use super::{Evaluator, OpenLoopError, PolicyScore, SinusoidPolicy};

/// A noisy objective value: mean over repetitions and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn exact(mean: f64) -> Self {
        Estimate { mean, std_error: 0.0 }
    }
}

impl From<&PolicyScore> for Estimate {
    fn from(s: &PolicyScore) -> Self {
        Estimate { mean: s.mean, std_error: s.std_error() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TernaryResult {
    /// Midpoint of the final interval.
    pub argmax: f64,
    pub value: Estimate,
    pub lo: f64,
    pub hi: f64,
    /// Every probe in evaluation order, the final midpoint last.
    pub probes: Vec<(f64, Estimate)>,
}

impl TernaryResult {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Width of the interval left after `steps` shrinks by 2/3.
pub fn final_width(lo: f64, hi: f64, steps: usize) -> f64 {
    (hi - lo) * (2.0f64 / 3.0).powi(steps as i32)
}

/// Ternary search for the maximum of an objective taken as unimodal on
/// `[lo, hi]`. Each step probes the two interior thirds and drops the
/// outer third on the losing side. When the two means differ by no more
/// than half the standard error of their difference the comparison is a
/// tie and both ends move in by a sixth, so the interval still shrinks by
/// 2/3 but stays centred. The midpoint of the final interval is evaluated
/// and returned with its value.
pub fn ternary_search<E>(
    mut lo: f64,
    mut hi: f64,
    steps: usize,
    mut objective: impl FnMut(f64) -> Result<Estimate, E>,
) -> Result<TernaryResult, E> {
    let mut probes = Vec::with_capacity(2 * steps + 1);
    for _ in 0..steps {
        let third = (hi - lo) / 3.0;
        let (m1, m2) = (lo + third, hi - third);
        let a = objective(m1)?;
        let b = objective(m2)?;
        probes.push((m1, a));
        probes.push((m2, b));
        let tie = 0.5 * a.std_error.hypot(b.std_error);
        if a.mean < b.mean - tie {
            lo = m1;
        } else if a.mean > b.mean + tie {
            hi = m2;
        } else {
            (lo, hi) = (lo + third / 2.0, hi - third / 2.0);
        }
    }
    let argmax = 0.5 * (lo + hi);
    let value = objective(argmax)?;
    probes.push((argmax, value));
    Ok(TernaryResult { argmax, value, lo, hi, probes })
}

/// Ternary search over the forcing frequency at fixed amplitude, each probe
/// scored over `reps` episodes.
pub fn ternary_sinusoid(
    evaluator: &Evaluator,
    amplitude: f64,
    f_lo: f64,
    f_hi: f64,
    steps: usize,
    reps: usize,
) -> Result<(TernaryResult, PolicyScore), OpenLoopError> {
    if !(f_lo < f_hi) {
        return Err(OpenLoopError::Policy(format!("need f_lo < f_hi, got [{f_lo}, {f_hi}]")));
    }
    let mut last = None;
    let result = ternary_search(f_lo, f_hi, steps, |f| {
        let s = evaluator.eval_sinusoid(SinusoidPolicy::new(amplitude, f), reps)?;
        let e = Estimate::from(&s);
        last = Some(s);
        Ok::<_, OpenLoopError>(e)
    })?;
    Ok((result, last.expect("midpoint evaluated")))
}
