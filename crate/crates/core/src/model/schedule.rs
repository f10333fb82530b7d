use crate::error::{Error, Result};

/// Fraction of the cycle spent warming up.
pub const WARMUP_FRACTION: f64 = 0.3;
pub const START_DIVISOR: f64 = 25.0;
pub const END_DIVISOR: f64 = 2500.0;

/// Linear one-cycle learning rate: `lr_max / 25` rising to `lr_max` at 30% of the steps,
/// then falling linearly to `lr_max / 2500` at the last step.
pub fn one_cycle_lr(step: usize, total_steps: usize, lr_max: f64) -> Result<f64> {
    if step >= total_steps {
        return Err(Error::invalid(format!(
            "step {step} outside schedule of {total_steps} steps"
        )));
    }
    let start = lr_max / START_DIVISOR;
    let end = lr_max / END_DIVISOR;
    let peak = (WARMUP_FRACTION * total_steps as f64).floor() as usize;
    if step <= peak {
        if peak == 0 {
            return Ok(start);
        }
        if step == peak {
            return Ok(lr_max);
        }
        return Ok(start + (lr_max - start) * step as f64 / peak as f64);
    }
    let last = total_steps - 1;
    if step == last {
        return Ok(end);
    }
    let t = (step - peak) as f64 / (last - peak) as f64;
    Ok(lr_max + (end - lr_max) * t)
}
