use super::SimError;

/// Default trailing window for ROCOF measurement, in seconds.
pub const DEFAULT_ROCOF_WINDOW_S: f64 = 0.25;

/// Least-squares slope of frequency over `[t_trigger - window, t_trigger]`.
///
/// `trace` holds `(time, frequency)` pairs in time order.
pub fn measure_rocof(trace: &[(f64, f64)], t_trigger: f64, window: f64) -> Result<f64, SimError> {
    let eps = 1e-9 * window.max(1.0);
    let in_window = trace
        .iter()
        .filter(|(t, _)| *t >= t_trigger - window - eps && *t <= t_trigger + eps);
    let (n, sum_t, sum_f) = in_window
        .clone()
        .fold((0usize, 0.0, 0.0), |(n, st, sf), (t, f)| {
            (n + 1, st + t, sf + f)
        });
    if n < 2 {
        return Err(SimError::WindowUnderpopulated { samples: n });
    }
    let (mean_t, mean_f) = (sum_t / n as f64, sum_f / n as f64);
    let (sxy, sxx) = in_window.fold((0.0, 0.0), |(sxy, sxx), (t, f)| {
        let dt = t - mean_t;
        (sxy + dt * (f - mean_f), sxx + dt * dt)
    });
    if sxx <= 0.0 {
        return Err(SimError::WindowUnderpopulated { samples: n });
    }
    Ok(sxy / sxx)
}
