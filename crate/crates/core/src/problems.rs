//! (under construction)

use ndarray::Array1;

/// Canonical piecewise test signal on [0, 1]: a step, a narrow peak, and a
/// parabola arc.
pub fn deblur_signal(n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|i| {
        let t = (i as f64 + 0.5) / n as f64;
        if (0.10..0.25).contains(&t) {
            1.0
        } else if (0.52..0.58).contains(&t) {
            1.5 * (1.0 - (t - 0.55).abs() / 0.03)
        } else if (0.7..=0.95).contains(&t) {
            (24.0 * (t - 0.7) * (0.95 - t)).max(0.0)
        } else {
            0.0
        }
    }))
}
