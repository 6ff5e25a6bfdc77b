//! Least-squares line fit residual, used to measure how well a device's TCP
//! timestamp clock advances linearly with capture time.

/// RMSE of the ordinary least-squares line through `(t, v)` samples.
///
/// Computed on centered coordinates so epoch-scale `t` values lose no
/// precision. Returns `None` when fewer than two samples exist or all `t`
/// are identical (the slope is undefined).
pub fn lls_rmse(samples: &[(f64, f64)]) -> Option<f64> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let min_t = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max_t = samples.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if min_t == max_t {
        return None;
    }
    let nf = n as f64;
    let t_mean = samples.iter().map(|s| s.0).sum::<f64>() / nf;
    let v_mean = samples.iter().map(|s| s.1).sum::<f64>() / nf;
    let mut stt = 0.0;
    let mut stv = 0.0;
    for &(t, v) in samples {
        let tc = t - t_mean;
        stt += tc * tc;
        stv += tc * (v - v_mean);
    }
    let slope = stv / stt;
    let sse: f64 = samples
        .iter()
        .map(|&(t, v)| {
            let r = (v - v_mean) - slope * (t - t_mean);
            r * r
        })
        .sum();
    Some((sse / nf).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_three_point_residual() {
        let rmse = lls_rmse(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]).unwrap();
        assert_eq!(rmse, 0.4714045207910317); // sqrt(2/9)
    }

    #[test]
    fn perfect_line_has_zero_error() {
        let samples: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 3.0 + 2.0 * i as f64)).collect();
        assert_eq!(lls_rmse(&samples), Some(0.0));
    }

    #[test]
    fn degenerate_inputs_yield_none() {
        assert_eq!(lls_rmse(&[]), None);
        assert_eq!(lls_rmse(&[(1.0, 5.0)]), None);
        assert_eq!(lls_rmse(&[(7.0, 1.0), (7.0, 9.0), (7.0, 4.0)]), None);
    }

    #[test]
    fn epoch_scale_times_keep_precision() {
        // Same shape as the three-point case, shifted by ~1.6e9 seconds.
        let t0 = 1_600_000_000.0;
        let rmse = lls_rmse(&[(t0, 0.0), (t0 + 1.0, 1.0), (t0 + 2.0, 0.0)]).unwrap();
        assert!((rmse - 0.4714045207910317).abs() < 1e-12, "{rmse}");
    }
}
