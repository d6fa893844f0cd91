/// A local maximum and its prominence above the surrounding floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub x: f64,
    pub height: f64,
    pub prominence: f64,
}

/// Local maxima whose prominence is at least `min_prominence` times the
/// global maximum. Plateaus report their first sample.
pub fn find_peaks(x: &[f64], y: &[f64], min_prominence: f64) -> Vec<Peak> {
    let n = y.len().min(x.len());
    if n == 0 {
        return Vec::new();
    }
    let top = y[..n].iter().cloned().fold(f64::MIN, f64::max);
    let threshold = min_prominence * top;
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && y[j + 1] == y[i] {
            j += 1;
        }
        let left_lower = i == 0 || y[i - 1] < y[i];
        let right_lower = j + 1 == n || y[j + 1] < y[i];
        if left_lower && right_lower {
            let h = y[i];
            let mut left_min = h;
            for k in (0..i).rev() {
                if y[k] > h {
                    break;
                }
                left_min = left_min.min(y[k]);
            }
            let mut right_min = h;
            for &v in &y[j + 1..n] {
                if v > h {
                    break;
                }
                right_min = right_min.min(v);
            }
            let prominence = h - left_min.max(right_min);
            if prominence >= threshold && prominence > 0.0 {
                out.push(Peak {
                    index: i,
                    x: x[i],
                    height: h,
                    prominence,
                });
            }
        }
        i = j + 1;
    }
    out
}

/// Full width at half of `y[peak]`, with linear interpolation of both
/// crossings; `None` if either side never drops below half.
pub fn width_at_half(x: &[f64], y: &[f64], peak: usize) -> Option<f64> {
    let half = y[peak] / 2.0;
    let mut l = peak;
    while l > 0 && y[l - 1] >= half {
        l -= 1;
    }
    if l == 0 {
        return None;
    }
    let mut r = peak;
    while r + 1 < y.len() && y[r + 1] >= half {
        r += 1;
    }
    if r + 1 == y.len() {
        return None;
    }
    let cross = |a: usize, b: usize| x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
    Some(cross(r, r + 1) - cross(l - 1, l))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_separated_peaks() {
        let x: Vec<f64> = (0..1000).map(|i| i as f64 * 0.01).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&t| (-(t - 2.0f64).powi(2) * 50.0).exp() + 0.5 * (-(t - 7.0f64).powi(2) * 50.0).exp() + 0.01)
            .collect();
        let p = find_peaks(&x, &y, 0.1);
        assert_eq!(p.len(), 2);
        assert!((p[0].x - 2.0).abs() < 0.011);
        assert!((p[1].prominence - 0.5).abs() < 1e-3);
        let w = width_at_half(&x, &y, p[0].index).unwrap();
        let expected = 2.0 * (((1.01f64 / 2.0 - 0.01) as f64).ln() / -50.0).sqrt();
        assert!((w - expected).abs() < 1e-3, "{w} {expected}");
    }

    #[test]
    fn flat_signal_has_no_peaks() {
        let x = [0.0, 1.0, 2.0];
        assert!(find_peaks(&x, &[1.0, 1.0, 1.0], 0.01).is_empty());
        assert!(find_peaks(&[], &[], 0.1).is_empty());
    }
}
