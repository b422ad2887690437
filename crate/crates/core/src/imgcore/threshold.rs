/// Otsu's threshold over a `bins`-bin histogram spanning the value range.
///
/// Returns `t` such that values `>= t` form the upper class, or `None` when
/// every value is identical.
pub fn otsu_threshold(values: &[f64], bins: usize) -> Option<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) || bins < 2 {
        return None;
    }
    let width = (hi - lo) / bins as f64;
    let mut hist = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        hist[b] += 1;
    }
    let total = values.len() as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut best_k = 0;
    let mut best_var = -1.0;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for (k, &c) in hist.iter().enumerate().take(bins - 1) {
        w0 += c as f64;
        sum0 += k as f64 * c as f64;
        let w1 = total - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let var = w0 * w1 * (m0 - m1) * (m0 - m1);
        if var > best_var {
            best_var = var;
            best_k = k;
        }
    }
    Some(lo + (best_k + 1) as f64 * width)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_levels() {
        let mut v = vec![10.0; 50];
        v.extend(std::iter::repeat_n(200.0, 30));
        let t = otsu_threshold(&v, 256).unwrap();
        assert!(t > 10.0 && t <= 200.0);
    }

    #[test]
    fn bimodal_with_spread() {
        let v: Vec<f64> = (0..100)
            .map(|i| if i % 2 == 0 { 20.0 + (i % 7) as f64 } else { 180.0 + (i % 5) as f64 })
            .collect();
        let t = otsu_threshold(&v, 256).unwrap();
        assert!(t > 26.0 && t <= 180.0, "{t}");
    }

    #[test]
    fn constant_input_has_no_threshold() {
        assert_eq!(otsu_threshold(&[3.0; 10], 256), None);
    }
}
