//! Kolmogorov–Smirnov statistics used to check sampled laws against exact ones.

/// One-sample KS statistic `sup |F_n - F|` for an ascending sample.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let c = cdf(x);
            let lo = c - i as f64 / n;
            let hi = (i + 1) as f64 / n - c;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Two-sample KS statistic for ascending samples.
pub fn ks_two_sample_statistic(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov survival function `P(K > λ)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value for statistic `d` with effective sample size `n_eff`
/// (Stephens' small-sample correction).
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

/// `(statistic, p-value)` for a one-sample test.
pub fn ks_test<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> (f64, f64) {
    let d = ks_statistic(sorted, cdf);
    (d, ks_pvalue(d, sorted.len() as f64))
}

/// `(statistic, p-value)` for a two-sample test.
pub fn ks_two_sample_test(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d = ks_two_sample_statistic(a, b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    (d, ks_pvalue(d, na * nb / (na + nb)))
}
