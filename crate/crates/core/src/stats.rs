//! Small statistics toolbox: rank correlation, ROC-AUC, least squares and an
//! exact paired sign test. Used by the evaluation harness and the test
//! oracles; none of it depends on the learned models.

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Average ranks (1-based), ties share the mean of their rank span.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("NaN in rank input"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert!(a.len() >= 2);
    pearson(&average_ranks(a), &average_ranks(b))
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Area under the ROC curve via the rank-sum identity (ties get half credit).
pub fn roc_auc(labels: &[bool], scores: &[f64]) -> f64 {
    assert_eq!(labels.len(), scores.len());
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    assert!(n_pos > 0 && n_neg > 0, "AUC needs both classes");
    let ranks = average_ranks(scores);
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(l, _)| **l)
        .map(|(_, r)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Least-squares line fit; returns (slope, intercept, r²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2);
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (a, b) in x.iter().zip(y) {
        ss_res += (b - (slope * a + intercept)).powi(2);
        ss_tot += (b - my).powi(2);
    }
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (slope, intercept, r2)
}

/// P[X >= k] for X ~ Binomial(n, 1/2), computed exactly in f64.
pub fn binom_tail_geq_half(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    // ln C(n, i) accumulated incrementally to stay stable for n up to ~10^4.
    let ln_half_n = n as f64 * 0.5f64.ln();
    let mut ln_c = 0.0; // ln C(n, 0)
    let mut tail = 0.0;
    for i in 0..=n {
        if i >= k {
            tail += (ln_c + ln_half_n).exp();
        }
        if i < n {
            ln_c += ((n - i) as f64).ln() - ((i + 1) as f64).ln();
        }
    }
    tail.min(1.0)
}

/// One-sided paired sign test over per-episode success outcomes.
///
/// Discordant pairs only: `n_b_better` counts episodes where B succeeded and
/// A failed, `n_a_better` the reverse. `p_b_worse` is the probability, under
/// the null of exchangeable outcomes, of seeing at least this many
/// A-better discordant pairs — small values mean B is credibly worse.
pub struct SignTest {
    pub n_b_better: u64,
    pub n_a_better: u64,
    pub p_b_better: f64,
    pub p_b_worse: f64,
}

pub fn paired_sign_test(a_success: &[bool], b_success: &[bool]) -> SignTest {
    assert_eq!(a_success.len(), b_success.len());
    let mut n_b_better = 0;
    let mut n_a_better = 0;
    for (&a, &b) in a_success.iter().zip(b_success) {
        match (a, b) {
            (false, true) => n_b_better += 1,
            (true, false) => n_a_better += 1,
            _ => {}
        }
    }
    let n = n_b_better + n_a_better;
    SignTest {
        n_b_better,
        n_a_better,
        p_b_better: binom_tail_geq_half(n, n_b_better),
        p_b_worse: binom_tail_geq_half(n, n_a_better),
    }
}
