//! Self-contained statistical tests: Shapiro-Wilk normality, Levene /
//! Brown-Forsythe variance homogeneity, and rank correlations with tie
//! handling. Distribution tails come from the `dist` submodule.

pub mod dist;

use serde::Serialize;

use crate::error::{Error, Result};

/// Which test produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    ShapiroWilk,
    LeveneMean,
    LeveneMedian,
    Spearman,
    KendallTauB,
}

/// Outcome of a statistical test: the statistic, its p-value, and the sample
/// size(s) it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: Vec<usize>,
    pub method: TestMethod,
}

/// Centering choice for [`levene`]: `Median` is the Brown-Forsythe variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeveneCenter {
    Mean,
    Median,
}

fn ensure_finite(x: &[f64]) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput {
            detail: "sample contains a non-finite value".to_string(),
        });
    }
    Ok(())
}

/// Shapiro-Wilk W test for normality, Royston's AS R94 algorithm.
///
/// Supports 3 <= n <= 5000. Weights use Blom scores with Royston's polynomial
/// corrections for the two largest order statistics; the p-value uses the
/// exact n = 3 formula, the small-sample transform for n <= 11, and the
/// log-normal approximation of ln(1 - W) for n >= 12.
pub fn shapiro_wilk(x: &[f64]) -> Result<TestResult> {
    const N_MIN: usize = 3;
    const N_MAX: usize = 5000;
    let n = x.len();
    if !(N_MIN..=N_MAX).contains(&n) {
        return Err(Error::SampleSize {
            n,
            min: N_MIN,
            max: N_MAX,
        });
    }
    ensure_finite(x)?;
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted[n - 1] - sorted[0] <= 0.0 {
        return Err(Error::DegenerateSample {
            detail: "all observations are identical".to_string(),
        });
    }

    let w = w_statistic(&sorted);
    let p = w_p_value(w, n);
    Ok(TestResult {
        statistic: w,
        p_value: p,
        n: vec![n],
        method: TestMethod::ShapiroWilk,
    })
}

fn w_statistic(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    let an = n as f64;
    let mut a = vec![0.0; n];
    if n == 3 {
        let root_half = 0.5_f64.sqrt();
        a[0] = -root_half;
        a[2] = root_half;
    } else {
        // Blom scores for every order statistic
        let mut m = vec![0.0; n];
        let mut summ2 = 0.0;
        for (i, mi) in m.iter_mut().enumerate() {
            *mi = dist::normal_quantile((i as f64 + 1.0 - 0.375) / (an + 0.25));
            summ2 += *mi * *mi;
        }
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056];
        const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
        let a_n = poly(&C1, rsn) + m[n - 1] / ssumm2;
        if n > 5 {
            let a_n1 = poly(&C2, rsn) + m[n - 2] / ssumm2;
            let phi = (summ2 - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2])
                / (1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1);
            let fac = phi.sqrt();
            a[n - 1] = a_n;
            a[n - 2] = a_n1;
            a[0] = -a_n;
            a[1] = -a_n1;
            for i in 2..n - 2 {
                a[i] = m[i] / fac;
            }
        } else {
            let phi = (summ2 - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * a_n * a_n);
            let fac = phi.sqrt();
            a[n - 1] = a_n;
            a[0] = -a_n;
            for i in 1..n - 1 {
                a[i] = m[i] / fac;
            }
        }
    }

    let mean = sorted.iter().sum::<f64>() / an;
    let sax: f64 = a.iter().zip(sorted).map(|(ai, xi)| ai * xi).sum();
    let sse: f64 = sorted.iter().map(|xi| (xi - mean) * (xi - mean)).sum();
    (sax * sax / sse).clamp(0.0, 1.0)
}

fn w_p_value(w: f64, n: usize) -> f64 {
    let an = n as f64;
    if n == 3 {
        // exact distribution of W for samples of three; both constants keep
        // the published digits (6/pi and pi/3 rounded to 15 significant)
        #[allow(clippy::approx_constant)]
        const PI6: f64 = 1.90985931710274;
        #[allow(clippy::approx_constant)]
        const STQR: f64 = 1.04719755119660;
        return (PI6 * (w.sqrt().asin() - STQR)).clamp(0.0, 1.0);
    }
    let y = (1.0 - w).ln();
    if n <= 11 {
        const G: [f64; 2] = [-2.273, 0.459];
        const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
        const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        let y = -(gamma - y).ln();
        let mean = poly(&C3, an);
        let sd = poly(&C4, an).exp();
        dist::normal_sf((y - mean) / sd)
    } else {
        const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
        const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
        let ln_n = an.ln();
        let mean = poly(&C5, ln_n);
        let sd = poly(&C6, ln_n).exp();
        dist::normal_sf((y - mean) / sd)
    }
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Levene's test for equal variances across groups; `Median` centering is
/// the Brown-Forsythe variant. The p-value is the upper F tail with
/// (k - 1, N - k) degrees of freedom.
///
/// If the within-group deviations are constant inside every group but differ
/// between groups, the statistic is infinite and the p-value 0.
pub fn levene(groups: &[&[f64]], center: LeveneCenter) -> Result<TestResult> {
    let k = groups.len();
    if k < 2 {
        return Err(Error::GroupSize {
            detail: format!("{k} group(s); at least 2 required"),
        });
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::GroupSize {
                detail: format!(
                    "group {i} has {} observation(s); at least 2 required",
                    g.len()
                ),
            });
        }
        ensure_finite(g)?;
    }

    let big_n: usize = groups.iter().map(|g| g.len()).sum();
    let z: Vec<Vec<f64>> = groups
        .iter()
        .map(|g| {
            let c = match center {
                LeveneCenter::Mean => mean(g),
                LeveneCenter::Median => median(g),
            };
            g.iter().map(|v| (v - c).abs()).collect()
        })
        .collect();
    let z_bar_i: Vec<f64> = z.iter().map(|zi| mean(zi)).collect();
    let z_bar = z.iter().flatten().sum::<f64>() / big_n as f64;

    let numer: f64 = z
        .iter()
        .zip(&z_bar_i)
        .map(|(zi, zbi)| zi.len() as f64 * (zbi - z_bar) * (zbi - z_bar))
        .sum();
    let denom: f64 = z
        .iter()
        .zip(&z_bar_i)
        .map(|(zi, zbi)| zi.iter().map(|v| (v - zbi) * (v - zbi)).sum::<f64>())
        .sum();

    let scale = (big_n - k) as f64 / (k - 1) as f64;
    let statistic = if denom > 0.0 {
        scale * numer / denom
    } else if numer > 0.0 {
        f64::INFINITY
    } else {
        return Err(Error::DegenerateSample {
            detail: "zero dispersion in every group".to_string(),
        });
    };
    let p_value = dist::f_sf(statistic, (k - 1) as f64, (big_n - k) as f64);
    Ok(TestResult {
        statistic,
        p_value,
        n: groups.iter().map(|g| g.len()).collect(),
        method: match center {
            LeveneCenter::Mean => TestMethod::LeveneMean,
            LeveneCenter::Median => TestMethod::LeveneMedian,
        },
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Median with the midpoint convention for even lengths.
fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn check_paired(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::InvalidInput {
            detail: format!("length mismatch: {} vs {}", x.len(), y.len()),
        });
    }
    if x.len() < 3 {
        return Err(Error::InvalidInput {
            detail: format!("{} pair(s); at least 3 required", x.len()),
        });
    }
    ensure_finite(x)?;
    ensure_finite(y)
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// Midranks: tied observations share the average of their rank positions.
fn midranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with midranks for ties.
///
/// The p-value is the two-sided Student-t tail of
/// t = rho * sqrt((n - 2) / (1 - rho^2)) with n - 2 degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_paired(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::InvalidInput {
            detail: "constant input has no rank correlation".to_string(),
        });
    }
    let rx = midranks(x);
    let ry = midranks(y);
    let n = x.len() as f64;
    let mx = mean(&rx);
    let my = mean(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let p_value = if (1.0 - rho * rho) <= 0.0 {
        0.0
    } else {
        let t = rho * ((n - 2.0) / (1.0 - rho * rho)).sqrt();
        dist::t_sf_two_sided(t, n - 2.0)
    };
    Ok(TestResult {
        statistic: rho,
        p_value,
        n: vec![x.len()],
        method: TestMethod::Spearman,
    })
}

/// Kendall tau-b rank correlation with the tie-corrected normal
/// approximation for the p-value.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<TestResult> {
    check_paired(x, y)?;
    if is_constant(x) || is_constant(y) {
        return Err(Error::InvalidInput {
            detail: "constant input has no rank correlation".to_string(),
        });
    }
    let n = x.len();
    let mut concordant = 0i64;
    let mut discordant = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = (x[i] - x[j]).partial_cmp(&0.0).unwrap();
            let dy = (y[i] - y[j]).partial_cmp(&0.0).unwrap();
            use std::cmp::Ordering::Equal;
            if dx == Equal || dy == Equal {
                continue;
            }
            if dx == dy {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let diff = (concordant - discordant) as f64;

    let an = n as f64;
    let n0 = an * (an - 1.0) / 2.0;
    let tx = tie_group_sizes(x);
    let ty = tie_group_sizes(y);
    let tie_pair = |ts: &[f64]| ts.iter().map(|t| t * (t - 1.0) / 2.0).sum::<f64>();
    let n1 = tie_pair(&tx);
    let n2 = tie_pair(&ty);
    let denom = ((n0 - n1) * (n0 - n2)).sqrt();
    if denom <= 0.0 {
        return Err(Error::InvalidInput {
            detail: "all pairs tied; tau undefined".to_string(),
        });
    }
    let tau = (diff / denom).clamp(-1.0, 1.0);

    // tie-corrected variance of (concordant - discordant)
    let v0 = an * (an - 1.0) * (2.0 * an + 5.0);
    let vt: f64 = tx.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let vu: f64 = ty.iter().map(|t| t * (t - 1.0) * (2.0 * t + 5.0)).sum();
    let t1: f64 = tx.iter().map(|t| t * (t - 1.0)).sum();
    let u1: f64 = ty.iter().map(|t| t * (t - 1.0)).sum();
    let t2: f64 = tx.iter().map(|t| t * (t - 1.0) * (t - 2.0)).sum();
    let u2: f64 = ty.iter().map(|t| t * (t - 1.0) * (t - 2.0)).sum();
    let var = (v0 - vt - vu) / 18.0
        + t1 * u1 / (2.0 * an * (an - 1.0))
        + t2 * u2 / (9.0 * an * (an - 1.0) * (an - 2.0));
    let p_value = if var > 0.0 {
        (2.0 * dist::normal_sf(diff.abs() / var.sqrt())).min(1.0)
    } else {
        1.0
    };
    Ok(TestResult {
        statistic: tau,
        p_value,
        n: vec![n],
        method: TestMethod::KendallTauB,
    })
}

/// Sizes of tie groups among the values, as floats.
fn tie_group_sizes(x: &[f64]) -> Vec<f64> {
    let mut s = x.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j + 1 < s.len() && s[j + 1] == s[i] {
            j += 1;
        }
        out.push((j - i + 1) as f64);
        i = j + 1;
    }
    out
}
