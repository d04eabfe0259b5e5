//! Learned ellipsoid uncertainty sets and the robust AV protection constraint.
//!
//! The uncertain vector is `g = (g_av / gamma_th, g_x)`: the AV's own gain
//! scaled by its SINR threshold, and the crosstalk gain from the V2V
//! transmitter into the AV receiver. The AV is protected when
//! `p_av * g[0] - p_link * g[1] >= noise`. Requiring this over the learned
//! ellipsoid gives a second-order cone constraint in `(p_av, p_link)`.

use alloc::vec::Vec;

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintySet {
    pub center: Vector2<f64>,
    /// Sample covariance, plus any ridge added to make it positive definite.
    pub covariance: Matrix2<f64>,
    /// Lower Cholesky factor of `covariance`.
    pub cholesky: Matrix2<f64>,
    /// `sqrt(size) * cholesky`.
    pub shape: Matrix2<f64>,
    pub size: f64,
    /// Ridge added to the diagonal, 0 when none was needed.
    pub ridge: f64,
}

impl UncertaintySet {
    /// Set with no spread around `center`.
    pub fn nominal(center: [f64; 2]) -> Self {
        UncertaintySet {
            center: Vector2::new(center[0], center[1]),
            covariance: Matrix2::zeros(),
            cholesky: Matrix2::zeros(),
            shape: Matrix2::zeros(),
            size: 0.0,
            ridge: 0.0,
        }
    }

    /// Squared Mahalanobis distance `(x - center)^T covariance^-1 (x - center)`.
    pub fn statistic(&self, x: [f64; 2]) -> f64 {
        mahalanobis(&self.cholesky, &(Vector2::new(x[0], x[1]) - self.center))
    }

    /// Whether `x` lies in the ellipsoid `statistic(x) <= size`.
    pub fn contains(&self, x: [f64; 2]) -> bool {
        self.statistic(x) <= self.size
    }

    /// Point `center + shape * u` for a unit vector `u`.
    pub fn boundary_point(&self, angle: f64) -> [f64; 2] {
        let p = self.center + self.shape * Vector2::new(angle.cos(), angle.sin());
        [p[0], p[1]]
    }
}

fn mahalanobis(l: &Matrix2<f64>, d: &Vector2<f64>) -> f64 {
    // forward substitution with the lower factor
    let y0 = d[0] / l[(0, 0)];
    let y1 = (d[1] - l[(1, 0)] * y0) / l[(1, 1)];
    y0 * y0 + y1 * y1
}

/// Rank of the order statistic used for a `1 - epsilon` empirical quantile.
pub fn quantile_rank(epsilon: f64, count: usize) -> usize {
    let k = ((1.0 - epsilon) * count as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(count)
}

/// Learn the set from samples: sample mean, biased covariance, and the size
/// chosen so that `ceil((1 - epsilon) D)` samples fall inside.
pub fn learn_uncertainty_set(samples: &[[f64; 2]], epsilon: f64) -> Result<UncertaintySet> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    let d = samples.len();
    if d < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: d });
    }
    if let Some(i) = samples.iter().position(|s| !(s[0].is_finite() && s[1].is_finite())) {
        return Err(Error::NonFiniteSample(i));
    }
    let n = d as f64;
    let center = samples
        .iter()
        .fold(Vector2::zeros(), |acc: Vector2<f64>, s| acc + Vector2::new(s[0], s[1]))
        / n;
    let covariance = samples.iter().fold(Matrix2::zeros(), |acc: Matrix2<f64>, s| {
        let e = Vector2::new(s[0], s[1]) - center;
        acc + e * e.transpose()
    }) / n;

    let (covariance, cholesky, ridge) = factor(covariance, &center);
    let mut t: Vec<f64> = samples
        .iter()
        .map(|s| mahalanobis(&cholesky, &(Vector2::new(s[0], s[1]) - center)))
        .collect();
    t.sort_by(f64::total_cmp);
    let size = t[quantile_rank(epsilon, d) - 1];
    Ok(UncertaintySet {
        center,
        covariance,
        cholesky,
        shape: cholesky * size.sqrt(),
        size,
        ridge,
    })
}

fn factor(cov: Matrix2<f64>, center: &Vector2<f64>) -> (Matrix2<f64>, Matrix2<f64>, f64) {
    if let Some(l) = cholesky(&cov) {
        return (cov, l, 0.0);
    }
    let scale = [cov.trace() / 2.0, center.norm_squared() / 2.0, 1.0]
        .into_iter()
        .find(|s| *s > 0.0 && s.is_finite())
        .unwrap_or(1.0);
    let mut ridge = 1e-12 * scale;
    loop {
        let reg = cov + Matrix2::identity() * ridge;
        if let Some(l) = cholesky(&reg) {
            return (reg, l, ridge);
        }
        ridge *= 10.0;
    }
}

fn cholesky(m: &Matrix2<f64>) -> Option<Matrix2<f64>> {
    let a = m[(0, 0)];
    if !(a > 0.0) {
        return None;
    }
    let l00 = a.sqrt();
    let l10 = m[(1, 0)] / l00;
    let rest = m[(1, 1)] - l10 * l10;
    if !(rest > 0.0) {
        return None;
    }
    Some(Matrix2::new(l00, 0.0, l10, rest.sqrt()))
}

/// `p^T center - |p^T shape| - noise` with `p = (p_av, -p_link)`.
pub fn soc_margin(p_av: f64, p_link: f64, set: &UncertaintySet, noise: f64) -> f64 {
    let p = Vector2::new(p_av, -p_link);
    p.dot(&set.center) - (set.shape.transpose() * p).norm() - noise
}

/// Robust AV protection: `p^T center - |p^T shape| >= noise`.
pub fn soc_feasible(p_av: f64, p_link: f64, set: &UncertaintySet, noise: f64) -> bool {
    soc_margin(p_av, p_link, set, noise) >= 0.0
}

/// Fraction of `(g_av, g_leak)` draws whose AV SINR
/// `p_av g_av / (p_link g_leak + noise)` falls below `gamma`.
pub fn outage_eval<I>(p_av: f64, p_link: f64, draws: I, gamma: f64, noise: f64) -> f64
where
    I: IntoIterator<Item = [f64; 2]>,
{
    let (mut total, mut failed) = (0usize, 0usize);
    for [g_av, g_leak] in draws {
        total += 1;
        if p_av * g_av / (p_link * g_leak + noise) < gamma {
            failed += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        failed as f64 / total as f64
    }
}

/// The interval of link powers `q >= 0` satisfying the SOC constraint at a
/// fixed AV power, unclamped above. `None` when no `q >= 0` is feasible.
pub fn feasible_link_interval(p_av: f64, set: &UncertaintySet, noise: f64) -> Option<(f64, f64)> {
    // a - c q >= |r0 p_av - r1 q| with r0, r1 the rows of the shape matrix
    let a = p_av * set.center[0] - noise;
    let c = set.center[1];
    let r0 = Vector2::new(set.shape[(0, 0)], set.shape[(0, 1)]);
    let r1 = Vector2::new(set.shape[(1, 0)], set.shape[(1, 1)]);
    let qa = c * c - r1.norm_squared();
    let qb = -2.0 * a * c + 2.0 * p_av * r0.dot(&r1);
    let qc = a * a - p_av * p_av * r0.norm_squared();

    let mut roots: Vec<f64> = Vec::new();
    if qa.abs() <= 1e-12 * c * c {
        if qb != 0.0 {
            roots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            // cancellation-free pair of roots
            let t = -0.5 * (qb + qb.signum() * disc.sqrt());
            if t != 0.0 {
                roots.push(t / qa);
                roots.push(qc / t);
            } else {
                roots.push(0.0);
            }
        } else if qa > 0.0 {
            // a tangency pushed below zero by rounding
            roots.push(-qb / (2.0 * qa));
        }
    }
    let h_tol = 1e-9 * (a.abs() + noise);
    let valid: Vec<f64> = roots
        .into_iter()
        .filter(|q| q.is_finite() && a - c * q >= -h_tol)
        .collect();

    if valid.is_empty() {
        // no crossing: the margin never changes sign
        return soc_feasible(p_av, 0.0, set, noise).then_some((0.0, f64::INFINITY));
    }
    // Every finite end of the feasible interval is a valid root. Squaring
    // loses a few ulps, so each root is stepped inside until the cone agrees.
    let settle = |r: f64, dir: f64| -> Option<f64> {
        let mut q = r;
        let mut step = r.abs() * 1e-14 + f64::MIN_POSITIVE;
        for _ in 0..200 {
            if q >= 0.0 && soc_feasible(p_av, q, set, noise) {
                return Some(q);
            }
            q += dir * step;
            step *= 2.0;
            if (q - r).abs() > 1e-6 * (r.abs() + 1e-300) {
                return None;
            }
        }
        None
    };
    let mut by_size = valid;
    by_size.sort_by(f64::total_cmp);
    let hi = by_size
        .iter()
        .rev()
        .filter(|r| **r >= 0.0)
        .find_map(|&r| settle(r, -1.0))?;
    let lo = if soc_feasible(p_av, 0.0, set, noise) {
        0.0
    } else {
        by_size.iter().filter(|r| **r >= 0.0).find_map(|&r| settle(r, 1.0))?
    };
    (lo <= hi).then_some((lo, hi))
}

/// Largest feasible `p_link` in `[0, cap]`, or 0 when none is.
pub fn max_link_power(p_av: f64, set: &UncertaintySet, noise: f64, cap: f64) -> f64 {
    if !(p_av >= 0.0) || !(cap > 0.0) {
        return 0.0;
    }
    match feasible_link_interval(p_av, set, noise) {
        Some((lo, hi)) if lo <= cap => {
            let mut q = hi.min(cap);
            let mut step = q * 1e-14 + f64::MIN_POSITIVE;
            while q > lo && !soc_feasible(p_av, q, set, noise) {
                q -= step;
                step *= 2.0;
            }
            if soc_feasible(p_av, q, set, noise) {
                q.max(0.0)
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// Equal Bonferroni split of the outage tolerance over the two BS legs.
pub fn split_epsilon(epsilon: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    Ok((epsilon / 2.0, epsilon / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileGain {
    pub gain: f64,
    pub epsilon: f64,
}

/// Lower-tail empirical quantile: the `floor(epsilon D) + 1`-th smallest gain,
/// exceeded by at least a `1 - epsilon` fraction of the samples.
pub fn quantile_gain(samples: &[f64], epsilon: f64) -> Result<QuantileGain> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteSample(i));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", "must lie in (0, 1)"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((epsilon * sorted.len() as f64 + 1e-9).floor() as usize).min(sorted.len() - 1);
    Ok(QuantileGain {
        gain: sorted[idx],
        epsilon,
    })
}
