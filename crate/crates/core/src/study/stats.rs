use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::tensor::{closed_form_proj2, complement2, SymTensor2, SymTensor4, SymmetryClass};

/// Confidence level of the component-wise intervals.
pub const DEFAULT_ALPHA: f64 = 0.01;

/// Absolute agreement required between the mean of projections and the projection of the mean.
pub const LINEARITY_TOL: f64 = 1e-14;

/// Absolute accuracy of [`t_quantile`].
pub const T_QUANTILE_TOL: f64 = 1e-10;

fn require(samples: &[SymTensor2], min: usize, what: &str) -> Result<()> {
    if samples.len() < min {
        return Err(Error::validation(format!(
            "{what} needs at least {min} samples (got {})",
            samples.len()
        )));
    }
    Ok(())
}

/// Arithmetic mean, accumulated in slice order as offsets from the first
/// sample so that constant samples reproduce themselves exactly.
pub fn empirical_mean(samples: &[SymTensor2]) -> Result<SymTensor2> {
    require(samples, 1, "empirical mean")?;
    let first = samples[0];
    let mut acc = SymTensor2::ZERO;
    for a in &samples[1..] {
        acc += *a - first;
    }
    Ok(first + acc * (1.0 / samples.len() as f64))
}

/// Mean of the per-sample projections, checked against the projection of the mean.
pub fn projected_mean(samples: &[SymTensor2], class: &SymmetryClass) -> Result<SymTensor2> {
    let projected = samples
        .iter()
        .map(|a| closed_form_proj2(class, a))
        .collect::<Result<Vec<_>>>()?;
    let mean_of_proj = empirical_mean(&projected)?;
    let proj_of_mean = closed_form_proj2(class, &empirical_mean(samples)?)?;
    let scale = mean_of_proj.norm().max(1.0);
    if (mean_of_proj - proj_of_mean).norm() > LINEARITY_TOL * scale {
        return Err(Error::numerical(format!(
            "projected mean disagrees with projection of the mean by {:e}",
            (mean_of_proj - proj_of_mean).norm()
        )));
    }
    Ok(mean_of_proj)
}

/// `vol/(N−1) Σ (Aᵢ − Ā) ⊗ (Aᵢ − Ā)`.
pub fn empirical_mu_q(samples: &[SymTensor2], vol: f64) -> Result<SymTensor4> {
    require(samples, 2, "μQ estimate")?;
    if !(vol > 0.0 && vol.is_finite()) {
        return Err(Error::validation("cell volume must be positive"));
    }
    let mean = empirical_mean(samples)?;
    let mut acc = SymTensor4::ZERO;
    for a in samples {
        acc += (*a - mean).self_outer();
    }
    Ok(acc * (vol / (samples.len() - 1) as f64))
}

/// Component-wise unbiased standard deviation.
pub fn std_dev(samples: &[SymTensor2]) -> Result<SymTensor2> {
    require(samples, 2, "standard deviation")?;
    let mean = empirical_mean(samples)?;
    let mut acc = [0.0; 6];
    for a in samples {
        for (k, s) in acc.iter_mut().enumerate() {
            let d = a.0[k] - mean.0[k];
            *s += d * d;
        }
    }
    let denom = (samples.len() - 1) as f64;
    Ok(SymTensor2(acc.map(|s| (s / denom).sqrt())))
}

/// Half-width `t_{1−α/2}^{N−1} s / √N` of the component-wise confidence interval.
pub fn ci_halfwidth(samples: &[SymTensor2], alpha: f64) -> Result<SymTensor2> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must lie in (0, 1) (got {alpha})")));
    }
    let s = std_dev(samples)?;
    let n = samples.len();
    let t = t_quantile(1.0 - 0.5 * alpha, n - 1)?;
    Ok(s * (t / (n as f64).sqrt()))
}

/// Student-t CDF through the regularized incomplete beta function.
pub fn t_cdf(t: f64, dof: usize) -> f64 {
    let nu = dof as f64;
    let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + t * t));
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Inverse Student-t CDF by bracketing and bisection.
pub fn t_quantile(p: f64, dof: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::validation(format!("quantile probability must lie in (0, 1) (got {p})")));
    }
    if dof == 0 {
        return Err(Error::validation("t quantile needs dof >= 1"));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    let (target, sign) = if p > 0.5 { (p, 1.0) } else { (1.0 - p, -1.0) };
    let mut hi = 1.0;
    while t_cdf(hi, dof) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::numerical("t quantile bracket overflow"));
        }
    }
    let mut lo = 0.0;
    while hi - lo > T_QUANTILE_TOL * 0.01 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, dof) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(sign * 0.5 * (lo + hi))
}

/// Errors normalized by the reference 11-component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedErrors {
    /// Denominator used for every entry below.
    pub normalizer: f64,
    pub sys: [f64; 6],
    pub sys_projected: [f64; 6],
    pub ran: [f64; 6],
    pub ran_projected: [f64; 6],
    pub ci: [f64; 6],
    pub ci_projected: [f64; 6],
    /// `‖Q:Ā‖ / A_ref,11`, a lower bound of the systematic error norm.
    pub symmetry_lower_bound: f64,
}

/// Estimators needed by [`normalized_errors`].
#[derive(Clone, Copy, Debug)]
pub struct Estimates {
    pub mean: SymTensor2,
    pub projected_mean: SymTensor2,
    pub std: SymTensor2,
    pub projected_std: SymTensor2,
    pub ci: SymTensor2,
    pub projected_ci: SymTensor2,
}

pub fn normalized_errors(
    est: &Estimates,
    reference: &SymTensor2,
    class: &SymmetryClass,
) -> Result<NormalizedErrors> {
    let r11 = reference.0[0];
    if !(r11 > 0.0 && r11.is_finite()) {
        return Err(Error::validation(format!("reference a11 must be positive (got {r11})")));
    }
    let scaled = |t: SymTensor2| t.0.map(|x| x.abs() / r11);
    Ok(NormalizedErrors {
        normalizer: r11,
        sys: scaled(est.mean - *reference),
        sys_projected: scaled(est.projected_mean - *reference),
        ran: scaled(est.std),
        ran_projected: scaled(est.projected_std),
        ci: scaled(est.ci),
        ci_projected: scaled(est.projected_ci),
        symmetry_lower_bound: complement2(class, &est.mean)?.norm() / r11,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t_table_values() {
        assert!((t_quantile(0.975, 1).unwrap() - 12.706_204_736).abs() < 1e-8);
        assert!((t_quantile(0.995, 9).unwrap() - 3.249_835_541).abs() < 1e-8);
        assert!((t_quantile(0.025, 1).unwrap() + 12.706_204_736).abs() < 1e-8);
        assert_eq!(t_quantile(0.5, 4).unwrap(), 0.0);
    }
}
