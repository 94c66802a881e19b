//! Central finite-difference gradient checking.

use rand::seq::index::sample;

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// A parameter collection addressable as one flat vector of scalars.
pub trait FlatParams {
    fn num_scalars(&self) -> usize;
    fn get(&self, i: usize) -> f64;
    fn set(&mut self, i: usize, v: f64);
    /// Human-readable coordinate, e.g. `W1[3,4]`.
    fn describe(&self, i: usize) -> String {
        format!("θ[{i}]")
    }
}

impl FlatParams for Vec<f64> {
    fn num_scalars(&self) -> usize {
        self.len()
    }
    fn get(&self, i: usize) -> f64 {
        self[i]
    }
    fn set(&mut self, i: usize, v: f64) {
        self[i] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub probe_count: usize,
    /// Initial central-difference step.
    pub h: f64,
    pub tolerance: f64,
    /// Denominator floor for the relative error.
    pub abs_floor: f64,
    /// A failing probe is retried with `h / 10` up to this many times, which
    /// separates a kink inside `[θ-h, θ+h]` from a wrong derivative. The
    /// step with the smallest error is reported.
    pub refinements: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            probe_count: 20,
            h: 1e-4,
            tolerance: 1e-4,
            abs_floor: 1e-6,
            refinements: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub index: usize,
    pub label: String,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
    pub h: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub probes: Vec<ProbeResult>,
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn failures(&self) -> impl Iterator<Item = &ProbeResult> {
        self.probes.iter().filter(|p| p.rel_error > self.tolerance)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }

    /// Error listing the offending coordinates if any probe failed.
    pub fn ensure_passed(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let list: Vec<String> = self
            .failures()
            .map(|p| format!("{} (analytic {:.6e}, numeric {:.6e}, rel {:.2e})", p.label, p.analytic, p.numeric, p.rel_error))
            .collect();
        Err(Error::GradCheck(format!(
            "max relative error {:.3e} > {:.1e} at {}",
            self.max_rel_error,
            self.tolerance,
            list.join("; ")
        )))
    }
}

fn rel_error(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Compares `analytic(i)` with `(L(θ+h) - L(θ-h)) / 2h` on `probe_count`
/// coordinates drawn from `candidates` (all scalars when `None`).
/// `params` is restored after every probe.
pub fn finite_diff_check<P: FlatParams>(
    params: &mut P,
    analytic: impl Fn(usize) -> f64,
    mut loss: impl FnMut(&P) -> f64,
    candidates: Option<&[usize]>,
    cfg: &GradCheckConfig,
) -> GradCheckReport {
    let all: Vec<usize>;
    let pool: &[usize] = match candidates {
        Some(c) => c,
        None => {
            all = (0..params.num_scalars()).collect();
            &all
        }
    };
    let mut rng = stream(cfg.seed, Purpose::GradProbe, 0);
    let picks = sample(&mut rng, pool.len(), cfg.probe_count.min(pool.len()));
    let mut probes = Vec::new();
    for k in picks {
        let i = pool[k];
        let a = analytic(i);
        let theta = params.get(i);
        let mut h = cfg.h;
        let mut best: Option<ProbeResult> = None;
        for _ in 0..=cfg.refinements {
            params.set(i, theta + h);
            let plus = loss(params);
            params.set(i, theta - h);
            let minus = loss(params);
            params.set(i, theta);
            let numeric = (plus - minus) / (2.0 * h);
            let err = rel_error(a, numeric, cfg.abs_floor);
            if best.as_ref().is_none_or(|b| err < b.rel_error) {
                best = Some(ProbeResult {
                    index: i,
                    label: params.describe(i),
                    analytic: a,
                    numeric,
                    rel_error: err,
                    h,
                });
            }
            if err <= cfg.tolerance {
                break;
            }
            h /= 10.0;
        }
        probes.push(best.expect("at least one difference is evaluated"));
    }
    let max_rel_error = probes.iter().map(|p| p.rel_error).fold(0.0, f64::max);
    GradCheckReport {
        probes,
        max_rel_error,
        tolerance: cfg.tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_loss_passes() {
        let mut p = vec![1.0, 2.0, 3.0];
        let r = finite_diff_check(&mut p, |_| 0.0, |_| 0.0, None, &GradCheckConfig::default());
        assert!(r.passed());
        assert_eq!(r.max_rel_error, 0.0);
    }

    #[test]
    fn quadratic_is_exact() {
        let mut p = vec![3.0];
        let cfg = GradCheckConfig {
            h: 1e-3,
            ..Default::default()
        };
        let r = finite_diff_check(&mut p, |i| [3.0][i], |p| 0.5 * p[0] * p[0], None, &cfg);
        assert_eq!(r.probes.len(), 1);
        assert!((r.probes[0].numeric - 3.0).abs() < 1e-9);
        assert!(r.passed());
        assert_eq!(p, vec![3.0]);
    }

    #[test]
    fn wrong_gradient_is_reported() {
        let mut p = vec![1.0, -2.0];
        let r = finite_diff_check(&mut p, |i| [2.0, 1.0][i], |p| p[0] * p[0] + p[1] * p[1], None, &GradCheckConfig::default());
        assert!(!r.passed());
        let err = r.ensure_passed().unwrap_err().to_string();
        assert!(err.contains("θ[1]"), "{err}");
    }

    #[test]
    fn kink_inside_step_is_refined() {
        // |x| at x = 5e-5: the initial step straddles the kink
        let mut p = vec![5e-5];
        let r = finite_diff_check(&mut p, |_| 1.0, |p| p[0].abs(), None, &GradCheckConfig::default());
        assert!(r.passed());
        assert!(r.probes[0].h < 1e-4);
    }
}
