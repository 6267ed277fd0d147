//! Magnetic field profiles, the transversal gauge and the cutoff function.

use crate::error::{invalid, Error, Result};
use alloc::vec::Vec;

/// Default absolute tolerance of the gauge line integral.
pub const GAUGE_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 48;

/// One monomial `c·x₁^px·x₂^py` of a polynomial field.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Monomial {
    pub px: u32,
    pub py: u32,
    pub c: f64,
}

/// Transverse profile `B(x₁, x₂)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum FieldProfile {
    Constant {
        b0: f64,
    },
    /// `mean + amplitude·cos(k·x)`
    Periodic {
        #[cfg_attr(feature = "serde", serde(default))]
        mean: f64,
        amplitude: f64,
        wave_vector: [f64; 2],
    },
    Polynomial {
        terms: Vec<Monomial>,
    },
    /// `background + amplitude·exp(−|x|²/width²)`
    GaussianBump {
        background: f64,
        amplitude: f64,
        width: f64,
    },
    /// Bilinear interpolation of samples on a rectangular grid, clamped
    /// outside; `values[i * x2.len() + j]` is the sample at `(x1[i], x2[j])`.
    Sampled {
        x1: Vec<f64>,
        x2: Vec<f64>,
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct FieldModel {
    pub profile: FieldProfile,
    pub mass: f64,
}

impl FieldModel {
    pub fn new(profile: FieldProfile, mass: f64) -> Result<Self> {
        let f = Self { profile, mass };
        f.validate()?;
        Ok(f)
    }

    pub fn constant(b0: f64, mass: f64) -> Result<Self> {
        Self::new(FieldProfile::Constant { b0 }, mass)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(invalid("mass", "must be strictly positive and finite"));
        }
        match &self.profile {
            FieldProfile::Constant { b0 } if !b0.is_finite() => {
                Err(invalid("b0", "must be finite"))
            }
            FieldProfile::Periodic {
                mean,
                amplitude,
                wave_vector,
            } if !(mean.is_finite()
                && amplitude.is_finite()
                && wave_vector.iter().all(|k| k.is_finite())) =>
            {
                Err(invalid("periodic", "parameters must be finite"))
            }
            FieldProfile::Polynomial { terms } if terms.iter().any(|t| !t.c.is_finite()) => {
                Err(invalid("polynomial", "coefficients must be finite"))
            }
            FieldProfile::GaussianBump { width, .. } if !(*width > 0.0) => {
                Err(invalid("width", "must be positive"))
            }
            FieldProfile::Sampled { x1, x2, values } => {
                if x1.len() < 2 || x2.len() < 2 {
                    return Err(invalid("sampled", "needs at least 2 points per axis"));
                }
                if values.len() != x1.len() * x2.len() {
                    return Err(Error::Dimension {
                        expected: x1.len() * x2.len(),
                        found: values.len(),
                    });
                }
                if !x1.windows(2).all(|w| w[0] < w[1]) || !x2.windows(2).all(|w| w[0] < w[1]) {
                    return Err(invalid("sampled", "axes must be strictly increasing"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("sampled", "samples must be finite"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// `Some(B₀)` for a constant profile.
    pub fn constant_value(&self) -> Option<f64> {
        match self.profile {
            FieldProfile::Constant { b0 } => Some(b0),
            _ => None,
        }
    }

    pub fn b(&self, x: [f64; 2]) -> f64 {
        match &self.profile {
            FieldProfile::Constant { b0 } => *b0,
            FieldProfile::Periodic {
                mean,
                amplitude,
                wave_vector,
            } => mean + amplitude * libm::cos(wave_vector[0] * x[0] + wave_vector[1] * x[1]),
            FieldProfile::Polynomial { terms } => terms
                .iter()
                .map(|t| t.c * libm::pow(x[0], t.px as f64) * libm::pow(x[1], t.py as f64))
                .sum(),
            FieldProfile::GaussianBump {
                background,
                amplitude,
                width,
            } => background + amplitude * libm::exp(-(x[0] * x[0] + x[1] * x[1]) / (width * width)),
            FieldProfile::Sampled { x1, x2, values } => bilinear(x1, x2, values, x),
        }
    }

    /// The field with the opposite sign.
    pub fn reflected(&self) -> Self {
        let profile = match &self.profile {
            FieldProfile::Constant { b0 } => FieldProfile::Constant { b0: -b0 },
            FieldProfile::Periodic {
                mean,
                amplitude,
                wave_vector,
            } => FieldProfile::Periodic {
                mean: -mean,
                amplitude: -amplitude,
                wave_vector: *wave_vector,
            },
            FieldProfile::Polynomial { terms } => FieldProfile::Polynomial {
                terms: terms.iter().map(|t| Monomial { c: -t.c, ..*t }).collect(),
            },
            FieldProfile::GaussianBump {
                background,
                amplitude,
                width,
            } => FieldProfile::GaussianBump {
                background: -background,
                amplitude: -amplitude,
                width: *width,
            },
            FieldProfile::Sampled { x1, x2, values } => FieldProfile::Sampled {
                x1: x1.clone(),
                x2: x2.clone(),
                values: values.iter().map(|v| -v).collect(),
            },
        };
        Self {
            profile,
            mass: self.mass,
        }
    }
}

fn locate(axis: &[f64], t: f64) -> (usize, f64) {
    let n = axis.len();
    if t <= axis[0] {
        return (0, 0.0);
    }
    if t >= axis[n - 1] {
        return (n - 2, 1.0);
    }
    let i = axis.partition_point(|&a| a <= t) - 1;
    let i = i.min(n - 2);
    (i, (t - axis[i]) / (axis[i + 1] - axis[i]))
}

fn bilinear(x1: &[f64], x2: &[f64], values: &[f64], x: [f64; 2]) -> f64 {
    let (i, s) = locate(x1, x[0]);
    let (j, t) = locate(x2, x[1]);
    let m = x2.len();
    let v = |a: usize, b: usize| values[a * m + b];
    (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1)) + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1))
}

/// Vector potential in the transversal gauge,
/// `a(x) = (−x₂, x₁)·∫₀¹ s B(sx) ds`, with `a₃ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugePotential {
    pub field: FieldModel,
    pub tol: f64,
}

impl GaugePotential {
    pub fn new(field: FieldModel, tol: f64) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(Self { field, tol })
    }

    pub fn eval(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        transversal_gauge(&self.field, x, self.tol)
    }
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut worst: f64 = 0.0;
    let v = simpson_step(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH, &mut worst);
    if worst > tol {
        return Err(Error::Quadrature {
            estimate: v,
            achieved: worst,
            requested: tol,
        });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *worst += delta.abs() / 15.0;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1, worst)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1, worst)
}

pub fn transversal_gauge(field: &FieldModel, x: [f64; 2], tol: f64) -> Result<[f64; 2]> {
    if let Some(b0) = field.constant_value() {
        return Ok([-0.5 * b0 * x[1], 0.5 * b0 * x[0]]);
    }
    let r = libm::sqrt(x[0] * x[0] + x[1] * x[1]);
    if r == 0.0 {
        return Ok([0.0, 0.0]);
    }
    // |a| = r·I, so the integral needs tolerance tol / r
    let integrand = |s: f64| s * field.b([s * x[0], s * x[1]]);
    let i = adaptive_simpson(&integrand, 0.0, 1.0, tol / r.max(1.0))?;
    Ok([-x[1] * i, x[0] * i])
}

/// `max |D₁a₂ − D₂a₁ − B|` over `points` with central differences of step `h`.
pub fn gauge_curl_residual(gauge: &GaugePotential, points: &[[f64; 2]], h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(invalid("h", "must be positive"));
    }
    let mut worst: f64 = 0.0;
    for &p in points {
        let a2p = gauge.eval([p[0] + h, p[1]])?[1];
        let a2m = gauge.eval([p[0] - h, p[1]])?[1];
        let a1p = gauge.eval([p[0], p[1] + h])?[0];
        let a1m = gauge.eval([p[0], p[1] - h])?[0];
        let curl = (a2p - a2m) / (2.0 * h) - (a1p - a1m) / (2.0 * h);
        worst = worst.max((curl - gauge.field.b(p)).abs());
    }
    Ok(worst)
}

/// C¹ smoothstep cutoff: 0 on `[0, 1]`, 1 on `[2, ∞)`.
pub fn cutoff_theta(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(alloc::format!(
            "cutoff argument must be non-negative, got {t}"
        )));
    }
    let u = (t - 1.0).clamp(0.0, 1.0);
    Ok(u * u * (3.0 - 2.0 * u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;
    use alloc::vec;

    #[test]
    fn constant_field_gives_symmetric_gauge() {
        let f = FieldModel::constant(2.0, 1.0).unwrap();
        let a = transversal_gauge(&f, [0.3, -1.2], GAUGE_TOL).unwrap();
        assert!((a[0] - 1.2).abs() < 1e-15 && (a[1] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_field_gives_zero_gauge() {
        let f = FieldModel::new(
            FieldProfile::Polynomial { terms: vec![] },
            1.0,
        )
        .unwrap();
        assert_eq!(transversal_gauge(&f, [1.0, 2.0], GAUGE_TOL).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn quadratic_field_matches_closed_form() {
        let f = FieldModel::new(
            FieldProfile::Polynomial {
                terms: vec![
                    Monomial { px: 2, py: 0, c: 1.0 },
                    Monomial { px: 0, py: 2, c: 1.0 },
                ],
            },
            1.0,
        )
        .unwrap();
        let x = [0.7, -1.1];
        let r2 = x[0] * x[0] + x[1] * x[1];
        let a = transversal_gauge(&f, x, GAUGE_TOL).unwrap();
        assert!((a[0] - (-x[1] * r2 / 4.0)).abs() < 1e-10);
        assert!((a[1] - x[0] * r2 / 4.0).abs() < 1e-10);
    }

    #[test]
    fn curl_residuals() {
        let g = GaugePotential::new(FieldModel::constant(1.0, 1.0).unwrap(), GAUGE_TOL).unwrap();
        let pts = [[0.1, 0.2], [-3.0, 4.0], [10.0, -7.5]];
        assert!(gauge_curl_residual(&g, &pts, 0.1).unwrap() <= 1e-12);

        let sine = FieldModel::new(
            FieldProfile::Periodic {
                mean: 0.0,
                amplitude: 1.0,
                wave_vector: [1.0, 0.0],
            },
            1.0,
        )
        .unwrap();
        let g = GaugePotential::new(sine, GAUGE_TOL).unwrap();
        let mut rng = SeededRng::new(3);
        let pts: Vec<[f64; 2]> = (0..100)
            .map(|_| [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)])
            .collect();
        assert!(gauge_curl_residual(&g, &pts, 1e-3).unwrap() <= 1e-5);
    }

    #[test]
    fn cutoff_values() {
        assert_eq!(cutoff_theta(0.5).unwrap(), 0.0);
        assert_eq!(cutoff_theta(3.0).unwrap(), 1.0);
        assert_eq!(cutoff_theta(1.5).unwrap(), 0.5);
        assert!(matches!(cutoff_theta(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn rejects_nonpositive_mass() {
        assert!(FieldModel::constant(1.0, 0.0).is_err());
        assert!(FieldModel::constant(1.0, -1.0).is_err());
    }

    #[test]
    fn sampled_field_interpolates() {
        let f = FieldModel::new(
            FieldProfile::Sampled {
                x1: vec![0.0, 1.0],
                x2: vec![0.0, 1.0],
                values: vec![0.0, 1.0, 2.0, 3.0],
            },
            1.0,
        )
        .unwrap();
        assert!((f.b([0.5, 0.5]) - 1.5).abs() < 1e-15);
        assert_eq!(f.b([5.0, 5.0]), 3.0);
    }
}
