//! Matrix-valued potentials `V(x) = φ(x)·M` with a scalar profile `φ` and a
//! constant hermitian 4×4 shape matrix `M`.

use crate::clifford::{hermiticity_defect, Mat4};
use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, C64};
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

/// Symmetrization tolerance for user-supplied matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "snake_case", deny_unknown_fields))]
pub enum PotentialSpec {
    Zero,
    /// `value·I₄`
    Scalar { value: f64 },
    /// `diag(V₁, V₂, V₃, V₄)`, optionally times `exp(−|x|²/width²)`.
    Diagonal {
        values: [f64; 4],
        #[cfg_attr(feature = "serde", serde(default))]
        width: Option<f64>,
    },
    /// User matrix given as real and imaginary parts, optionally times a
    /// Gaussian envelope.
    Matrix {
        re: [[f64; 4]; 4],
        im: [[f64; 4]; 4],
        #[cfg_attr(feature = "serde", serde(default))]
        width: Option<f64>,
    },
    /// `v0·exp(−|x|²/width²)·I₄`
    Gaussian {
        v0: f64,
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        width: f64,
    },
    /// `amplitude·⟨x₃⟩^{−p}·I₄`
    PowerLaw {
        #[cfg_attr(feature = "serde", serde(default = "one"))]
        amplitude: f64,
        p: f64,
    },
    /// `strength·(1 − |x|²/radius²)²·I₄` inside the ball, 0 outside.
    Bump { strength: f64, radius: f64 },
}

#[cfg(feature = "serde")]
fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    /// Builds a spec from a family name and named scalar parameters.
    pub fn named(family: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |k: &'static str, default: Option<f64>| -> Result<f64> {
            params
                .get(k)
                .copied()
                .or(default)
                .ok_or_else(|| crate::error::invalid(k, "missing parameter"))
        };
        Ok(match family {
            "zero" => Self::Zero,
            "scalar" => Self::Scalar {
                value: get("value", None)?,
            },
            "diagonal" => Self::Diagonal {
                values: [
                    get("v1", None)?,
                    get("v2", None)?,
                    get("v3", None)?,
                    get("v4", None)?,
                ],
                width: params.get("width").copied(),
            },
            "gaussian" => Self::Gaussian {
                v0: get("v0", None)?,
                width: get("width", Some(1.0))?,
            },
            "power_law" => Self::PowerLaw {
                amplitude: get("amplitude", Some(1.0))?,
                p: get("p", None)?,
            },
            "bump" => Self::Bump {
                strength: get("strength", None)?,
                radius: get("radius", None)?,
            },
            other => return Err(Error::UnknownFamily(other.to_string())),
        })
    }
}

/// Scalar profile `φ(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    Constant(f64),
    Gaussian { v0: f64, width: f64 },
    PowerLaw { amplitude: f64, p: f64 },
    Bump { strength: f64, radius: f64 },
}

impl Profile {
    pub fn value(&self, x: [f64; 3]) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        match *self {
            Profile::Constant(c) => c,
            Profile::Gaussian { v0, width } => v0 * libm::exp(-r2 / (width * width)),
            Profile::PowerLaw { amplitude, p } => amplitude * libm::pow(1.0 + x[2] * x[2], -p / 2.0),
            Profile::Bump { strength, radius } => {
                let t = r2 / (radius * radius);
                if t < 1.0 {
                    strength * (1.0 - t) * (1.0 - t)
                } else {
                    0.0
                }
            }
        }
    }

    pub fn gradient(&self, x: [f64; 3]) -> [f64; 3] {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        match *self {
            Profile::Constant(_) => [0.0; 3],
            Profile::Gaussian { v0, width } => {
                let w2 = width * width;
                let g = -2.0 * v0 * libm::exp(-r2 / w2) / w2;
                [g * x[0], g * x[1], g * x[2]]
            }
            Profile::PowerLaw { amplitude, p } => {
                let g = -p * amplitude * x[2] * libm::pow(1.0 + x[2] * x[2], -p / 2.0 - 1.0);
                [0.0, 0.0, g]
            }
            Profile::Bump { strength, radius } => {
                let rr = radius * radius;
                let t = r2 / rr;
                if t < 1.0 {
                    let g = -4.0 * strength * (1.0 - t) / rr;
                    [g * x[0], g * x[1], g * x[2]]
                } else {
                    [0.0; 3]
                }
            }
        }
    }

    /// Value as a function of the transverse radius squared (at `x₃ = 0`).
    pub fn radial(&self, r2: f64) -> f64 {
        self.value([libm::sqrt(r2), 0.0, 0.0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialModel {
    pub spec: PotentialSpec,
    pub profile: Profile,
    pub shape: Mat4,
    /// Spectral norm of `shape`.
    pub shape_norm: f64,
}

fn identity4() -> Mat4 {
    crate::clifford::identity::<4>()
}

pub fn make_potential(spec: &PotentialSpec) -> Result<PotentialModel> {
    let finite = |v: f64, name: &'static str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(crate::error::invalid(name, "must be finite"))
        }
    };
    let positive = |v: f64, name: &'static str| {
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(crate::error::invalid(name, "must be positive"))
        }
    };
    let envelope = |w: Option<f64>| -> Result<Profile> {
        Ok(match w {
            Some(w) => Profile::Gaussian {
                v0: 1.0,
                width: positive(w, "width")?,
            },
            None => Profile::Constant(1.0),
        })
    };
    let (profile, shape) = match spec {
        PotentialSpec::Zero => (Profile::Constant(0.0), identity4()),
        PotentialSpec::Scalar { value } => (Profile::Constant(finite(*value, "value")?), identity4()),
        PotentialSpec::Diagonal { values, width } => {
            let mut m = [[C64::new(0.0, 0.0); 4]; 4];
            for i in 0..4 {
                m[i][i] = C64::new(finite(values[i], "values")?, 0.0);
            }
            (envelope(*width)?, m)
        }
        PotentialSpec::Matrix { re, im, width } => {
            let mut m = [[C64::new(0.0, 0.0); 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    m[i][j] = C64::new(finite(re[i][j], "re")?, finite(im[i][j], "im")?);
                }
            }
            let defect = hermiticity_defect(&m);
            if defect > HERMITIAN_TOL {
                return Err(Error::NotHermitian {
                    defect,
                    tolerance: HERMITIAN_TOL,
                });
            }
            let mut s = m;
            for i in 0..4 {
                for j in 0..4 {
                    s[i][j] = (m[i][j] + m[j][i].conj()) * 0.5;
                }
            }
            (envelope(*width)?, s)
        }
        PotentialSpec::Gaussian { v0, width } => (
            Profile::Gaussian {
                v0: finite(*v0, "v0")?,
                width: positive(*width, "width")?,
            },
            identity4(),
        ),
        PotentialSpec::PowerLaw { amplitude, p } => (
            Profile::PowerLaw {
                amplitude: finite(*amplitude, "amplitude")?,
                p: finite(*p, "p")?,
            },
            identity4(),
        ),
        PotentialSpec::Bump { strength, radius } => (
            Profile::Bump {
                strength: finite(*strength, "strength")?,
                radius: positive(*radius, "radius")?,
            },
            identity4(),
        ),
    };
    let dense = DenseMatrix::from_fn(4, 4, |i, j| shape[i][j]);
    let eig = dense.hermitian_eigen(false)?;
    let shape_norm = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(PotentialModel {
        spec: spec.clone(),
        profile,
        shape,
        shape_norm,
    })
}

impl PotentialModel {
    pub fn eval(&self, x: [f64; 3]) -> Mat4 {
        let p = self.profile.value(x);
        let mut m = self.shape;
        for row in &mut m {
            for v in row {
                *v *= p;
            }
        }
        m
    }

    /// Spectral norm of `V(x)`.
    pub fn norm_at(&self, x: [f64; 3]) -> f64 {
        self.profile.value(x).abs() * self.shape_norm
    }

    /// Spectral norm of `∂_j V(x)` for j = 1, 2, 3.
    pub fn gradient_norms_at(&self, x: [f64; 3]) -> [f64; 3] {
        let g = self.profile.gradient(x);
        [
            g[0].abs() * self.shape_norm,
            g[1].abs() * self.shape_norm,
            g[2].abs() * self.shape_norm,
        ]
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.profile, Profile::Constant(c) if c == 0.0) || self.shape_norm == 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_gaussian_profile() {
        let v = make_potential(&PotentialSpec::Gaussian { v0: -0.5, width: 1.0 }).unwrap();
        let x = [0.3, -0.2, 0.5];
        let r2 = 0.09 + 0.04 + 0.25;
        let m = v.eval(x);
        for i in 0..4 {
            for j in 0..4 {
                let t = if i == j { -0.5 * libm::exp(-r2) } else { 0.0 };
                assert!((m[i][j] - C64::new(t, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn diagonal_spec_is_diagonal_and_hermitian() {
        let v = make_potential(&PotentialSpec::Diagonal {
            values: [1.0, -2.0, 3.0, 0.5],
            width: None,
        })
        .unwrap();
        let m = v.eval([1.0, 2.0, 3.0]);
        assert_eq!(hermiticity_defect(&m), 0.0);
        assert_eq!(m[1][1], C64::new(-2.0, 0.0));
        assert_eq!(m[0][1], C64::new(0.0, 0.0));
        assert!((v.shape_norm - 3.0).abs() < 1e-14);
    }

    #[test]
    fn power_law_profile() {
        let v = make_potential(&PotentialSpec::PowerLaw { amplitude: 1.0, p: 2.0 }).unwrap();
        assert!((v.eval([5.0, 5.0, 2.0])[2][2].re - 0.2).abs() < 1e-15);
    }

    #[test]
    fn near_hermitian_matrix_is_symmetrized_and_far_one_rejected() {
        let mut re = [[0.0; 4]; 4];
        let im = [[0.0; 4]; 4];
        re[0][1] = 1.0;
        re[1][0] = 1.0 + 1e-14;
        let v = make_potential(&PotentialSpec::Matrix { re, im, width: None }).unwrap();
        assert_eq!(hermiticity_defect(&v.eval([0.0; 3])), 0.0);
        re[1][0] = 1.1;
        assert!(matches!(
            make_potential(&PotentialSpec::Matrix { re, im, width: None }),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn unknown_family_is_rejected() {
        assert!(matches!(
            PotentialSpec::named("yukawa", &BTreeMap::new()),
            Err(Error::UnknownFamily(_))
        ));
    }

    #[test]
    fn analytic_gradients_match_differences() {
        for spec in [
            PotentialSpec::Gaussian { v0: -0.5, width: 1.3 },
            PotentialSpec::PowerLaw { amplitude: 2.0, p: 0.5 },
            PotentialSpec::Bump { strength: 10.0, radius: 2.0 },
        ] {
            let v = make_potential(&spec).unwrap();
            let x = [0.4, -0.3, 0.8];
            let g = v.profile.gradient(x);
            for k in 0..3 {
                let h = 1e-6;
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let fd = (v.profile.value(xp) - v.profile.value(xm)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-7, "{spec:?} {k}");
            }
        }
    }
}
