//! PDE data: diffusion coefficient, source, interface jump data, and the
//! built-in problem presets.
//!
//! The unknown satisfies, with `n_i` the unit normal outgoing from
//! subdomain i,
//!
//! ```text
//!   -div(A grad u) = f        in each subdomain,
//!   u               = g_B     on the outer boundary (zero by default),
//!   u|_1 - u|_2     = g_D     across the interface,
//!   (A grad u)|_1 . n_1 + (A grad u)|_2 . n_2 = g_N   across the interface.
//! ```

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{Matrix2, Point2, Vector2};

use crate::error::{Error, Result};
use crate::mesh::Geometry;

pub type ScalarFn = Arc<dyn Fn(Point2<f64>) -> f64 + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(Point2<f64>) -> Matrix2<f64> + Send + Sync>;
pub type GradientFn = Arc<dyn Fn(Point2<f64>) -> Vector2<f64> + Send + Sync>;

/// Symmetric uniformly elliptic coefficient, defined per subdomain.
#[derive(Clone)]
pub struct CoefficientField {
    per_subdomain: [MatrixFn; 2],
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Bound on the operator norm of A.
    pub alpha: f64,
}

impl CoefficientField {
    pub fn new(per_subdomain: [MatrixFn; 2], lambda_min: f64, lambda_max: f64, alpha: f64) -> Self {
        CoefficientField {
            per_subdomain,
            lambda_min,
            lambda_max,
            alpha,
        }
    }

    /// Piecewise-constant scalar coefficient lambda_i * I.
    pub fn piecewise_scalar(lambda: [f64; 2]) -> Self {
        let make = |l: f64| -> MatrixFn { Arc::new(move |_| Matrix2::identity() * l) };
        CoefficientField {
            per_subdomain: [make(lambda[0]), make(lambda[1])],
            lambda_min: lambda[0].min(lambda[1]),
            lambda_max: lambda[0].max(lambda[1]),
            alpha: lambda[0].max(lambda[1]),
        }
    }

    pub fn eval(&self, p: Point2<f64>, subdomain: u8) -> Matrix2<f64> {
        (self.per_subdomain[subdomain as usize - 1])(p)
    }
}

/// Exact solution with per-subdomain branches and gradients.
#[derive(Clone)]
pub struct ExactSolution {
    pub value: [ScalarFn; 2],
    pub gradient: [GradientFn; 2],
}

/// Full data set of one interface problem.
#[derive(Clone)]
pub struct ProblemData {
    pub coeff: CoefficientField,
    source: [ScalarFn; 2],
    g_d: ScalarFn,
    g_n: ScalarFn,
    /// Dirichlet trace on the outer boundary, per subdomain; `None` means
    /// homogeneous.
    boundary: Option<[ScalarFn; 2]>,
    pub exact: Option<ExactSolution>,
    /// Regularity tag s of the solution, in (1/2, 1].
    pub regularity_s: f64,
}

impl ProblemData {
    pub fn coefficient(&self, p: Point2<f64>, subdomain: u8) -> Matrix2<f64> {
        self.coeff.eval(p, subdomain)
    }

    pub fn source(&self, p: Point2<f64>, subdomain: u8) -> f64 {
        (self.source[subdomain as usize - 1])(p)
    }

    /// Prescribed solution jump u|_1 - u|_2 on the interface.
    pub fn g_d(&self, p: Point2<f64>) -> f64 {
        (self.g_d)(p)
    }

    /// Prescribed conormal flux sum on the interface.
    pub fn g_n(&self, p: Point2<f64>) -> f64 {
        (self.g_n)(p)
    }

    /// Dirichlet value on the outer boundary, seen from the given subdomain.
    pub fn boundary_value(&self, p: Point2<f64>, subdomain: u8) -> f64 {
        match &self.boundary {
            Some(g) => (g[subdomain as usize - 1])(p),
            None => 0.0,
        }
    }

    pub fn has_boundary_data(&self) -> bool {
        self.boundary.is_some()
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn exact_value(&self, p: Point2<f64>, subdomain: u8) -> Result<f64> {
        let exact = self.exact.as_ref().ok_or(Error::MissingExact)?;
        Ok((exact.value[subdomain as usize - 1])(p))
    }

    pub fn exact_gradient(&self, p: Point2<f64>, subdomain: u8) -> Result<Vector2<f64>> {
        let exact = self.exact.as_ref().ok_or(Error::MissingExact)?;
        Ok((exact.gradient[subdomain as usize - 1])(p))
    }

    /// Default penalty for this problem's coefficient magnitude.
    pub fn default_eta(&self) -> f64 {
        10.0 * self.coeff.lambda_max
    }

    /// Copy of this problem with the interface jump data replaced.
    pub fn with_jumps(&self, g_d: ScalarFn, g_n: ScalarFn) -> ProblemData {
        let mut d = self.clone();
        d.g_d = g_d;
        d.g_n = g_n;
        d
    }
}

/// Names of the built-in presets; these are the CLI-facing identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Example1,
    Example2,
    Patch,
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(PresetName::Example1),
            "example2" => Ok(PresetName::Example2),
            "patch" => Ok(PresetName::Patch),
            other => Err(Error::UnknownPreset(other.to_string())),
        }
    }
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            PresetName::Example1 => "example1",
            PresetName::Example2 => "example2",
            PresetName::Patch => "patch",
        }
    }
}

/// A geometry together with its problem data.
#[derive(Clone)]
pub struct Preset {
    pub name: PresetName,
    pub geometry: Geometry,
    pub data: ProblemData,
}

/// Builds one of the built-in problems.
///
/// - `example1`: smooth manufactured solution +/- sin(pi x) sin(pi y) with
///   piecewise coefficient 4/1 across the line y = 1/2.
/// - `example2`: same coefficient and source on the staircase geometry with
///   prescribed jump data and no closed-form solution.
/// - `patch`: piecewise-linear solution x and x+1 across y = 1/2 with unit
///   coefficient; reproduced exactly by the degree-1 spaces.
pub fn preset(name: PresetName) -> Preset {
    match name {
        PresetName::Example1 => {
            let sin2 = |p: Point2<f64>| (PI * p.x).sin() * (PI * p.y).sin();
            let data = ProblemData {
                coeff: CoefficientField::piecewise_scalar([4.0, 1.0]),
                source: [
                    Arc::new(move |p| 8.0 * PI * PI * sin2(p)),
                    Arc::new(move |p| -2.0 * PI * PI * sin2(p)),
                ],
                g_d: Arc::new(|p| 2.0 * (PI * p.x).sin()),
                g_n: Arc::new(|_| 0.0),
                boundary: None,
                exact: Some(ExactSolution {
                    value: [Arc::new(move |p| sin2(p)), Arc::new(move |p| -sin2(p))],
                    gradient: [
                        Arc::new(|p| {
                            PI * Vector2::new(
                                (PI * p.x).cos() * (PI * p.y).sin(),
                                (PI * p.x).sin() * (PI * p.y).cos(),
                            )
                        }),
                        Arc::new(|p| {
                            -PI * Vector2::new(
                                (PI * p.x).cos() * (PI * p.y).sin(),
                                (PI * p.x).sin() * (PI * p.y).cos(),
                            )
                        }),
                    ],
                }),
                regularity_s: 1.0,
            };
            Preset {
                name,
                geometry: Geometry::HorizontalSplit { y: 0.5 },
                data,
            }
        }
        PresetName::Example2 => {
            let sin2 = |p: Point2<f64>| (PI * p.x).sin() * (PI * p.y).sin();
            let data = ProblemData {
                coeff: CoefficientField::piecewise_scalar([4.0, 1.0]),
                source: [
                    Arc::new(move |p| 8.0 * PI * PI * sin2(p)),
                    Arc::new(move |p| -2.0 * PI * PI * sin2(p)),
                ],
                // 2 sin(pi x) on the horizontal runs, the constant 2 on the
                // vertical one; the values agree at both staircase corners.
                g_d: Arc::new(|p| {
                    if (p.x - 0.5).abs() <= 1e-12 && p.y > 0.5 + 1e-12 {
                        2.0
                    } else {
                        2.0 * (PI * p.x).sin()
                    }
                }),
                g_n: Arc::new(|_| 0.0),
                boundary: None,
                exact: None,
                regularity_s: 0.75,
            };
            Preset {
                name,
                geometry: Geometry::Staircase,
                data,
            }
        }
        PresetName::Patch => {
            let data = ProblemData {
                coeff: CoefficientField::piecewise_scalar([1.0, 1.0]),
                source: [Arc::new(|_| 0.0), Arc::new(|_| 0.0)],
                g_d: Arc::new(|_| -1.0),
                g_n: Arc::new(|_| 0.0),
                boundary: Some([Arc::new(|p: Point2<f64>| p.x), Arc::new(|p: Point2<f64>| p.x + 1.0)]),
                exact: Some(ExactSolution {
                    value: [Arc::new(|p| p.x), Arc::new(|p| p.x + 1.0)],
                    gradient: [
                        Arc::new(|_| Vector2::new(1.0, 0.0)),
                        Arc::new(|_| Vector2::new(1.0, 0.0)),
                    ],
                }),
                regularity_s: 1.0,
            };
            Preset {
                name,
                geometry: Geometry::HorizontalSplit { y: 0.5 },
                data,
            }
        }
    }
}
