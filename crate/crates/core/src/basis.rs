//! Curvature basis families.
//!
//! A basis supplies dimensionless functions `gamma_n(u)` on the reduced
//! abscissa `u = s / L in [0, 1]` together with their exact antiderivatives
//! `theta_n(u) = int_0^u gamma_n`. Both are evaluated in closed form.
//!
//! Shifted Legendre polynomials keep their exact integer monomial
//! coefficients (see [`legendre_coeffs`]), but values are computed with the
//! Bonnet recurrence: the monomial coefficients grow like `5.83^n` and a
//! Horner sweep over them loses all precision well before the order limit.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, VicError};

/// Highest supported Legendre order. Coefficients of order 31 and above no
/// longer fit the exact integer representation used here.
pub const MAX_LEGENDRE_ORDER: usize = 30;

/// Upper bound on Fourier orders; purely a sanity guard on configuration.
pub const MAX_FOURIER_ORDER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisFamily {
    #[serde(alias = "legendre-shifted")]
    Legendre,
    Fourier,
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisFamily::Legendre => "legendre",
            BasisFamily::Fourier => "fourier",
        })
    }
}

impl FromStr for BasisFamily {
    type Err = VicError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "legendre" | "legendre-shifted" => Ok(BasisFamily::Legendre),
            "fourier" => Ok(BasisFamily::Fourier),
            other => Err(VicError::InvalidParameter(format!(
                "unknown basis family `{other}` (expected legendre or fourier)"
            ))),
        }
    }
}

/// Exact shifted-Legendre coefficients `P[n][k] = (-1)^(n+k) C(n,k) C(n+k,k)`
/// for `0 <= n, k <= order`, so that `gamma_n(u) = sum_k P[n][k] u^k`.
pub fn legendre_coeffs(order: usize) -> Result<Vec<Vec<i128>>> {
    if order > MAX_LEGENDRE_ORDER {
        return Err(VicError::OrderTooHigh {
            order,
            limit: MAX_LEGENDRE_ORDER,
        });
    }
    let mut rows = Vec::with_capacity(order + 1);
    for n in 0..=order {
        let mut row = vec![0i128; order + 1];
        for (k, slot) in row.iter_mut().enumerate().take(n + 1) {
            let sign = if (n + k) % 2 == 0 { 1 } else { -1 };
            *slot = sign * binomial(n, k) * binomial(n + k, k);
        }
        rows.push(row);
    }
    Ok(rows)
}

fn binomial(n: usize, k: usize) -> i128 {
    let k = k.min(n - k);
    let mut acc: i128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n - i) is divisible by (i + 1)
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// A truncated curvature basis of a given family and order `N`
/// (functions `0..=N`).
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureBasis {
    family: BasisFamily,
    order: usize,
    coeffs: Option<Vec<Vec<i128>>>,
}

impl CurvatureBasis {
    pub fn new(family: BasisFamily, order: usize) -> Result<Self> {
        let coeffs = match family {
            BasisFamily::Legendre => Some(legendre_coeffs(order)?),
            BasisFamily::Fourier => {
                if order > MAX_FOURIER_ORDER {
                    return Err(VicError::OrderTooHigh {
                        order,
                        limit: MAX_FOURIER_ORDER,
                    });
                }
                None
            }
        };
        Ok(Self {
            family,
            order,
            coeffs,
        })
    }

    pub fn legendre(order: usize) -> Result<Self> {
        Self::new(BasisFamily::Legendre, order)
    }

    pub fn fourier(order: usize) -> Result<Self> {
        Self::new(BasisFamily::Fourier, order)
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    /// Series order `N`; the basis holds `N + 1` functions.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.order + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Exact integer monomial coefficients (Legendre only).
    pub fn coeffs(&self) -> Option<&[Vec<i128>]> {
        self.coeffs.as_deref()
    }

    /// Same family, different order.
    pub fn with_order(&self, order: usize) -> Result<Self> {
        Self::new(self.family, order)
    }

    fn check(&self, n: usize, u: f64) -> Result<()> {
        if n > self.order {
            return Err(VicError::BasisIndex {
                index: n,
                order: self.order,
            });
        }
        if !(0.0..=1.0).contains(&u) {
            return Err(VicError::Domain {
                what: "reduced abscissa",
                value: u,
            });
        }
        Ok(())
    }

    /// `gamma_n(u)`.
    pub fn eval_gamma(&self, n: usize, u: f64) -> Result<f64> {
        self.check(n, u)?;
        Ok(match self.family {
            BasisFamily::Legendre => legendre_values(n, 2.0 * u - 1.0)[n],
            BasisFamily::Fourier => fourier_gamma(n, u),
        })
    }

    /// `theta_n(u) = int_0^u gamma_n`.
    pub fn eval_theta(&self, n: usize, u: f64) -> Result<f64> {
        self.check(n, u)?;
        Ok(match self.family {
            BasisFamily::Legendre => {
                let p = legendre_values(n + 1, 2.0 * u - 1.0);
                legendre_theta(n, &p, u)
            }
            BasisFamily::Fourier => fourier_theta(n, u),
        })
    }

    /// Fills `gamma[n]` and `theta[n]` for every basis function at `u`.
    /// Both slices must hold `N + 1` entries.
    pub fn eval_all(&self, u: f64, gamma: &mut [f64], theta: &mut [f64]) -> Result<()> {
        self.check(0, u)?;
        debug_assert!(gamma.len() == self.len() && theta.len() == self.len());
        match self.family {
            BasisFamily::Legendre => {
                let p = legendre_values(self.order + 1, 2.0 * u - 1.0);
                for n in 0..=self.order {
                    gamma[n] = p[n];
                    theta[n] = legendre_theta(n, &p, u);
                }
            }
            BasisFamily::Fourier => {
                for n in 0..=self.order {
                    gamma[n] = fourier_gamma(n, u);
                    theta[n] = fourier_theta(n, u);
                }
            }
        }
        Ok(())
    }

    /// Evaluates `gamma_n` through the exact monomial coefficients with
    /// Horner's rule. Kept as an independent route for cross-checks at
    /// moderate orders; the recurrence in [`eval_gamma`](Self::eval_gamma)
    /// is the one used for computation.
    pub fn eval_gamma_monomial(&self, n: usize, u: f64) -> Result<f64> {
        self.check(n, u)?;
        match &self.coeffs {
            Some(p) => Ok(p[n][..=n]
                .iter()
                .rev()
                .fold(0.0, |acc, &c| acc * u + c as f64)),
            None => Err(VicError::InvalidParameter(
                "monomial coefficients only exist for the legendre family".into(),
            )),
        }
    }
}

/// Legendre values `P_0..=P_m` at `x in [-1, 1]` by the Bonnet recurrence.
fn legendre_values(m: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(m + 1);
    p.push(1.0);
    if m >= 1 {
        p.push(x);
    }
    for k in 1..m {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
        p.push(next);
    }
    p
}

/// `int_0^u P_n(2t - 1) dt = (P_{n+1}(x) - P_{n-1}(x)) / (2 (2n + 1))` for n >= 1.
fn legendre_theta(n: usize, p: &[f64], u: f64) -> f64 {
    if n == 0 {
        u
    } else {
        (p[n + 1] - p[n - 1]) / (2.0 * (2 * n + 1) as f64)
    }
}

// Fourier ordering: 1, cos 2πu, sin 2πu, cos 4πu, sin 4πu, ...
fn fourier_gamma(n: usize, u: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let k = n.div_ceil(2) as f64;
    let arg = 2.0 * PI * k * u;
    if n % 2 == 1 {
        arg.cos()
    } else {
        arg.sin()
    }
}

fn fourier_theta(n: usize, u: f64) -> f64 {
    if n == 0 {
        return u;
    }
    let w = 2.0 * PI * n.div_ceil(2) as f64;
    let arg = w * u;
    if n % 2 == 1 {
        arg.sin() / w
    } else {
        (1.0 - arg.cos()) / w
    }
}
