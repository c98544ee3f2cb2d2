//! Unimodular parameter matrices `(a, b, c, d)` that select a linear
//! canonical transform.
//!
//! The Fourier transform is `(0, 1, -1, 0)`, the fractional Fourier
//! transform of angle `alpha` is `(cos, sin, -sin, cos)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum tolerated `|ad - bc - 1|`.
pub const UNIMODULAR_TOL: f64 = 1e-9;

/// Below this `|b|` the transform degenerates to a chirp multiplication.
pub const B_ZERO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct ParamMatrix {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

impl ParamMatrix {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        if ![a, b, c, d].iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let det = a * d - b * c;
        if (det - 1.0).abs() > UNIMODULAR_TOL {
            return Err(Error::NonUnimodular(det));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn fourier() -> Self {
        Self { a: 0.0, b: 1.0, c: -1.0, d: 0.0 }
    }

    pub fn identity() -> Self {
        Self { a: 1.0, b: 0.0, c: 0.0, d: 1.0 }
    }

    /// Fractional Fourier matrix of angle `alpha` (radians).
    ///
    /// Angles with `sin(alpha) ~ 0` are accepted; check [`Self::is_b_zero`]
    /// before handing the result to a `b != 0` transform.
    pub fn fractional(alpha: f64) -> Self {
        let (s, c) = alpha.sin_cos();
        Self { a: c, b: s, c: -s, d: c }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn is_b_zero(&self) -> bool {
        self.b.abs() < B_ZERO_TOL
    }

    pub(crate) fn require_b_nonzero(&self) -> Result<()> {
        if self.is_b_zero() {
            Err(Error::BZero)
        } else {
            Ok(())
        }
    }

    /// `(d, -b, -c, a)`.
    pub fn inverse(&self) -> Self {
        Self { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// Window matrix `(0, b, -1/b, d')` that carries the window spectrum in
    /// the frequency-domain form of the short-time transform.
    pub fn window_matrix(&self, d_prime: f64) -> Result<Self> {
        self.require_b_nonzero()?;
        if !d_prime.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { a: 0.0, b: self.b, c: -1.0 / self.b, d: d_prime })
    }

    /// Ordinary 2x2 product `self * other`, row-major `[[a, b], [c, d]]`.
    pub fn matmul(&self, other: &Self) -> [f64; 4] {
        [
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        ]
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }
}

impl TryFrom<[f64; 4]> for ParamMatrix {
    type Error = Error;

    fn try_from(v: [f64; 4]) -> Result<Self> {
        Self::new(v[0], v[1], v[2], v[3])
    }
}

impl From<ParamMatrix> for [f64; 4] {
    fn from(m: ParamMatrix) -> Self {
        m.as_array()
    }
}

impl fmt::Display for ParamMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.a, self.b, self.c, self.d)
    }
}

/// Accepts `"a,b,c,d"`, `"fourier"`, `"identity"` and `"frft:<alpha>"`.
impl FromStr for ParamMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "fourier" => return Ok(Self::fourier()),
            "identity" => return Ok(Self::identity()),
            _ => {}
        }
        if let Some(alpha) = s.strip_prefix("frft:") {
            let alpha: f64 = alpha
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad fractional angle '{alpha}'")))?;
            if !alpha.is_finite() {
                return Err(Error::NonFinite);
            }
            return Ok(Self::fractional(alpha));
        }
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad matrix entry '{p}' in '{s}'")))
            })
            .collect::<Result<_>>()?;
        if parts.len() != 4 {
            return Err(Error::Parse(format!(
                "matrix needs 4 entries or a preset name, got '{s}'"
            )));
        }
        Self::new(parts[0], parts[1], parts[2], parts[3])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn validate_examples() {
        assert!(ParamMatrix::new(0.0, 1.0, -1.0, 0.0).is_ok());
        assert!(ParamMatrix::new(1.0, 2.0, 0.0, 1.0).is_ok());
        assert_eq!(
            ParamMatrix::new(1.0, 1.0, 1.0, 1.0),
            Err(Error::NonUnimodular(0.0))
        );
        assert_eq!(ParamMatrix::new(f64::NAN, 1.0, -1.0, 0.0), Err(Error::NonFinite));
        assert_eq!(
            ParamMatrix::new(0.0, f64::INFINITY, -1.0, 0.0),
            Err(Error::NonFinite)
        );
    }

    #[test]
    fn inverse_examples() {
        let f = ParamMatrix::fourier();
        assert_eq!(f.inverse().as_array(), [0.0, -1.0, 1.0, 0.0]);
        let m = ParamMatrix::new(1.0, 2.0, 0.0, 1.0).unwrap();
        assert_eq!(m.inverse().as_array(), [1.0, -2.0, 0.0, 1.0]);
        let alpha = 0.7;
        let r = ParamMatrix::fractional(alpha).inverse();
        assert_eq!(r.as_array(), [alpha.cos(), -alpha.sin(), alpha.sin(), alpha.cos()]);
    }

    #[test]
    fn fractional_examples() {
        let m = ParamMatrix::fractional(PI / 2.0);
        assert!(m.a().abs() < 1e-15 && (m.b() - 1.0).abs() < 1e-15);
        assert!((m.c() + 1.0).abs() < 1e-15 && m.d().abs() < 1e-15);
        let m = ParamMatrix::fractional(PI / 6.0);
        assert!((m.a() - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert!((m.b() - 0.5).abs() < 1e-15);
        let id = ParamMatrix::fractional(0.0);
        assert_eq!(id, ParamMatrix::identity());
        assert!(id.is_b_zero());
    }

    #[test]
    fn window_matrix_examples() {
        let w = ParamMatrix::fourier().window_matrix(0.0).unwrap();
        assert_eq!(w.as_array(), [0.0, 1.0, -1.0, 0.0]);
        let a = ParamMatrix::new(1.0, 2.0, 0.5, 2.0).unwrap();
        assert_eq!(a.window_matrix(3.0).unwrap().as_array(), [0.0, 2.0, -0.5, 3.0]);
        let shear = ParamMatrix::new(1.0, 0.0, 0.7, 1.0).unwrap();
        assert_eq!(shear.window_matrix(1.0), Err(Error::BZero));
    }

    #[test]
    fn parse_presets() {
        assert_eq!("fourier".parse::<ParamMatrix>().unwrap(), ParamMatrix::fourier());
        assert_eq!("identity".parse::<ParamMatrix>().unwrap(), ParamMatrix::identity());
        assert_eq!(
            "frft:0.5".parse::<ParamMatrix>().unwrap(),
            ParamMatrix::fractional(0.5)
        );
        assert_eq!(
            " 1, 2 ,0.5,2".parse::<ParamMatrix>().unwrap().as_array(),
            [1.0, 2.0, 0.5, 2.0]
        );
        assert!(matches!("1,1,1,1".parse::<ParamMatrix>(), Err(Error::NonUnimodular(_))));
        assert!(matches!("1,2,3".parse::<ParamMatrix>(), Err(Error::Parse(_))));
        assert!(matches!("frft:x".parse::<ParamMatrix>(), Err(Error::Parse(_))));
    }

    #[test]
    fn serde_rejects_bad_det() {
        let m: ParamMatrix = serde_json::from_str("[2.0, 1.0, 1.0, 1.0]").unwrap();
        assert_eq!(m.as_array(), [2.0, 1.0, 1.0, 1.0]);
        assert!(serde_json::from_str::<ParamMatrix>("[1.0, 1.0, 1.0, 1.0]").is_err());
    }

    fn unimodular() -> impl Strategy<Value = ParamMatrix> {
        (-5.0..5.0f64, 0.05..5.0f64, -5.0..5.0f64, prop::bool::ANY).prop_map(|(a, b, d, neg)| {
            let b = if neg { -b } else { b };
            // c chosen to force ad - bc = 1
            let c = (a * d - 1.0) / b;
            ParamMatrix::new(a, b, c, d).unwrap()
        })
    }

    proptest! {
        #[test]
        fn inverse_composes_to_identity(m in unimodular()) {
            let inv = m.inverse();
            prop_assert!(ParamMatrix::new(inv.a(), inv.b(), inv.c(), inv.d()).is_ok());
            prop_assert_eq!(inv.inverse(), m);
            let p = m.matmul(&inv);
            let scale = m.as_array().iter().fold(1.0f64, |s, x| s.max(x.abs()));
            let tol = 1e-12 * scale * scale;
            prop_assert!((p[0] - 1.0).abs() < tol && p[1].abs() < tol);
            prop_assert!(p[2].abs() < tol && (p[3] - 1.0).abs() < tol);
        }

        #[test]
        fn window_matrix_is_unimodular(m in unimodular(), dp in -10.0..10.0f64) {
            let w = m.window_matrix(dp).unwrap();
            prop_assert!(ParamMatrix::new(w.a(), w.b(), w.c(), w.d()).is_ok());
        }

        #[test]
        fn fractional_is_unimodular(alpha in -10.0..10.0f64) {
            prop_assume!(alpha.sin().abs() >= 1e-8);
            let m = ParamMatrix::fractional(alpha);
            prop_assert!((m.det() - 1.0).abs() <= UNIMODULAR_TOL);
            prop_assert!(!m.is_b_zero());
        }
    }
}
