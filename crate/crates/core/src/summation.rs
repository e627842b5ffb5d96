//! Compensated and double-double accumulation.
//!
//! The free-fermion recursion is a long convolution whose terms cancel; the
//! accumulator used for it is chosen by [`PrecisionMode`].

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    /// Plain `f64` summation.
    Standard,
    /// Neumaier-compensated summation of `f64` products.
    #[default]
    Compensated,
    /// Double-double accumulation with error-free products.
    Extended,
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecisionMode::Standard => "standard",
            PrecisionMode::Compensated => "compensated",
            PrecisionMode::Extended => "extended",
        })
    }
}

impl FromStr for PrecisionMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "compensated" => Ok(Self::Compensated),
            "extended" => Ok(Self::Extended),
            other => Err(format!(
                "unknown precision mode '{other}' (expected standard, compensated or extended)"
            )),
        }
    }
}

/// Error-free sum: `a + b = s + e` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let e = (a - (s - bb)) + (b - bb);
    (s, e)
}

/// Error-free product via fused multiply-add.
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Kahan-Babuska-Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn add_f64(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let e = e + self.lo;
        let (hi, lo) = fast_two_sum(s, e);
        self.hi = hi;
        self.lo = lo;
    }

    #[inline]
    pub fn add_dd(&mut self, other: DoubleDouble) {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = fast_two_sum(s, e);
        self.hi = hi;
        self.lo = lo;
    }

    /// Adds `a * b` with the product kept exact.
    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        let (p, e) = two_prod(a, b);
        self.add_dd(DoubleDouble { hi: p, lo: e });
    }

    pub fn value(&self) -> f64 {
        self.hi + self.lo
    }
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[derive(Debug, Clone, Copy)]
enum RealAcc {
    Plain(f64),
    Neumaier(NeumaierSum),
    Dd(DoubleDouble),
}

/// Real accumulator whose algorithm is picked at runtime.
#[derive(Debug, Clone, Copy)]
pub struct RealSum(RealAcc);

impl RealSum {
    pub fn new(mode: PrecisionMode) -> Self {
        Self(match mode {
            PrecisionMode::Standard => RealAcc::Plain(0.0),
            PrecisionMode::Compensated => RealAcc::Neumaier(NeumaierSum::new()),
            PrecisionMode::Extended => RealAcc::Dd(DoubleDouble::default()),
        })
    }

    pub fn with_value(mode: PrecisionMode, x: f64) -> Self {
        let mut s = Self::new(mode);
        s.add(x);
        s
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        match &mut self.0 {
            RealAcc::Plain(s) => *s += x,
            RealAcc::Neumaier(s) => s.add(x),
            RealAcc::Dd(s) => s.add_f64(x),
        }
    }

    #[inline]
    pub fn add_product(&mut self, a: f64, b: f64) {
        match &mut self.0 {
            RealAcc::Plain(s) => *s += a * b,
            RealAcc::Neumaier(s) => s.add(a * b),
            RealAcc::Dd(s) => s.add_product(a, b),
        }
    }

    pub fn value(&self) -> f64 {
        match &self.0 {
            RealAcc::Plain(s) => *s,
            RealAcc::Neumaier(s) => s.value(),
            RealAcc::Dd(s) => s.value(),
        }
    }
}

/// Complex accumulator built from two [`RealSum`]s.
#[derive(Debug, Clone, Copy)]
pub struct ComplexSum {
    mode: PrecisionMode,
    re: RealSum,
    im: RealSum,
}

impl ComplexSum {
    pub fn new(mode: PrecisionMode) -> Self {
        Self {
            mode,
            re: RealSum::new(mode),
            im: RealSum::new(mode),
        }
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    /// Adds `a * b`. In extended mode each of the four real products is exact.
    #[inline]
    pub fn add_product(&mut self, a: Complex64, b: Complex64) {
        match self.mode {
            PrecisionMode::Extended => {
                self.re.add_product(a.re, b.re);
                self.re.add_product(-a.im, b.im);
                self.im.add_product(a.re, b.im);
                self.im.add_product(a.im, b.re);
            }
            _ => self.add(a * b),
        }
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumaier_recovers_small_terms() {
        let mut s = NeumaierSum::new();
        for x in [1.0, 1e100, 1.0, -1e100] {
            s.add(x);
        }
        assert_eq!(s.value(), 2.0);
    }

    #[test]
    fn double_double_product_is_exact() {
        let a = 1.0 + f64::EPSILON;
        let mut s = DoubleDouble::default();
        s.add_product(a, a);
        s.add_f64(-1.0);
        s.add_f64(-2.0 * f64::EPSILON);
        assert_eq!(s.value(), f64::EPSILON * f64::EPSILON);
    }

    #[test]
    fn plain_loses_what_compensated_keeps() {
        let terms = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        let mut plain = RealSum::new(PrecisionMode::Standard);
        let mut comp = RealSum::new(PrecisionMode::Compensated);
        let mut ext = RealSum::new(PrecisionMode::Extended);
        for t in terms {
            plain.add(t);
            comp.add(t);
            ext.add(t);
        }
        assert_eq!(plain.value(), 0.0);
        assert!((comp.value() - 4e-16).abs() < 1e-30);
        assert!((ext.value() - 4e-16).abs() < 1e-30);
    }

    #[test]
    fn complex_product_modes_agree_on_easy_input() {
        let a = Complex64::new(0.3, -1.2);
        let b = Complex64::new(-0.7, 0.25);
        for mode in [
            PrecisionMode::Standard,
            PrecisionMode::Compensated,
            PrecisionMode::Extended,
        ] {
            let mut s = ComplexSum::new(mode);
            s.add_product(a, b);
            assert!((s.value() - a * b).norm() < 1e-16);
        }
    }

    #[test]
    fn parse_modes() {
        assert_eq!("extended".parse::<PrecisionMode>(), Ok(PrecisionMode::Extended));
        assert!("quad".parse::<PrecisionMode>().is_err());
        assert_eq!(PrecisionMode::Compensated.to_string(), "compensated");
    }
}
