//! Exact rationals, Gaussian rationals and monic polynomials over `ℚ`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::tensor::C64;

pub type Q = BigRational;

/// Largest denominator accepted by [`recognize`].
pub const MAX_DENOMINATOR: u64 = 1 << 32;
/// Largest `|x − p/q|` accepted by [`recognize`].
pub const RECOGNITION_TOL: f64 = 1e-12;
/// Largest `q² |x − p/q|` accepted by [`recognize`]. Convergents of any real
/// number satisfy `q² |x − p/q| < 1`, so the first two conditions alone
/// accept almost every double; a genuine rational shows a long gap here.
pub const RECOGNITION_GAP: f64 = 1e-4;

pub fn q_int(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn q_frac(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// Smallest-denominator continued-fraction convergent within `tol` of `x`
/// that also passes the [`RECOGNITION_GAP`] test.
pub fn recognize(x: f64, max_den: u64, tol: f64) -> Option<Q> {
    if !x.is_finite() {
        return None;
    }
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let exact_x = Q::from_float(x)?;
    let mut r = x;
    for _ in 0..80 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            return None;
        }
        (h0, h1) = (h1, h2);
        (k0, k1) = (k1, k2);
        let candidate = Q::new(BigInt::from(h1), BigInt::from(k1));
        let err = q_to_f64(&(&candidate - &exact_x).abs());
        if err <= tol && (k1 as f64).powi(2) * err <= RECOGNITION_GAP {
            return Some(candidate);
        }
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// `a + b i` with `a, b ∈ ℚ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GaussQ {
    pub re: Q,
    pub im: Q,
}

impl GaussQ {
    pub fn zero() -> Self {
        GaussQ { re: Q::zero(), im: Q::zero() }
    }

    pub fn one() -> Self {
        GaussQ { re: Q::one(), im: Q::zero() }
    }

    pub fn real(re: Q) -> Self {
        GaussQ { re, im: Q::zero() }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn recognize(z: C64, max_den: u64, tol: f64) -> Option<Self> {
        Some(GaussQ { re: recognize(z.re, max_den, tol)?, im: recognize(z.im, max_den, tol)? })
    }

    pub fn to_c64(&self) -> C64 {
        C64::new(q_to_f64(&self.re), q_to_f64(&self.im))
    }

    /// Multiplicative inverse; `None` at zero.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let norm = &self.re * &self.re + &self.im * &self.im;
        Some(GaussQ { re: &self.re / &norm, im: -(&self.im / &norm) })
    }
}

impl Add for &GaussQ {
    type Output = GaussQ;
    fn add(self, rhs: &GaussQ) -> GaussQ {
        GaussQ { re: &self.re + &rhs.re, im: &self.im + &rhs.im }
    }
}

impl Sub for &GaussQ {
    type Output = GaussQ;
    fn sub(self, rhs: &GaussQ) -> GaussQ {
        GaussQ { re: &self.re - &rhs.re, im: &self.im - &rhs.im }
    }
}

impl Neg for &GaussQ {
    type Output = GaussQ;
    fn neg(self) -> GaussQ {
        GaussQ { re: -&self.re, im: -&self.im }
    }
}

impl Mul for &GaussQ {
    type Output = GaussQ;
    fn mul(self, rhs: &GaussQ) -> GaussQ {
        if self.is_zero() || rhs.is_zero() {
            return GaussQ::zero();
        }
        if self.is_real() && rhs.is_real() {
            return GaussQ::real(&self.re * &rhs.re);
        }
        GaussQ {
            re: &self.re * &rhs.re - &self.im * &rhs.im,
            im: &self.re * &rhs.im + &self.im * &rhs.re,
        }
    }
}

/// Dense square matrix over the Gaussian rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMatrix {
    dim: usize,
    data: Vec<GaussQ>,
}

impl ExactMatrix {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![GaussQ::zero(); dim * dim];
        for a in 0..dim {
            data[a * dim + a] = GaussQ::one();
        }
        ExactMatrix { dim, data }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> GaussQ) -> Self {
        let data = (0..dim * dim).map(|t| f(t / dim, t % dim)).collect();
        ExactMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> &GaussQ {
        &self.data[r * self.dim + c]
    }

    /// Entries in row-major order.
    pub fn entries(&self) -> &[GaussQ] {
        &self.data
    }

    pub fn mul(&self, rhs: &ExactMatrix) -> ExactMatrix {
        let d = self.dim;
        let mut out = vec![GaussQ::zero(); d * d];
        for r in 0..d {
            for t in 0..d {
                let a = &self.data[r * d + t];
                if a.is_zero() {
                    continue;
                }
                for c in 0..d {
                    let b = &rhs.data[t * d + c];
                    if !b.is_zero() {
                        out[r * d + c] = &out[r * d + c] + &(a * b);
                    }
                }
            }
        }
        ExactMatrix { dim: d, data: out }
    }
}

/// Monic polynomial over `ℚ`, coefficients highest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalPolynomial {
    coeffs: Vec<Q>,
}

impl RationalPolynomial {
    /// Normalizes by the leading coefficient; `None` for the zero polynomial.
    pub fn new(mut coeffs: Vec<Q>) -> Option<Self> {
        while coeffs.first().is_some_and(|c| c.is_zero()) {
            coeffs.remove(0);
        }
        let lead = coeffs.first()?.clone();
        Some(RationalPolynomial { coeffs: coeffs.into_iter().map(|c| c / &lead).collect() })
    }

    pub fn one() -> Self {
        RationalPolynomial { coeffs: vec![Q::one()] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `a_0, a_1, …, a_r` for `a_0 x^r + … + a_r`.
    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeffs_f64(&self) -> Vec<f64> {
        self.coeffs.iter().map(q_to_f64).collect()
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().fold(Q::zero(), |acc, c| acc * x + c)
    }

    /// Synthetic division by `x − root`: quotient and remainder.
    pub fn divide_linear(&self, root: &Q) -> (Option<RationalPolynomial>, Q) {
        let mut acc = Q::zero();
        let mut quotient = Vec::with_capacity(self.coeffs.len());
        for c in &self.coeffs {
            acc = acc * root + c;
            quotient.push(acc.clone());
        }
        let rem = quotient.pop().unwrap_or_else(Q::zero);
        (RationalPolynomial::new(quotient), rem)
    }

    /// Remainder of `x^e` modulo `self`, coefficients highest first with length `degree`.
    pub fn power_remainder(&self, e: usize) -> Vec<Q> {
        let r = self.degree();
        // state holds x^t mod self as coefficients of x^{r−1} … x^0
        let mut state = vec![Q::zero(); r];
        if r == 0 {
            return state;
        }
        state[r - 1] = Q::one();
        for _ in 0..e {
            let top = state[0].clone();
            let mut next: Vec<Q> = state[1..].to_vec();
            next.push(Q::zero());
            for (slot, a) in next.iter_mut().zip(&self.coeffs[1..]) {
                *slot -= &top * a;
            }
            state = next;
        }
        state
    }

    /// Fraction strings, highest degree first.
    pub fn fraction_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(|c| c.to_string()).collect()
    }
}

impl fmt::Display for RationalPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.degree();
        let mut first = true;
        for (t, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let power = r - t;
            let mag = c.abs();
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let show_coef = !mag.is_one() || power == 0;
            if show_coef {
                write!(f, "{mag}")?;
            }
            match power {
                0 => {}
                1 => write!(f, "{}x", if show_coef { "*" } else { "" })?,
                _ => write!(f, "{}x^{power}", if show_coef { "*" } else { "" })?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}
