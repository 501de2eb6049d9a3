//! Ultrametric geometry of balls in a local field.
//!
//! Every computation runs on the effective one-dimensional field with branching
//! `Q = q^n` and exponent `gamma = alpha / n`: the max-norm on `K^n` is carried
//! isometrically onto an unramified degree-`n` extension of `K`, whose residue
//! field has `q^n` elements. A ball of radius `Q^N` is then a rooted tree of
//! cosets, and all Haar volumes, distances and character integrals reduce to
//! integer combinatorics on that tree.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Upper bound on the number of cosets a [`Grid`] may hold.
pub const MAX_COSETS: usize = 1 << 24;

/// Effective ultrametric parameters of `K^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldModel {
    q: u32,
    n: u32,
    alpha: f64,
    branching: u64,
    gamma: f64,
}

impl FieldModel {
    /// Builds the effective field `(Q, gamma) = (q^n, alpha / n)`.
    pub fn effective_params(q: u32, n: u32, alpha: f64) -> Result<Self> {
        if q < 2 {
            return domain(format!("residue cardinality q = {q} must be at least 2"));
        }
        if n < 1 {
            return domain("dimension n must be at least 1");
        }
        if !(alpha.is_finite() && alpha > 0.0) {
            return domain(format!("alpha = {alpha} must be a positive finite number"));
        }
        let branching = (q as u64)
            .checked_pow(n)
            .filter(|b| *b <= u32::MAX as u64)
            .ok_or_else(|| Error::ParameterDomain(format!("q^n overflows for q = {q}, n = {n}")))?;
        Ok(Self {
            q,
            n,
            alpha,
            branching,
            gamma: alpha / n as f64,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Effective branching `Q = q^n`.
    pub fn branching(&self) -> u64 {
        self.branching
    }

    /// Effective exponent `gamma = alpha / n`.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `Q^e`, exact for integer exponents.
    pub fn pow(&self, e: f64) -> f64 {
        let base = self.branching as f64;
        if e.fract() == 0.0 && e.abs() < 1024.0 {
            base.powi(e as i32)
        } else {
            base.powf(e)
        }
    }

    /// `Q^{-d (1 + gamma)}`: the kernel `|z|^{-1-gamma}` at `|z| = Q^d`.
    pub fn kernel_at_level(&self, d: i32) -> f64 {
        if self.gamma.fract() == 0.0 {
            self.pow(-(d as f64) * (1.0 + self.gamma))
        } else {
            self.pow(-(d as f64)) * self.pow(-(d as f64) * self.gamma)
        }
    }

    /// Haar measure of the ball of radius `Q^level`.
    pub fn ball_volume(&self, level: i32) -> f64 {
        self.pow(level as f64)
    }

    /// Haar measure of the sphere `|x| = Q^level`.
    pub fn shell_volume(&self, level: i32) -> f64 {
        self.pow(level as f64) * (1.0 - 1.0 / self.branching as f64)
    }

    /// `int_{|y| > Q^level} |y|^{-1-gamma} dy`.
    pub fn tail_kernel_integral(&self, level: i32) -> f64 {
        let q = self.branching as f64;
        (q - 1.0) / (q * (self.pow(self.gamma) - 1.0)) * self.pow(-(level as f64) * self.gamma)
    }

    /// `int_{|x| <= Q^level} chi(a x) dx` where `|a| = Q^s` for `a_level = Finite(s)`.
    pub fn ball_character_integral(&self, level: i32, a_level: AbsLevel) -> f64 {
        match a_level {
            AbsLevel::Zero => self.ball_volume(level),
            AbsLevel::Finite(s) if s <= -level => self.ball_volume(level),
            AbsLevel::Finite(_) => 0.0,
        }
    }

    /// `I_m(x) = int_{|eta| = Q^m} chi(eta x) d eta` at `|x| = Q^s`.
    pub fn shell_character_integral(&self, m: i32, s: i32) -> f64 {
        if m <= -s {
            self.shell_volume(m)
        } else if m == -s + 1 {
            -self.pow((m - 1) as f64)
        } else {
            0.0
        }
    }
}

/// Exponent of an absolute value, with a distinguished token for `|0|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AbsLevel {
    Zero,
    Finite(i32),
}

/// Result of comparing two cosets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distance {
    Same,
    /// Points in the two cosets are at distance `Q^d`.
    Level(i32),
}

/// Region of the outer ball a coset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// Inside the domain ball `B_N`.
    Omega,
    /// On the sphere `|x| = Q^s`, `N < s <= M`.
    Shell(i32),
}

/// Finite coset tree of radius `Q^{-nu}` partitioning the outer ball `B_M`,
/// with the domain `Omega = B_N` inside it.
///
/// Cosets are indexed in tree order: the index is the base-`Q` number whose
/// most significant digit is the coefficient of `beta^{-M}`. The `Q^{N+nu}`
/// cosets of `B_N` are therefore the first indices, and the sphere
/// `|x| = Q^s` occupies `[Q^{s+nu-1}, Q^{s+nu})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    field: FieldModel,
    domain_level: i32,
    outer_level: i32,
    nu: i32,
    coset_count: usize,
    omega_count: usize,
}

impl Grid {
    pub fn new(field: FieldModel, domain_level: i32, outer_level: i32, nu: i32) -> Result<Self> {
        if outer_level < domain_level {
            return domain(format!("M = {outer_level} must be >= N = {domain_level}"));
        }
        if nu < -domain_level {
            return domain(format!("nu = {nu} must be >= -N = {}", -domain_level));
        }
        let digits = (outer_level as i64 + nu as i64) as u32;
        let coset_count = checked_count(field.branching, digits)?;
        let omega_count = checked_count(field.branching, (domain_level + nu) as u32)?;
        Ok(Self {
            field,
            domain_level,
            outer_level,
            nu,
            coset_count,
            omega_count,
        })
    }

    pub fn field(&self) -> &FieldModel {
        &self.field
    }

    /// `N`, with `Omega = B_N`.
    pub fn domain_level(&self) -> i32 {
        self.domain_level
    }

    /// `M`, the radius exponent of the resolved outer ball.
    pub fn outer_level(&self) -> i32 {
        self.outer_level
    }

    pub fn nu(&self) -> i32 {
        self.nu
    }

    pub fn coset_count(&self) -> usize {
        self.coset_count
    }

    pub fn omega_count(&self) -> usize {
        self.omega_count
    }

    pub fn digit_count(&self) -> usize {
        (self.outer_level + self.nu) as usize
    }

    /// Haar volume `Q^{-nu}` of a single coset.
    pub fn coset_volume(&self) -> f64 {
        self.field.pow(-(self.nu as f64))
    }

    /// The same tree restricted to `B_N`.
    pub fn omega_grid(&self) -> Grid {
        Grid {
            outer_level: self.domain_level,
            coset_count: self.omega_count,
            ..*self
        }
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self == other
    }

    pub fn region(&self, index: usize) -> Region {
        if index < self.omega_count {
            Region::Omega
        } else {
            match self.abs_level(index) {
                AbsLevel::Finite(s) => Region::Shell(s),
                AbsLevel::Zero => unreachable!("zero coset lies in Omega"),
            }
        }
    }

    /// `|x|` for points of the coset, or `Zero` for the coset containing 0.
    pub fn abs_level(&self, index: usize) -> AbsLevel {
        if index == 0 {
            return AbsLevel::Zero;
        }
        let q = self.field.branching as usize;
        let mut t = 0i32;
        let mut i = index;
        while i > 0 {
            i /= q;
            t += 1;
        }
        AbsLevel::Finite(t - self.nu)
    }

    /// Index range of the sphere `|x| = Q^s` for `N < s <= M`.
    pub fn shell_range(&self, s: i32) -> Option<std::ops::Range<usize>> {
        if s <= self.domain_level || s > self.outer_level {
            return None;
        }
        let q = self.field.branching as usize;
        let hi = q.pow((s + self.nu) as u32);
        Some(hi / q..hi)
    }

    /// Exponent `d` with `|x - y| = Q^d` for `x`, `y` in the two cosets.
    pub fn distance_level(&self, a: usize, b: usize) -> Option<i32> {
        if a == b {
            return None;
        }
        let q = self.field.branching as usize;
        let (mut a, mut b) = (a, b);
        let mut t = 0i32;
        while a != b {
            a /= q;
            b /= q;
            t += 1;
        }
        Some(t - self.nu)
    }

    /// Number of cosets at distance exactly `Q^d` from any fixed coset.
    pub fn shell_count(&self, d: i32) -> usize {
        if d <= -self.nu || d > self.outer_level {
            return 0;
        }
        let q = self.field.branching as usize;
        q.pow((self.nu + d - 1) as u32) * (q - 1)
    }

    pub fn coset_id(&self, index: usize) -> CosetId {
        assert!(index < self.coset_count, "coset index out of range");
        let q = self.field.branching as usize;
        let len = self.digit_count();
        let mut digits = vec![0u32; len];
        let mut i = index;
        for slot in digits.iter_mut().rev() {
            *slot = (i % q) as u32;
            i /= q;
        }
        CosetId {
            branching: self.field.branching,
            top_level: self.outer_level,
            digits,
        }
    }

    pub fn index_of(&self, id: &CosetId) -> Result<usize> {
        self.check_member(id)?;
        let q = self.field.branching as usize;
        Ok(id
            .digits
            .iter()
            .fold(0usize, |acc, d| acc * q + *d as usize))
    }

    pub fn coset_distance(&self, a: &CosetId, b: &CosetId) -> Result<Distance> {
        self.check_member(a)?;
        self.check_member(b)?;
        Ok(a.distance(b).expect("members of one grid are comparable"))
    }

    fn check_member(&self, id: &CosetId) -> Result<()> {
        if id.branching != self.field.branching
            || id.top_level != self.outer_level
            || id.digits.len() != self.digit_count()
        {
            return Err(Error::Structural(format!(
                "coset {id} does not belong to a grid with Q = {}, M = {}, nu = {}",
                self.field.branching, self.outer_level, self.nu
            )));
        }
        Ok(())
    }
}

fn checked_count(branching: u64, digits: u32) -> Result<usize> {
    branching
        .checked_pow(digits)
        .map(|c| c as usize)
        .filter(|c| *c <= MAX_COSETS)
        .ok_or(Error::CapExceeded {
            size: usize::MAX,
            cap: MAX_COSETS,
        })
}

/// Digits `a_j`, `j = -M, ..., nu - 1`, of the coset `sum_j a_j beta^j + B_{-nu}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CosetId {
    branching: u64,
    top_level: i32,
    digits: Vec<u32>,
}

impl CosetId {
    pub fn new(branching: u64, top_level: i32, digits: Vec<u32>) -> Result<Self> {
        if digits.iter().any(|d| *d as u64 >= branching) {
            return Err(Error::Structural(format!(
                "digit out of range for Q = {branching}"
            )));
        }
        Ok(Self {
            branching,
            top_level,
            digits,
        })
    }

    /// Digits, most significant (`j = -M`) first.
    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Ultrametric distance read off the first differing digit.
    pub fn distance(&self, other: &CosetId) -> Result<Distance> {
        if self.branching != other.branching
            || self.top_level != other.top_level
            || self.digits.len() != other.digits.len()
        {
            return Err(Error::Structural("cosets from different grids".into()));
        }
        Ok(
            match self
                .digits
                .iter()
                .zip(&other.digits)
                .position(|(a, b)| a != b)
            {
                None => Distance::Same,
                // position p corresponds to j = p - M, at distance Q^{-j}
                Some(p) => Distance::Level(self.top_level - p as i32),
            },
        )
    }
}

impl fmt::Display for CosetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.digits.is_empty() {
            return f.write_str("-");
        }
        let sep = if self.branching > 10 { "." } else { "" };
        for (k, d) in self.digits.iter().enumerate() {
            if k > 0 {
                f.write_str(sep)?;
            }
            if self.branching > 10 {
                write!(f, "{d}")?;
            } else {
                write!(f, "{}", char::from_digit(*d, 10).unwrap())?;
            }
        }
        Ok(())
    }
}
