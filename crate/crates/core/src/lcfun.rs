//! Locally constant functions on the coset tree with a constant tail, and the
//! Hilbert-space structure built on top of them.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::localfield::Grid;

/// Above this many cosets the difference double sums are grouped by
/// distance level instead of iterating over pairs.
pub const PAIR_ITERATION_LIMIT: usize = 1024;

/// A function constant on every coset of radius `Q^{-nu}` inside `B_M`, and
/// equal to `outer` on `K \ B_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LCFunction {
    grid: Grid,
    values: Vec<f64>,
    outer: f64,
}

/// A function supported on `B_M \ B_N`, used for the weight `rho` and the
/// Neumann data `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    grid: Grid,
    values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationRegion {
    /// The domain ball `B_N`.
    Omega,
    /// `B_M \ B_N`.
    OuterDetail,
    /// `K \ B_M`.
    Tail,
    All,
}

impl LCFunction {
    pub fn new(grid: Grid, values: Vec<f64>, outer: f64) -> Result<Self> {
        if values.len() != grid.coset_count() {
            return Err(Error::Structural(format!(
                "expected {} coset values, got {}",
                grid.coset_count(),
                values.len()
            )));
        }
        Ok(Self {
            grid,
            values,
            outer,
        })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.coset_count()],
            outer: c,
        }
    }

    pub fn zero(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// `values` on `B_N`, zero on `B_M \ B_N` and beyond.
    pub fn from_omega(grid: Grid, omega_values: &[f64]) -> Result<Self> {
        if omega_values.len() != grid.omega_count() {
            return Err(Error::Structural(format!(
                "expected {} values on Omega, got {}",
                grid.omega_count(),
                omega_values.len()
            )));
        }
        let mut values = vec![0.0; grid.coset_count()];
        values[..grid.omega_count()].copy_from_slice(omega_values);
        Ok(Self {
            grid,
            values,
            outer: 0.0,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn omega_values(&self) -> &[f64] {
        &self.values[..self.grid.omega_count()]
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn set_outer(&mut self, outer: f64) {
        self.outer = outer;
    }

    pub fn value_at(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|x| a * x)
    }

    pub fn shifted(&self, c: f64) -> Self {
        self.map(|x| x + c)
    }

    pub fn map(&self, op: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|x| op(*x)).collect(),
            outer: op(self.outer),
        }
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
            outer: a * self.outer + b * other.outer,
        })
    }

    pub fn check_grid(&self, other: &Self) -> Result<()> {
        if self.grid.same_shape(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(self.outer.abs(), |m, x| m.max(x.abs()))
    }

    pub fn omega_sup_norm(&self) -> f64 {
        self.omega_values().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn integrate(&self, region: IntegrationRegion) -> Result<f64> {
        let vol = self.grid.coset_volume();
        let omega = self.grid.omega_count();
        let tail = || {
            if self.outer == 0.0 {
                Ok(0.0)
            } else {
                Err(Error::DivergentIntegral(format!(
                    "constant tail {} over K \\ B_M",
                    self.outer
                )))
            }
        };
        Ok(match region {
            IntegrationRegion::Omega => sum(&self.values[..omega]) * vol,
            IntegrationRegion::OuterDetail => sum(&self.values[omega..]) * vol,
            IntegrationRegion::Tail => tail()?,
            IntegrationRegion::All => {
                tail()?;
                sum(&self.values) * vol
            }
        })
    }

    pub fn mean_over_domain(&self) -> f64 {
        sum(self.omega_values()) / self.grid.omega_count() as f64
    }

    /// Averages over cosets of radius `Q^{-coarse_nu}`; the tail is untouched.
    pub fn project_average(&self, coarse_nu: i32) -> Result<Self> {
        let g = &self.grid;
        if coarse_nu < -g.domain_level() || coarse_nu > g.nu() {
            return domain(format!(
                "coarse level {coarse_nu} outside [{}, {}]",
                -g.domain_level(),
                g.nu()
            ));
        }
        let block = (g.field().branching() as usize).pow((g.nu() - coarse_nu) as u32);
        let mut values = Vec::with_capacity(self.values.len());
        for chunk in self.values.chunks(block) {
            let mean = sum(chunk) / block as f64;
            values.extend(std::iter::repeat_n(mean, block));
        }
        Ok(Self {
            grid: self.grid,
            values,
            outer: self.outer,
        })
    }

    /// The same function on a grid with finer cosets and a larger outer ball.
    pub fn refine(&self, finer_nu: i32, larger_outer: i32) -> Result<Self> {
        let g = &self.grid;
        if finer_nu < g.nu() || larger_outer < g.outer_level() {
            return domain(format!(
                "refinement ({finer_nu}, {larger_outer}) must not coarsen ({}, {})",
                g.nu(),
                g.outer_level()
            ));
        }
        let fine = Grid::new(*g.field(), g.domain_level(), larger_outer, finer_nu)?;
        let children = (g.field().branching() as usize).pow((finer_nu - g.nu()) as u32);
        let mut values = Vec::with_capacity(fine.coset_count());
        for v in &self.values {
            values.extend(std::iter::repeat_n(*v, children));
        }
        values.resize(fine.coset_count(), self.outer);
        Ok(Self {
            grid: fine,
            values,
            outer: self.outer,
        })
    }
}

impl WeightFunction {
    /// `values` in tree order over the cosets of `B_M \ B_N`.
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.coset_count() - grid.omega_count();
        if values.len() != expected {
            return Err(Error::Structural(format!(
                "expected {expected} values on B_M \\ B_N, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return domain("weight values must be finite");
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.coset_count() - grid.omega_count()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on coset `index` of the full grid (zero on Omega).
    pub fn value_at(&self, index: usize) -> f64 {
        index
            .checked_sub(self.grid.omega_count())
            .map_or(0.0, |k| self.values[k])
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn integral(&self) -> f64 {
        sum(&self.values) * self.grid.coset_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.grid.coset_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `int_{Omega^c} w u`.
    pub fn pairing(&self, u: &LCFunction) -> Result<f64> {
        if !self.grid.same_shape(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let dot: f64 = self
            .values
            .iter()
            .zip(&u.values()[self.grid.omega_count()..])
            .map(|(w, x)| w * x)
            .sum();
        Ok(dot * self.grid.coset_volume())
    }
}

pub(crate) fn sum(xs: &[f64]) -> f64 {
    xs.iter().sum()
}

/// `int_Omega int_Omega (u(x)-u(y))(v(x)-v(y)) |x-y|^{-1-gamma} dx dy`.
pub fn omega_pair_sum(u: &LCFunction, v: &LCFunction) -> Result<f64> {
    u.check_grid(v)?;
    Ok(if u.grid().coset_count() > PAIR_ITERATION_LIMIT {
        omega_pair_sum_grouped(u, v)
    } else {
        omega_pair_sum_direct(u, v)
    })
}

/// `int_Omega int_{K \ Omega} (u(x)-u(y))(v(x)-v(y)) |x-y|^{-1-gamma} dy dx`.
pub fn exterior_pair_sum(u: &LCFunction, v: &LCFunction) -> Result<f64> {
    u.check_grid(v)?;
    Ok(if u.grid().coset_count() > PAIR_ITERATION_LIMIT {
        exterior_pair_sum_grouped(u, v)
    } else {
        exterior_pair_sum_direct(u, v)
    })
}

/// The difference double integral over `(K x K) \ (Omega^c x Omega^c)`.
pub fn gagliardo_pair_sum(u: &LCFunction, v: &LCFunction) -> Result<f64> {
    Ok(omega_pair_sum(u, v)? + 2.0 * exterior_pair_sum(u, v)?)
}

/// Kernel weight `vol^2 |x - y|^{-1-gamma}` per distance level, indexed by `d + nu - 1`.
fn level_weights(g: &Grid) -> Vec<f64> {
    let vol = g.coset_volume();
    ((-g.nu() + 1)..=g.outer_level())
        .map(|d| vol * vol * g.field().kernel_at_level(d))
        .collect()
}

pub(crate) fn omega_pair_sum_direct(u: &LCFunction, v: &LCFunction) -> f64 {
    let g = u.grid();
    let w = level_weights(g);
    let (uv, vv) = (u.omega_values(), v.omega_values());
    let mut total = 0.0;
    for i in 0..uv.len() {
        for k in 0..uv.len() {
            if let Some(d) = g.distance_level(i, k) {
                total += (uv[i] - uv[k]) * (vv[i] - vv[k]) * w[(d + g.nu() - 1) as usize];
            }
        }
    }
    total
}

/// Same sum, grouped per tree level: pairs at distance `Q^d` are exactly the
/// pairs of distinct children inside one block of `Q^{d+nu}` cosets.
pub(crate) fn omega_pair_sum_grouped(u: &LCFunction, v: &LCFunction) -> f64 {
    let g = u.grid();
    let q = g.field().branching() as usize;
    let w = level_weights(g);
    let mut su: Vec<f64> = u.omega_values().to_vec();
    let mut sv: Vec<f64> = v.omega_values().to_vec();
    let mut suv: Vec<f64> = su.iter().zip(&sv).map(|(a, b)| a * b).collect();
    let mut child_size = 1.0;
    let mut total = 0.0;
    let mut level = 0usize;
    while su.len() > 1 {
        let mut level_sum = 0.0;
        let parents = su.len() / q;
        let (mut nu_, mut nv_, mut nuv_) = (
            Vec::with_capacity(parents),
            Vec::with_capacity(parents),
            Vec::with_capacity(parents),
        );
        for p in 0..parents {
            let r = p * q..(p + 1) * q;
            let (a, b, c) = (&su[r.clone()], &sv[r.clone()], &suv[r]);
            let (ta, tb, tc) = (sum(a), sum(b), sum(c));
            let diag: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            level_sum += 2.0 * child_size * (q as f64 - 1.0) * tc - 2.0 * (ta * tb - diag);
            nu_.push(ta);
            nv_.push(tb);
            nuv_.push(tc);
        }
        total += level_sum * w[level];
        su = nu_;
        sv = nv_;
        suv = nuv_;
        child_size *= q as f64;
        level += 1;
    }
    total
}

fn tail_pair_term(u: &LCFunction, v: &LCFunction) -> f64 {
    let g = u.grid();
    let tail = g.field().tail_kernel_integral(g.outer_level());
    let s: f64 = u
        .omega_values()
        .iter()
        .zip(v.omega_values())
        .map(|(a, b)| (a - u.outer()) * (b - v.outer()))
        .sum();
    s * g.coset_volume() * tail
}

pub(crate) fn exterior_pair_sum_direct(u: &LCFunction, v: &LCFunction) -> f64 {
    let g = u.grid();
    let w = level_weights(g);
    let omega = g.omega_count();
    let mut total = 0.0;
    for i in 0..omega {
        for k in omega..g.coset_count() {
            let d = g.distance_level(i, k).expect("distinct cosets");
            total += (u.values[i] - u.values[k])
                * (v.values[i] - v.values[k])
                * w[(d + g.nu() - 1) as usize];
        }
    }
    total + tail_pair_term(u, v)
}

/// Every point of `Omega` sees the sphere `|y| = Q^s` at distance `Q^s`, so
/// each shell contributes through four coset sums.
pub(crate) fn exterior_pair_sum_grouped(u: &LCFunction, v: &LCFunction) -> f64 {
    let g = u.grid();
    let w = level_weights(g);
    let omega = g.omega_count() as f64;
    let (ou, ov) = (u.omega_values(), v.omega_values());
    let ou_sum = sum(ou);
    let ov_sum = sum(ov);
    let ouv: f64 = ou.iter().zip(ov).map(|(a, b)| a * b).sum();
    let mut total = 0.0;
    for s in (g.domain_level() + 1)..=g.outer_level() {
        let r = g.shell_range(s).expect("shell inside B_M");
        let n = r.len() as f64;
        let (su, sv) = (sum(&u.values[r.clone()]), sum(&v.values[r.clone()]));
        let suv: f64 = u.values[r.clone()]
            .iter()
            .zip(&v.values[r])
            .map(|(a, b)| a * b)
            .sum();
        total += (n * ouv - ou_sum * sv - ov_sum * su + omega * suv) * w[(s + g.nu() - 1) as usize];
    }
    total + tail_pair_term(u, v)
}

/// Inner product of `H^alpha_{Omega, rho}`.
pub fn sobolev_inner(u: &LCFunction, v: &LCFunction, rho: &WeightFunction) -> Result<f64> {
    u.check_grid(v)?;
    if !rho.grid().same_shape(u.grid()) {
        return Err(Error::GridMismatch);
    }
    let vol = u.grid().coset_volume();
    let l2: f64 = u
        .omega_values()
        .iter()
        .zip(v.omega_values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * vol;
    let omega = u.grid().omega_count();
    let weighted: f64 = rho
        .values()
        .iter()
        .zip(&u.values()[omega..])
        .zip(&v.values()[omega..])
        .map(|((r, a), b)| r.abs() * a * b)
        .sum::<f64>()
        * vol;
    Ok(l2 + weighted + gagliardo_pair_sum(u, v)?)
}

pub fn sobolev_norm(u: &LCFunction, rho: &WeightFunction) -> Result<f64> {
    Ok(sobolev_inner(u, u, rho)?.max(0.0).sqrt())
}
