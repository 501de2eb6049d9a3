//! Exact assembly of the Vladimirov-Taibleson operator, its regional part,
//! the nonlocal Neumann operator, the weak form and the resolvent kernel.
//!
//! On locally constant data every integral below is a finite coset sum plus a
//! closed-form tail: pairs inside one coset contribute nothing, and a point of
//! `B_M` sees every `y` with `|y| > Q^M` at distance `|y|`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lcfun::{gagliardo_pair_sum, IntegrationRegion, LCFunction, WeightFunction};
use crate::localfield::{FieldModel, Grid};

/// `c_{n,alpha} = (q^alpha - 1) / (1 - q^{-alpha-n})`, written in effective parameters.
pub fn coefficient_c(field: &FieldModel) -> f64 {
    (field.pow(field.gamma()) - 1.0) / (1.0 - field.pow(-field.gamma() - 1.0))
}

/// Smallest eigenvalue of the operator restricted to `B_N`.
pub fn lambda_n(field: &FieldModel, level: i32) -> f64 {
    let q = field.branching() as f64;
    (q - 1.0) / (q * (1.0 - field.pow(-field.gamma() - 1.0)))
        * field.pow(-field.gamma() * level as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// Integration over the whole field; rows cover every coset of `B_M`.
    FullVT,
    /// Integration over `Omega` only; rows cover the cosets of `Omega`.
    Regional,
}

/// Affine map `u -> interaction * u + tail_coeff * outer`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: Grid,
    kind: OperatorKind,
    interaction: DMatrix<f64>,
    tail_coeff: DVector<f64>,
}

impl OperatorMatrix {
    pub fn assemble_vt(grid: &Grid) -> Self {
        let n = grid.coset_count();
        let c = coefficient_c(grid.field());
        let tail = grid.field().tail_kernel_integral(grid.outer_level());
        let mut m = assemble_block(grid, n, grid.outer_level());
        for i in 0..n {
            m[(i, i)] += c * tail;
        }
        Self {
            grid: *grid,
            kind: OperatorKind::FullVT,
            interaction: m,
            tail_coeff: DVector::from_element(n, -c * tail),
        }
    }

    pub fn assemble_regional(grid: &Grid) -> Self {
        let n = grid.omega_count();
        Self {
            grid: *grid,
            kind: OperatorKind::Regional,
            interaction: assemble_block(grid, n, grid.domain_level()),
            tail_coeff: DVector::zeros(n),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn interaction(&self) -> &DMatrix<f64> {
        &self.interaction
    }

    pub fn tail_coeff(&self) -> &DVector<f64> {
        &self.tail_coeff
    }

    pub fn dim(&self) -> usize {
        self.interaction.nrows()
    }

    /// Adds `delta` to one interaction entry. Used as a negative control by
    /// the verification suite.
    pub fn perturb_entry(&mut self, row: usize, col: usize, delta: f64) {
        self.interaction[(row, col)] += delta;
    }

    /// Values of the operator on the row cosets.
    pub fn apply(&self, u: &LCFunction) -> Result<Vec<f64>> {
        if !self.grid.same_shape(u.grid()) {
            return Err(Error::GridMismatch);
        }
        let x = DVector::from_column_slice(&u.values()[..self.dim()]);
        let y = &self.interaction * x + &self.tail_coeff * u.outer();
        Ok(y.iter().copied().collect())
    }

    /// Applies a regional operator to values given on `Omega` only.
    pub fn apply_omega(&self, values: &[f64]) -> Result<Vec<f64>> {
        if values.len() != self.dim() || self.kind != OperatorKind::Regional {
            return Err(Error::Structural(
                "apply_omega needs a regional operator and one value per Omega coset".into(),
            ));
        }
        let y = &self.interaction * DVector::from_column_slice(values);
        Ok(y.iter().copied().collect())
    }
}

/// Symmetric interaction block over the first `n` cosets, whose diagonal
/// completes each row over every distance level up to `top`.
fn assemble_block(grid: &Grid, n: usize, top: i32) -> DMatrix<f64> {
    let f = grid.field();
    let c = coefficient_c(f);
    let vol = grid.coset_volume();
    let nu = grid.nu();
    let weights: Vec<f64> = ((-nu + 1)..=top)
        .map(|d| c * vol * f.kernel_at_level(d))
        .collect();
    let diagonal: f64 = ((-nu + 1)..=top)
        .map(|d| grid.shell_count(d) as f64 * weights[(d + nu - 1) as usize])
        .sum();
    // The cosets at distance Q^{t - nu} from k are those sharing its block of
    // Q^t indices but not its block of Q^{t-1}: two contiguous runs per level.
    let q = grid.field().branching() as usize;
    let mut m = DMatrix::zeros(n, n);
    for k in 0..n {
        let col = &mut m.as_mut_slice()[k * n..(k + 1) * n];
        col[k] = diagonal;
        let (mut inner_lo, mut inner_len) = (k, 1usize);
        for w in &weights {
            let len = inner_len * q;
            let lo = k / len * len;
            let hi = (lo + len).min(n);
            col[lo..inner_lo].fill(-w);
            col[(inner_lo + inner_len).min(n)..hi].fill(-w);
            if len >= n {
                break;
            }
            (inner_lo, inner_len) = (lo, len);
        }
    }
    m
}

/// `N_alpha u` on the sphere `|x| = Q^s`, one value per coset of the sphere
/// when `s <= M`, a single value beyond `B_M`.
pub fn neumann_trace(u: &LCFunction, s: i32) -> Result<Vec<f64>> {
    let g = u.grid();
    if s <= g.domain_level() {
        return Err(Error::ParameterDomain(format!(
            "Neumann trace needs a sphere outside Omega, got s = {s} <= N = {}",
            g.domain_level()
        )));
    }
    let f = g.field();
    let c = coefficient_c(f);
    let vol_omega = f.ball_volume(g.domain_level());
    let mass = u.integrate(IntegrationRegion::Omega)?;
    let k = f.kernel_at_level(s);
    let at = |value: f64| c * (vol_omega * value - mass) * k;
    Ok(match g.shell_range(s) {
        Some(r) => u.values()[r].iter().map(|v| at(*v)).collect(),
        None => vec![at(u.outer())],
    })
}

/// `int_{Omega^c} v N_alpha u`, with the spheres beyond `B_M` summed in closed form.
pub fn neumann_pairing(u: &LCFunction, v: &LCFunction) -> Result<f64> {
    u.check_grid(v)?;
    let g = u.grid();
    let f = g.field();
    let vol = g.coset_volume();
    let mut total = 0.0;
    for s in (g.domain_level() + 1)..=g.outer_level() {
        let r = g.shell_range(s).expect("sphere inside B_M");
        let trace = neumann_trace(u, s)?;
        total += trace
            .iter()
            .zip(&v.values()[r])
            .map(|(n, w)| n * w)
            .sum::<f64>()
            * vol;
    }
    let c = coefficient_c(f);
    let mass = u.integrate(IntegrationRegion::Omega)?;
    let far = c
        * (f.ball_volume(g.domain_level()) * u.outer() - mass)
        * v.outer()
        * f.tail_kernel_integral(g.outer_level());
    Ok(total + far)
}

/// `int_{Omega^c} g N_alpha u` for data `g` supported on `B_M \ B_N`.
pub fn neumann_weighted(u: &LCFunction, g: &WeightFunction) -> Result<f64> {
    let grid = u.grid();
    if !grid.same_shape(g.grid()) {
        return Err(Error::GridMismatch);
    }
    let mut total = 0.0;
    for s in (grid.domain_level() + 1)..=grid.outer_level() {
        let r = grid.shell_range(s).expect("sphere inside B_M");
        let offset = grid.omega_count();
        let trace = neumann_trace(u, s)?;
        total += trace
            .iter()
            .zip(&g.values()[r.start - offset..r.end - offset])
            .map(|(n, w)| n * w)
            .sum::<f64>();
    }
    Ok(total * grid.coset_volume())
}

/// `c int_{|y| > Q^N} u(y) |y|^{-1-gamma} dy`.
pub fn exterior_moment(u: &LCFunction) -> f64 {
    let g = u.grid();
    let f = g.field();
    let vol = g.coset_volume();
    let mut total = 0.0;
    for s in (g.domain_level() + 1)..=g.outer_level() {
        let r = g.shell_range(s).expect("sphere inside B_M");
        total += u.values()[r].iter().sum::<f64>() * vol * f.kernel_at_level(s);
    }
    coefficient_c(f) * (total + u.outer() * f.tail_kernel_integral(g.outer_level()))
}

/// `(c/2) iint_{(K x K) \ (Omega^c x Omega^c)} (u(x)-u(y))(v(x)-v(y)) / |x-y|^{1+gamma}`.
pub fn bilinear_form(u: &LCFunction, v: &LCFunction) -> Result<f64> {
    Ok(0.5 * coefficient_c(u.grid().field()) * gagliardo_pair_sum(u, v)?)
}

/// The energy whose critical points are weak solutions.
pub fn energy_functional(u: &LCFunction, f: &LCFunction, g: &WeightFunction) -> Result<f64> {
    u.check_grid(f)?;
    let vol = u.grid().coset_volume();
    let source: f64 = u
        .omega_values()
        .iter()
        .zip(f.omega_values())
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * vol;
    Ok(
        0.25 * coefficient_c(u.grid().field()) * gagliardo_pair_sum(u, u)?
            - source
            - g.pairing(u)?,
    )
}

/// Radial resolvent kernel `r_mu` at `|x| = Q^s`, `s <= N`, as a finite sum
/// over the character shells `Q^{-N+1} <= |eta| <= Q^{-s+1}`.
pub fn resolvent_radial(field: &FieldModel, level: i32, mu: f64, s: i32) -> Result<f64> {
    if s > level {
        return Err(Error::ParameterDomain(format!(
            "resolvent kernel is defined on B_N: s = {s} > N = {level}"
        )));
    }
    let lambda = lambda_n(field, level);
    let mut total = 0.0;
    for m in (-level + 1)..=(-s + 1) {
        total +=
            field.shell_character_integral(m, s) / resolvent_denominator(field, lambda, mu, m)?;
    }
    Ok(total)
}

fn resolvent_denominator(field: &FieldModel, lambda: f64, mu: f64, m: i32) -> Result<f64> {
    let symbol = field.pow(m as f64 * field.gamma());
    // at mu = lambda_N the shift cancels exactly
    let den = if mu == lambda {
        symbol
    } else {
        symbol - lambda + mu
    };
    if den > 0.0 && den.is_finite() {
        Ok(den)
    } else {
        Err(Error::SingularResolvent {
            mu,
            shell: m,
            denominator: den,
        })
    }
}

/// Coset-averaged resolvent kernel on `Omega`: `R[C, C'] = int_{C'} r_mu(x - xi) d xi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventMatrix {
    grid: Grid,
    mu: f64,
    entries: DMatrix<f64>,
}

impl ResolventMatrix {
    pub fn assemble(grid: &Grid, mu: f64) -> Result<Self> {
        let f = grid.field();
        let level = grid.domain_level();
        let nu = grid.nu();
        let vol = grid.coset_volume();
        let lambda = lambda_n(f, level);
        let off: Vec<f64> = ((-nu + 1)..=level)
            .map(|d| resolvent_radial(f, level, mu, d).map(|r| vol * r))
            .collect::<Result<_>>()?;
        let mut diagonal = 0.0;
        for m in (-level + 1)..=nu {
            diagonal += vol * f.shell_volume(m) / resolvent_denominator(f, lambda, mu, m)?;
        }
        let n = grid.omega_count();
        let entries = DMatrix::from_fn(n, n, |i, k| match grid.distance_level(i, k) {
            None => diagonal,
            Some(d) => off[(d + nu - 1) as usize],
        });
        Ok(Self {
            grid: *grid,
            mu,
            entries,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `int_{B_N} r_mu(x - xi) w(xi) d xi` for `w` given on the cosets of `Omega`.
    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        (&self.entries * DVector::from_column_slice(values))
            .iter()
            .copied()
            .collect()
    }
}

pub fn resolvent_matrix(grid: &Grid, mu: f64) -> Result<ResolventMatrix> {
    ResolventMatrix::assemble(grid, mu)
}
