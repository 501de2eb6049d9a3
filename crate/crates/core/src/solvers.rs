//! Weak (Galerkin) and strong (resolvent) solvers for the nonlocal Neumann
//! problem `D u = f` on `Omega`, `N u = g` on `Omega^c`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lcfun::{IntegrationRegion, LCFunction, WeightFunction};
use crate::localfield::Grid;
use crate::operators::{coefficient_c, lambda_n, neumann_trace, resolvent_matrix, OperatorMatrix};

/// Default number of spheres beyond `B_M` on which Neumann residuals are checked.
pub const EXTRA_SHELLS: i32 = 3;

/// Largest `Omega` on which [`spectrum`] runs a dense eigensolve.
pub const DEFAULT_EIGEN_CAP: usize = 4096;

/// How the additive constant of the solution family is fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gauge {
    /// Mean over `Omega` is zero.
    ZeroMean,
    /// The constant taken on `K \ B_M` (equal to the mean over `Omega`).
    FixOuter(f64),
}

impl Gauge {
    pub fn constant(&self) -> f64 {
        match self {
            Gauge::ZeroMean => 0.0,
            Gauge::FixOuter(h) => *h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub compat: f64,
    pub residual: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            compat: 1e-10,
            residual: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeumannProblem {
    grid: Grid,
    f: LCFunction,
    g: WeightFunction,
    gauge: Gauge,
    tolerances: Tolerances,
}

impl NeumannProblem {
    /// `f_omega` in tree order over the cosets of `Omega`.
    pub fn new(
        grid: Grid,
        f_omega: &[f64],
        g: WeightFunction,
        gauge: Gauge,
        tolerances: Tolerances,
    ) -> Result<Self> {
        if !g.grid().same_shape(&grid) {
            return Err(Error::GridMismatch);
        }
        if f_omega.iter().any(|v| !v.is_finite()) {
            return Err(Error::ParameterDomain("f must be finite".into()));
        }
        if !(tolerances.compat > 0.0 && tolerances.residual > 0.0) {
            return Err(Error::ParameterDomain("tolerances must be positive".into()));
        }
        if let Gauge::FixOuter(h) = gauge {
            if !h.is_finite() {
                return Err(Error::ParameterDomain(
                    "gauge constant must be finite".into(),
                ));
            }
        }
        Ok(Self {
            grid,
            f: LCFunction::from_omega(grid, f_omega)?,
            g,
            gauge,
            tolerances,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Right-hand side on `Omega`, zero elsewhere.
    pub fn f(&self) -> &LCFunction {
        &self.f
    }

    pub fn g(&self) -> &WeightFunction {
        &self.g
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
    }

    /// The same data with a different gauge.
    pub fn with_gauge(&self, gauge: Gauge) -> Self {
        Self {
            gauge,
            ..self.clone()
        }
    }

    /// Magnitude against which residuals are compared.
    pub fn data_scale(&self) -> f64 {
        self.f.omega_sup_norm().max(self.g.sup_norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Compatibility {
    pub ok: bool,
    /// `int_Omega f + int_{Omega^c} g`.
    pub defect: f64,
}

pub fn check_compatibility(problem: &NeumannProblem) -> Compatibility {
    let f_mass = problem
        .f
        .integrate(IntegrationRegion::Omega)
        .expect("f vanishes off Omega");
    let defect = f_mass + problem.g.integral();
    let f_l1 = problem
        .f
        .omega_values()
        .iter()
        .map(|v| v.abs())
        .sum::<f64>()
        * problem.grid.coset_volume();
    let bound = problem.tolerances.compat * (f_l1 + problem.g.l1_norm() + f64::MIN_POSITIVE);
    Compatibility {
        ok: defect.abs() <= bound,
        defect,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Galerkin,
    Fredholm,
}

/// Residuals recomputed from the returned function, not taken from the solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `max_Omega |D u - f|`.
    pub pde_max: f64,
    /// `max |N u - g|` over the spheres `N < s <= M + EXTRA_SHELLS`.
    pub neumann_max: f64,
    /// Compatibility defect of the data.
    pub compat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub u: LCFunction,
    /// Mean of `u` over `Omega`; with `g = 0` it is also the value on `Omega^c`.
    pub h: f64,
    pub method: Method,
    pub residuals: Residuals,
}

/// Direct strong residuals of `u` against the problem data.
pub fn strong_residuals(
    u: &LCFunction,
    problem: &NeumannProblem,
    extra_shells: i32,
) -> Result<Residuals> {
    let grid = problem.grid();
    let du = OperatorMatrix::assemble_vt(grid).apply(u)?;
    let pde_max = du[..grid.omega_count()]
        .iter()
        .zip(problem.f.omega_values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut neumann_max: f64 = 0.0;
    for s in (grid.domain_level() + 1)..=(grid.outer_level() + extra_shells) {
        let trace = neumann_trace(u, s)?;
        match grid.shell_range(s) {
            Some(r) => {
                for (t, k) in trace.iter().zip(r) {
                    neumann_max = neumann_max.max((t - problem.g.value_at(k)).abs());
                }
            }
            None => neumann_max = neumann_max.max(trace[0].abs()),
        }
    }
    Ok(Residuals {
        pde_max,
        neumann_max,
        compat: check_compatibility(problem).defect,
    })
}

fn require_compatible(problem: &NeumannProblem) -> Result<()> {
    let compat = check_compatibility(problem);
    if compat.ok {
        Ok(())
    } else {
        Err(Error::Infeasible {
            defect: compat.defect,
        })
    }
}

/// Symmetric Galerkin matrix of the weak form on the cosets of `B_M` plus
/// the constant beyond `B_M` (last basis function).
pub fn galerkin_matrix(grid: &Grid) -> DMatrix<f64> {
    let n = grid.coset_count();
    let omega = grid.omega_count();
    let f = grid.field();
    let c = coefficient_c(f);
    let vol = grid.coset_volume();
    let nu = grid.nu();
    let weights: Vec<f64> = ((-nu + 1)..=grid.outer_level())
        .map(|d| c * vol * vol * f.kernel_at_level(d))
        .collect();
    let far = c * vol * f.tail_kernel_integral(grid.outer_level());
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for k in 0..n {
            if i == k || (i >= omega && k >= omega) {
                continue;
            }
            let d = grid.distance_level(i, k).expect("distinct cosets");
            a[(i, k)] = -weights[(d + nu - 1) as usize];
        }
    }
    for i in 0..omega {
        a[(i, n)] = -far;
        a[(n, i)] = -far;
    }
    for i in 0..=n {
        let off: f64 = a.row(i).iter().sum();
        a[(i, i)] = -off;
    }
    a
}

/// Galerkin solution over locally constant functions of level `nu` on `B_M`
/// with a constant tail. The one-dimensional kernel of the weak form is
/// removed by bordering with the gauge constraint.
pub fn solve_weak(problem: &NeumannProblem) -> Result<Solution> {
    require_compatible(problem)?;
    let grid = problem.grid();
    let n = grid.coset_count();
    let omega = grid.omega_count();
    let vol = grid.coset_volume();
    let a = galerkin_matrix(grid);

    let scale = a.amax().max(f64::MIN_POSITIVE);
    let kernel_defect = (&a * DVector::from_element(n + 1, 1.0)).amax();
    if kernel_defect > 1e-10 * scale * (n + 1) as f64 {
        return Err(Error::Internal(format!(
            "Galerkin matrix does not annihilate constants (defect {kernel_defect:e})"
        )));
    }

    let mut bordered = DMatrix::zeros(n + 2, n + 2);
    bordered.view_mut((0, 0), (n + 1, n + 1)).copy_from(&a);
    let mut rhs = DVector::zeros(n + 2);
    for i in 0..n {
        rhs[i] = vol
            * if i < omega {
                problem.f.values()[i]
            } else {
                problem.g.value_at(i)
            };
    }
    match problem.gauge {
        Gauge::ZeroMean => {
            for i in 0..omega {
                bordered[(i, n + 1)] = scale;
                bordered[(n + 1, i)] = scale;
            }
        }
        Gauge::FixOuter(h) => {
            bordered[(n, n + 1)] = scale;
            bordered[(n + 1, n)] = scale;
            rhs[n + 1] = scale * h;
        }
    }

    let lu = bordered.lu();
    let pivots = lu.u().diagonal().map(f64::abs);
    if pivots.min() <= 1e-12 * pivots.max() {
        return Err(Error::Internal(
            "weak form is singular beyond the constants".into(),
        ));
    }
    let x = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Internal("bordered Galerkin system is singular".into()))?;
    let u = LCFunction::new(*grid, x.rows(0, n).iter().copied().collect(), x[n])?;
    let residuals = strong_residuals(&u, problem, EXTRA_SHELLS)?;
    Ok(Solution {
        h: u.mean_over_domain(),
        u,
        method: Method::Galerkin,
        residuals,
    })
}

/// Strong solution of the homogeneous problem (`g = 0`) through the
/// resolvent kernel at `mu = lambda_N`.
pub fn solve_strong(problem: &NeumannProblem) -> Result<Solution> {
    if !problem.g.is_zero() {
        return Err(Error::ParameterDomain(
            "solve_strong needs g = 0; use solve_strong_inhomogeneous".into(),
        ));
    }
    solve_strong_inhomogeneous(problem)
}

/// Strong solution with Neumann data `g` on `B_M \ B_N`.
///
/// Outside `Omega` the Neumann condition is pointwise algebraic:
/// `u(x) = h + |x|^{1+gamma} g(x) / (c Q^N)`. Inside, the constant source
/// `Q^{-N} int g` cancels the mean of `f`, leaving `u = h + R f`.
pub fn solve_strong_inhomogeneous(problem: &NeumannProblem) -> Result<Solution> {
    require_compatible(problem)?;
    let grid = problem.grid();
    let f = grid.field();
    let level = grid.domain_level();
    let h = problem.gauge.constant();
    let resolvent = resolvent_matrix(grid, lambda_n(f, level))?;
    let interior = resolvent.apply(problem.f.omega_values());

    let mut values = vec![h; grid.coset_count()];
    for (v, r) in values.iter_mut().zip(&interior) {
        *v += r;
    }
    let scale = 1.0 / (coefficient_c(f) * f.ball_volume(level));
    for s in (level + 1)..=grid.outer_level() {
        let weight = scale / f.kernel_at_level(s);
        for k in grid.shell_range(s).expect("sphere inside B_M") {
            values[k] += weight * problem.g.value_at(k);
        }
    }
    let u = LCFunction::new(*grid, values, h)?;
    let residuals = strong_residuals(&u, problem, EXTRA_SHELLS)?;
    Ok(Solution {
        u,
        h,
        method: Method::Fredholm,
        residuals,
    })
}

/// Sorted eigenvalues of `D_N = regional + lambda_N` on `Omega`, grouped
/// into clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `(value, multiplicity)` in increasing order.
    pub clusters: Vec<(f64, usize)>,
    /// Unit eigenvector of the smallest eigenvalue.
    pub ground_state: Vec<f64>,
}

pub fn spectrum(grid: &Grid, cap: usize) -> Result<Spectrum> {
    let k = grid.omega_count();
    if k > cap {
        return Err(Error::CapExceeded { size: k, cap });
    }
    let lam = lambda_n(grid.field(), grid.domain_level());
    let mut d = OperatorMatrix::assemble_regional(grid)
        .interaction()
        .clone();
    for i in 0..k {
        d[(i, i)] += lam;
    }
    let eig = SymmetricEigen::new(d);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|a, b| eig.eigenvalues[*a].total_cmp(&eig.eigenvalues[*b]));
    let eigenvalues: Vec<f64> = order.iter().map(|i| eig.eigenvalues[*i]).collect();
    let ground_state = eig.eigenvectors.column(order[0]).iter().copied().collect();
    Ok(Spectrum {
        clusters: cluster(&eigenvalues, 1e-9),
        eigenvalues,
        ground_state,
    })
}

fn cluster(sorted: &[f64], rel_tol: f64) -> Vec<(f64, usize)> {
    let scale = sorted.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((first, count, sum)) if (v - *first).abs() <= rel_tol * scale => {
                *count += 1;
                *sum += v;
            }
            _ => out.push((*v, 1, *v)),
        }
    }
    out.into_iter().map(|(_, c, s)| (s / c as f64, c)).collect()
}

/// `{lambda_N} U {Q^{gamma m} with multiplicity Q^{N+m-1}(Q-1), -N < m <= nu}`.
pub fn analytic_spectrum(grid: &Grid) -> Vec<(f64, usize)> {
    let f = grid.field();
    let q = f.branching() as usize;
    let level = grid.domain_level();
    let mut out = vec![(lambda_n(f, level), 1)];
    for m in (-level + 1)..=grid.nu() {
        out.push((
            f.pow(f.gamma() * m as f64),
            q.pow((level + m - 1) as u32) * (q - 1),
        ));
    }
    out
}
