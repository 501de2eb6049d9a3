//! The JSON problem specification.

use nlneumann::verify::random_zero_mean;
use nlneumann::{FieldModel, Gauge, Grid, NeumannProblem, Tolerances, WeightFunction};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub field: FieldSpec,
    pub grid: GridSpec,
    pub f: SourceSpec,
    pub g: FluxSpec,
    pub solver: SolverKind,
    pub gauge: GaugeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub q: u32,
    pub n: u32,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "N")]
    pub domain_level: i32,
    #[serde(rename = "M")]
    pub outer_level: i32,
    pub nu: i32,
}

/// Source term on the cosets of `B_N`, in tree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Values { values: Vec<f64> },
    ZeroMeanRandom { seed: u64 },
}

/// Neumann data on the cosets of `B_M \ B_N`, in tree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxSpec {
    // struct form so that stray keys are rejected
    Zero {},
    Values { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Galerkin,
    Fredholm,
    FredholmInhomogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeSpec {
    ZeroMean {},
    FixOuter { h: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesSpec {
    pub compat: f64,
    pub residual: f64,
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Validation(format!("invalid problem spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn field_model(&self) -> Result<FieldModel, CliError> {
        Ok(FieldModel::effective_params(
            self.field.q,
            self.field.n,
            self.field.alpha,
        )?)
    }

    pub fn build_grid(&self) -> Result<Grid, CliError> {
        let g = self.grid;
        Ok(Grid::new(
            self.field_model()?,
            g.domain_level,
            g.outer_level,
            g.nu,
        )?)
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tolerances
            .map(|t| Tolerances {
                compat: t.compat,
                residual: t.residual,
            })
            .unwrap_or_default()
    }

    /// Validates array lengths and assembles the problem. Compatibility is
    /// not checked here; the solvers report it.
    pub fn build(&self) -> Result<NeumannProblem, CliError> {
        let grid = self.build_grid()?;
        let omega = grid.omega_count();
        let exterior = grid.coset_count() - omega;
        let f = match &self.f {
            SourceSpec::Values { values } => {
                expect_len("f.values", values.len(), omega)?;
                values.clone()
            }
            SourceSpec::ZeroMeanRandom { seed } => random_zero_mean(&grid, *seed),
        };
        let g = match &self.g {
            FluxSpec::Zero {} => WeightFunction::zero(grid),
            FluxSpec::Values { values } => {
                expect_len("g.values", values.len(), exterior)?;
                WeightFunction::new(grid, values.clone())?
            }
        };
        let gauge = match self.gauge {
            GaugeSpec::ZeroMean {} => Gauge::ZeroMean,
            GaugeSpec::FixOuter { h } => Gauge::FixOuter(h),
        };
        Ok(NeumannProblem::new(grid, &f, g, gauge, self.tolerances())?)
    }
}

fn expect_len(what: &str, got: usize, want: usize) -> Result<(), CliError> {
    if got == want {
        Ok(())
    } else {
        Err(CliError::Validation(format!(
            "{what} has {got} entries, the grid has {want} cosets there"
        )))
    }
}
