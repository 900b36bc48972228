//! Walk and density file formats.
//!
//! Sites are 1-based in files and on the command line; everything past this
//! module is 0-based.

use std::fs;
use std::path::Path;

use oqw::model::{OqwModel, SiteState};
use oqw::tensor::{bloch_density, ComplexMatrix, C64};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// `[re, im]` rows of an `n×n` matrix.
pub type MatrixGrid = Vec<Vec<[f64; 2]>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSpecFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub k: usize,
    pub n: usize,
    pub transitions: Vec<TransitionSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionSpec {
    pub to: usize,
    pub from: usize,
    pub matrix: MatrixGrid,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpec {
    Bloch(BlochSpec),
    Blocks(Vec<BlockSpec>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlochSpec {
    pub site: usize,
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub site: usize,
    pub matrix: MatrixGrid,
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, origin: &str) -> Result<T, CliError> {
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Parse(format!("{origin}: {inner}"))
        } else {
            CliError::Parse(format!("{origin}: at `{path}`: {inner}"))
        }
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

pub fn grid_to_matrix(grid: &MatrixGrid, n: usize, what: &str) -> Result<ComplexMatrix, CliError> {
    if grid.len() != n || grid.iter().any(|row| row.len() != n) {
        let shape: Vec<usize> = grid.iter().map(Vec::len).collect();
        return Err(CliError::Parse(format!("{what}: expected a {n}×{n} grid, got rows of lengths {shape:?}")));
    }
    let rows: Vec<Vec<C64>> = grid.iter().map(|row| row.iter().map(|[re, im]| C64::new(*re, *im)).collect()).collect();
    ComplexMatrix::from_rows(&rows).map_err(|e| CliError::Parse(format!("{what}: {e}")))
}

pub fn matrix_to_grid(m: &ComplexMatrix) -> MatrixGrid {
    (0..m.dim()).map(|r| (0..m.dim()).map(|c| [m.get(r, c).re, m.get(r, c).im]).collect()).collect()
}

impl WalkSpecFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        parse_json(text, origin)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::parse(&read(path)?, &path.display().to_string())
    }

    pub fn from_model(model: &OqwModel) -> Self {
        WalkSpecFile {
            label: model.label().map(str::to_owned),
            k: model.sites(),
            n: model.degree(),
            transitions: model
                .effects()
                .map(|((to, from), b)| TransitionSpec { to: to + 1, from: from + 1, matrix: matrix_to_grid(b) })
                .collect(),
        }
    }

    /// Builds the model without checking normalization; see [`OqwModel::validate`].
    pub fn to_model(&self) -> Result<OqwModel, CliError> {
        if self.k == 0 || self.n == 0 {
            return Err(CliError::Parse(format!("k and n must be positive, got k={}, n={}", self.k, self.n)));
        }
        let mut model = OqwModel::new(self.k, self.n).map_err(|e| CliError::Parse(e.to_string()))?;
        if let Some(label) = &self.label {
            model = model.with_label(label.clone());
        }
        let mut seen = vec![false; self.k * self.k];
        for (idx, t) in self.transitions.iter().enumerate() {
            let what = format!("transitions[{idx}] ({} ← {})", t.to, t.from);
            for site in [t.to, t.from] {
                if site == 0 || site > self.k {
                    return Err(CliError::Parse(format!("{what}: site {site} outside 1..={}", self.k)));
                }
            }
            let slot = (t.to - 1) * self.k + (t.from - 1);
            if seen[slot] {
                return Err(CliError::Parse(format!("{what}: duplicate transition")));
            }
            seen[slot] = true;
            let b = grid_to_matrix(&t.matrix, self.n, &what)?;
            model.set_effect(t.to - 1, t.from - 1, b).map_err(|e| CliError::Parse(format!("{what}: {e}")))?;
        }
        Ok(model)
    }
}

/// Parsed `--rho`: the per-site blocks it describes, 0-based.
#[derive(Clone, Debug)]
pub struct DensityInput {
    pub source: String,
    pub blocks: Vec<(usize, ComplexMatrix)>,
}

impl DensityInput {
    /// `bloch:site,x1,x2,x3` or a path to a density file.
    pub fn parse_arg(arg: &str) -> Result<Self, CliError> {
        let spec = match arg.strip_prefix("bloch:") {
            Some(rest) => {
                let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
                if parts.len() != 4 {
                    return Err(CliError::Usage(format!("`{arg}`: expected bloch:site,x1,x2,x3")));
                }
                let site = parts[0]
                    .parse::<usize>()
                    .map_err(|e| CliError::Usage(format!("`{arg}`: bad site `{}`: {e}", parts[0])))?;
                let mut x = [0.0; 3];
                for (slot, p) in x.iter_mut().zip(&parts[1..]) {
                    *slot = p.parse::<f64>().map_err(|e| CliError::Usage(format!("`{arg}`: bad number `{p}`: {e}")))?;
                }
                DensitySpec::Bloch(BlochSpec { site, x1: x[0], x2: x[1], x3: x[2] })
            }
            None => parse_json(&read(Path::new(arg))?, arg)?,
        };
        Self::from_spec(&spec, arg)
    }

    pub fn from_spec(spec: &DensitySpec, source: &str) -> Result<Self, CliError> {
        let blocks = match spec {
            DensitySpec::Bloch(b) => {
                let norm2 = b.x1 * b.x1 + b.x2 * b.x2 + b.x3 * b.x3;
                if !norm2.is_finite() || norm2 > 1.0 + 1e-12 {
                    return Err(CliError::Usage(format!("{source}: Bloch vector lies outside the unit ball")));
                }
                vec![(site_index(b.site, source)?, bloch_density(b.x1, b.x2, b.x3))]
            }
            DensitySpec::Blocks(list) => {
                if list.is_empty() {
                    return Err(CliError::Parse(format!("{source}: no blocks")));
                }
                let mut out: Vec<(usize, ComplexMatrix)> = Vec::new();
                for (idx, b) in list.iter().enumerate() {
                    let n = b.matrix.len();
                    let m = grid_to_matrix(&b.matrix, n, &format!("{source}: blocks[{idx}]"))?;
                    let site = site_index(b.site, source)?;
                    if out.iter().any(|(s, _)| *s == site) {
                        return Err(CliError::Parse(format!("{source}: site {} listed twice", b.site)));
                    }
                    out.push((site, m));
                }
                out
            }
        };
        Ok(DensityInput { source: source.to_owned(), blocks })
    }

    fn degree(&self) -> usize {
        self.blocks[0].1.dim()
    }

    fn check_shape(&self, k: usize, n: usize) -> Result<(), CliError> {
        for (site, m) in &self.blocks {
            if *site >= k {
                return Err(CliError::Usage(format!("{}: site {} outside 1..={k}", self.source, site + 1)));
            }
            if m.dim() != n {
                return Err(CliError::Usage(format!(
                    "{}: block at site {} is {}×{}, the walk needs {n}×{n}",
                    self.source,
                    site + 1,
                    m.dim(),
                    m.dim()
                )));
            }
        }
        Ok(())
    }

    pub fn site_state(&self, k: usize, n: usize, tol: f64) -> Result<SiteState, CliError> {
        self.check_shape(k, n)?;
        let mut blocks = vec![ComplexMatrix::zeros(n); k];
        for (site, m) in &self.blocks {
            blocks[*site] = m.clone();
        }
        SiteState::new(blocks, tol).map_err(|e| CliError::Usage(format!("{}: {e}", self.source)))
    }

    /// A density sitting at one site: `(site, ρ)`.
    pub fn concentrated(&self, k: usize, n: usize, tol: f64) -> Result<(usize, ComplexMatrix), CliError> {
        self.site_state(k, n, tol)?;
        let nonzero: Vec<&(usize, ComplexMatrix)> = self.blocks.iter().filter(|(_, m)| !m.is_zero()).collect();
        match nonzero.as_slice() {
            [(site, m)] => Ok((*site, m.clone())),
            _ => Err(CliError::Usage(format!("{}: expected a density concentrated at one site", self.source))),
        }
    }

    /// The density matrix alone, for checks where the site does not matter.
    pub fn matrix(&self, n: usize, tol: f64) -> Result<ComplexMatrix, CliError> {
        let k = self.blocks.iter().map(|(s, _)| s + 1).max().unwrap_or(1);
        if self.degree() != n {
            self.check_shape(k, n)?;
        }
        Ok(self.concentrated(k, n, tol)?.1)
    }
}

fn site_index(site: usize, source: &str) -> Result<usize, CliError> {
    if site == 0 {
        Err(CliError::Usage(format!("{source}: sites are numbered from 1")))
    } else {
        Ok(site - 1)
    }
}
