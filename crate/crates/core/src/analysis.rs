//! Asymptotic predictions for a network without a directed spanning tree.
//!
//! Nodes of basic bicomponent `i` converge to a common trajectory that
//! evolves under the closed-loop matrix `Ã` from `(ᾱᵢ ⊗ I)·x̄ᵢ(0)`, where `ᾱᵢ`
//! is the normalized left null vector of `Lᵢ`. Every non-basic node `j`
//! converges to `Σᵢ β_{j,i}·(sync trajectory i)`, with the columns of `β`
//! given by `-L0⁻¹·L0ᵢ·𝟏`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianBlocks;
use crate::linalg::{self, inf_norm};
use crate::protocol::TimeDomain;

/// Relative tolerance for counting zero singular values.
pub const ZERO_TOLERANCE: f64 = 1e-9;
/// Negative weights above this are round-off and get clamped to zero.
pub const CLAMP_FLOOR: f64 = -1e-8;

/// Normalized left null vector of a strongly connected Laplacian block.
#[derive(Clone, Debug, PartialEq)]
pub struct LeftEigenvector {
    pub alpha: DVector<f64>,
}

/// Solves `[Lᵢᵀ; 𝟏ᵀ]·α = (0; 1)` in the least-squares sense.
pub fn left_eigenvector(li: &DMatrix<f64>) -> Result<LeftEigenvector> {
    if !li.is_square() || li.nrows() == 0 {
        return Err(Error::dims("left eigenvector", "non-empty square block", format!("{:?}", li.shape())));
    }
    let n = li.nrows();
    let scale = inf_norm(li);
    let zeros = linalg::singular_values(li)
        .into_iter()
        .filter(|s| *s <= ZERO_TOLERANCE * scale)
        .count();
    if zeros != 1 {
        return Err(Error::NotSimpleZero { zeros });
    }

    let mut stacked = DMatrix::zeros(n + 1, n);
    stacked.view_mut((0, 0), (n, n)).copy_from(&li.transpose());
    stacked.row_mut(n).fill(1.0);
    let mut rhs = DVector::zeros(n + 1);
    rhs[n] = 1.0;

    let svd = stacked.clone().svd(true, true);
    let alpha = svd
        .solve(&rhs, f64::EPSILON)
        .map_err(|e| Error::Inconsistent(format!("left eigenvector solve: {e}")))?;
    let residual = linalg::vec_inf_norm(&(&stacked * &alpha - &rhs));
    if residual > ZERO_TOLERANCE * scale.max(1.0) {
        return Err(Error::Inconsistent(format!("left eigenvector residual {residual:e}")));
    }
    let alpha = clamp_nonnegative(alpha, "left eigenvector")?;
    Ok(LeftEigenvector { alpha })
}

fn clamp_nonnegative(mut v: DVector<f64>, what: &str) -> Result<DVector<f64>> {
    for x in v.iter_mut() {
        if *x < CLAMP_FLOOR {
            return Err(Error::Inconsistent(format!("{what} has negative entry {x:e}")));
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(v)
}

/// Convergence weights of the non-basic nodes over the basic bicomponents.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    /// Non-basic nodes (0-based), one per row of `beta`.
    pub nodes: Vec<usize>,
    /// Basic bicomponents (0-based nodes), one per column of `beta`.
    pub bicomponents: Vec<Vec<usize>>,
    pub beta: DMatrix<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightMatrixFile {
    nodes: Vec<usize>,
    bicomponents: Vec<Vec<usize>>,
    beta: Vec<Vec<f64>>,
}

impl Serialize for WeightMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        WeightMatrixFile {
            nodes: self.nodes.iter().map(|v| v + 1).collect(),
            bicomponents: self
                .bicomponents
                .iter()
                .map(|b| b.iter().map(|v| v + 1).collect())
                .collect(),
            beta: linalg::rows::to_rows(&self.beta),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WeightMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let f = WeightMatrixFile::deserialize(d)?;
        let k = f.bicomponents.len();
        let beta = if f.beta.is_empty() {
            DMatrix::zeros(0, k)
        } else {
            linalg::rows::from_rows(&f.beta).ok_or_else(|| D::Error::custom("ragged beta rows"))?
        };
        if beta.shape() != (f.nodes.len(), k) {
            return Err(D::Error::custom("beta shape does not match nodes x bicomponents"));
        }
        let unlabel = |v: usize| v.checked_sub(1).ok_or_else(|| D::Error::custom("node labels are 1-based"));
        Ok(WeightMatrix {
            nodes: f.nodes.into_iter().map(unlabel).collect::<std::result::Result<_, _>>()?,
            bicomponents: f
                .bicomponents
                .into_iter()
                .map(|b| b.into_iter().map(unlabel).collect::<std::result::Result<Vec<_>, _>>())
                .collect::<std::result::Result<_, _>>()?,
            beta,
        })
    }
}

impl WeightMatrix {
    pub fn k(&self) -> usize {
        self.bicomponents.len()
    }

    /// Row of `beta` for a non-basic node, if it is one.
    pub fn row_of(&self, node: usize) -> Option<Vec<f64>> {
        let r = self.nodes.iter().position(|&v| v == node)?;
        Some(self.beta.row(r).iter().copied().collect())
    }

    /// `(β ⊗ I)·(s₁; …; s_k)`: stacked predicted states of the non-basic nodes.
    pub fn combine(&self, sync_states: &[DVector<f64>]) -> Result<DVector<f64>> {
        if sync_states.len() != self.k() {
            return Err(Error::dims("sync states", self.k(), sync_states.len()));
        }
        let dim = sync_states.first().map_or(0, |s| s.len());
        if sync_states.iter().any(|s| s.len() != dim) {
            return Err(Error::dims("sync state dimension", dim, "mixed"));
        }
        let mut out = DVector::zeros(self.nodes.len() * dim);
        for (r, _) in self.nodes.iter().enumerate() {
            let mut block = out.rows_mut(r * dim, dim);
            for (i, s) in sync_states.iter().enumerate() {
                block.axpy(self.beta[(r, i)], s, 1.0);
            }
        }
        Ok(out)
    }
}

/// `β` with column `i` equal to `-L0⁻¹·L0ᵢ·𝟏ᵢ`, from one LU factorization of `L0`.
pub fn beta_weights(blocks: &LaplacianBlocks) -> Result<WeightMatrix> {
    let k = blocks.k();
    let k0 = blocks.k0();
    if k == 0 {
        return Err(Error::Inconsistent("no basic bicomponent".into()));
    }
    let mut beta = DMatrix::zeros(k0, k);
    if k0 > 0 {
        let l0 = blocks.l0();
        let lu = l0.clone().lu();
        // pivot-free singularity check against the block scale
        let pivots = lu.u().diagonal();
        let smallest = pivots.iter().fold(f64::INFINITY, |m, p| m.min(p.abs()));
        if !(smallest > ZERO_TOLERANCE * inf_norm(l0)) {
            return Err(Error::SingularL0);
        }
        let mut rhs = DMatrix::zeros(k0, k);
        for (i, l0i) in blocks.l0i().iter().enumerate() {
            let col = -(l0i * DVector::from_element(l0i.ncols(), 1.0));
            rhs.set_column(i, &col);
        }
        beta = lu.solve(&rhs).ok_or(Error::SingularL0)?;
        for mut row in beta.row_iter_mut() {
            for x in row.iter_mut() {
                if *x < CLAMP_FLOOR {
                    return Err(Error::Inconsistent(format!("beta has negative entry {x:e}")));
                }
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(Error::Inconsistent(format!("beta row sums to {sum}")));
            }
        }
    }
    Ok(WeightMatrix {
        nodes: blocks.nonbasic_nodes().to_vec(),
        bicomponents: blocks.basic_nodes().to_vec(),
        beta,
    })
}

/// Initial condition of a basic bicomponent's synchronized trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct SyncTrajectory {
    pub bicomponent: usize,
    pub w0: DVector<f64>,
    pub time_domain: TimeDomain,
}

/// `w0 = Σⱼ αⱼ·(xⱼ(0); x_{j,c}(0))` over the nodes of basic bicomponent `i`.
///
/// `x0` stacks the per-node agent+protocol states in original node order,
/// each of length `state_dim`.
pub fn sync_initial(
    blocks: &LaplacianBlocks,
    i: usize,
    x0: &DVector<f64>,
    state_dim: usize,
    time_domain: TimeDomain,
) -> Result<SyncTrajectory> {
    if i >= blocks.k() {
        return Err(Error::InvalidArgument(format!(
            "bicomponent index {i} out of range (k = {})",
            blocks.k()
        )));
    }
    let expected = blocks.node_count() * state_dim;
    if x0.len() != expected {
        return Err(Error::dims("initial state", expected, x0.len()));
    }
    let alpha = left_eigenvector(&blocks.li()[i])?.alpha;
    let mut w0 = DVector::zeros(state_dim);
    for (&node, &a) in blocks.basic_nodes()[i].iter().zip(alpha.iter()) {
        w0.axpy(a, &x0.rows(node * state_dim, state_dim), 1.0);
    }
    Ok(SyncTrajectory {
        bicomponent: i,
        w0,
        time_domain,
    })
}

/// Predicted steady states of the non-basic nodes, stacked in `L0` order:
/// `-Σᵢ (L0⁻¹·L0ᵢ·𝟏ᵢ ⊗ I)·sᵢ`.
pub fn predict_nonbasic(blocks: &LaplacianBlocks, sync_states: &[DVector<f64>]) -> Result<DVector<f64>> {
    beta_weights(blocks)?.combine(sync_states)
}
