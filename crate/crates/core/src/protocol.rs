//! Agent and protocol models, the closed-loop matrices `Ã`, `B̃`, `C̃`, and
//! the checks that certify a given protocol.
//!
//! With output coupling `ζ = (L ⊗ I)·y` (continuous) or `ζ = ((I - D) ⊗ I)·y`
//! (discrete), the network evolves under `I ⊗ Ã + L ⊗ B̃C̃`, so stability of
//! the disagreement dynamics reduces to stability of `Ã + λB̃C̃` at each
//! nonzero Laplacian eigenvalue `λ`, or of `Ã + (1 - λ)B̃C̃` at each
//! eigenvalue `λ ≠ 1` of `D`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{RowStochasticConfig, WeightedDigraph};
use crate::linalg::{self, inf_norm, C64};

/// Hurwitz/Schur margin: abscissa `< -1e-9`, radius `< 1 - 1e-9`.
pub const STABILITY_MARGIN: f64 = 1e-9;
/// Eigenvalues this close to the stability boundary are treated as on it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    NonCollaborative,
    Collaborative,
}

/// Identical agents `x⁺ = Ax + Bu`, `y = Cx`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub time_domain: TimeDomain,
}

impl AgentModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, time_domain: TimeDomain) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || n == 0 {
            return Err(Error::dims("agent.A", "non-empty square", shape(&a)));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::dims("agent.B", format!("{n}xm, m >= 1"), shape(&b)));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::dims("agent.C", format!("px{n}, p >= 1"), shape(&c)));
        }
        Ok(AgentModel { a, b, c, time_domain })
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }
}

fn shape(m: &DMatrix<f64>) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

/// Reads an empty matrix as zero-sized in any direction; otherwise the shape must match.
fn fit(m: &DMatrix<f64>, rows: usize, cols: usize, field: &str) -> Result<DMatrix<f64>> {
    if m.shape() == (rows, cols) {
        Ok(m.clone())
    } else if (rows == 0 || cols == 0) && m.iter().count() == 0 {
        Ok(DMatrix::zeros(rows, cols))
    } else {
        Err(Error::dims(field, format!("{rows}x{cols}"), shape(m)))
    }
}

/// Protocol matrices. Non-collaborative:
/// `x_c⁺ = A_c x_c + B_c ζ`, `u = F_c x_c + G_c ζ`.
/// Collaborative, with `ζ̂ = (L ⊗ H_c)·x_c` exchanged as well:
/// `x_c⁺ = A_c x_c + B_c ζ + E_c ζ̂`, `u = F_c x_c + G¹_c ζ + G²_c ζ̂`.
#[derive(Clone, Debug, PartialEq)]
pub enum ProtocolSpec {
    NonCollaborative {
        ac: DMatrix<f64>,
        bc: DMatrix<f64>,
        fc: DMatrix<f64>,
        gc: DMatrix<f64>,
    },
    Collaborative {
        ac: DMatrix<f64>,
        bc: DMatrix<f64>,
        ec: DMatrix<f64>,
        fc: DMatrix<f64>,
        gc1: DMatrix<f64>,
        gc2: DMatrix<f64>,
        hc: DMatrix<f64>,
    },
}

impl ProtocolSpec {
    /// A memoryless protocol `u = G_c ζ`.
    pub fn static_gain(gc: DMatrix<f64>) -> Self {
        let (m, p) = gc.shape();
        ProtocolSpec::NonCollaborative {
            ac: DMatrix::zeros(0, 0),
            bc: DMatrix::zeros(0, p),
            fc: DMatrix::zeros(m, 0),
            gc,
        }
    }

    pub fn kind(&self) -> ProtocolKind {
        match self {
            ProtocolSpec::NonCollaborative { .. } => ProtocolKind::NonCollaborative,
            ProtocolSpec::Collaborative { .. } => ProtocolKind::Collaborative,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            ProtocolSpec::NonCollaborative { ac, .. } | ProtocolSpec::Collaborative { ac, .. } => ac.nrows(),
        }
    }

    /// Checks every shape against the agent, filling in zero-sized blocks
    /// written as empty arrays.
    pub fn conform(&self, agent: &AgentModel) -> Result<Self> {
        let (m, p) = (agent.inputs(), agent.outputs());
        match self {
            ProtocolSpec::NonCollaborative { ac, bc, fc, gc } => {
                let nc = ac.nrows();
                Ok(ProtocolSpec::NonCollaborative {
                    ac: fit(ac, nc, nc, "protocol.Ac")?,
                    bc: fit(bc, nc, p, "protocol.Bc")?,
                    fc: fit(fc, m, nc, "protocol.Fc")?,
                    gc: fit(gc, m, p, "protocol.Gc")?,
                })
            }
            ProtocolSpec::Collaborative {
                ac,
                bc,
                ec,
                fc,
                gc1,
                gc2,
                hc,
            } => {
                let nc = ac.nrows();
                let h = hc.nrows();
                Ok(ProtocolSpec::Collaborative {
                    ac: fit(ac, nc, nc, "protocol.Ac")?,
                    bc: fit(bc, nc, p, "protocol.Bc")?,
                    ec: fit(ec, nc, h, "protocol.Ec")?,
                    fc: fit(fc, m, nc, "protocol.Fc")?,
                    gc1: fit(gc1, m, p, "protocol.Gc1")?,
                    gc2: fit(gc2, m, h, "protocol.Gc2")?,
                    hc: fit(hc, h, nc, "protocol.Hc")?,
                })
            }
        }
    }
}

/// Closed-loop matrices of one agent with its protocol.
#[derive(Clone, Debug, PartialEq)]
pub struct TildeSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub time_domain: TimeDomain,
    pub collaborative: bool,
}

impl TildeSystem {
    /// `n + n_c`.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// `B̃C̃`.
    pub fn coupling(&self) -> DMatrix<f64> {
        &self.b * &self.c
    }
}

/// Assembles `Ã = [A, BF_c; 0, A_c]` and the matching `B̃`, `C̃`.
pub fn closed_loop(agent: &AgentModel, proto: &ProtocolSpec) -> Result<TildeSystem> {
    let proto = proto.conform(agent)?;
    let (n, p) = (agent.states(), agent.outputs());
    let nc = proto.state_dim();
    let (ac, fc) = match &proto {
        ProtocolSpec::NonCollaborative { ac, fc, .. } | ProtocolSpec::Collaborative { ac, fc, .. } => (ac, fc),
    };
    let mut a = DMatrix::zeros(n + nc, n + nc);
    a.view_mut((0, 0), (n, n)).copy_from(&agent.a);
    a.view_mut((0, n), (n, nc)).copy_from(&(&agent.b * fc));
    a.view_mut((n, n), (nc, nc)).copy_from(ac);
    let (b, c, collaborative) = match &proto {
        ProtocolSpec::NonCollaborative { bc, gc, .. } => {
            let mut b = DMatrix::zeros(n + nc, p);
            b.view_mut((0, 0), (n, p)).copy_from(&(&agent.b * gc));
            b.view_mut((n, 0), (nc, p)).copy_from(bc);
            let mut c = DMatrix::zeros(p, n + nc);
            c.view_mut((0, 0), (p, n)).copy_from(&agent.c);
            (b, c, false)
        }
        ProtocolSpec::Collaborative {
            bc, ec, gc1, gc2, hc, ..
        } => {
            let h = hc.nrows();
            let mut b = DMatrix::zeros(n + nc, p + h);
            b.view_mut((0, 0), (n, p)).copy_from(&(&agent.b * gc1));
            b.view_mut((0, p), (n, h)).copy_from(&(&agent.b * gc2));
            b.view_mut((n, 0), (nc, p)).copy_from(bc);
            b.view_mut((n, p), (nc, h)).copy_from(ec);
            let mut c = DMatrix::zeros(p + h, n + nc);
            c.view_mut((0, 0), (p, n)).copy_from(&agent.c);
            c.view_mut((p, n), (h, nc)).copy_from(hc);
            (b, c, true)
        }
    };
    Ok(TildeSystem {
        a,
        b,
        c,
        time_domain: agent.time_domain,
        collaborative,
    })
}

/// Verdicts on an agent model's fitness for scale-free synchronization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub time_domain: TimeDomain,
    pub mode: ProtocolKind,
    /// Agent poles as `[re, im]`.
    pub poles: Vec<[f64; 2]>,
    pub asymptotically_stable: bool,
    /// Closed left-half plane (continuous) or closed unit disc (discrete).
    pub poles_in_closed_region: bool,
    /// Poles in the closed region, those on its boundary semisimple.
    pub neutrally_stable: bool,
    pub stabilizable: bool,
    pub detectable: bool,
    /// Either asymptotically stable, or stabilizable, detectable and
    /// neutrally stable (non-collaborative) / poles in the closed region
    /// (collaborative).
    pub admissible: bool,
}

#[derive(Clone, Copy, PartialEq)]
enum Location {
    Inside,
    Boundary,
    Outside,
}

fn locate(z: C64, domain: TimeDomain) -> Location {
    let d = match domain {
        TimeDomain::Continuous => z.re,
        TimeDomain::Discrete => z.norm() - 1.0,
    };
    if d < -BOUNDARY_TOLERANCE {
        Location::Inside
    } else if d <= BOUNDARY_TOLERANCE {
        Location::Boundary
    } else {
        Location::Outside
    }
}

pub fn check_agent_admissibility(agent: &AgentModel, mode: ProtocolKind) -> Result<AdmissibilityReport> {
    let n = agent.states();
    let poles = linalg::eigenvalues(&agent.a)?;
    let domain = agent.time_domain;
    let rank_tol = 1e-8 * inf_norm(&agent.a).max(1.0);

    // distinct eigenvalues with algebraic multiplicities
    let mut clusters: Vec<(C64, usize)> = Vec::new();
    for &z in &poles {
        match clusters.iter_mut().find(|(c, _)| (*c - z).norm() < 1e-6) {
            Some(entry) => entry.1 += 1,
            None => clusters.push((z, 1)),
        }
    }

    let shifted = |mu: C64| {
        let re = &agent.a - DMatrix::identity(n, n) * mu.re;
        let im = DMatrix::identity(n, n) * -mu.im;
        (re, im)
    };

    let mut stabilizable = true;
    let mut detectable = true;
    let mut boundary_semisimple = true;
    let mut in_closed = true;
    let mut asymptotically_stable = true;
    for &(mu, multiplicity) in &clusters {
        let loc = locate(mu, domain);
        if loc == Location::Inside {
            continue;
        }
        asymptotically_stable = false;
        if loc == Location::Outside {
            in_closed = false;
        }
        let (re, im) = shifted(mu);
        // PBH: rank [A - μI, B] = n and rank [A - μI; C] = n
        let zb = DMatrix::zeros(n, agent.inputs());
        let ctrl_re = concat_cols(&re, &agent.b);
        let ctrl_im = concat_cols(&im, &zb);
        if linalg::complex_rank(&ctrl_re, &ctrl_im, rank_tol) < n {
            stabilizable = false;
        }
        let zc = DMatrix::zeros(agent.outputs(), n);
        let obs_re = concat_rows(&re, &agent.c);
        let obs_im = concat_rows(&im, &zc);
        if linalg::complex_rank(&obs_re, &obs_im, rank_tol) < n {
            detectable = false;
        }
        if loc == Location::Boundary {
            let geometric = n - linalg::complex_rank(&re, &im, rank_tol);
            if geometric < multiplicity {
                boundary_semisimple = false;
            }
        }
    }
    let neutrally_stable = in_closed && boundary_semisimple;
    let admissible = asymptotically_stable
        || (stabilizable
            && detectable
            && match mode {
                ProtocolKind::NonCollaborative => neutrally_stable,
                ProtocolKind::Collaborative => in_closed,
            });
    Ok(AdmissibilityReport {
        time_domain: domain,
        mode,
        poles: poles.iter().map(|z| [z.re, z.im]).collect(),
        asymptotically_stable,
        poles_in_closed_region: in_closed,
        neutrally_stable,
        stabilizable,
        detectable,
        admissible,
    })
}

fn concat_cols(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    out
}

fn concat_rows(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Stable,
    Unstable,
    /// `λ` lies outside the region the protocol has to handle.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LambdaCheck {
    /// `[re, im]`.
    pub lambda: [f64; 2],
    /// Spectral abscissa (continuous) or spectral radius (discrete); `NaN`
    /// when skipped.
    pub value: f64,
    pub status: CheckStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub time_domain: TimeDomain,
    pub strict: bool,
    pub checks: Vec<LambdaCheck>,
    /// Largest abscissa/radius over the checked values.
    pub worst: Option<f64>,
    pub passed: bool,
}

/// Checks `Ã + λB̃C̃` Hurwitz (continuous) or `Ã + (1 - λ)B̃C̃` Schur
/// (discrete) for every `λ` in the required region: the open right-half
/// plane / open unit disc when `strict`, their closures otherwise. Other
/// values are reported as skipped. An empty or all-skipped list does not pass.
pub fn certify_scale_free(sys: &TildeSystem, lambdas: &[C64], strict: bool) -> Result<CertificationReport> {
    let bc = sys.coupling();
    let mut checks = Vec::with_capacity(lambdas.len());
    let mut worst: Option<f64> = None;
    let mut passed = true;
    for &lambda in lambdas {
        let required = match (sys.time_domain, strict) {
            (TimeDomain::Continuous, true) => lambda.re > 0.0,
            (TimeDomain::Continuous, false) => lambda.re >= 0.0,
            (TimeDomain::Discrete, true) => lambda.norm() < 1.0,
            (TimeDomain::Discrete, false) => lambda.norm() <= 1.0,
        };
        if !required {
            checks.push(LambdaCheck {
                lambda: [lambda.re, lambda.im],
                value: f64::NAN,
                status: CheckStatus::Skipped,
            });
            continue;
        }
        let shift = match sys.time_domain {
            TimeDomain::Continuous => lambda,
            TimeDomain::Discrete => C64::new(1.0, 0.0) - lambda,
        };
        let eigs = linalg::shifted_spectrum(&sys.a, &bc, shift)?;
        let (value, ok) = match sys.time_domain {
            TimeDomain::Continuous => {
                let v = linalg::spectral_abscissa(&eigs);
                (v, v < -STABILITY_MARGIN)
            }
            TimeDomain::Discrete => {
                let v = linalg::spectral_radius(&eigs);
                (v, v < 1.0 - STABILITY_MARGIN)
            }
        };
        passed &= ok;
        worst = Some(worst.map_or(value, |w: f64| w.max(value)));
        checks.push(LambdaCheck {
            lambda: [lambda.re, lambda.im],
            value,
            status: if ok { CheckStatus::Stable } else { CheckStatus::Unstable },
        });
    }
    Ok(CertificationReport {
        time_domain: sys.time_domain,
        strict,
        passed: passed && worst.is_some(),
        checks,
        worst,
    })
}

/// The `λ` values a given graph actually exercises: nonzero eigenvalues of
/// `L` (continuous), or eigenvalues of `D` in the closed unit disc other than
/// `1` (discrete; `q` defaults to the in-degrees).
pub fn canonical_lambdas(
    g: &WeightedDigraph,
    time_domain: TimeDomain,
    q: Option<&RowStochasticConfig>,
) -> Result<Vec<C64>> {
    match time_domain {
        TimeDomain::Continuous => {
            let l = g.laplacian();
            let tol = 1e-9 * inf_norm(&l).max(f64::MIN_POSITIVE);
            Ok(linalg::eigenvalues(&l)?.into_iter().filter(|z| z.norm() > tol).collect())
        }
        TimeDomain::Discrete => {
            let cfg = q.cloned().unwrap_or_else(|| RowStochasticConfig::minimal(g));
            let d = g.row_stochastic(&cfg)?;
            Ok(linalg::eigenvalues(&d)?
                .into_iter()
                .filter(|z| z.norm() <= 1.0 + 1e-12 && (*z - 1.0).norm() > 1e-9)
                .map(|z| if z.norm() > 1.0 { z / z.norm() } else { z })
                .collect())
        }
    }
}

/// 400 points: `Re λ` log-spaced over `[0.05, 50]` (20 values) times `Im λ`
/// evenly spaced over `[-50, 50]` (20 values).
pub fn continuous_grid() -> Vec<C64> {
    let re: Vec<f64> = (0..20)
        .map(|i| 10f64.powf(0.05f64.log10() + (50f64.log10() - 0.05f64.log10()) * i as f64 / 19.0))
        .collect();
    let im: Vec<f64> = (0..20).map(|j| -50.0 + 100.0 * j as f64 / 19.0).collect();
    re.iter()
        .flat_map(|&r| im.iter().map(move |&i| C64::new(r, i)))
        .collect()
}

/// 100 points in the open unit disc: radii `0.099, 0.198, …, 0.99` times ten
/// angles offset from the real axis.
pub fn discrete_grid() -> Vec<C64> {
    (1..=10)
        .flat_map(|k| {
            let r = 0.099 * k as f64;
            (0..10).map(move |j| C64::from_polar(r, std::f64::consts::TAU * (j as f64 + 0.25) / 10.0))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn integrator() -> AgentModel {
        AgentModel::new(dmatrix![0.0], dmatrix![1.0], dmatrix![1.0], TimeDomain::Continuous).unwrap()
    }

    #[test]
    fn static_integrator_closed_loop() {
        let t = closed_loop(&integrator(), &ProtocolSpec::static_gain(dmatrix![-1.0])).unwrap();
        assert_eq!(t.a, dmatrix![0.0]);
        assert_eq!(t.b, dmatrix![-1.0]);
        assert_eq!(t.c, dmatrix![1.0]);
        assert!(!t.collaborative);
    }

    #[test]
    fn zero_protocol_gains_vanish_in_agent_rows() {
        let agent = AgentModel::new(
            dmatrix![0.0, 1.0; -1.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
            TimeDomain::Continuous,
        )
        .unwrap();
        let proto = ProtocolSpec::NonCollaborative {
            ac: dmatrix![-1.0],
            bc: dmatrix![1.0],
            fc: dmatrix![0.0],
            gc: dmatrix![0.0],
        };
        let t = closed_loop(&agent, &proto).unwrap();
        let bc = t.coupling();
        assert!(bc.rows(0, 2).iter().all(|v| *v == 0.0));
        assert_eq!(bc[(2, 0)], 1.0);
    }

    #[test]
    fn closed_loop_dimension_errors() {
        let proto = ProtocolSpec::NonCollaborative {
            ac: dmatrix![-1.0],
            bc: dmatrix![1.0, 2.0],
            fc: dmatrix![1.0],
            gc: dmatrix![1.0],
        };
        let err = closed_loop(&integrator(), &proto).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { ref context, .. } if context == "protocol.Bc"));
        assert!(AgentModel::new(dmatrix![0.0], dmatrix![1.0, 1.0; 0.0, 0.0], dmatrix![1.0], TimeDomain::Continuous).is_err());
    }

    #[test]
    fn collaborative_closed_loop_blocks() {
        let agent = integrator();
        let proto = ProtocolSpec::Collaborative {
            ac: dmatrix![0.0],
            bc: dmatrix![2.0],
            ec: dmatrix![-1.0],
            fc: dmatrix![3.0],
            gc1: dmatrix![-1.0],
            gc2: dmatrix![5.0],
            hc: dmatrix![1.0],
        };
        let t = closed_loop(&agent, &proto).unwrap();
        assert_eq!(t.a, dmatrix![0.0, 3.0; 0.0, 0.0]);
        assert_eq!(t.b, dmatrix![-1.0, 5.0; 2.0, -1.0]);
        assert_eq!(t.c, dmatrix![1.0, 0.0; 0.0, 1.0]);
        assert!(t.collaborative);
    }

    #[test]
    fn admissibility_cases() {
        let osc = AgentModel::new(
            dmatrix![0.0, 1.0; -1.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
            TimeDomain::Continuous,
        )
        .unwrap();
        let r = check_agent_admissibility(&osc, ProtocolKind::NonCollaborative).unwrap();
        assert!(r.neutrally_stable && r.stabilizable && r.detectable && r.admissible);
        assert!(!r.asymptotically_stable);

        let unstable = AgentModel::new(dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], TimeDomain::Continuous).unwrap();
        let r = check_agent_admissibility(&unstable, ProtocolKind::Collaborative).unwrap();
        assert!(!r.poles_in_closed_region && !r.admissible);

        let stable = AgentModel::new(-DMatrix::identity(2, 2), dmatrix![0.0; 0.0], dmatrix![0.0, 0.0], TimeDomain::Continuous)
            .unwrap();
        let r = check_agent_admissibility(&stable, ProtocolKind::NonCollaborative).unwrap();
        assert!(r.asymptotically_stable && r.admissible);
    }

    #[test]
    fn admissibility_detects_jordan_block_and_pbh_failures() {
        let double_integrator = AgentModel::new(
            dmatrix![0.0, 1.0; 0.0, 0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
            TimeDomain::Continuous,
        )
        .unwrap();
        let r = check_agent_admissibility(&double_integrator, ProtocolKind::NonCollaborative).unwrap();
        assert!(r.poles_in_closed_region && !r.neutrally_stable && !r.admissible);
        let r = check_agent_admissibility(&double_integrator, ProtocolKind::Collaborative).unwrap();
        assert!(r.admissible);

        // oscillator that the input cannot reach
        let blind = AgentModel::new(
            dmatrix![0.0, 1.0, 0.0; -1.0, 0.0, 0.0; 0.0, 0.0, -1.0],
            dmatrix![0.0; 0.0; 1.0],
            dmatrix![1.0, 0.0, 0.0],
            TimeDomain::Continuous,
        )
        .unwrap();
        let r = check_agent_admissibility(&blind, ProtocolKind::NonCollaborative).unwrap();
        assert!(!r.stabilizable && r.detectable && !r.admissible);
    }

    #[test]
    fn certify_stable_without_coupling() {
        let sys = TildeSystem {
            a: dmatrix![-1.0],
            b: dmatrix![0.0],
            c: dmatrix![1.0],
            time_domain: TimeDomain::Continuous,
            collaborative: false,
        };
        let r = certify_scale_free(&sys, &continuous_grid(), true).unwrap();
        assert!(r.passed);
        assert_eq!(r.checks.len(), 400);
    }

    #[test]
    fn certify_single_integrator_consensus() {
        let sys = closed_loop(&integrator(), &ProtocolSpec::static_gain(dmatrix![-1.0])).unwrap();
        let lambdas = [C64::new(0.3, 4.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0)];
        let strict = certify_scale_free(&sys, &lambdas, true).unwrap();
        assert!(strict.passed);
        assert_eq!(strict.checks[2].status, CheckStatus::Skipped);
        let closed = certify_scale_free(&sys, &lambdas, false).unwrap();
        assert!(!closed.passed);
        assert_eq!(closed.checks[2].status, CheckStatus::Unstable);
        assert!((closed.checks[0].value + 0.3).abs() < 1e-12);
        assert!(!certify_scale_free(&sys, &[], true).unwrap().passed);
    }

    #[test]
    fn grids_have_stated_sizes() {
        let g = continuous_grid();
        assert_eq!(g.len(), 400);
        assert!(g.iter().all(|z| z.re >= 0.05 - 1e-12 && z.re <= 50.0 + 1e-9 && z.im.abs() <= 50.0 + 1e-9));
        let d = discrete_grid();
        assert_eq!(d.len(), 100);
        assert!(d.iter().all(|z| z.norm() < 1.0));
    }

    #[test]
    fn canonical_lambdas_skip_sync_modes() {
        let g = WeightedDigraph::from_labels(3, &[(1, 3, 1.0), (2, 3, 3.0)]).unwrap();
        let l = canonical_lambdas(&g, TimeDomain::Continuous, None).unwrap();
        assert_eq!(l.len(), 1);
        assert!((l[0] - C64::new(4.0, 0.0)).norm() < 1e-12);
        let d = canonical_lambdas(&g, TimeDomain::Discrete, None).unwrap();
        // D = I - diag(1/(1+q)) L; node 3 keeps 1/5 of its own output
        assert_eq!(d.len(), 1);
        assert!((d[0] - C64::new(0.2, 0.0)).norm() < 1e-12);
    }
}
