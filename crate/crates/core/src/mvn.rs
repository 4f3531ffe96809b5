//! Zero-mean multivariate normal sampling through a square-root factor of
//! the covariance.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{KifError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceStructure {
    /// `Σ_{jl} = ρ^{|j−l|}`.
    ArDecay { rho: f64 },
    /// Unit diagonal, `base` off the diagonal except for the listed
    /// symmetric entries `(j, l, value)` (0-based, `j != l`).
    BlockConstant {
        base: f64,
        entries: Vec<(usize, usize, f64)>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSpec {
    pub p: usize,
    pub structure: CovarianceStructure,
}

impl CovarianceSpec {
    pub fn ar_decay(p: usize, rho: f64) -> Self {
        Self {
            p,
            structure: CovarianceStructure::ArDecay { rho },
        }
    }

    pub fn block_constant(p: usize, base: f64, entries: Vec<(usize, usize, f64)>) -> Self {
        Self {
            p,
            structure: CovarianceStructure::BlockConstant { base, entries },
        }
    }

    pub fn identity(p: usize) -> Self {
        Self::block_constant(p, 0.0, Vec::new())
    }

    pub fn matrix(&self) -> Result<DMatrix<f64>> {
        let p = self.p;
        if p == 0 {
            return Err(KifError::InvalidSimulation("covariance dimension 0".into()));
        }
        match &self.structure {
            CovarianceStructure::ArDecay { rho } => Ok(DMatrix::from_fn(p, p, |j, l| {
                rho.powi((j as i64 - l as i64).unsigned_abs() as i32)
            })),
            CovarianceStructure::BlockConstant { base, entries } => {
                let mut m = DMatrix::from_fn(p, p, |j, l| if j == l { 1.0 } else { *base });
                for &(j, l, v) in entries {
                    if j >= p || l >= p || j == l {
                        return Err(KifError::InvalidSimulation(format!(
                            "covariance entry ({j}, {l}) invalid for p = {p}"
                        )));
                    }
                    m[(j, l)] = v;
                    m[(l, j)] = v;
                }
                Ok(m)
            }
        }
    }
}

/// How to handle a covariance that is not positive definite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorRepair {
    /// Fail with [`KifError::NotPositiveDefinite`].
    #[default]
    Strict,
    /// Replace negative eigenvalues by zero and sample from the nearest
    /// positive semidefinite matrix (the behaviour of R's `mvtnorm::rmvnorm`
    /// with its eigen method).
    ClipNegativeEigenvalues,
}

#[derive(Debug, Clone)]
pub struct MvnSampler {
    p: usize,
    /// `X = Z · factorᵀ` for rows `Z` of i.i.d. standard normals.
    factor_t: DMatrix<f64>,
    repaired: bool,
}

impl MvnSampler {
    /// Cholesky factorisation; errors if `Σ` is not positive definite.
    pub fn new(cov: &CovarianceSpec) -> Result<Self> {
        Self::with_repair(cov, FactorRepair::Strict)
    }

    pub fn with_repair(cov: &CovarianceSpec, repair: FactorRepair) -> Result<Self> {
        let sigma = cov.matrix()?;
        if let Some(chol) = sigma.clone().cholesky() {
            return Ok(Self {
                p: cov.p,
                factor_t: chol.l().transpose(),
                repaired: false,
            });
        }
        match repair {
            FactorRepair::Strict => Err(KifError::NotPositiveDefinite),
            FactorRepair::ClipNegativeEigenvalues => {
                let eig = sigma.symmetric_eigen();
                let mut scaled = eig.eigenvectors.clone();
                for (mut col, &ev) in scaled.column_iter_mut().zip(eig.eigenvalues.iter()) {
                    col *= ev.max(0.0).sqrt();
                }
                Ok(Self {
                    p: cov.p,
                    factor_t: scaled.transpose(),
                    repaired: true,
                })
            }
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Whether the covariance had to be projected to be factorised.
    pub fn repaired(&self) -> bool {
        self.repaired
    }

    /// The covariance actually sampled from.
    pub fn effective_covariance(&self) -> DMatrix<f64> {
        self.factor_t.transpose() * &self.factor_t
    }

    /// `n × p` standard normals, drawn row by row.
    pub fn standard_normals<R: Rng>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(n, self.p);
        for i in 0..n {
            for j in 0..self.p {
                z[(i, j)] = rng.sample(StandardNormal);
            }
        }
        z
    }

    /// Maps rows of standard normals to rows of `N(0, Σ)`.
    pub fn transform(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        z * &self.factor_t
    }

    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> DMatrix<f64> {
        let z = self.standard_normals(n, rng);
        self.transform(&z)
    }
}

/// `n` i.i.d. rows of `N(0, Σ)` as an `n × p` matrix, seeded.
pub fn mvn_sample(cov: &CovarianceSpec, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    let sampler = MvnSampler::new(cov)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sampler.sample(n, &mut rng))
}
