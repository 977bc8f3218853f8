//! Benchmark network: the unit-modulus matrix closest to some unitary
//! rotation `Q R^{-1/2}` of the ideal prewhitener, found by alternating
//! between the phases and `Q` (a Procrustes step).

use super::{OptimizerConfig, RowPhases};
use crate::error::{HimapError, Result};
use crate::linalg::{self, cis, ComplexMatrix};
use crate::prewhiten::{ideal_prewhitener, wrap, PhaseGrid, PhaseMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct OppResult {
    pub phases: PhaseMatrix,
    /// `||E - Q R^{-1/2}||_F^2`, the initial value then one entry per
    /// completed alternation.
    pub cost: Vec<f64>,
}

pub fn opp_prewhitener(r_hat: &ComplexMatrix, grid: PhaseGrid, cfg: &OptimizerConfig) -> Result<OppResult> {
    cfg.validate()?;
    let m = linalg::ensure_square(r_hat, "covariance")?;
    let w = ideal_prewhitener(r_hat)?;
    let mut q = linalg::identity(m);
    let mut phases = vec![0.0; m * m];
    let mut index = grid.levels().map(|_| vec![0i64; m * m]);
    let mut cost = Vec::new();
    let fro2 = |e: &ComplexMatrix, q: &ComplexMatrix| linalg::frobenius(&(e - q * &w)).powi(2);
    for it in 0..cfg.max_sweeps {
        let c = &q * &w;
        for i in 0..m {
            for j in 0..m {
                let p = grid.snap(c[(i, j)].arg());
                phases[i * m + j] = p;
                if let Some(idx) = index.as_mut() {
                    idx[i * m + j] = grid.index_of(p).expect("snapped phase is on the grid");
                }
            }
        }
        let e = ComplexMatrix::from_fn(m, m, |i, j| cis(phases[i * m + j]));
        if it == 0 {
            cost.push(fro2(&e, &q));
        }
        let svd = (&w * e.adjoint()).svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(HimapError::Singular("Procrustes SVD did not converge".into())),
        };
        q = v_t.adjoint() * u.adjoint();
        let now = fro2(&e, &q);
        let prev = *cost.last().unwrap();
        cost.push(now);
        if prev - now < cfg.rel_tol * prev {
            break;
        }
    }
    let state = RowPhases { m, phases: phases.into_iter().map(wrap).collect(), index };
    Ok(OppResult { phases: state.normalized(grid)?, cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prewhiten::psn_matrix;
    use crate::rng;
    use crate::scenario::complex_gaussian;
    use rand::Rng;

    #[test]
    fn cost_never_increases() {
        let mut rg = rng::root(3);
        for trial in 0..100 {
            let m = rg.random_range(2..7);
            let x = ComplexMatrix::from_fn(m, m + 1, |_, _| complex_gaussian(&mut rg, 1.0));
            let r = &x * x.adjoint() + linalg::identity(m) * linalg::c(0.05, 0.0);
            let grid = if trial % 2 == 0 { PhaseGrid::CONTINUOUS } else { PhaseGrid::bits(4) };
            let out = opp_prewhitener(&r, grid, &OptimizerConfig::default()).unwrap();
            for pair in out.cost.windows(2) {
                assert!(pair[1] <= pair[0] * (1.0 + 1e-12), "{:?}", out.cost);
            }
            assert!(out.phases.as_slice().iter().all(|&p| grid.contains(p)));
        }
    }

    #[test]
    fn white_input_tracks_a_unitary() {
        let out = opp_prewhitener(&linalg::identity(3), PhaseGrid::CONTINUOUS, &OptimizerConfig::default()).unwrap();
        assert!(out.cost.last().unwrap().is_finite());
        let e = psn_matrix(&out.phases).e;
        assert!(e.iter().all(|z| (z.norm() - 1.0).abs() < 1e-12));
    }
}
