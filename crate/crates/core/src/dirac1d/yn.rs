use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{Cell, CircleDiracFamily, CliffordData, TWO_PI};
use crate::error::{Error, Result};
use crate::linalg::eigenvalues_herm;
use crate::maslov::{maslov_pair_report, MaslovOptions};
use crate::sigflow::spectral_flow_direct;

#[derive(Debug, Clone)]
pub struct YnOptions {
    /// Base resolution; the spectral flow is also computed at `2 n`.
    pub n: usize,
    pub tol: f64,
    /// How often the `s`-grid may be halved when the chart covering of the
    /// Cauchy data curves fails.
    pub refinements: usize,
    pub maslov: MaslovOptions,
}

impl Default for YnOptions {
    fn default() -> Self {
        Self { n: 48, tol: 1e-9, refinements: 4, maslov: MaslovOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Convergence {
    pub n: usize,
    pub sf_n: i64,
    pub n2: usize,
    pub sf_2n: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct YnReport {
    pub sf: i64,
    pub maslov: i64,
    pub equal: bool,
    pub convergence: Convergence,
    /// Grid actually used for the Cauchy data curves.
    pub grid_points: usize,
    pub charts: usize,
}

impl CircleDiracFamily {
    /// Spectral flow of the discretized family at resolution `n`.
    pub fn discrete_spectral_flow(&self, n: usize, tol: f64) -> Result<i64> {
        spectral_flow_direct(&self.discretize(n)?, tol)
    }

    /// The `k` eigenvalues of the discretized operator closest to zero, per grid point.
    pub fn near_zero_trace(&self, n: usize, grid: &[f64], k: usize) -> Result<Vec<(f64, Vec<f64>)>> {
        let path = self.discretize(n)?;
        grid.iter()
            .map(|&s| {
                let mut ev = eigenvalues_herm(&path.eval(s)?);
                ev.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
                ev.truncate(k);
                ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
                Ok((s, ev))
            })
            .collect()
    }
}

fn refine(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*grid.last().unwrap());
    out
}

/// Spectral flow of the discretized family (stable under doubling the
/// resolution) against the Maslov index of the Cauchy data pair.
pub fn yn_check(family: &CircleDiracFamily, s_grid: &[f64], opts: &YnOptions) -> Result<YnReport> {
    let (a, b) = family.s_domain();
    if s_grid.len() < 2 || s_grid[0] != a || *s_grid.last().unwrap() != b || s_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Contract(format!("s-grid must increase from {a} to {b}")));
    }
    let sf_n = family.discrete_spectral_flow(opts.n, opts.tol)?;
    let sf_2n = family.discrete_spectral_flow(2 * opts.n, opts.tol)?;
    if sf_n != sf_2n {
        return Err(Error::Convergence { n: opts.n, sf_n, sf_2n });
    }
    let mut grid = s_grid.to_vec();
    let mut attempt = 0;
    let report = loop {
        let (plus, minus) = family.cauchy_curves(&grid)?;
        match maslov_pair_report(&plus, &minus, &opts.maslov) {
            Ok(r) => break r,
            Err(Error::Resolution(_)) if attempt < opts.refinements => {
                grid = refine(&grid);
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    };
    Ok(YnReport {
        sf: sf_n,
        maslov: report.index,
        equal: sf_n == report.index,
        convergence: Convergence { n: opts.n, sf_n, n2: 2 * opts.n, sf_2n },
        grid_points: grid.len(),
        charts: report.pieces.len(),
    })
}

#[derive(Debug, Clone)]
pub struct RandomFamilyOptions {
    /// Number of standard blocks in the fiber; above one the fiber is randomly conjugated.
    pub blocks: usize,
    /// Degree of the coefficient polynomials.
    pub degree: usize,
    /// Standard deviation of the coefficients.
    pub scale: f64,
    pub collar: f64,
    /// Interior cells per arc.
    pub interior_cells: usize,
    /// Forces `B(s*, t) = 0`, so `s*` is a degeneracy of dimension `f`.
    pub planted: Option<f64>,
}

impl Default for RandomFamilyOptions {
    fn default() -> Self {
        Self { blocks: 1, degree: 3, scale: 0.6, collar: 0.3, interior_cells: 2, planted: None }
    }
}

/// `(s - s*) q(s)` in the monomial basis.
fn times_linear(q: &[f64], root: f64) -> Vec<f64> {
    let mut out = vec![0.0; q.len() + 1];
    for (k, c) in q.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= root * c;
    }
    out
}

/// A seeded family on `s ∈ [0, 1]` with random coefficients in every cell and
/// matching collar cells across both cuts.
pub fn random_family(seed: u64, opts: &RandomFamilyOptions) -> Result<CircleDiracFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clifford = if opts.blocks <= 1 { CliffordData::standard() } else { CliffordData::random(opts.blocks, &mut rng) };
    let gens = clifford.sigma().len();
    let potential = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        (0..gens)
            .map(|_| match opts.planted {
                Some(root) => {
                    let q: Vec<f64> =
                        (0..opts.degree.max(1)).map(|_| opts.scale * rng.sample::<f64, _>(StandardNormal)).collect();
                    times_linear(&q, root)
                }
                None => (0..=opts.degree).map(|_| opts.scale * rng.sample::<f64, _>(StandardNormal)).collect(),
            })
            .collect()
    };
    let c = opts.collar;
    let at_zero = potential(&mut rng);
    let at_pi = potential(&mut rng);
    let mut cells = vec![Cell::new((0.0, c), at_zero.clone())];
    for (lo, hi) in [(c, PI - c), (PI + c, TWO_PI - c)] {
        let k = opts.interior_cells.max(1);
        let mut cuts: Vec<f64> = (1..k).map(|_| rng.random_range(lo..hi)).collect();
        cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut edges = vec![lo];
        edges.extend(cuts);
        edges.push(hi);
        let interior: Vec<Cell> = edges.windows(2).map(|w| Cell::new((w[0], w[1]), potential(&mut rng))).collect();
        if lo < PI {
            cells.extend(interior);
            cells.push(Cell::new((PI - c, PI), at_pi.clone()));
        } else {
            cells.push(Cell::new((PI, PI + c), at_pi.clone()));
            cells.extend(interior);
        }
    }
    cells.push(Cell::new((TWO_PI - c, TWO_PI), at_zero));
    CircleDiracFamily::new(clifford, cells, c, (0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac1d::KernelBoundaryOptions;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn interior_crossing_model() {
        let fam = CircleDiracFamily::scalar_model(vec![-0.5, 1.0], (0.0, 1.0)).unwrap();
        let r = yn_check(&fam, &grid(200), &YnOptions::default()).unwrap();
        assert_eq!((r.sf, r.maslov, r.equal), (0, 0, true));
    }

    #[test]
    fn degenerate_endpoint_model() {
        let fam = CircleDiracFamily::scalar_model(vec![0.0, 1.0], (0.0, 1.0)).unwrap();
        let r = yn_check(&fam, &grid(200), &YnOptions::default()).unwrap();
        assert_eq!((r.sf, r.maslov, r.equal), (-1, -1, true));
    }

    #[test]
    fn transversal_crossing_fixes_the_sign() {
        // one simple upward crossing near s = 0.95, so the flow cannot hide a sign error
        let fam = random_family(3, &RandomFamilyOptions::default()).unwrap();
        let r = yn_check(&fam, &grid(200), &YnOptions::default()).unwrap();
        assert_eq!((r.sf, r.maslov, r.equal), (1, 1, true));
        let degs = fam.boundary_degeneracies(400);
        assert_eq!(degs.len(), 1);
        let kb = fam.kernel_boundary_map(degs[0].0, &KernelBoundaryOptions::default()).unwrap();
        assert!(kb.tables_equal);
        assert_eq!((kb.boundary_table.n_plus(1), kb.boundary_table.n_minus(1)), (1, 0));
    }

    #[test]
    fn random_families_are_valid() {
        for seed in 0..5 {
            let fam = random_family(seed, &RandomFamilyOptions::default()).unwrap();
            assert_eq!(fam.cells().len(), 8);
            let planted = random_family(seed, &RandomFamilyOptions { planted: Some(0.4), ..Default::default() }).unwrap();
            assert_eq!(planted.intersection_dim(0.4), 2);
        }
    }
}
