//! Localization of the parameters where a square matrix polynomial drops rank.
//!
//! Works for Hermitian paths and for the non-Hermitian intersection matrices
//! of Lagrangian curves alike. The polynomial is re-expanded around a complex
//! shift `sigma` and inverted, `s = sigma + l/z`, so that the leading
//! coefficient of the reversed polynomial is the well-conditioned `P(sigma)`.
//! Roots are the eigenvalues of the block companion matrix; a root of
//! multiplicity `k` splits into a ring of `k` computed eigenvalues whose
//! centroid is accurate, so eigenvalues are clustered before validation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{c64, identity, nullity, random_complex, solve, zeros, CMatrix, C64};
use crate::path::MatrixPolynomial;

#[derive(Debug, Clone)]
pub struct RootOptions {
    pub tol: f64,
    /// Single-linkage radius, relative to the half-length of the interval.
    pub cluster_radius: f64,
    /// Distinct roots closer than this (relative) are not told apart.
    pub separation: f64,
    /// Candidates this close to an endpoint (relative) are moved onto it.
    pub snap: f64,
    pub seed: u64,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self { tol: crate::linalg::DEFAULT_RANK_TOL, cluster_radius: 1e-3, separation: 1e-5, snap: 1e-9, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankDrop {
    pub s0: f64,
    /// Full nullity of `P(s0)`, including the generic part.
    pub nullity: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankDrops {
    pub domain: (f64, f64),
    pub points: Vec<RankDrop>,
    /// Nullity of `P(s)` at generic `s`.
    pub generic_nullity: usize,
}

const SAMPLE_FRACTIONS: [f64; 5] = [0.1127, 0.3391, 0.5273, 0.7158, 0.9041];

/// Nullity at generic parameters, taken as the minimum over a few fixed
/// pseudo-random samples.
pub fn generic_nullity(eval: &dyn Fn(f64) -> CMatrix, domain: (f64, f64), tol: f64) -> usize {
    SAMPLE_FRACTIONS
        .iter()
        .map(|f| nullity(&eval(domain.0 + f * (domain.1 - domain.0)), tol))
        .min()
        .unwrap_or(0)
}

fn companion_eigenvalues(coeffs: &[CMatrix]) -> Vec<C64> {
    let n = coeffs[0].nrows();
    let d = coeffs.len() - 1;
    if d == 0 {
        return Vec::new();
    }
    let mut c = zeros(n * d, n * d);
    for k in 1..=d {
        c.view_mut((0, (k - 1) * n), (n, n)).copy_from(&(-&coeffs[k]));
    }
    for k in 1..d {
        c.view_mut((k * n, (k - 1) * n), (n, n)).copy_from(&identity(n));
    }
    match nalgebra::linalg::Schur::new(c).eigenvalues() {
        Some(ev) => ev.iter().copied().collect(),
        None => Vec::new(),
    }
}

fn cluster(points: &[C64], radius: f64) -> Vec<Vec<C64>> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(l: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while l[r] != r {
            r = l[r];
        }
        let mut j = i;
        while l[j] != r {
            let next = l[j];
            l[j] = r;
            j = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= radius {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a] = b;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<C64>> = Default::default();
    for i in 0..n {
        let r = find(&mut label, i);
        groups.entry(r).or_default().push(points[i]);
    }
    groups.into_values().collect()
}

fn diameter(points: &[C64]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            d = d.max((p - q).norm());
        }
    }
    d
}

/// Splits a cluster at its longest single-linkage edge while that edge is much
/// longer than the pieces it separates and longer than `floor`. The computed
/// roots of one multiple root form a ring without such a gap; nearby distinct
/// roots do not. `floor` keeps the two halves of a split double root together.
fn separate(group: Vec<C64>, floor: f64) -> Vec<Vec<C64>> {
    const RATIO: f64 = 20.0;
    if group.len() < 2 {
        return vec![group];
    }
    // Prim's tree; the longest edge decides the split
    let n = group.len();
    let mut in_tree = vec![false; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![0usize; n];
    dist[0] = 0.0;
    let mut edges = Vec::with_capacity(n - 1);
    for _ in 0..n {
        let u = (0..n).filter(|&i| !in_tree[i]).min_by(|&i, &j| dist[i].partial_cmp(&dist[j]).unwrap()).unwrap();
        in_tree[u] = true;
        if u != 0 {
            edges.push((dist[u], parent[u], u));
        }
        for v in 0..n {
            let d = (group[u] - group[v]).norm();
            if !in_tree[v] && d < dist[v] {
                dist[v] = d;
                parent[v] = u;
            }
        }
    }
    let cut = (0..edges.len()).max_by(|&x, &y| edges[x].0.partial_cmp(&edges[y].0).unwrap()).unwrap();
    let longest = edges[cut].0;
    // component of vertex 0 once the longest edge is removed
    let mut side = vec![false; n];
    side[0] = true;
    let mut changed = true;
    while changed {
        changed = false;
        for (e, &(_, p, c)) in edges.iter().enumerate() {
            if e != cut && side[p] != side[c] {
                side[p] = true;
                side[c] = true;
                changed = true;
            }
        }
    }
    let (a, b): (Vec<C64>, Vec<C64>) = (0..n).map(|i| (side[i], group[i])).fold((Vec::new(), Vec::new()), |mut acc, (s, z)| {
        if s {
            acc.0.push(z)
        } else {
            acc.1.push(z)
        }
        acc
    });
    if longest > floor && longest > RATIO * diameter(&a).max(diameter(&b)) {
        let mut out = separate(a, floor);
        out.extend(separate(b, floor));
        out
    } else {
        vec![group]
    }
}

/// All `s` in `[a, b]` where the nullity of `P(s)` exceeds its generic value.
pub fn rank_drops(poly: &MatrixPolynomial, domain: (f64, f64), opts: &RootOptions) -> Result<RankDrops> {
    let n = poly.nrows();
    if n != poly.ncols() {
        return Err(Error::Contract("rank-drop search needs a square polynomial".into()));
    }
    if poly.coeffs().iter().flat_map(|c| c.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Resolution("non-finite polynomial coefficients".into()));
    }
    let (a, b) = domain;
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let eval = |s: f64| poly.eval(s);
    let g = generic_nullity(&eval, domain, opts.tol);
    let mut out = RankDrops { domain, points: Vec::new(), generic_nullity: g };
    if g >= n {
        return Ok(out);
    }

    // a random rank-g term makes the determinant generically nonzero without
    // removing any parameter where the nullity exceeds g
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = poly.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-300);
    let reg = if g > 0 {
        let w1 = random_complex(n, g, &mut rng);
        let w2 = random_complex(n, g, &mut rng);
        Some(w1 * w2.adjoint() * c64(scale / (n as f64).sqrt(), 0.0))
    } else {
        None
    };
    let mut coeffs = poly.coeffs().to_vec();
    if let Some(r) = &reg {
        coeffs[0] += r;
    }
    let regpoly = MatrixPolynomial::new(coeffs)?;

    let mut best: Option<(f64, C64)> = None;
    for c in [0.83, 1.37, 0.41, 2.3, 0.17] {
        let sigma = c64(mid, c * half);
        let p = regpoly.eval_complex(sigma);
        let sv = crate::linalg::singular_values(&p);
        let cond = sv.last().copied().unwrap_or(0.0) / sv[0].max(1e-300);
        if best.map_or(true, |(bc, _)| cond > bc) {
            best = Some((cond, sigma));
        }
        if cond > 1e-3 {
            break;
        }
    }
    let (cond, sigma) = best.expect("at least one shift tried");
    let mut candidates: Vec<C64> = Vec::new();
    if cond > 1e-14 && regpoly.degree() > 0 {
        let shifted = regpoly.shifted_coeffs(sigma);
        let d0 = &shifted[0];
        let mut monic = vec![identity(n)];
        let mut pow = 1.0;
        for dk in shifted.iter().skip(1) {
            pow *= half;
            monic.push(solve(d0, &(dk * c64(pow, 0.0)))?);
        }
        for z in companion_eigenvalues(&monic) {
            if z.norm() > 1e-8 {
                let s = sigma + c64(half, 0.0) / z;
                if (s.re - mid).abs() <= 1.05 * half && s.im.abs() <= 0.05 * half {
                    candidates.push(s);
                }
            }
        }
    } else if regpoly.degree() > 0 {
        return Err(Error::Resolution("no well-conditioned shift found for root localization".into()));
    }

    let radius = opts.cluster_radius * half;
    let snap = opts.snap * half;
    let place = |x: f64| -> Option<f64> {
        if (x - a).abs() <= snap {
            Some(a)
        } else if (x - b).abs() <= snap {
            Some(b)
        } else if x > a && x < b {
            Some(x)
        } else {
            None
        }
    };
    let mut found: Vec<RankDrop> = Vec::new();
    for group in cluster(&candidates, radius).into_iter().flat_map(|g| separate(g, opts.separation * half)) {
        let centroid = group.iter().fold(c64(0.0, 0.0), |acc, z| acc + z) / c64(group.len() as f64, 0.0);
        if centroid.im.abs() > radius {
            continue;
        }
        let mut accepted = false;
        if let Some(x) = place(centroid.re) {
            let k = nullity(&poly.eval(x), opts.tol);
            if k > g {
                found.push(RankDrop { s0: x, nullity: k });
                accepted = true;
            }
        }
        if !accepted && group.len() > 1 {
            // the cluster may hold distinct nearby roots; try its members
            let mut any = false;
            let mut real_members = 0;
            for z in &group {
                if z.im.abs() <= 1e-7 * half {
                    real_members += 1;
                    if let Some(x) = place(z.re) {
                        let k = nullity(&poly.eval(x), opts.tol);
                        if k > g {
                            found.push(RankDrop { s0: x, nullity: k });
                            any = true;
                        }
                    }
                }
            }
            if !any && real_members > 1 && place(centroid.re).is_some() {
                return Err(Error::Cluster { center: centroid.re, members: group.len() });
            }
        }
    }
    for x in [a, b] {
        let k = nullity(&poly.eval(x), opts.tol);
        if k > g {
            found.push(RankDrop { s0: x, nullity: k });
        }
    }
    found.sort_by(|p, q| p.s0.partial_cmp(&q.s0).unwrap());
    let merge = 1e-9 * half.max(1e-300);
    for p in found {
        match out.points.last_mut() {
            Some(last) if (p.s0 - last.s0).abs() <= merge => {
                // prefer exact endpoints, otherwise keep the first
                if p.s0 == a || p.s0 == b {
                    *last = p;
                }
            }
            _ => out.points.push(p),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_unitary, real_matrix};

    fn scalar(c: &[f64]) -> MatrixPolynomial {
        MatrixPolynomial::new(c.iter().map(|&x| real_matrix(1, 1, &[x])).collect()).unwrap()
    }

    #[test]
    fn explicit_roots() {
        // s(s - 0.5)
        let r = rank_drops(&scalar(&[0.0, -0.5, 1.0]), (0.0, 1.0), &RootOptions::default()).unwrap();
        let s: Vec<f64> = r.points.iter().map(|p| p.s0).collect();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], 0.0);
        assert!((s[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_path_is_null_branch() {
        let r = rank_drops(&scalar(&[0.0]), (0.0, 1.0), &RootOptions::default()).unwrap();
        assert_eq!(r.generic_nullity, 1);
        assert!(r.points.is_empty());
    }

    #[test]
    fn quadruple_root_located_by_centroid() {
        // (s - 0.3)^4
        let r = rank_drops(&scalar(&[0.0081, -0.108, 0.54, -1.2, 1.0]), (-1.0, 1.0), &RootOptions::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0].s0 - 0.3).abs() < 1e-10);
    }

    #[test]
    fn touching_root_next_to_a_crossing() {
        // (s - 0.4)^2 (s - 0.4005): the three computed roots fall in one cluster
        let (a, b) = (0.4, 0.4005);
        let c = [-a * a * b, a * a + 2.0 * a * b, -(2.0 * a + b), 1.0];
        let r = rank_drops(&scalar(&c), (-1.0, 1.0), &RootOptions::default()).unwrap();
        let s: Vec<f64> = r.points.iter().map(|p| p.s0).collect();
        assert_eq!(s.len(), 2, "{s:?}");
        assert!((s[0] - a).abs() < 1e-6 && (s[1] - b).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn planted_kernel_in_conjugated_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let q = random_unitary(3, &mut rng);
        let d0 = crate::linalg::diag_real(&[-0.3, 1.0, 2.0]);
        let d1 = crate::linalg::diag_real(&[1.0, 0.0, 0.0]);
        let p = MatrixPolynomial::new(vec![&q * d0 * q.adjoint(), &q * d1 * q.adjoint()]).unwrap();
        let r = rank_drops(&p, (0.0, 1.0), &RootOptions::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0].s0 - 0.3).abs() < 1e-8);
        assert_eq!(r.points[0].nullity, 1);
    }

    #[test]
    fn partial_null_branch() {
        // diag(0, s - 0.25)
        let p = MatrixPolynomial::new(vec![crate::linalg::diag_real(&[0.0, -0.25]), crate::linalg::diag_real(&[0.0, 1.0])])
            .unwrap();
        let r = rank_drops(&p, (0.0, 1.0), &RootOptions::default()).unwrap();
        assert_eq!(r.generic_nullity, 1);
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0].s0 - 0.25).abs() < 1e-10);
        assert_eq!(r.points[0].nullity, 2);
    }

    #[test]
    fn non_finite_is_resolution_error() {
        assert!(matches!(
            rank_drops(&scalar(&[f64::NAN, 1.0]), (0.0, 1.0), &RootOptions::default()),
            Err(Error::Resolution(_))
        ));
    }
}
