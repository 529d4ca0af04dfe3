//! Laplace–Beltrami eigenbasis: cotangent stiffness, lumped mass, and a
//! shift-invert subspace solver for meshes too large for a dense solve.

use std::collections::{BTreeMap, VecDeque};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;

/// Lower clamp on each cotangent edge weight.
pub const MIN_COTAN_WEIGHT: f64 = 1e-8;
/// Components up to this many vertices use a dense eigensolve.
pub const DENSE_LIMIT: usize = 400;
const START_SEED: u64 = 0x1b_5eed;
const MAX_ITERATIONS: usize = 400;
const RESIDUAL_TOL: f64 = 1e-9;

/// The `k` smallest eigenpairs of `L φ = λ M φ`, mass-orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvalues: Vec<f64>,
    /// Row-major, `k` coefficients per vertex.
    coefficients: Vec<f64>,
    mass: Vec<f64>,
}

impl SpectralBasis {
    pub fn k(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.mass.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Coefficients of vertex `v`, one per eigenfunction.
    pub fn row(&self, v: usize) -> &[f64] {
        let k = self.k();
        &self.coefficients[v * k..(v + 1) * k]
    }

    /// Eigenfunction `j` sampled at every vertex.
    pub fn eigenfunction(&self, j: usize) -> Vec<f64> {
        (0..self.vertex_count()).map(|v| self.row(v)[j]).collect()
    }

    /// `Φᵀ M Φ`.
    pub fn gram(&self) -> DMatrix<f64> {
        let (n, k) = (self.vertex_count(), self.k());
        let phi = DMatrix::from_row_slice(n, k, &self.coefficients);
        let mphi = DMatrix::from_fn(n, k, |i, j| self.mass[i] * phi[(i, j)]);
        phi.transpose() * mphi
    }

    /// Largest absolute entry of `Φᵀ M Φ − I`.
    pub fn gram_deviation(&self) -> f64 {
        let g = self.gram();
        (g - DMatrix::identity(self.k(), self.k())).abs().max()
    }

    /// Keeps the first `k` eigenpairs.
    pub fn truncated(&self, k: usize) -> SpectralBasis {
        let k = k.min(self.k());
        SpectralBasis {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            coefficients: (0..self.vertex_count())
                .flat_map(|v| self.row(v)[..k].to_vec())
                .collect(),
            mass: self.mass.clone(),
        }
    }

    const MAGIC: &'static [u8; 8] = b"SSLBASE1";

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out =
            Vec::with_capacity(24 + 8 * (self.k() + self.mass.len() + self.coefficients.len()));
        out.extend_from_slice(Self::MAGIC);
        out.extend_from_slice(&(self.vertex_count() as u64).to_le_bytes());
        out.extend_from_slice(&(self.k() as u64).to_le_bytes());
        for x in self
            .eigenvalues
            .iter()
            .chain(&self.mass)
            .chain(&self.coefficients)
        {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::parse("spectral cache", m);
        if bytes.len() < 24 || &bytes[..8] != Self::MAGIC {
            return Err(bad("missing header"));
        }
        let word =
            |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes")) as usize;
        let (n, k) = (word(8), word(16));
        let total = k
            .checked_add(n)
            .and_then(|a| n.checked_mul(k).and_then(|b| a.checked_add(b)));
        if total.and_then(|t| t.checked_mul(8)).map(|t| t + 24) != Some(bytes.len()) {
            return Err(bad("length does not match header"));
        }
        let floats: Vec<f64> = bytes[24..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(SpectralBasis {
            eigenvalues: floats[..k].to_vec(),
            mass: floats[k..k + n].to_vec(),
            coefficients: floats[k + n..].to_vec(),
        })
    }
}

/// Symmetric cotangent edge weights `(cot α + cot β) / 2`, clamped below.
pub fn cotangent_weights(mesh: &TriangleMesh) -> BTreeMap<(usize, usize), f64> {
    let mut w: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for face in &mesh.faces {
        for k in 0..3 {
            let (i, j, o) = (face[k], face[(k + 1) % 3], face[(k + 2) % 3]);
            let a = mesh.vertices[i] - mesh.vertices[o];
            let b = mesh.vertices[j] - mesh.vertices[o];
            let cross = a.cross(&b).norm();
            let cot = if cross > 0.0 { a.dot(&b) / cross } else { 0.0 };
            *w.entry((i.min(j), i.max(j))).or_insert(0.0) += 0.5 * cot;
        }
    }
    for v in w.values_mut() {
        *v = v.max(MIN_COTAN_WEIGHT);
    }
    w
}

/// Lumped mass: one third of the incident triangle area per vertex.
pub fn lumped_mass(mesh: &TriangleMesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.vertex_count()];
    for (f, face) in mesh.faces.iter().enumerate() {
        let a = mesh.face_area(f) / 3.0;
        for &v in face {
            m[v] += a;
        }
    }
    m
}

/// Symmetric sparse matrix as sorted per-row `(column, value)` lists.
struct SparseSym {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseSym {
    fn n(&self) -> usize {
        self.rows.len()
    }

    fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (i, row) in self.rows.iter().enumerate() {
            y[i] = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
    }

    fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for c in 0..x.ncols() {
            let col = x.column(c);
            for (i, row) in self.rows.iter().enumerate() {
                out[(i, c)] = row.iter().map(|&(j, a)| a * col[j]).sum();
            }
        }
        out
    }

    fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n(), self.n());
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                d[(i, j)] = a;
            }
        }
        d
    }
}

/// Computes the `k` smallest Laplace–Beltrami eigenpairs.
///
/// Each connected component is solved on its own; the eigenpairs of all
/// components are then merged in ascending order, so every eigenfunction is
/// supported on a single component and the basis stays mass-orthonormal.
pub fn laplace_beltrami_basis(mesh: &TriangleMesh, k: usize) -> Result<SpectralBasis> {
    mesh.check()?;
    let n = mesh.vertex_count();
    let mass = lumped_mass(mesh);
    let available = mass.iter().filter(|&&m| m > 0.0).count();
    if k > available || k == 0 {
        return Err(Error::KTooLarge {
            requested: k,
            available,
        });
    }
    let weights = cotangent_weights(mesh);
    let (component, count) = mesh.vertex_components();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
    for v in 0..n {
        if mass[v] > 0.0 {
            members[component[v]].push(v);
        }
    }
    let mut local = vec![usize::MAX; n];
    for verts in &members {
        for (i, &v) in verts.iter().enumerate() {
            local[v] = i;
        }
    }
    let mut rows: Vec<Vec<Vec<(usize, f64)>>> =
        members.iter().map(|m| vec![Vec::new(); m.len()]).collect();
    let mut diag = vec![0.0; n];
    for (&(i, j), &w) in &weights {
        let c = component[i];
        let (li, lj) = (local[i], local[j]);
        let s = 1.0 / (mass[i] * mass[j]).sqrt();
        rows[c][li].push((lj, -w * s));
        rows[c][lj].push((li, -w * s));
        diag[i] += w;
        diag[j] += w;
    }

    // (eigenvalue, component, local eigenvector in the symmetric scaling)
    let mut pairs: Vec<(f64, usize, Vec<f64>)> = Vec::new();
    for (c, verts) in members.iter().enumerate() {
        if verts.is_empty() {
            continue;
        }
        for (li, &v) in verts.iter().enumerate() {
            rows[c][li].push((li, diag[v] / mass[v]));
            rows[c][li].sort_by_key(|e| e.0);
        }
        let a = SparseSym {
            rows: std::mem::take(&mut rows[c]),
        };
        let area: f64 = verts.iter().map(|&v| mass[v]).sum();
        let kc = k.min(verts.len());
        let (vals, vecs) = if verts.len() <= DENSE_LIMIT {
            dense_smallest(&a, kc)?
        } else {
            shift_invert_smallest(&a, kc, 1e-2 / area)?
        };
        for (j, val) in vals.into_iter().enumerate() {
            pairs.push((val, c, vecs.column(j).iter().copied().collect()));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    pairs.truncate(k);

    let mut coefficients = vec![0.0; n * k];
    let mut eigenvalues = Vec::with_capacity(k);
    for (j, (val, c, psi)) in pairs.into_iter().enumerate() {
        eigenvalues.push(val.max(0.0));
        let mut phi: Vec<f64> = members[c]
            .iter()
            .zip(&psi)
            .map(|(&v, &x)| x / mass[v].sqrt())
            .collect();
        fix_sign(&mut phi);
        for (&v, x) in members[c].iter().zip(phi) {
            coefficients[v * k + j] = x;
        }
    }
    Ok(SpectralBasis {
        eigenvalues,
        coefficients,
        mass,
    })
}

/// Makes the largest-magnitude entry positive (first index on ties).
fn fix_sign(x: &mut [f64]) {
    let mut best = 0;
    for i in 1..x.len() {
        if x[i].abs() > x[best].abs() * (1.0 + 1e-9) {
            best = i;
        }
    }
    if x[best] < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

fn sorted_eigen(h: DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = h.nrows();
    let eig = SymmetricEigen::try_new(h, 1e-14, 0)
        .ok_or_else(|| Error::NumericalFailure("dense eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, k, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((vals, vecs))
}

fn dense_smallest(a: &SparseSym, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    sorted_eigen(a.to_dense(), k)
}

/// Subspace iteration on `(A + σI)⁻¹` with Rayleigh–Ritz on `A`.
fn shift_invert_smallest(a: &SparseSym, k: usize, sigma: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = a.n();
    let p = n.min((2 * k).max(k + 16));
    let perm = reverse_cuthill_mckee(a);
    let mut inv = vec![0; n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let chol = Skyline::factor(a, &perm, &inv, sigma)?;

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut x = DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng));
    let mut ax = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        let y = solve_columns(&chol, &perm, &inv, &x);
        let q = y.qr().q();
        let aq = a.mul_mat(&q);
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let (theta, v) = sorted_eigen(h, p)?;
        x = &q * &v;
        let scale = theta[k - 1].abs().max(sigma);
        let mut converged = true;
        for j in 0..k {
            let col: Vec<f64> = x.column(j).iter().copied().collect();
            a.mul_vec(&col, &mut ax);
            let r: f64 = ax
                .iter()
                .zip(&col)
                .map(|(y, x)| (y - theta[j] * x).powi(2))
                .sum::<f64>()
                .sqrt();
            if r > RESIDUAL_TOL * scale {
                converged = false;
                break;
            }
        }
        if converged {
            return Ok((theta[..k].to_vec(), x.columns(0, k).into_owned()));
        }
    }
    Err(Error::NumericalFailure(format!(
        "subspace iteration did not converge in {MAX_ITERATIONS} iterations"
    )))
}

fn solve_columns(chol: &Skyline, perm: &[usize], inv: &[usize], x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let solve = |c: usize| -> Vec<f64> {
        let mut b: Vec<f64> = perm.iter().map(|&old| x[(old, c)]).collect();
        chol.solve(&mut b);
        (0..n).map(|old| b[inv[old]]).collect()
    };
    #[cfg(feature = "parallel")]
    let cols: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..x.ncols()).into_par_iter().map(solve).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cols: Vec<Vec<f64>> = (0..x.ncols()).map(solve).collect();
    DMatrix::from_fn(n, x.ncols(), |r, c| cols[c][r])
}

/// Reverse Cuthill–McKee ordering of a connected sparsity pattern.
fn reverse_cuthill_mckee(a: &SparseSym) -> Vec<usize> {
    let n = a.n();
    let degree = |v: usize| a.rows[v].len();
    let bfs_levels = |start: usize| -> Vec<usize> {
        let mut level = vec![usize::MAX; n];
        level[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &(w, _) in &a.rows[v] {
                if level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        level
    };
    let mut start = (0..n).min_by_key(|&v| (degree(v), v)).unwrap_or(0);
    let mut depth = 0;
    for _ in 0..4 {
        let level = bfs_levels(start);
        let far = level
            .iter()
            .copied()
            .filter(|&l| l != usize::MAX)
            .max()
            .unwrap_or(0);
        if far <= depth {
            break;
        }
        depth = far;
        start = (0..n)
            .filter(|&v| level[v] == far)
            .min_by_key(|&v| (degree(v), v))
            .expect("farthest level is nonempty");
    }
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for root in std::iter::once(start).chain(0..n) {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = a.rows[v]
                .iter()
                .map(|e| e.0)
                .filter(|&w| !seen[w])
                .collect();
            next.sort_by_key(|&w| (degree(w), w));
            for w in next {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// Envelope (skyline) Cholesky factor of `P (A + σI) Pᵀ`.
struct Skyline {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl Skyline {
    fn factor(a: &SparseSym, perm: &[usize], inv: &[usize], sigma: f64) -> Result<Self> {
        let n = a.n();
        let mut first: Vec<usize> = (0..n).collect();
        for (new, &old) in perm.iter().enumerate() {
            for &(j, _) in &a.rows[old] {
                first[new] = first[new].min(inv[j]);
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            start.push(total);
            total += i - first[i] + 1;
        }
        start.push(total);
        let mut data = vec![0.0; total];
        for (new, &old) in perm.iter().enumerate() {
            for &(j, v) in &a.rows[old] {
                let col = inv[j];
                if col <= new {
                    data[start[new] + col - first[new]] += v;
                }
            }
            data[start[new] + new - first[new]] += sigma;
        }
        for i in 0..n {
            for j in first[i]..=i {
                let lo = first[i].max(first[j]);
                let ri = start[i] + lo - first[i];
                let rj = start[j] + lo - first[j];
                let len = j - lo;
                let dot: f64 = data[ri..ri + len]
                    .iter()
                    .zip(&data[rj..rj + len])
                    .map(|(x, y)| x * y)
                    .sum();
                let idx = start[i] + j - first[i];
                let s = data[idx] - dot;
                if j < i {
                    data[idx] = s / data[start[j + 1] - 1];
                } else if s > 0.0 && s.is_finite() {
                    data[idx] = s.sqrt();
                } else {
                    return Err(Error::NumericalFailure(format!(
                        "shifted Laplacian is not positive definite at row {i}"
                    )));
                }
            }
        }
        Ok(Skyline { first, start, data })
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let off = &b[self.first[i]..i];
            let dot: f64 = row[..off.len()].iter().zip(off).map(|(x, y)| x * y).sum();
            b[i] = (b[i] - dot) / row[row.len() - 1];
        }
        for i in (0..n).rev() {
            let row = &self.data[self.start[i]..self.start[i + 1]];
            b[i] /= row[row.len() - 1];
            let xi = b[i];
            for (j, l) in (self.first[i]..i).zip(row) {
                b[j] -= l * xi;
            }
        }
    }
}

/// Cache file for a mesh and `k`, keyed by the SHA-256 of mesh content.
pub fn cache_path(dir: &Path, mesh: &TriangleMesh, k: usize) -> PathBuf {
    let mut h = Sha256::new();
    h.update(mesh.content_bytes());
    h.update((k as u64).to_le_bytes());
    dir.join(format!("{}.lbbasis", hex::encode(h.finalize())))
}

/// Loads the basis from the sidecar cache or computes and stores it.
pub fn cached_basis(mesh: &TriangleMesh, k: usize, dir: &Path) -> Result<SpectralBasis> {
    let path = cache_path(dir, mesh, k);
    if let Ok(bytes) = std::fs::read(&path) {
        match SpectralBasis::from_bytes(&bytes) {
            Ok(b) if b.vertex_count() == mesh.vertex_count() && b.k() == k => return Ok(b),
            _ => log::warn!("ignoring unreadable spectral cache {}", path.display()),
        }
    }
    let basis = laplace_beltrami_basis(mesh, k)?;
    std::fs::create_dir_all(dir)?;
    crate::io::write_atomic(&path, &basis.to_bytes())?;
    Ok(basis)
}
