//! Discrete Neumann-to-Dirichlet operator D(k) = −(½I − K)⁻¹ S, its spectrum
//! in the area-weighted inner product, and eigenpair tracking in k.

use std::f64::consts::PI;
use std::io::Write;

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{c64, Mat, MatRef};

use crate::bie::{assemble_layers, AssemblyOptions, ValidityWindow, Wavenumber};
use crate::error::{Error, Result};
use crate::geometry::SurfaceMesh;
use crate::linalg::{condition_estimate, norm_fro};

const ZERO: c64 = c64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NtdOptions {
    pub assembly: AssemblyOptions,
    /// Largest acceptable 1-norm condition estimate of ½I − K.
    pub max_condition: f64,
}

impl Default for NtdOptions {
    fn default() -> Self {
        Self {
            assembly: AssemblyOptions::default(),
            max_condition: 1e8,
        }
    }
}

impl NtdOptions {
    pub fn with_window(window: ValidityWindow) -> Self {
        let mut o = Self::default();
        o.assembly.window = window;
        o
    }
}

/// Assembled trace system at one wavenumber: S, A = ½I − K and the LU of A.
/// D is applied without being formed.
pub struct TraceSystem {
    pub(crate) s: Mat<c64>,
    pub(crate) a: Mat<c64>,
    lu_a: PartialPivLu<c64>,
    condition: f64,
    k: Wavenumber,
    weights: Vec<f64>,
}

impl TraceSystem {
    pub fn new(mesh: &SurfaceMesh, k: Wavenumber, options: &NtdOptions) -> Result<Self> {
        options.assembly.window.check(k, mesh.characteristic_diameter())?;
        let layers = assemble_layers(mesh, k, &options.assembly)?;
        let n = mesh.panel_count();
        let mut a = layers.double;
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] = -a[(i, j)];
            }
            a[(j, j)] += c64::new(0.5, 0.0);
        }
        let lu_a = a.partial_piv_lu();
        let condition = condition_estimate(&a, &lu_a);
        if !(condition < options.max_condition) {
            return Err(Error::IllConditioned {
                system: "½I − K",
                condition,
            });
        }
        Ok(Self {
            s: layers.single,
            a,
            lu_a,
            condition,
            k,
            weights: mesh.weights().to_vec(),
        })
    }

    pub fn wavenumber(&self) -> Wavenumber {
        self.k
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn single_layer(&self) -> MatRef<'_, c64> {
        self.s.as_ref()
    }

    /// ½I − K.
    pub fn trace_operator(&self) -> MatRef<'_, c64> {
        self.a.as_ref()
    }

    /// D·X for a block of columns.
    pub fn apply_d(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        let sx = &self.s * x;
        let mut y = self.lu_a.solve(&sx);
        y *= faer::Scale(c64::new(-1.0, 0.0));
        y
    }

    /// A⁻¹·X.
    pub fn solve_trace(&self, x: MatRef<'_, c64>) -> Mat<c64> {
        self.lu_a.solve(x)
    }

    /// Dense D(k).
    pub fn ntd_matrix(&self) -> NtDMatrix {
        let n = self.s.nrows();
        let mut d = self.lu_a.solve(&self.s);
        for j in 0..n {
            for i in 0..n {
                d[(i, j)] = -d[(i, j)];
            }
        }
        NtDMatrix {
            d,
            k: self.k,
            weights: self.weights.clone(),
            condition: self.condition,
        }
    }
}

/// Dense D(k) together with the quadrature weights defining its inner product.
#[derive(Debug, Clone)]
pub struct NtDMatrix {
    pub d: Mat<c64>,
    pub k: Wavenumber,
    pub weights: Vec<f64>,
    /// Condition estimate of the trace system that produced D.
    pub condition: f64,
}

pub fn build_ntd(mesh: &SurfaceMesh, k: Wavenumber) -> Result<NtDMatrix> {
    build_ntd_with(mesh, k, &NtdOptions::default())
}

pub fn build_ntd_with(mesh: &SurfaceMesh, k: Wavenumber, options: &NtdOptions) -> Result<NtDMatrix> {
    Ok(TraceSystem::new(mesh, k, options)?.ntd_matrix())
}

impl NtDMatrix {
    pub fn size(&self) -> usize {
        self.d.nrows()
    }

    /// ‖WD − (WD)ᵀ‖_F / ‖WD‖_F.
    pub fn weighted_asymmetry(&self) -> f64 {
        let n = self.size();
        let w = &self.weights;
        let wd = Mat::<c64>::from_fn(n, n, |i, j| self.d[(i, j)] * w[i]);
        let diff = Mat::<c64>::from_fn(n, n, |i, j| wd[(i, j)] - wd[(j, i)]);
        norm_fro(diff.as_ref()) / norm_fro(wd.as_ref())
    }
}

/// Eigenvalue ς_j with its weighted-normalized eigenfunction φ_j and the
/// projection c_j = Σ w_i φ_{j,i}.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub j: usize,
    pub value: c64,
    pub vector: Vec<c64>,
    pub c: c64,
    /// ‖Dφ − ςφ‖ in the weighted norm.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub k: Wavenumber,
    pub pairs: Vec<EigenPair>,
    pub weights: Vec<f64>,
}

impl SpectrumResult {
    pub fn values(&self) -> Vec<c64> {
        self.pairs.iter().map(|p| p.value).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// CSV with columns j, re_sigma, im_sigma, re_c, im_c, residual.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "j,re_sigma,im_sigma,re_c,im_c,residual")?;
        for p in &self.pairs {
            writeln!(
                out,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.3e}",
                p.j, p.value.re, p.value.im, p.c.re, p.c.im, p.residual
            )?;
        }
        Ok(())
    }
}

/// Full eigendecomposition of D through the similarity W^{1/2} D W^{−1/2}.
///
/// At k = 0 the pairs are sorted by ascending real part and the
/// eigenfunctions of real eigenvalues are made real with Σ w φ ≥ 0. At other k the order is
/// only a stable listing; families across k come from [`track`].
pub fn spectrum(d: &NtDMatrix) -> Result<SpectrumResult> {
    let n = d.size();
    let w = &d.weights;
    let sw: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let at_zero = d.k.value() == ZERO;

    let (values, vectors): (Vec<c64>, Vec<Vec<c64>>) = if at_zero {
        let b = Mat::<f64>::from_fn(n, n, |i, j| d.d[(i, j)].re * sw[i] / sw[j]);
        let evd = b.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        collect_eigen(evd.S().column_vector().iter().copied(), evd.U(), &sw)
    } else {
        let b = Mat::<c64>::from_fn(n, n, |i, j| d.d[(i, j)] * (sw[i] / sw[j]));
        let evd = b.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        collect_eigen(evd.S().column_vector().iter().copied(), evd.U(), &sw)
    };

    let mut pairs: Vec<EigenPair> = values
        .into_iter()
        .zip(vectors)
        .map(|(value, vector)| {
            let mut vector = normalize_weighted(w, vector);
            // A real D can still produce conjugate pairs from its small
            // asymmetry; those keep their complex eigenvectors.
            if at_zero && value.im == 0.0 {
                make_real(&mut vector);
            } else {
                fix_phase(&mut vector);
            }
            let c: c64 = w.iter().zip(&vector).map(|(w, v)| v * *w).sum();
            EigenPair {
                j: 0,
                value,
                vector,
                c,
                residual: 0.0,
            }
        })
        .collect();
    pairs.sort_by(|a, b| {
        a.value
            .re
            .total_cmp(&b.value.re)
            .then(a.value.im.total_cmp(&b.value.im))
    });

    // Residuals in one blocked product.
    let v = Mat::<c64>::from_fn(n, pairs.len(), |i, j| pairs[j].vector[i]);
    let dv = &d.d * &v;
    for (j, p) in pairs.iter_mut().enumerate() {
        p.j = j;
        p.residual = (0..n)
            .map(|i| w[i] * (dv[(i, j)] - p.value * p.vector[i]).norm_sqr())
            .sum::<f64>()
            .sqrt();
    }
    Ok(SpectrumResult {
        k: d.k,
        pairs,
        weights: w.clone(),
    })
}

fn collect_eigen(values: impl Iterator<Item = c64>, u: MatRef<'_, c64>, sw: &[f64]) -> (Vec<c64>, Vec<Vec<c64>>) {
    let values: Vec<c64> = values.collect();
    let vectors = (0..u.ncols())
        .map(|j| (0..u.nrows()).map(|i| u[(i, j)] / sw[i]).collect())
        .collect();
    (values, vectors)
}

pub(crate) fn normalize_weighted(w: &[f64], mut v: Vec<c64>) -> Vec<c64> {
    let norm = crate::linalg::weighted_norm(w, &v);
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    v
}

fn largest_component(v: &[c64]) -> usize {
    v.iter()
        .enumerate()
        .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Rotate so the largest component is real positive.
fn fix_phase(v: &mut [c64]) {
    let p = v[largest_component(v)];
    if p.norm() > 0.0 {
        let phase = p.conj() / p.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// Real representative with the sign rule: Σφ ≥ 0 when the sum is not
/// negligible, otherwise the largest component positive.
fn make_real(v: &mut [c64]) {
    fix_phase(v);
    for x in v.iter_mut() {
        *x = c64::new(x.re, 0.0);
    }
    let sum: f64 = v.iter().map(|x| x.re).sum();
    let scale: f64 = v.iter().map(|x| x.re.abs()).sum();
    let flip = if sum.abs() > 1e-8 * scale {
        sum < 0.0
    } else {
        v[largest_component(v)].re < 0.0
    };
    if flip {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

pub fn coefficients(spec: &SpectrumResult) -> Vec<c64> {
    spec.pairs.iter().map(|p| p.c).collect()
}

/// Groups of consecutive (sorted) eigenvalues closer than `rel_gap` relative
/// to their magnitude; returns index lists into `spec.pairs`.
pub fn clusters(spec: &SpectrumResult, rel_gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, p) in spec.pairs.iter().enumerate() {
        match out.last_mut() {
            Some(last) => {
                let prev = spec.pairs[*last.last().expect("nonempty cluster")].value;
                let scale = prev.norm().max(p.value.norm());
                if (p.value - prev).norm() <= rel_gap * scale {
                    last.push(i);
                } else {
                    out.push(vec![i]);
                }
            }
            None => out.push(vec![i]),
        }
    }
    out
}

/// Weighted overlap |⟨a, b⟩_w| of two normalized boundary fields.
pub fn overlap(w: &[f64], a: &[c64], b: &[c64]) -> f64 {
    crate::linalg::weighted_dot(w, a, b).norm()
}

/// Match eigenpairs of `a` to eigenpairs of `b` by weighted overlap.
/// Returns `perm` with `a.pairs[i]` ↔ `b.pairs[perm[i]]`.
///
/// Within a near-degenerate cluster of `a`, individual vectors are only
/// defined up to rotation; those are accepted when the projection onto the
/// matched vectors of `b` retains at least 0.9 of the subspace.
pub fn track(a: &SpectrumResult, b: &SpectrumResult) -> Result<Vec<usize>> {
    let n = a.len();
    if b.len() != n {
        return Err(Error::InvalidArgument("spectra have different sizes".into()));
    }
    let w = &a.weights;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, pa) in a.pairs.iter().enumerate() {
        for (j, pb) in b.pairs.iter().enumerate() {
            let o = overlap(w, &pa.vector, &pb.vector);
            if o > 0.05 {
                candidates.push((o, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.total_cmp(&x.0));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in candidates {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    // Leftovers (tiny overlaps everywhere) take the nearest free eigenvalue.
    for (i, slot) in perm.iter_mut().enumerate() {
        if *slot == usize::MAX {
            let j = (0..n)
                .filter(|&j| !used[j])
                .min_by(|&x, &y| {
                    (b.pairs[x].value - a.pairs[i].value)
                        .norm()
                        .total_cmp(&(b.pairs[y].value - a.pairs[i].value).norm())
                })
                .expect("a free slot remains");
            *slot = j;
            used[j] = true;
        }
    }
    for cluster in clusters(a, 0.05) {
        let targets: Vec<&[c64]> = cluster.iter().map(|&i| b.pairs[perm[i]].vector.as_slice()).collect();
        for &i in &cluster {
            let captured: f64 = targets
                .iter()
                .map(|t| crate::linalg::weighted_dot(w, t, &a.pairs[i].vector).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if captured < 0.9 && a.pairs[i].value.norm() > 1e-3 * a.pairs[0].value.norm() {
                return Err(Error::TrackingAmbiguity {
                    mode: i,
                    overlap: captured,
                });
            }
        }
    }
    Ok(perm)
}

/// One eigenpair (or an invariant subspace) followed in k without forming D.
#[derive(Debug, Clone)]
pub struct TrackedSubspace {
    pub k: Wavenumber,
    pub values: Vec<c64>,
    /// Ritz vectors, weighted-normalized, in the same order as `values`.
    pub vectors: Vec<Vec<c64>>,
    pub residual: f64,
}

impl TrackedSubspace {
    pub fn from_pairs(spec: &SpectrumResult, indices: &[usize]) -> Self {
        Self {
            k: spec.k,
            values: indices.iter().map(|&i| spec.pairs[i].value).collect(),
            vectors: indices.iter().map(|&i| spec.pairs[i].vector.clone()).collect(),
            residual: indices.iter().map(|&i| spec.pairs[i].residual).fold(0.0, f64::max),
        }
    }

    pub fn mean(&self) -> c64 {
        self.values.iter().sum::<c64>() / self.values.len() as f64
    }
}

/// Weighted modified Gram–Schmidt, applied twice.
fn orthonormalize(w: &[f64], mut v: Mat<c64>) -> Mat<c64> {
    let (n, m) = (v.nrows(), v.ncols());
    for _ in 0..2 {
        for j in 0..m {
            for p in 0..j {
                let mut dot = ZERO;
                for i in 0..n {
                    dot += v[(i, p)].conj() * v[(i, j)] * w[i];
                }
                for i in 0..n {
                    let t = v[(i, p)] * dot;
                    v[(i, j)] -= t;
                }
            }
            let norm = (0..n).map(|i| w[i] * v[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..n {
                v[(i, j)] /= norm;
            }
        }
    }
    v
}

/// Block shifted inverse iteration on D with Rayleigh–Ritz extraction.
///
/// Starting from `start` (typically the subspace at a nearby k), iterates
/// X ← (S + σA)⁻¹ A X with σ the current Ritz mean, until the weighted
/// relative residual drops below `tol`.
pub fn follow_subspace(system: &TraceSystem, start: &TrackedSubspace, tol: f64) -> Result<TrackedSubspace> {
    let w = system.weights();
    let n = w.len();
    let m = start.vectors.len();
    let mut v = orthonormalize(w, Mat::from_fn(n, m, |i, j| start.vectors[j][i]));
    let mut shift = start.mean();
    let mut lu: Option<PartialPivLu<c64>> = None;
    let mut last_residual = f64::INFINITY;
    let max_iter = 60;
    for iter in 0..max_iter {
        let dv = system.apply_d(v.as_ref());
        // Rayleigh–Ritz on the current block.
        let h = Mat::<c64>::from_fn(m, m, |p, q| (0..n).map(|i| v[(i, p)].conj() * dv[(i, q)] * w[i]).sum());
        let (theta, y) = small_eigen(&h)?;
        let x = &v * &y;
        let dx = &dv * &y;
        let mut residual: f64 = 0.0;
        for q in 0..m {
            let r = (0..n)
                .map(|i| w[i] * (dx[(i, q)] - theta[q] * x[(i, q)]).norm_sqr())
                .sum::<f64>()
                .sqrt();
            residual = residual.max(r / theta[q].norm().max(f64::MIN_POSITIVE));
        }
        if residual < tol {
            let vectors = (0..m)
                .map(|q| normalize_weighted(w, (0..n).map(|i| x[(i, q)]).collect()))
                .collect();
            return Ok(TrackedSubspace {
                k: system.wavenumber(),
                values: theta,
                vectors,
                residual,
            });
        }
        // Refresh the shift when progress stalls.
        let mean = theta.iter().sum::<c64>() / m as f64;
        if lu.is_none() || (iter % 4 == 0 && residual > 0.1 * last_residual) {
            shift = if iter == 0 { shift } else { mean };
            let mut pencil = system.s.clone();
            for j in 0..n {
                for i in 0..n {
                    pencil[(i, j)] += shift * system.a[(i, j)];
                }
            }
            lu = Some(pencil.partial_piv_lu());
        }
        last_residual = residual;
        let av = &system.a * &v;
        let next = lu.as_ref().expect("factorized").solve(&av);
        v = orthonormalize(w, next);
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Eigenvalues and eigenvectors of a small dense matrix.
fn small_eigen(h: &Mat<c64>) -> Result<(Vec<c64>, Mat<c64>)> {
    let evd = h.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let values = evd.S().column_vector().iter().copied().collect();
    Ok((values, evd.U().to_owned()))
}

/// Follow a subspace from its current k to `k_target` in `steps` equal steps,
/// reordering the Ritz pairs at each step by overlap with the previous ones.
pub fn follow_path(
    mesh: &SurfaceMesh,
    start: &TrackedSubspace,
    k_target: Wavenumber,
    steps: usize,
    options: &NtdOptions,
) -> Result<TrackedSubspace> {
    let mut current = start.clone();
    let k0 = start.k.value();
    for s in 1..=steps.max(1) {
        let k = Wavenumber::new(k0 + (k_target.value() - k0) * (s as f64 / steps.max(1) as f64));
        let system = TraceSystem::new(mesh, k, options)?;
        let next = follow_subspace(&system, &current, 1e-11)?;
        current = align(&current, next, mesh.weights())?;
    }
    Ok(current)
}

/// Reorder `next` so that its i-th vector continues the i-th vector of
/// `prev`, with phases aligned.
fn align(prev: &TrackedSubspace, mut next: TrackedSubspace, w: &[f64]) -> Result<TrackedSubspace> {
    let m = prev.vectors.len();
    let mut order = vec![usize::MAX; m];
    let mut used = vec![false; m];
    let mut cand: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..m {
        for j in 0..m {
            cand.push((overlap(w, &prev.vectors[i], &next.vectors[j]), i, j));
        }
    }
    cand.sort_by(|a, b| b.0.total_cmp(&a.0));
    for (_, i, j) in cand {
        if order[i] == usize::MAX && !used[j] {
            order[i] = j;
            used[j] = true;
        }
    }
    let values = order.iter().map(|&j| next.values[j]).collect();
    let mut vectors: Vec<Vec<c64>> = order.iter().map(|&j| std::mem::take(&mut next.vectors[j])).collect();
    for (i, v) in vectors.iter_mut().enumerate() {
        let d = crate::linalg::weighted_dot(w, &prev.vectors[i], v);
        if m == 1 && d.norm() < 0.9 {
            return Err(Error::TrackingAmbiguity {
                mode: i,
                overlap: d.norm(),
            });
        }
        if d.norm() > 0.0 {
            let phase = d.conj() / d.norm();
            for x in v.iter_mut() {
                *x *= phase;
            }
        }
    }
    Ok(TrackedSubspace {
        k: next.k,
        values,
        vectors,
        residual: next.residual,
    })
}

/// Central-difference derivative of eigenvalues at k = 0.
#[derive(Debug, Clone)]
pub struct EigenDerivative {
    /// Indices (into the k = 0 spectrum) of the cluster containing the mode.
    pub cluster: Vec<usize>,
    /// d/dk of the cluster mean.
    pub mean: c64,
    /// Per-branch derivatives, aligned with `cluster`.
    pub branches: Vec<c64>,
}

pub fn eigenvalue_derivative_at_zero(
    mesh: &SurfaceMesh,
    spec0: &SpectrumResult,
    j: usize,
    h: f64,
    options: &NtdOptions,
) -> Result<EigenDerivative> {
    if spec0.k.value() != ZERO {
        return Err(Error::InvalidArgument("spectrum must be computed at k = 0".into()));
    }
    let cluster = clusters(spec0, 0.05)
        .into_iter()
        .find(|c| c.contains(&j))
        .ok_or_else(|| Error::InvalidArgument(format!("mode {j} out of range")))?;
    let start = TrackedSubspace::from_pairs(spec0, &cluster);
    let plus = follow_path(mesh, &start, Wavenumber::real(h), 1, options)?;
    let minus = follow_path(mesh, &start, Wavenumber::real(-h), 1, options)?;
    let branches: Vec<c64> = plus
        .values
        .iter()
        .zip(&minus.values)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect();
    let mean = (plus.mean() - minus.mean()) / (2.0 * h);
    Ok(EigenDerivative {
        cluster,
        mean,
        branches,
    })
}

/// −i c²/4π.
pub fn derivative_formula(c: c64) -> c64 {
    c64::new(0.0, -1.0) * c * c / (4.0 * PI)
}

#[derive(Debug, Clone)]
pub struct HalfStripReport {
    pub min_im_inverse: f64,
    pub max_re_inverse: f64,
    pub violating: Vec<usize>,
    /// Modes excluded by the noise floor |ς| < 10⁻³·max|ς|.
    pub excluded: usize,
}

/// Checks 0 < Im(1/ς_j) (to −eps) for all modes above the noise floor.
pub fn half_strip_check(spec: &SpectrumResult, eps: f64) -> HalfStripReport {
    let top = spec.pairs.iter().map(|p| p.value.norm()).fold(0.0, f64::max);
    let mut report = HalfStripReport {
        min_im_inverse: f64::INFINITY,
        max_re_inverse: f64::NEG_INFINITY,
        violating: Vec::new(),
        excluded: 0,
    };
    for p in &spec.pairs {
        if p.value.norm() < 1e-3 * top {
            report.excluded += 1;
            continue;
        }
        let inv = 1.0 / p.value;
        report.min_im_inverse = report.min_im_inverse.min(inv.im);
        report.max_re_inverse = report.max_re_inverse.max(inv.re);
        if inv.im <= -eps {
            report.violating.push(p.j);
        }
    }
    report
}
