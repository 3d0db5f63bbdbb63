//! Interior eigenpairs of the (large, sparse, real) mode operator.
//!
//! The guided modes are the largest eigenvalues β² of the discretized wave
//! operator, separated from the discretization continuum by the guided-mode
//! bracket. They are computed with Chebyshev-filtered subspace iteration: a
//! degree-m Chebyshev polynomial mapped onto the damping interval
//! `[λ_min, damp_hi]` suppresses everything below the bracket while the guided
//! eigenvalues above it grow like cosh(m·acosh(ξ)), after which Rayleigh-Ritz
//! extracts the eigenpairs. This targets the same interior-of-the-top spectrum
//! a shift-invert Krylov scheme would, without needing a sparse factorization.
//!
//! The operator is mildly non-symmetric (the permittivity averaging of the
//! divergence term), so the projected problem is solved with a dense
//! non-symmetric eigendecomposition; spectra of interest are real and
//! spurious complex Ritz values are simply never reported as converged.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Compressed sparse rows with u32 column indices.
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Build from per-row entry lists; duplicate columns are summed.
    pub fn from_row_entries(mut rows: Vec<Vec<(u32, f64)>>) -> Csr {
        let n = rows.len();
        rows.par_iter_mut().for_each(|r| {
            r.sort_unstable_by_key(|e| e.0);
            let mut w = 0;
            for i in 0..r.len() {
                if w > 0 && r[w - 1].0 == r[i].0 {
                    r[w - 1].1 += r[i].1;
                } else {
                    r[w] = r[i];
                    w += 1;
                }
            }
            r.truncate(w);
        });
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut nnz = 0;
        for r in &rows {
            nnz += r.len();
            row_ptr.push(nnz);
        }
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for r in &rows {
            for &(c, v) in r {
                cols.push(c);
                vals.push(v);
            }
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Lower spectral bound from Gershgorin disks (real parts).
    pub fn gershgorin_min(&self) -> f64 {
        (0..self.n)
            .into_par_iter()
            .map(|r| {
                let mut center = 0.0;
                let mut radius = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    if self.cols[k] as usize == r {
                        center += self.vals[k];
                    } else {
                        radius += self.vals[k].abs();
                    }
                }
                center - radius
            })
            .reduce(|| f64::INFINITY, f64::min)
    }

    /// Y = A · X for a block of vectors.
    pub fn spmm(&self, x: &Block, y: &mut Block) {
        debug_assert_eq!(self.n, x.n);
        let b = x.b;
        y.data
            .par_chunks_mut(b * ROW_CHUNK)
            .enumerate()
            .for_each(|(chunk, out)| {
                let r0 = chunk * ROW_CHUNK;
                for (dr, out_row) in out.chunks_mut(b).enumerate() {
                    let r = r0 + dr;
                    out_row.fill(0.0);
                    for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                        let a = self.vals[k];
                        let src = &x.data[self.cols[k] as usize * b..][..b];
                        for (o, s) in out_row.iter_mut().zip(src) {
                            *o += a * s;
                        }
                    }
                }
            });
    }
}

const ROW_CHUNK: usize = 1024;

/// Dense block of `b` vectors of length `n`, stored row-major `[n][b]` so a
/// sparse row gather touches one contiguous slice per column index.
#[derive(Clone)]
pub(crate) struct Block {
    pub n: usize,
    pub b: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn zeros(n: usize, b: usize) -> Block {
        Block {
            n,
            b,
            data: vec![0.0; n * b],
        }
    }

    pub fn random(n: usize, b: usize, seed: u64) -> Block {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * b).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Block { n, b, data }
    }

    /// G = XᵀX (deterministic chunked reduction).
    pub fn gram(&self) -> DMatrix<f64> {
        self.gram_with(self)
    }

    /// XᵀY.
    pub fn gram_with(&self, y: &Block) -> DMatrix<f64> {
        debug_assert_eq!(self.n, y.n);
        let (bx, by) = (self.b, y.b);
        let partials: Vec<Vec<f64>> = self
            .data
            .par_chunks(bx * ROW_CHUNK)
            .zip(y.data.par_chunks(by * ROW_CHUNK))
            .map(|(xs, ys)| {
                let mut g = vec![0.0; bx * by];
                for (xr, yr) in xs.chunks(bx).zip(ys.chunks(by)) {
                    for (i, &xi) in xr.iter().enumerate() {
                        let row = &mut g[i * by..(i + 1) * by];
                        for (gj, &yj) in row.iter_mut().zip(yr) {
                            *gj += xi * yj;
                        }
                    }
                }
                g
            })
            .collect();
        let mut g = vec![0.0; bx * by];
        for p in partials {
            for (a, v) in g.iter_mut().zip(p) {
                *a += v;
            }
        }
        DMatrix::from_fn(bx, by, |i, j| g[i * by + j])
    }

    /// X · M for a small (b × k) matrix.
    pub fn mul_small(&self, m: &DMatrix<f64>) -> Block {
        debug_assert_eq!(self.b, m.nrows());
        let k = m.ncols();
        // copy into a flat row-major buffer once
        let mm: Vec<f64> = (0..self.b)
            .flat_map(|i| (0..k).map(move |j| m[(i, j)]))
            .collect();
        let mut out = Block::zeros(self.n, k);
        out.data
            .par_chunks_mut(k)
            .zip(self.data.par_chunks(self.b))
            .for_each(|(orow, xrow)| {
                for (i, &xi) in xrow.iter().enumerate() {
                    let mrow = &mm[i * k..(i + 1) * k];
                    for (o, &mv) in orow.iter_mut().zip(mrow) {
                        *o += xi * mv;
                    }
                }
            });
        out
    }

    pub fn column_norms(&self) -> Vec<f64> {
        let b = self.b;
        let partials: Vec<Vec<f64>> = self
            .data
            .par_chunks(b * ROW_CHUNK)
            .map(|xs| {
                let mut s = vec![0.0; b];
                for row in xs.chunks(b) {
                    for (acc, &v) in s.iter_mut().zip(row) {
                        *acc += v * v;
                    }
                }
                s
            })
            .collect();
        let mut s = vec![0.0; b];
        for p in partials {
            for (a, v) in s.iter_mut().zip(p) {
                *a += v;
            }
        }
        s.into_iter().map(f64::sqrt).collect()
    }

    pub fn scale_columns(&mut self, scale: &[f64]) {
        let b = self.b;
        self.data.par_chunks_mut(b).for_each(|row| {
            for (v, &s) in row.iter_mut().zip(scale) {
                *v *= s;
            }
        });
    }
}

/// Orthonormalize the block in place via Gram-matrix whitening; returns the
/// retained rank. Rank-deficient directions are replaced with fresh random
/// vectors (they re-converge in later sweeps).
fn orthonormalize(x: &mut Block, refill_seed: u64) -> usize {
    let norms = x.column_norms();
    let inv: Vec<f64> = norms
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v } else { 0.0 })
        .collect();
    x.scale_columns(&inv);
    for _pass in 0..2 {
        let g = x.gram();
        let eig = nalgebra::SymmetricEigen::new(g);
        let max_ev = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let floor = max_ev * 1e-24;
        let mut w = DMatrix::zeros(x.b, x.b);
        let mut rank = 0;
        for j in 0..x.b {
            let ev = eig.eigenvalues[j];
            if ev > floor {
                let s = 1.0 / ev.sqrt();
                for i in 0..x.b {
                    w[(i, rank)] = eig.eigenvectors[(i, j)] * s;
                }
                rank += 1;
            }
        }
        let mut y = x.mul_small(&w.columns(0, rank).into_owned());
        if rank < x.b {
            // pad with fresh random columns
            let pad = Block::random(x.n, x.b - rank, refill_seed);
            let mut data = vec![0.0; x.n * x.b];
            for i in 0..x.n {
                data[i * x.b..i * x.b + rank].copy_from_slice(&y.data[i * rank..(i + 1) * rank]);
                for (j, v) in pad.data[i * (x.b - rank)..(i + 1) * (x.b - rank)]
                    .iter()
                    .enumerate()
                {
                    data[i * x.b + rank + j] = *v;
                }
            }
            y = Block {
                n: x.n,
                b: x.b,
                data,
            };
            *x = y;
            continue; // run the second pass on the padded block
        }
        *x = y;
        if _pass == 1 {
            return rank;
        }
    }
    x.b
}

/// Apply the Chebyshev filter T_m mapped so that `[lo, hi]` is damped and
/// everything above `hi` is amplified.
fn chebyshev_filter(a: &Csr, x: Block, degree: usize, lo: f64, hi: f64) -> Block {
    let e = (hi - lo) / 2.0;
    let c = (hi + lo) / 2.0;
    let mut t0 = x;
    let mut t1 = Block::zeros(t0.n, t0.b);
    a.spmm(&t0, &mut t1);
    // t1 = (A t0 - c t0)/e
    t1.data
        .par_iter_mut()
        .zip(t0.data.par_iter())
        .for_each(|(y, &x0)| *y = (*y - c * x0) / e);
    let mut scratch = Block::zeros(t0.n, t0.b);
    for _ in 2..=degree {
        a.spmm(&t1, &mut scratch);
        // t2 = 2 (A t1 - c t1)/e - t0, stored into t0 then swapped
        t0.data
            .par_iter_mut()
            .zip(scratch.data.par_iter().zip(t1.data.par_iter()))
            .for_each(|(t0v, (&av, &t1v))| {
                *t0v = 2.0 * (av - c * t1v) / e - *t0v;
            });
        std::mem::swap(&mut t0, &mut t1);
    }
    t1
}

/// Eigenvalues/vectors of a small real matrix, real spectrum only. Vectors via
/// inverse iteration on the shifted LU.
fn small_eig(h: &DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let b = h.nrows();
    let complex = h.clone().complex_eigenvalues();
    let scale = complex.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
    let mut out = Vec::new();
    for ev in complex.iter() {
        if ev.im.abs() > 1e-9 * scale.max(1e-300) {
            continue;
        }
        let lam = ev.re;
        // inverse iteration with a tiny jitter to keep the LU nonsingular
        let jitter = scale * 1e-13 + 1e-300;
        let shifted = h - DMatrix::identity(b, b) * (lam + jitter);
        let lu = shifted.lu();
        let mut v = DMatrix::from_fn(b, 1, |i, _| 1.0 / (1.0 + i as f64));
        for _ in 0..3 {
            if let Some(sol) = lu.solve(&v) {
                let norm = sol.norm();
                if norm > 0.0 && norm.is_finite() {
                    v = sol / norm;
                } else {
                    break;
                }
            } else {
                break;
            }
        }
        out.push((lam, v.column(0).iter().cloned().collect::<Vec<f64>>()));
    }
    // descending by eigenvalue; deduplicate near-identical pairs produced by
    // complex-conjugate artifacts
    out.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
    out.dedup_by(|a, b| {
        (a.0 - b.0).abs() <= 1e-12 * scale
            && a.1
                .iter()
                .zip(&b.1)
                .all(|(x, y)| (x - y).abs() < 1e-8 || (x + y).abs() < 1e-8)
    });
    out
}

pub(crate) struct EigenOptions {
    pub block: usize,
    /// Upper edge of the damped interval; eigenvalues above it are amplified.
    pub damp_hi: f64,
    /// A bound on the largest eigenvalue of interest (sets the filter degree).
    pub lambda_top: f64,
    /// Only Ritz pairs with λ above this are reported.
    pub keep_above: f64,
    /// How many of the top reported pairs must converge.
    pub needed: usize,
    /// Relative residual target, ‖Av − λv‖ ≤ tol·|λ|.
    pub tol_rel: f64,
    pub max_sweeps: usize,
    pub initial: Option<Block>,
}

pub(crate) struct EigenOutcome {
    /// Ritz values above `keep_above`, descending.
    pub values: Vec<f64>,
    /// Matching Ritz vectors (unit norm).
    pub vectors: Vec<Vec<f64>>,
    /// Relative residuals ‖Av − λv‖/|λ|.
    pub residuals: Vec<f64>,
    pub sweeps: usize,
    pub matvecs: usize,
    pub converged: bool,
}

pub(crate) fn filtered_subspace(a: &Csr, opts: &EigenOptions) -> EigenOutcome {
    let n = a.n;
    let b = opts.block.min(n);
    let lambda_min = a.gershgorin_min();
    let damp_hi = opts.damp_hi;
    // Degree: limit the per-sweep amplification contrast so the Gram matrix of
    // the filtered block stays invertible in f64.
    let delta = ((opts.lambda_top - damp_hi) / (damp_hi - lambda_min)).max(1e-12);
    let degree = ((10.0 / (2.0 * delta.sqrt())).ceil() as usize).clamp(40, 700);

    let mut x = match &opts.initial {
        Some(init) => {
            debug_assert_eq!(init.n, n);
            let mut x = Block::random(n, b, 0x5eed_0001);
            let copy = init.b.min(b);
            for i in 0..n {
                for j in 0..copy {
                    x.data[i * b + j] = init.data[i * init.b + j];
                }
            }
            x
        }
        None => Block::random(n, b, 0x5eed_0001),
    };
    orthonormalize(&mut x, 0x5eed_0002);

    let mut matvecs = 0usize;
    let mut prev_values: Vec<f64> = Vec::new();
    let mut best: Option<EigenOutcome> = None;

    for sweep in 1..=opts.max_sweeps {
        x = chebyshev_filter(a, x, degree, lambda_min, damp_hi);
        matvecs += degree * b;
        orthonormalize(&mut x, 0x5eed_0003 + sweep as u64);

        let mut ax = Block::zeros(n, b);
        a.spmm(&x, &mut ax);
        matvecs += b;
        let h = x.gram_with(&ax);
        let pairs = small_eig(&h);

        // Ritz vectors for pairs above the keep threshold
        let kept: Vec<&(f64, Vec<f64>)> =
            pairs.iter().filter(|(lam, _)| *lam > opts.keep_above).collect();
        let k = kept.len();
        let mut w = DMatrix::zeros(b, k.max(1));
        for (j, (_, wv)) in kept.iter().enumerate() {
            for i in 0..b {
                w[(i, j)] = wv[i];
            }
        }
        let (values, vectors, residuals) = if k > 0 {
            let v = x.mul_small(&w.columns(0, k).into_owned());
            let av = ax.mul_small(&w.columns(0, k).into_owned());
            let vals: Vec<f64> = kept.iter().map(|(l, _)| *l).collect();
            // residual and normalization per column
            let vnorm = v.column_norms();
            let mut res = vec![0.0; k];
            for (j, r) in res.iter_mut().enumerate() {
                let mut s = 0.0;
                for i in 0..n {
                    let d = av.data[i * k + j] - vals[j] * v.data[i * k + j];
                    s += d * d;
                }
                *r = s.sqrt() / (vals[j].abs().max(1e-300) * vnorm[j].max(1e-300));
            }
            let mut vecs = Vec::with_capacity(k);
            for j in 0..k {
                let nv = vnorm[j].max(1e-300);
                vecs.push((0..n).map(|i| v.data[i * k + j] / nv).collect());
            }
            (vals, vecs, res)
        } else {
            (Vec::new(), Vec::new(), Vec::new())
        };

        // next sweep starts from the Ritz basis of the whole block
        let mut wfull = DMatrix::zeros(b, pairs.len().max(1));
        for (j, (_, wv)) in pairs.iter().enumerate() {
            for i in 0..b {
                wfull[(i, j)] = wv[i];
            }
        }
        if !pairs.is_empty() {
            let basis = x.mul_small(&wfull.columns(0, pairs.len()).into_owned());
            let mut next = Block::random(n, b, 0x5eed_1000 + sweep as u64);
            let copy = pairs.len().min(b);
            for i in 0..n {
                for j in 0..copy {
                    next.data[i * b + j] = basis.data[i * basis.b + j];
                }
            }
            x = next;
        }

        let check = values.len().min(opts.needed);
        let drift_ok = prev_values.len() >= check
            && values[..check]
                .iter()
                .zip(&prev_values)
                .all(|(a, b)| (a - b).abs() <= 1e-10 * a.abs().max(1e-300));
        let res_ok = check > 0 && residuals[..check].iter().all(|&r| r <= opts.tol_rel);
        prev_values = values.clone();

        let outcome = EigenOutcome {
            values,
            vectors,
            residuals,
            sweeps: sweep,
            matvecs,
            converged: res_ok && (drift_ok || sweep == 1),
        };
        let better = match &best {
            None => true,
            Some(prev) => {
                let pw = prev.residuals.iter().cloned().fold(0.0_f64, f64::max);
                let cw = outcome.residuals.iter().cloned().fold(0.0_f64, f64::max);
                outcome.values.len() > prev.values.len()
                    || (outcome.values.len() == prev.values.len() && cw <= pw)
            }
        };
        if better {
            let done = outcome.converged;
            best = Some(outcome);
            if done {
                break;
            }
        } else if best.as_ref().is_some_and(|o| o.converged) {
            break;
        }
    }
    best.unwrap_or(EigenOutcome {
        values: Vec::new(),
        vectors: Vec::new(),
        residuals: Vec::new(),
        sweeps: 0,
        matvecs,
        converged: false,
    })
}
