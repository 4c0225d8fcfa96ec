//! Dense kernels for the ensemble solver.
//!
//! Ensembles are stored state-major: state j occupies the contiguous slice
//! [j·n .. (j+1)·n] of interleaved Complex64. The big products (Gram matrix,
//! subspace Hamiltonian, ensemble rotation) run as four strided real dgemm
//! calls on the re/im planes of that layout, which measures ~3x faster than a
//! complex gemm here. k×k Hermitian eigenproblems go through the real
//! embedding [[A, -B], [B, A]] so only a real symmetric eigensolver is needed.

use crate::{Error, Result};
use matrixmultiply::dgemm;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

/// S[i,j] = Σ_x conj(a[i·n + x])·b[j·n + x], scaled by `scale`; the discrete
/// ⟨aᵢ|bⱼ⟩ matrix for scale = cell area. Output row-major k×k.
pub fn conjugated_product(a: &[Complex64], b: &[Complex64], n: usize, k: usize, scale: f64, out: &mut [Complex64]) {
    assert_eq!(a.len(), n * k);
    assert_eq!(b.len(), n * k);
    assert_eq!(out.len(), k * k);
    let ap = a.as_ptr() as *const f64;
    let bp = b.as_ptr() as *const f64;
    let op = out.as_mut_ptr() as *mut f64;
    let (rs, cs) = ((2 * n) as isize, 2isize); // complex-plane strides in f64s
    let (ors, ocs) = ((2 * k) as isize, 2isize);
    unsafe {
        // Re(S) = Ar·Brᵀ + Ai·Biᵀ
        dgemm(k, n, k, scale, ap, rs, cs, bp, cs, rs, 0.0, op, ors, ocs);
        dgemm(k, n, k, scale, ap.add(1), rs, cs, bp.add(1), cs, rs, 1.0, op, ors, ocs);
        // Im(S) = Ar·Biᵀ - Ai·Brᵀ
        dgemm(k, n, k, scale, ap, rs, cs, bp.add(1), cs, rs, 0.0, op.add(1), ors, ocs);
        dgemm(k, n, k, -scale, ap.add(1), rs, cs, bp, cs, rs, 1.0, op.add(1), ors, ocs);
    }
}

/// out_state[a] = Σ_j r[j·k + a] · in_state[j]: applies the column map R to
/// the ensemble (states as rows), writing into a separate buffer.
pub fn rotate_ensemble(input: &[Complex64], r: &[Complex64], n: usize, k: usize, out: &mut [Complex64]) {
    assert_eq!(input.len(), n * k);
    assert_eq!(r.len(), k * k);
    assert_eq!(out.len(), n * k);
    let ep = input.as_ptr() as *const f64;
    let rp = r.as_ptr() as *const f64;
    let op = out.as_mut_ptr() as *mut f64;
    let (ers, ecs) = ((2 * n) as isize, 2isize);
    // Rᵀ as the left operand: row stride = column stride of R
    let (rrs, rcs) = (2isize, (2 * k) as isize);
    unsafe {
        // Re(out) = Rrᵀ·Er - Riᵀ·Ei
        dgemm(k, k, n, 1.0, rp, rrs, rcs, ep, ers, ecs, 0.0, op, ers, ecs);
        dgemm(k, k, n, -1.0, rp.add(1), rrs, rcs, ep.add(1), ers, ecs, 1.0, op, ers, ecs);
        // Im(out) = Rrᵀ·Ei + Riᵀ·Er
        dgemm(k, k, n, 1.0, rp, rrs, rcs, ep.add(1), ers, ecs, 0.0, op.add(1), ers, ecs);
        dgemm(k, k, n, 1.0, rp.add(1), rrs, rcs, ep, ers, ecs, 1.0, op.add(1), ers, ecs);
    }
}

/// Ascending eigendecomposition of a Hermitian k×k matrix (row-major).
/// Returns (eigenvalues, eigenvectors row-major with vector j in column j),
/// eigenvector phases fixed so the largest-magnitude component is real
/// positive.
pub fn hermitian_eigen(k: usize, a: &[Complex64]) -> Result<(Vec<f64>, Vec<Complex64>)> {
    assert_eq!(a.len(), k * k);
    // real embedding: [[Re, -Im], [Im, Re]] is symmetric when A is Hermitian
    let mut m = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let v = a[i * k + j];
            m[(i, j)] = v.re;
            m[(k + i, k + j)] = v.re;
            m[(i, k + j)] = -v.im;
            m[(k + i, j)] = v.im;
        }
    }
    let eigen = SymmetricEigen::new(m);

    // Every complex eigenvector z shows up twice in the embedding (as z and
    // iz), possibly inside large degenerate clusters. Pivoted Gram-Schmidt
    // over all 2k candidates keeps exactly one complex representative per
    // pair: candidates at distinct eigenvalues are already orthogonal, so the
    // largest remaining residual is always a genuinely new direction, never
    // amplified roundoff.
    let mut candidates: Vec<(f64, Vec<Complex64>)> = (0..2 * k)
        .map(|idx| {
            let col = eigen.eigenvectors.column(idx);
            let z: Vec<Complex64> = (0..k).map(|i| Complex64::new(col[i], col[k + i])).collect();
            (eigen.eigenvalues[idx], z)
        })
        .collect();
    let mut accepted: Vec<(f64, Vec<Complex64>)> = Vec::with_capacity(k);
    let mut alive: Vec<bool> = vec![true; 2 * k];
    for _ in 0..k {
        let mut best_idx = usize::MAX;
        let mut best_norm = -1.0;
        for (i, (_, z)) in candidates.iter().enumerate() {
            if alive[i] {
                let n: f64 = z.iter().map(|v| v.norm_sqr()).sum();
                if n > best_norm {
                    best_norm = n;
                    best_idx = i;
                }
            }
        }
        if best_norm < 1e-12 {
            return Err(Error::Eigen(format!(
                "real embedding yielded only {} of {k} independent eigenvectors",
                accepted.len()
            )));
        }
        alive[best_idx] = false;
        let (value, mut z) = candidates[best_idx].clone();
        let inv = 1.0 / best_norm.sqrt();
        for v in z.iter_mut() {
            *v *= inv;
        }
        // deflate the accepted direction out of the survivors
        for (i, (_, c)) in candidates.iter_mut().enumerate() {
            if alive[i] {
                let overlap: Complex64 = z.iter().zip(c.iter()).map(|(p, v)| p.conj() * v).sum();
                for (v, p) in c.iter_mut().zip(z.iter()) {
                    *v -= overlap * p;
                }
            }
        }
        canonical_phase(&mut z);
        accepted.push((value, z));
    }
    accepted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite eigenvalues"));

    let values: Vec<f64> = accepted.iter().map(|(v, _)| *v).collect();
    let mut flat = vec![Complex64::default(); k * k];
    for (j, (_, vec)) in accepted.iter().enumerate() {
        for (i, v) in vec.iter().enumerate() {
            flat[i * k + j] = *v;
        }
    }
    Ok((values, flat))
}

fn canonical_phase(z: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_mag = 0.0;
    for (i, v) in z.iter().enumerate() {
        if v.norm_sqr() > best_mag {
            best_mag = v.norm_sqr();
            best = i;
        }
    }
    if best_mag > 0.0 {
        let phase = z[best] / z[best].norm();
        let conj = phase.conj();
        for v in z.iter_mut() {
            *v *= conj;
        }
    }
}

/// S^{-1/2} of a Hermitian positive-definite matrix from its eigensystem;
/// also reports the condition number λ_max/λ_min.
pub fn inverse_sqrt(k: usize, s: &[Complex64]) -> Result<(Vec<Complex64>, f64)> {
    let (values, vectors) = hermitian_eigen(k, s)?;
    let lambda_min = values[0];
    let lambda_max = values[k - 1];
    if !(lambda_min > 0.0) || lambda_max / lambda_min > 1e12 {
        let cond = if lambda_min > 0.0 { lambda_max / lambda_min } else { f64::INFINITY };
        return Err(Error::RankDeficient { cond });
    }
    // S^{-1/2} = U diag(λ^{-1/2}) U^H
    let mut out = vec![Complex64::default(); k * k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = Complex64::default();
            for (l, lam) in values.iter().enumerate() {
                acc += vectors[i * k + l] * vectors[j * k + l].conj() / lam.sqrt();
            }
            out[i * k + j] = acc;
        }
    }
    Ok((out, lambda_max / lambda_min))
}

/// C = A·B for row-major k×k complex matrices (small, used on subspace
/// matrices only).
pub fn matmul_kxk(a: &[Complex64], b: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); k * k];
    for i in 0..k {
        for l in 0..k {
            let av = a[i * k + l];
            if av != Complex64::default() {
                for j in 0..k {
                    out[i * k + j] += av * b[l * k + j];
                }
            }
        }
    }
    out
}
