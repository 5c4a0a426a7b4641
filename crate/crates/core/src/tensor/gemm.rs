//! Row-major GEMM shim over `matrixmultiply::dgemm`.

/// `c = alpha * a? @ b? + beta * c` where `a?` denotes `a` read transposed
/// when the flag is set. All buffers are dense row-major; `m, k, n` are the
/// dimensions of the *logical* product (after any transposition).
#[allow(clippy::too_many_arguments)]
pub(crate) fn matmul_rm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f64,
    a: &[f64],
    a_trans: bool,
    b: &[f64],
    b_trans: bool,
    beta: f64,
    c: &mut [f64],
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(c.len(), m * n);
    // Stored row-major [r, s] has row stride s, col stride 1; reading it as
    // its own transpose swaps the two.
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
