//! Shared helpers for the integration tests: an independent linear-algebra
//! oracle for strip exit times.

/// Expected exit time E_y[tau] of a simple symmetric walk from y out of the
/// open strip (-q, q), by solving the tridiagonal system
/// E_y = 1 + (E_{y-1} + E_{y+1}) / 2 with E_{-q} = E_q = 0.
pub fn expected_exit_time(q: i64, start: i64) -> f64 {
    assert!(q >= 1 && start.abs() < q);
    let n = (2 * q - 1) as usize; // interior states -q+1 ..= q-1
    // Thomas algorithm for the system E_y - (E_{y-1} + E_{y+1})/2 = 1
    let mut diag = vec![1.0f64; n];
    let off = -0.5f64;
    let mut rhs = vec![1.0f64; n];
    for i in 1..n {
        let w = off / diag[i - 1];
        diag[i] -= w * off;
        rhs[i] -= w * rhs[i - 1];
    }
    let mut sol = vec![0.0f64; n];
    sol[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        sol[i] = (rhs[i] - off * sol[i + 1]) / diag[i];
    }
    sol[(start + q - 1) as usize]
}

#[allow(dead_code)]
pub fn origin_exit_time(q: i64) -> f64 {
    expected_exit_time(q, 0)
}
