//! 2×2 complex polarization matrices acting on (H, V) amplitude pairs.

use num_complex::Complex64;

/// Row-major Jones matrix; column index is the input polarization (H = 0, V = 1).
pub type JonesMatrix = [[Complex64; 2]; 2];

pub const IDENTITY: JonesMatrix = [
    [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)],
    [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
];

pub fn matmul(a: &JonesMatrix, b: &JonesMatrix) -> JonesMatrix {
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn adjoint(a: &JonesMatrix) -> JonesMatrix {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub fn apply(a: &JonesMatrix, v: [Complex64; 2]) -> [Complex64; 2] {
    [
        a[0][0] * v[0] + a[0][1] * v[1],
        a[1][0] * v[0] + a[1][1] * v[1],
    ]
}

pub fn determinant(a: &JonesMatrix) -> Complex64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// Largest entrywise magnitude of `a − b`.
pub fn max_abs_diff(a: &JonesMatrix, b: &JonesMatrix) -> f64 {
    let mut m = 0.0_f64;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// ‖U†U − I‖_max
pub fn unitarity_deviation(u: &JonesMatrix) -> f64 {
    max_abs_diff(&matmul(&adjoint(u), u), &IDENTITY)
}
