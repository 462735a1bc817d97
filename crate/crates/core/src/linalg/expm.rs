//! Dense matrix exponential by scaling and squaring with diagonal Padé
//! approximants (degrees 3 to 13, chosen from the 1-norm).

use nalgebra::DMatrix;

use crate::C64;

const THETA: [(usize, f64); 5] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_230e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
    (13, 5.371_920_351_148_152),
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// Induced 1-norm.
pub fn norm1(a: &DMatrix<C64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
}

fn real_scaled(m: &DMatrix<C64>, s: f64) -> DMatrix<C64> {
    m * C64::new(s, 0.0)
}

fn add_identity(m: &mut DMatrix<C64>, s: f64) {
    for i in 0..m.nrows() {
        m[(i, i)] += C64::new(s, 0.0);
    }
}

/// exp(A) for a square complex matrix.
pub fn expm(a: &DMatrix<C64>) -> DMatrix<C64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let n = a.nrows();
    if n == 0 {
        return a.clone();
    }
    let norm = norm1(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }

    for &(m, theta) in &THETA[..4] {
        if norm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            return pade_low(a, b);
        }
    }

    let s = (norm / THETA[4].1).log2().ceil().max(0.0) as i32;
    let scaled = real_scaled(a, 0.5f64.powi(s));
    let mut r = pade13(&scaled);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn solve_pade(u: DMatrix<C64>, v: DMatrix<C64>) -> DMatrix<C64> {
    let p = &v + &u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is singular")
}

fn pade_low(a: &DMatrix<C64>, b: &[f64]) -> DMatrix<C64> {
    let n = a.nrows();
    let a2 = a * a;
    // Even powers A^0, A^2, A^4, ...
    let mut powers = vec![DMatrix::<C64>::identity(n, n), a2.clone()];
    while 2 * powers.len() < b.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u_inner = DMatrix::<C64>::zeros(n, n);
    let mut v = DMatrix::<C64>::zeros(n, n);
    for (k, p) in powers.iter().enumerate() {
        if 2 * k + 1 < b.len() {
            u_inner += real_scaled(p, b[2 * k + 1]);
        }
        v += real_scaled(p, b[2 * k]);
    }
    let u = a * u_inner;
    solve_pade(u, v)
}

fn pade13(a: &DMatrix<C64>) -> DMatrix<C64> {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;

    let mut inner = real_scaled(&a6, b[13]) + real_scaled(&a4, b[11]) + real_scaled(&a2, b[9]);
    let mut u = &a6 * &inner;
    u += real_scaled(&a6, b[7]) + real_scaled(&a4, b[5]) + real_scaled(&a2, b[3]);
    add_identity(&mut u, b[1]);
    let u = a * u;

    inner = real_scaled(&a6, b[12]) + real_scaled(&a4, b[10]) + real_scaled(&a2, b[8]);
    let mut v = &a6 * &inner;
    v += real_scaled(&a6, b[6]) + real_scaled(&a4, b[4]) + real_scaled(&a2, b[2]);
    add_identity(&mut v, b[0]);
    solve_pade(u, v)
}
