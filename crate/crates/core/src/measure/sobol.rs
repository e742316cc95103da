//! Base-2 Sobol' sequence in Gray-code order, Joe–Kuo direction numbers.

/// Primitive polynomial (leading and trailing bits included) and initial
/// direction numbers `m_1..m_s` for the first dimensions.
const DIRECTIONS: [(u32, &[u32]); 32] = [
    (1, &[1]),
    (3, &[1]),
    (7, &[1, 3]),
    (11, &[1, 3, 1]),
    (13, &[1, 1, 1]),
    (19, &[1, 1, 3, 3]),
    (25, &[1, 3, 5, 13]),
    (37, &[1, 1, 5, 5, 17]),
    (41, &[1, 1, 5, 5, 5]),
    (47, &[1, 1, 7, 11, 19]),
    (55, &[1, 1, 5, 1, 1]),
    (59, &[1, 1, 1, 3, 11]),
    (61, &[1, 3, 5, 5, 31]),
    (67, &[1, 3, 3, 9, 7, 49]),
    (91, &[1, 1, 1, 15, 21, 21]),
    (97, &[1, 3, 1, 13, 27, 49]),
    (103, &[1, 1, 1, 15, 7, 5]),
    (109, &[1, 3, 1, 15, 13, 25]),
    (115, &[1, 1, 5, 5, 19, 61]),
    (131, &[1, 3, 7, 11, 23, 15, 103]),
    (137, &[1, 3, 7, 13, 13, 15, 69]),
    (143, &[1, 1, 3, 13, 7, 35, 63]),
    (145, &[1, 3, 5, 9, 1, 25, 53]),
    (157, &[1, 3, 1, 13, 9, 35, 107]),
    (167, &[1, 3, 1, 5, 27, 61, 31]),
    (171, &[1, 1, 5, 11, 19, 41, 61]),
    (185, &[1, 3, 5, 3, 3, 13, 69]),
    (191, &[1, 1, 7, 13, 1, 19, 1]),
    (193, &[1, 3, 7, 5, 13, 19, 59]),
    (203, &[1, 1, 3, 9, 25, 29, 41]),
    (211, &[1, 3, 5, 13, 23, 1, 55]),
    (213, &[1, 3, 7, 3, 13, 59, 17]),
];

pub const MAX_DIMS: usize = DIRECTIONS.len();
const BITS: usize = 32;

fn direction_vector(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (poly, m) = DIRECTIONS[dim];
    let s = (32 - poly.leading_zeros() - 1) as usize;
    let a = (poly >> 1) & ((1 << (s - 1)) - 1);
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        let mut x = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                x ^= v[k - j];
            }
        }
        v[k] = x;
    }
    v
}

/// First `count` points of the `dims`-dimensional sequence as 32-bit
/// integers (divide by 2³² for the unit cube), row-major.
pub fn points(dims: usize, count: usize) -> Vec<u32> {
    assert!(dims <= MAX_DIMS);
    let v: Vec<[u32; BITS]> = (0..dims).map(direction_vector).collect();
    let mut out = Vec::with_capacity(dims * count);
    let mut x = vec![0u32; dims];
    for i in 0..count {
        if i > 0 {
            let c = (i - 1).trailing_ones() as usize;
            for (xd, vd) in x.iter_mut().zip(&v) {
                *xd ^= vd[c];
            }
        }
        out.extend_from_slice(&x);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(p: u32) -> f64 {
        p as f64 / 4294967296.0
    }

    #[test]
    fn first_points_match_reference() {
        // scipy.stats.qmc.Sobol(6, scramble=False).random(8)
        let expected = [
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375, 0.125],
            [0.875, 0.875, 0.125, 0.375, 0.875, 0.625],
            [0.625, 0.125, 0.875, 0.625, 0.625, 0.875],
            [0.125, 0.625, 0.375, 0.125, 0.125, 0.375],
        ];
        let p = points(6, 8);
        for (i, row) in expected.iter().enumerate() {
            for (d, &e) in row.iter().enumerate() {
                assert_eq!(unit(p[i * 6 + d]), e, "point {i} dim {d}");
            }
        }
    }

    #[test]
    fn deep_points_match_reference() {
        // scipy.stats.qmc.Sobol(32, scramble=False).random(1024)[517], scaled by 1024
        let expected: [u32; 32] = [
            899, 641, 849, 631, 597, 195, 501, 547, 3, 809, 617, 247, 827, 495, 649, 717, 255, 775,
            73, 833, 849, 433, 571, 543, 843, 11, 23, 849, 263, 147, 1021, 47,
        ];
        let p = points(32, 1024);
        for (d, &e) in expected.iter().enumerate() {
            assert_eq!(unit(p[517 * 32 + d]) * 1024.0, e as f64, "dim {d}");
        }
    }

    #[test]
    fn each_dimension_stratifies_dyadic_blocks() {
        let p = points(MAX_DIMS, 256);
        for d in 0..MAX_DIMS {
            let mut seen = [false; 256];
            for i in 0..256 {
                seen[(p[i * MAX_DIMS + d] >> 24) as usize] = true;
            }
            assert!(seen.iter().all(|&s| s), "dim {d}");
        }
    }
}
