//! Transfer matrices along dressed edges.

use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use crate::graph::{EdgeDressing, Piece};
use crate::linalg::{sqrt_upper, C64, I, ONE, ZERO};

/// A 2×2 complex matrix acting on `(ψ, Dψ)`.
pub type Transfer = [[C64; 2]; 2];

pub const IDENTITY: Transfer = [[ONE, ZERO], [ZERO, ONE]];

pub fn mul(a: &Transfer, b: &Transfer) -> Transfer {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn det(a: &Transfer) -> C64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

pub fn inverse(a: &Transfer) -> Transfer {
    let d = det(a);
    [[a[1][1] / d, -a[0][1] / d], [-a[1][0] / d, a[0][0] / d]]
}

pub fn apply(a: &Transfer, v: [C64; 2]) -> [C64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

/// `sin(z)/z`, accurate near zero.
pub(crate) fn sinc(z: C64) -> C64 {
    if z.norm() < 1e-3 {
        let z2 = z * z;
        ONE - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// Free propagation over `len` with constant potential `v` and vector
/// potential `a`; `(ψ, Dψ)` picks up the gauge phase `e^{iaℓ}`.
pub fn segment(k: C64, v: f64, a: f64, len: f64) -> Transfer {
    let q = sqrt_upper(k * k - v);
    let ql = q * len;
    let c = ql.cos();
    let s_over_q = sinc(ql) * len;
    let phase = (I * (a * len)).exp();
    [
        [c * phase, s_over_q * phase],
        [-(q * q) * s_over_q * phase, c * phase],
    ]
}

/// The jump of `Dψ` by `c·ψ` at a point interaction.
pub fn delta(c: f64) -> Transfer {
    [[ONE, ZERO], [C64::new(c, 0.0), ONE]]
}

/// Maps `(ψ(0), Dψ(0))` to `(ψ(L), Dψ(L))` through the potential pieces and
/// δ points of `dressing`, where `Dψ = ψ' − iAψ`.
///
/// The determinant equals `e^{2iAL}`; it is 1 without a vector potential.
pub fn edge_transfer(dressing: &EdgeDressing, k: C64, length: f64) -> Transfer {
    let mut t = IDENTITY;
    for p in dressing.pieces(length) {
        let step = match p {
            Piece::Segment { len, potential } => {
                segment(k, potential, dressing.vector_potential, len)
            }
            Piece::Delta(c) => delta(c),
        };
        t = mul(&step, &t);
    }
    t
}

/// Values of the solution with `(ψ, Dψ)(0) = start` at sorted positions
/// `xs` inside `[0, length]`.
pub fn sample(
    dressing: &EdgeDressing,
    k: C64,
    length: f64,
    start: [C64; 2],
    xs: &[f64],
) -> Vec<C64> {
    let a = dressing.vector_potential;
    let mut out = Vec::with_capacity(xs.len());
    let mut state = start;
    let mut pos = 0.0;
    let mut xi = 0;
    for p in dressing.pieces(length) {
        match p {
            Piece::Segment { len, potential } => {
                let end = pos + len;
                while xi < xs.len() && xs[xi] <= end {
                    let t = segment(k, potential, a, xs[xi] - pos);
                    out.push(apply(&t, state)[0]);
                    xi += 1;
                }
                state = apply(&segment(k, potential, a, len), state);
                pos = end;
            }
            Piece::Delta(c) => state = apply(&delta(c), state),
        }
    }
    while xi < xs.len() {
        out.push(state[0]);
        xi += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn free_segment_is_the_textbook_matrix() {
        let (k, l) = (1.7, 0.9);
        let t = edge_transfer(&EdgeDressing::default(), c64(k, 0.0), l);
        let (c, s) = ((k * l).cos(), (k * l).sin());
        assert!(close(t[0][0], c64(c, 0.0), 1e-14));
        assert!(close(t[0][1], c64(s / k, 0.0), 1e-14));
        assert!(close(t[1][0], c64(-k * s, 0.0), 1e-14));
        assert!(close(t[1][1], c64(c, 0.0), 1e-14));
    }

    #[test]
    fn zero_length_delta() {
        let t = delta(2.5);
        assert_eq!(t, [[ONE, ZERO], [c64(2.5, 0.0), ONE]]);
    }

    #[test]
    fn gauge_phase_factors_out() {
        // ψ = e^{iAx}φ turns a magnetic free segment into a phase times the
        // plain one.
        let (k, l, a) = (c64(2.0, 0.0), 1.3, 0.8);
        let d = EdgeDressing {
            vector_potential: a,
            ..Default::default()
        };
        let t = edge_transfer(&d, k, l);
        let t0 = edge_transfer(&EdgeDressing::default(), k, l);
        let ph = (I * (a * l)).exp();
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(t[i][j], ph * t0[i][j], 1e-13));
            }
        }
        assert!(close(det(&t), (I * (2.0 * a * l)).exp(), 1e-13));
    }

    #[test]
    fn zero_momentum_is_regular() {
        let t = segment(ZERO, 0.0, 0.0, 2.0);
        assert!(close(t[0][1], c64(2.0, 0.0), 1e-15));
        assert!(close(t[1][0], ZERO, 1e-15));
    }

    #[test]
    fn sampling_matches_transfer() {
        let d = EdgeDressing {
            vector_potential: 0.3,
            potential: alloc::vec![(0.4, 3.0)],
            delta_points: alloc::vec![(0.7, -2.0)],
        };
        let k = c64(1.1, 0.0);
        let start = [c64(0.2, 0.1), c64(-1.0, 0.5)];
        let vals = sample(&d, k, 1.5, start, &[0.0, 0.4, 1.0, 1.5]);
        let end = apply(&edge_transfer(&d, k, 1.5), start);
        assert!(close(vals[0], start[0], 1e-15));
        assert!(close(vals[3], end[0], 1e-13));
    }
}
