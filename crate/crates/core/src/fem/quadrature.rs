/// Degree-6 rule on the reference triangle: barycentric points and weights
/// summing to one (multiply by the element area).
pub const TRI_QUAD: [([f64; 3], f64); 12] = {
    const A: f64 = 0.063_089_014_491_502_228_340_331_602_870_819;
    const WA: f64 = 0.050_844_906_370_206_816_920_936_809_106_869;
    const B: f64 = 0.249_286_745_170_910_421_291_638_553_107_019;
    const WB: f64 = 0.116_786_275_726_379_366_030_690_538_492_302;
    const C1: f64 = 0.053_145_049_844_816_947_353_249_671_631_398;
    const C2: f64 = 0.310_352_451_033_784_405_416_607_733_956_552;
    const C3: f64 = 0.636_502_499_121_398_647_230_142_594_412_050;
    const WC: f64 = 0.082_851_075_618_373_575_193_553_456_420_442;
    const A2: f64 = 1.0 - 2.0 * A;
    const B2: f64 = 1.0 - 2.0 * B;
    [
        ([A, A, A2], WA),
        ([A, A2, A], WA),
        ([A2, A, A], WA),
        ([B, B, B2], WB),
        ([B, B2, B], WB),
        ([B2, B, B], WB),
        ([C1, C2, C3], WC),
        ([C1, C3, C2], WC),
        ([C2, C1, C3], WC),
        ([C2, C3, C1], WC),
        ([C3, C1, C2], WC),
        ([C3, C2, C1], WC),
    ]
};

/// Three-point Gauss–Legendre rule on `[0, 1]` (exact to degree 5).
pub const EDGE_QUAD: [(f64, f64); 3] = {
    // sqrt(3/5) / 2
    const D: f64 = 0.387_298_334_620_741_688_517_926_539_978_239_9;
    [(0.5 - D, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + D, 5.0 / 18.0)]
};

/// P2 basis on barycentric coordinates: vertices 0..3, then midpoints of
/// edges (0,1), (1,2), (2,0).
#[inline]
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Gradients of the P2 basis given the (constant) barycentric gradients.
#[inline]
pub fn p2_gradients(l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let comb = |a: f64, ga: [f64; 2], b: f64, gb: [f64; 2]| [a * ga[0] + b * gb[0], a * ga[1] + b * gb[1]];
    let vert = |i: usize| {
        let s = 4.0 * l[i] - 1.0;
        [s * gl[i][0], s * gl[i][1]]
    };
    [
        vert(0),
        vert(1),
        vert(2),
        comb(4.0 * l[1], gl[0], 4.0 * l[0], gl[1]),
        comb(4.0 * l[2], gl[1], 4.0 * l[1], gl[2]),
        comb(4.0 * l[0], gl[2], 4.0 * l[2], gl[0]),
    ]
}

/// 1D quadratic Lagrange basis on `[0,1]` with nodes (0, ½, 1).
#[inline]
pub fn p2_edge_values(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t), t * (2.0 * t - 1.0)]
}
